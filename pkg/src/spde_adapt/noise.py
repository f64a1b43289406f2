"""Truncated Q-Wiener process on a fixed fine time grid.

The noise expansion uses the orthonormal real trigonometric eigenbasis
of the operator (1/sqrt(a), sqrt(2/a)*cos, sqrt(2/a)*sin, and the
Nyquist alternation), ordered by operator eigenvalue, with per-mode
variances

    q_j = j^-(2r + 1 + eps_q),   q_1 = 1,

where r in [0, 1] controls the spatial regularity.  Orthonormality
gives E||dW||^2 = dt * sum_j q_j.

Every mode owns an independent Gaussian stream, seeded by a counter
mixing of (master_seed, trial_index, mode rank, block); increments over
any interval are exact sums of fine-grid increments, which keeps the
reference and all test schemes on literally the same path.
"""

from __future__ import annotations

import hashlib
import struct
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .spectral import OperatorSpectrum, SpectralField

# domain-separation tag for the stream seeding (arbitrary fixed constant)
_STREAM_TAG = 0x51DE_AD47

_COS = 0
_SIN = 1

# fine increments are snapped to this power-of-two lattice; partial sums
# of lattice multiples (far) below 2^53 * _LATTICE are exactly
# representable, so prefix-sum aggregation is exact across any split
_LATTICE = 2.0**-48


@dataclass(frozen=True)
class NoiseModel:
    """Covariance spectrum and mode layout of the truncated noise."""

    r: float
    j_modes: int
    q: np.ndarray
    eps_q: float
    n_modes: int
    domain_length: float
    mode_k: np.ndarray  # |k| of rank j (1-based ranks at index j-1)
    mode_kind: np.ndarray  # _COS or _SIN

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "mode_k", np.asarray(self.mode_k, dtype=np.intp))
        object.__setattr__(self, "mode_kind", np.asarray(self.mode_kind, dtype=np.int8))
        if q.shape != (self.j_modes,) or self.mode_k.shape != (self.j_modes,):
            raise ValueError("mode arrays must have length j_modes")
        if np.any(q < 0) or np.any(np.diff(q) > 0):
            raise ValueError("q must be nonnegative and non-increasing")
        # index arrays used by wiener_field, derived once
        k, kind = self.mode_k, self.mode_kind
        half = self.n_modes // 2
        pair = (k > 0) & (k < half)
        object.__setattr__(self, "_cos_ranks", np.nonzero(pair & (kind == _COS))[0])
        object.__setattr__(self, "_sin_ranks", np.nonzero(pair & (kind == _SIN))[0])
        zero = np.nonzero(k == 0)[0]
        nyq = np.nonzero(k == half)[0]
        object.__setattr__(self, "_rank0", int(zero[0]) if zero.size else -1)
        object.__setattr__(self, "_rank_nyq", int(nyq[0]) if nyq.size else -1)


def build_q(
    r: float, j_modes: int, spec: OperatorSpectrum, eps_q: float = 0.1
) -> NoiseModel:
    """Rank the real Fourier modes by operator eigenvalue and assign the
    power-law variances q_j = rank^-(2r+1+eps_q)."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"noise regularity r must be in [0, 1], got {r}")
    if eps_q <= 0:
        raise ValueError("decay margin eps_q must be positive")
    n = spec.n_modes
    if not 1 <= j_modes <= n:
        raise ValueError(f"j_modes must be in [1, {n}], got {j_modes}")
    lam = spec.lambdas
    entries = [(float(lam[0]), 0, _COS)]
    for k in range(1, n // 2):
        entries.append((float(lam[k]), k, _COS))
        entries.append((float(lam[k]), k, _SIN))
    entries.append((float(lam[n // 2]), n // 2, _COS))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    kept = entries[:j_modes]
    ranks = np.arange(1, j_modes + 1, dtype=np.float64)
    return NoiseModel(
        r=r,
        j_modes=j_modes,
        q=ranks ** -(2.0 * r + 1.0 + eps_q),
        eps_q=eps_q,
        n_modes=n,
        domain_length=spec.domain_length,
        mode_k=np.array([e[1] for e in kept]),
        mode_kind=np.array([e[2] for e in kept]),
    )


def wiener_field(increments: np.ndarray, model: NoiseModel) -> SpectralField:
    """Map per-mode increments to the conjugate-symmetric coefficient
    representation of sum_j sqrt(q_j) * chi_j * dbeta_j."""
    increments = np.asarray(increments, dtype=np.float64)
    if increments.shape != (model.j_modes,):
        raise ValueError(
            f"expected {model.j_modes} per-mode increments, got shape {increments.shape}"
        )
    s = np.sqrt(model.q) * increments
    n = model.n_modes
    half = n // 2
    a = model.domain_length
    c = np.zeros(n, dtype=np.complex128)
    # sqrt(2/a)cos -> (1/sqrt(2a))(delta_k + delta_-k);
    # sqrt(2/a)sin -> (-i/sqrt(2a))(delta_k - delta_-k)
    pair_scale = 1.0 / np.sqrt(2.0 * a)
    c[model.mode_k[model._cos_ranks]] = pair_scale * s[model._cos_ranks]
    c[model.mode_k[model._sin_ranks]] += -1j * pair_scale * s[model._sin_ranks]
    c[half + 1 :] = np.conj(c[1:half][::-1])
    lone_scale = 1.0 / np.sqrt(a)
    if model._rank0 >= 0:
        c[0] = lone_scale * s[model._rank0]
    if model._rank_nyq >= 0:
        c[half] = lone_scale * s[model._rank_nyq]
    return SpectralField(c, model.domain_length, n)


def _exact_ratio(value: float, unit: float, what: str) -> int:
    ratio = value / unit
    n = round(ratio)
    if abs(ratio - n) > 1e-9 * max(1.0, abs(ratio)):
        raise ValueError(f"{what} ({value}) must be an integer multiple of {unit}")
    return int(n)


class WienerPath:
    """Seeded fine-grid increments of the truncated Q-Wiener process.

    Increment blocks are generated lazily and cached as prefix sums, so
    aggregation over any on-grid interval is exact and regenerating a
    path from its seeds is bit-identical.
    """

    def __init__(
        self,
        noise: NoiseModel,
        t_final: float,
        dt_ref: float,
        master_seed: int,
        trial_index: int,
        block_size: int = 4096,
        max_cached_blocks: int = 16,
    ):
        if dt_ref <= 0:
            raise ValueError("dt_ref must be positive")
        if block_size < 1:
            raise ValueError("block_size must be >= 1")
        self.noise = noise
        self.dt_ref = float(dt_ref)
        self.n_fine = _exact_ratio(t_final, dt_ref, "t_final")
        self.t_final = float(t_final)
        self.master_seed = int(master_seed) & 0xFFFF_FFFF_FFFF_FFFF
        self.trial_index = int(trial_index)
        self.block_size = int(block_size)
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._max_cached = max(1, int(max_cached_blocks))

    def fine_index(self, t: float) -> int:
        i = _exact_ratio(t, self.dt_ref, "time")
        if not 0 <= i <= self.n_fine:
            raise ValueError(f"time {t} outside [0, {self.t_final}]")
        return i

    def _raw_block(self, b: int) -> np.ndarray:
        lo = b * self.block_size
        m = min(self.block_size, self.n_fine - lo)
        out = np.empty((self.noise.j_modes, m))
        for j in range(self.noise.j_modes):
            ss = SeedSequence(
                [_STREAM_TAG, self.master_seed, self.trial_index, j + 1, b]
            )
            out[j] = Generator(Philox(ss)).standard_normal(m)
        out *= np.sqrt(self.dt_ref) / _LATTICE
        np.rint(out, out=out)
        out *= _LATTICE
        return out

    def _cumsum_block(self, b: int) -> np.ndarray:
        cached = self._cache.get(b)
        if cached is not None:
            self._cache.move_to_end(b)
            return cached
        raw = self._raw_block(b)
        cum = np.zeros((raw.shape[0], raw.shape[1] + 1))
        np.cumsum(raw, axis=1, out=cum[:, 1:])
        self._cache[b] = cum
        while len(self._cache) > self._max_cached:
            self._cache.popitem(last=False)
        return cum

    def increments_between_indices(self, i0: int, i1: int) -> np.ndarray:
        """Sum of fine increments over fine-grid steps (i0, i1], per mode."""
        if not 0 <= i0 <= i1 <= self.n_fine:
            raise ValueError(f"fine indices [{i0}, {i1}] out of range")
        out = np.zeros(self.noise.j_modes)
        if i0 == i1:
            return out
        first = i0 // self.block_size
        last = (i1 - 1) // self.block_size
        for b in range(first, last + 1):
            lo = b * self.block_size
            cum = self._cumsum_block(b)
            s = max(i0 - lo, 0)
            e = min(i1 - lo, cum.shape[1] - 1)
            out += cum[:, e] - cum[:, s]
        return out

    def fingerprint(self) -> str:
        """Content hash of the stream identity and the first block."""
        h = hashlib.sha256()
        h.update(
            struct.pack(
                "<QqqqQ",
                self.master_seed,
                self.trial_index,
                self.noise.j_modes,
                self.n_fine,
                np.float64(self.dt_ref).view(np.uint64),
            )
        )
        if self.n_fine > 0:
            h.update(np.ascontiguousarray(self._raw_block(0)).tobytes())
        return h.hexdigest()


def sample_path(
    model: NoiseModel,
    t_final: float,
    dt_ref: float,
    master_seed: int,
    trial_index: int,
    block_size: int = 4096,
    max_cached_blocks: int = 16,
) -> WienerPath:
    """Deterministic path for (master_seed, trial_index): the same seeds
    always regenerate bit-identical increments."""
    return WienerPath(
        model,
        t_final,
        dt_ref,
        master_seed,
        trial_index,
        block_size=block_size,
        max_cached_blocks=max_cached_blocks,
    )


def aggregate_increment(path: WienerPath, t_a: float, t_b: float) -> np.ndarray:
    """Per-mode increment over (t_a, t_b]; both endpoints must lie on the
    fine grid.  Additivity across adjacent intervals is exact."""
    i0 = path.fine_index(t_a)
    i1 = path.fine_index(t_b)
    if i0 > i1:
        raise ValueError("t_a must not exceed t_b")
    return path.increments_between_indices(i0, i1)
