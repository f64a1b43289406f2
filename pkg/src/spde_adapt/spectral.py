"""Periodic 1D Fourier discretisation.

Fields are real-valued functions on [0, a) stored as complex Fourier
coefficients in FFT order, using the averaging convention

    u(x_m) = sum_k c_k exp(i * kappa_k * x_m),   kappa_k = 2*pi*k / a,

so that the L2 norm satisfies the Parseval identity
``||u||^2 = a * sum_k |c_k|^2``.  All linear operators handled here
(truncation projection, semigroup, phi-function weights) act diagonally
per mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BlowUpError(RuntimeError):
    """Blow-up detected: a field or grid developed non-finite values."""


def integer_wavenumbers(n_modes: int) -> np.ndarray:
    """Signed integer mode indices k in FFT storage order.

    For even ``n_modes`` this is ``[0, 1, ..., n/2-1, -n/2, ..., -1]``;
    the single Nyquist slot at index n/2 represents the |k| = n/2 mode.
    """
    return np.rint(np.fft.fftfreq(n_modes) * n_modes).astype(int)


def grid_points(n_modes: int, domain_length: float) -> np.ndarray:
    """Uniform collocation nodes x_m = m * a / n on [0, a)."""
    return np.arange(n_modes) * (domain_length / n_modes)


@dataclass(frozen=True)
class SpectralField:
    """Real periodic field as complex Fourier coefficients (FFT order).

    Conjugate symmetry ``c[-k] == conj(c[k])`` is the representation
    invariant for real fields; constructors that start from real grid
    data satisfy it automatically.
    """

    coeffs: np.ndarray
    domain_length: float
    n_modes: int

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        object.__setattr__(self, "coeffs", coeffs)
        if self.n_modes < 2 or self.n_modes % 2 != 0:
            raise ValueError(f"n_modes must be even and >= 2, got {self.n_modes}")
        if coeffs.shape != (self.n_modes,):
            raise ValueError(
                f"coeffs must have shape ({self.n_modes},), got {coeffs.shape}"
            )
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")

    @classmethod
    def zeros(cls, n_modes: int, domain_length: float) -> "SpectralField":
        return cls(np.zeros(n_modes, dtype=np.complex128), domain_length, n_modes)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        """Same grid, new coefficient array."""
        return SpectralField(coeffs, self.domain_length, self.n_modes)


@dataclass(frozen=True)
class OperatorSpectrum:
    """Diagonal representation of the (possibly shifted) linear operator.

    ``lambdas[k]`` is the eigenvalue of the operator on Fourier mode k
    (FFT order); ``c0`` records the stabilising shift that was moved out
    of the drift, 0.0 for an unshifted operator.
    """

    lambdas: np.ndarray
    c0: float
    wavenumbers: np.ndarray
    domain_length: float

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        kap = np.asarray(self.wavenumbers, dtype=np.float64)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "wavenumbers", kap)
        if lam.ndim != 1 or lam.shape != kap.shape:
            raise ValueError("lambdas and wavenumbers must be 1D with equal shape")
        if not np.all(np.isfinite(lam)):
            raise ValueError("operator eigenvalues must be finite")
        # real symmetric operator: the eigenvalue can depend on |k| only
        n = lam.size
        mirror = lam[(n - np.arange(n)) % n]
        if not np.allclose(lam, mirror, rtol=1e-12, atol=0.0):
            raise ValueError("eigenvalues must be symmetric in +/-k")

    @property
    def n_modes(self) -> int:
        return self.lambdas.size


def to_physical(field: SpectralField) -> np.ndarray:
    """Evaluate the field on the collocation grid.

    Raises BlowUpError if any coefficient is non-finite.
    """
    if not np.all(np.isfinite(field.coeffs)):
        raise BlowUpError("blow-up detected: non-finite spectral coefficient")
    return np.fft.ifft(field.coeffs).real * field.n_modes


def to_spectral(grid: np.ndarray, domain_length: float) -> SpectralField:
    """Transform real grid samples to a SpectralField (exact inverse of
    ``to_physical``); conjugate symmetry holds by construction."""
    grid = np.asarray(grid, dtype=np.float64)
    n = grid.size
    if n % 2 != 0:
        raise ValueError("grid length must be even")
    if not np.all(np.isfinite(grid)):
        raise BlowUpError("blow-up detected: non-finite grid value")
    return SpectralField(np.fft.fft(grid) / n, domain_length, n)


def l2_norm(field: SpectralField) -> float:
    """L2([0, a]) norm via Parseval."""
    coeffs = field.coeffs
    nrm2 = field.domain_length * np.vdot(coeffs, coeffs).real
    if not np.isfinite(nrm2):
        raise BlowUpError("blow-up detected: non-finite norm")
    return float(np.sqrt(nrm2))


def retained_mode_mask(n_modes: int, j: int) -> np.ndarray:
    """Boolean mask of the first ``j`` real degrees of freedom.

    Modes are counted outward in |k|: k=0 is one degree of freedom, each
    pair +/-k contributes two, the Nyquist slot one.  A +/-k pair is kept
    or dropped together, so the retained count is the largest attainable
    value <= j.
    """
    if j < 1 or j > n_modes:
        raise ValueError(f"mode count must be in [1, {n_modes}], got {j}")
    k = np.abs(integer_wavenumbers(n_modes))
    # degrees of freedom with |k| <= K: 1 + 2K, plus the Nyquist singleton
    mask = np.zeros(n_modes, dtype=bool)
    mask[0] = True
    used = 1
    for kk in range(1, n_modes // 2):
        if used + 2 > j:
            return mask
        mask[k == kk] = True
        used += 2
    if used + 1 <= j:
        mask[n_modes // 2] = True
    return mask


def project_modes(field: SpectralField, j: int) -> SpectralField:
    """Orthogonal projection onto the ``j`` lowest-|kappa| real modes.

    Idempotent and non-expansive in the L2 norm.
    """
    mask = retained_mode_mask(field.n_modes, j)
    return field.with_coeffs(np.where(mask, field.coeffs, 0.0))


def apply_semigroup(spec: OperatorSpectrum, t: float, field: SpectralField) -> SpectralField:
    """Apply exp(-t*A) per mode; contraction for lambda >= 0, identity at t=0."""
    if t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    return field.with_coeffs(field.coeffs * np.exp(-t * spec.lambdas))


def phi1_weights(z: np.ndarray) -> np.ndarray:
    """Stable evaluation of (1 - exp(-z)) / z for z >= 0, with value 1 at 0.

    Uses expm1 so the small-argument regime keeps full relative accuracy.
    """
    z = np.asarray(z, dtype=np.float64)
    out = np.ones_like(z)
    nz = z != 0.0
    out[nz] = -np.expm1(-z[nz]) / z[nz]
    return out


def apply_phi1(spec: OperatorSpectrum, dt: float, field: SpectralField) -> SpectralField:
    """Apply the first exponential-integrator weight per mode.

    Multiplies mode k by (1 - exp(-dt*lambda_k)) / (dt*lambda_k), the
    exact averaging weight of the linear flow over a step of length dt.
    """
    if dt <= 0:
        raise ValueError(f"step size must be positive, got {dt}")
    return field.with_coeffs(field.coeffs * phi1_weights(dt * spec.lambdas))


def conjugate_symmetry_defect(field: SpectralField) -> float:
    """Max deviation from the real-field representation invariant."""
    c = field.coeffs
    n = field.n_modes
    mirror = np.conj(c[(n - np.arange(n)) % n])
    return float(np.max(np.abs(c - mirror)))
