"""Concrete SPDE problem definitions.

A model is a linear symbol for the unshifted operator plus a pointwise
polynomial drift and a multiplicative noise amplitude:

    dX = [ -A X + F(X) ] dt + sigma * X dW.

Exponential integrators need a strictly positive operator spectrum, so a
constant c0 is moved from the drift into the operator ("shifted" form):
the operator becomes A + c0 and the drift F(u) + c0*u.  The explicit
Euler-type scheme runs on the unshifted operator, where the combined
response -A*u + F(u) is unchanged by the shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .spectral import (
    BlowUpError,
    OperatorSpectrum,
    SpectralField,
    integer_wavenumbers,
    l2_norm,
    to_physical,
    to_spectral,
)

DEFAULT_DOMAIN_LENGTH = 32.0 * math.pi


@dataclass(frozen=True)
class ModelSpec:
    """One SPDE problem.

    ``linear_symbol`` maps physical wavenumbers kappa to the eigenvalue
    of the unshifted operator -A on that mode.  ``drift_coeffs`` are the
    polynomial coefficients of F for powers u^1, u^2, ... (no constant
    term, so F(0) = 0).  ``shift_into_F`` marks whether exponential
    schemes should apply the stabilising c0 shift for this model.
    """

    name: str
    linear_symbol: Callable[[np.ndarray], np.ndarray]
    drift_coeffs: tuple[float, ...]
    sigma: float
    domain_length: float = DEFAULT_DOMAIN_LENGTH
    shift_into_F: bool = True
    dealias: bool = False

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")
        coeffs = self.drift_coeffs
        if any(c != 0.0 for c in coeffs):
            # dissipativity guard: odd leading degree, negative leading coefficient
            degree = max(i + 1 for i, c in enumerate(coeffs) if c != 0.0)
            if degree % 2 == 0 or coeffs[degree - 1] >= 0.0:
                raise ValueError(
                    "drift polynomial must have odd leading degree with a "
                    "negative leading coefficient"
                )


def _laplacian_symbol(kappa: np.ndarray) -> np.ndarray:
    return -(kappa**2)


def _swift_hohenberg_symbol(kappa: np.ndarray, eta: float) -> np.ndarray:
    return eta - (1.0 - kappa**2) ** 2


def allen_cahn(sigma: float = 1.0, domain_length: float = DEFAULT_DOMAIN_LENGTH) -> ModelSpec:
    """Cubic bistable reaction-diffusion problem: dX = [Lap(X) + X - X^3] dt + sigma*X dW."""
    return ModelSpec(
        name="allen_cahn",
        linear_symbol=_laplacian_symbol,
        drift_coeffs=(1.0, 0.0, -1.0),
        sigma=sigma,
        domain_length=domain_length,
    )


def swift_hohenberg(
    eta: float = -0.7,
    c: float = 1.8,
    sigma: float = 1.0,
    domain_length: float = DEFAULT_DOMAIN_LENGTH,
) -> ModelSpec:
    """Fourth-order pattern formation problem:
    dX = [eta*X - (1+Lap)^2 X + c*X^2 - X^3] dt + sigma*X dW."""
    return ModelSpec(
        name="swift_hohenberg",
        linear_symbol=partial(_swift_hohenberg_symbol, eta=eta),
        drift_coeffs=(0.0, c, -1.0),
        sigma=sigma,
        domain_length=domain_length,
    )


def physical_wavenumbers(model: ModelSpec, n_modes: int) -> np.ndarray:
    return integer_wavenumbers(n_modes) * (2.0 * math.pi / model.domain_length)


def compute_shift(model: ModelSpec, n_modes: int) -> float:
    """Stabilising shift c0 = max(0, -min_k lambda_k) + 1 over the retained modes,
    where lambda_k are the eigenvalues of the unshifted operator A."""
    lam_unshifted = -model.linear_symbol(physical_wavenumbers(model, n_modes))
    if not np.all(np.isfinite(lam_unshifted)):
        raise ValueError("linear symbol must be finite on all retained modes")
    return max(0.0, -float(np.min(lam_unshifted))) + 1.0


def build_spectrum(model: ModelSpec, n_modes: int, shifted: bool) -> OperatorSpectrum:
    """Diagonalise the model operator on n_modes Fourier modes.

    With ``shifted`` the spectrum is lambda_k + c0 (all > 0, as required
    by the exponential schemes); otherwise the raw eigenvalues with c0=0.
    """
    kappa = physical_wavenumbers(model, n_modes)
    lam = -model.linear_symbol(kappa)
    if shifted:
        c0 = compute_shift(model, n_modes)
        lam = lam + c0
        if not np.all(lam > 0):
            raise ValueError("shifted spectrum must be strictly positive")
    else:
        c0 = 0.0
    return OperatorSpectrum(lam, c0, kappa, model.domain_length)


def _dealias_mask(n_modes: int) -> np.ndarray:
    # 2/3-rule: zero the top third of the spectrum after nonlinear products
    k = np.abs(integer_wavenumbers(n_modes))
    return k <= n_modes // 3


def _drift_on_grid(model: ModelSpec, u: np.ndarray, c0: float) -> np.ndarray:
    # Horner evaluation of F(u) + c0*u; coefficients start at power u^1
    acc = np.zeros_like(u)
    for coeff in reversed(model.drift_coeffs):
        acc = u * acc + coeff
    return u * (acc + c0)


def _grid_to_field(model: ModelSpec, values: np.ndarray, n_modes: int) -> SpectralField:
    if not np.all(np.isfinite(values)):
        raise BlowUpError("blow-up detected: non-finite nonlinear evaluation")
    field = to_spectral(values, model.domain_length)
    if model.dealias:
        field = field.with_coeffs(np.where(_dealias_mask(n_modes), field.coeffs, 0.0))
    return field


def drift_with_grid(
    model: ModelSpec, field: SpectralField, c0: float = 0.0
) -> tuple[SpectralField, np.ndarray]:
    """Pseudo-spectral drift evaluation, also returning the state's grid
    samples so callers can reuse them for the diffusion product."""
    u = to_physical(field)
    return _grid_to_field(model, _drift_on_grid(model, u, c0), field.n_modes), u


def eval_drift(model: ModelSpec, field: SpectralField, c0: float = 0.0) -> SpectralField:
    """Drift F(X) (plus c0*X when a shift is routed into the drift),
    evaluated pointwise on the grid and transformed back."""
    return drift_with_grid(model, field, c0)[0]


def diffusion_from_grid(
    model: ModelSpec, x_grid: np.ndarray, dw_field: SpectralField
) -> SpectralField:
    """Multiplicative diffusion increment sigma * X * dW from precomputed
    grid samples of X."""
    if model.sigma == 0.0:
        return SpectralField.zeros(dw_field.n_modes, dw_field.domain_length)
    dw = to_physical(dw_field)
    return _grid_to_field(model, model.sigma * x_grid * dw, dw_field.n_modes)


def eval_diffusion_increment(
    model: ModelSpec, field: SpectralField, dw_field: SpectralField
) -> SpectralField:
    """Pointwise product sigma * X(x) * dW(x), transformed back."""
    if (field.n_modes, field.domain_length) != (dw_field.n_modes, dw_field.domain_length):
        raise ValueError("state and noise increment must share the same grid")
    return diffusion_from_grid(model, to_physical(field), dw_field)


def drift_norm(model: ModelSpec, field: SpectralField, c0: float = 0.0) -> float:
    """L2 norm of the drift response, the quantity watched by the
    time-step selection rules."""
    return l2_norm(eval_drift(model, field, c0))


def growth_constants(model: ModelSpec, c0: float = 0.0) -> tuple[float, float]:
    """(c2, c3) such that ||F(u)|| <= c3 * (1 + ||u||^(c2+1)) for the
    model drift (shifted by c0): c2 from the polynomial degree, c3 from
    the largest coefficient magnitude."""
    coeffs = list(model.drift_coeffs)
    coeffs[0] += c0
    degree = max((i + 1 for i, c in enumerate(coeffs) if c != 0.0), default=1)
    c1 = max((abs(c) for c in coeffs), default=0.0)
    return float(degree - 1), 2.0 * c1
