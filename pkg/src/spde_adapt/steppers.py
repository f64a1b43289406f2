"""One-step maps for the five time-stepping schemes.

All maps are pure functions of (state, operator spectrum, model, step
size, noise increment).  Step-size selection lives in ``adapt``; here a
step of size dt is taken exactly as given.

Schemes (E = exp(-dt*A) applied per mode, W = diffusion increment
sigma*X*dW, F = drift response, both projected onto the retained modes):

    asetd1:  X' = E(X + W) + dt * phi1(-dt*A) F(X)
    asetd0:  X' = E(X + dt*F(X) + W)
    nsee:    X' = E X + E(dt*F(X) + W) * [||F(X)|| <= (1/dt)^theta]
    tem:     X' = X + dt * tame(-A X + F(X), dt) + W
    tsetd0:  X' = E(X + dt * tame(F(X), dt) + W)

with ``tame(v, dt) = v / (1 + sqrt(dt) * ||v||)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, diffusion_from_grid, drift_with_grid
from .spectral import OperatorSpectrum, SpectralField, l2_norm, phi1_weights

ALL_SCHEMES = ("asetd1", "asetd0", "nsee", "tem", "tsetd0")
EXPONENTIAL_SCHEMES = frozenset({"asetd1", "asetd0", "nsee", "tsetd0"})
ADAPTIVE_SCHEMES = frozenset({"asetd1", "asetd0"})
FIXED_STEP_SCHEMES = frozenset({"nsee", "tem", "tsetd0"})


@dataclass(frozen=True)
class StepperConfig:
    """Scheme identity plus the knobs that alter its one-step map."""

    scheme: str
    theta: float = 0.25  # nonlinearity-stopping exponent (nsee only)
    dt: float | None = None  # fixed-step override; None -> controller's dt_max
    asetd1_single_exp: bool = False

    def __post_init__(self):
        if self.scheme not in ALL_SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {ALL_SCHEMES}")
        if self.scheme == "nsee" and not 0.0 < self.theta <= 0.25:
            raise ValueError("nsee exponent theta must lie in (0, 1/4]")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("fixed step dt must be positive")


@dataclass(frozen=True)
class StepOutcome:
    next_state: SpectralField
    drift_included: bool
    f_norm: float


def tame(vector_field: SpectralField, dt: float) -> SpectralField:
    """Scale a field by 1/(1 + sqrt(dt)*||field||); the result's norm is
    capped at min(||field||, 1/sqrt(dt))."""
    if dt <= 0:
        raise ValueError(f"step size must be positive, got {dt}")
    nrm = l2_norm(vector_field)
    return vector_field.with_coeffs(vector_field.coeffs / (1.0 + np.sqrt(dt) * nrm))


def _prepare(model, state, spec, dw_field, f_field, x_grid):
    if f_field is None or x_grid is None:
        f_field, x_grid = drift_with_grid(model, state, spec.c0)
    bdw = diffusion_from_grid(model, x_grid, dw_field)
    return f_field, bdw


def step_asetd1(
    state: SpectralField,
    spec: OperatorSpectrum,
    model: ModelSpec,
    dt: float,
    dw_field: SpectralField,
    f_field: SpectralField | None = None,
    x_grid: np.ndarray | None = None,
    single_exp: bool = False,
) -> StepOutcome:
    """Adaptive exponential step with the phi1 drift weight.

    ``single_exp`` selects the algebraically equivalent rearrangement
    that needs only the phi1 weight (no separate semigroup factor); both
    forms agree to rounding.
    """
    if dt <= 0:
        raise ValueError(f"step size must be positive, got {dt}")
    f_field, bdw = _prepare(model, state, spec, dw_field, f_field, x_grid)
    y = state.coeffs + bdw.coeffs
    z = dt * spec.lambdas
    if single_exp:
        w = phi1_weights(z)
        nxt = y + dt * w * (f_field.coeffs - spec.lambdas * y)
    else:
        nxt = np.exp(-z) * y + dt * phi1_weights(z) * f_field.coeffs
    return StepOutcome(state.with_coeffs(nxt), True, l2_norm(f_field))


def step_asetd0(
    state: SpectralField,
    spec: OperatorSpectrum,
    model: ModelSpec,
    dt: float,
    dw_field: SpectralField,
    f_field: SpectralField | None = None,
    x_grid: np.ndarray | None = None,
) -> StepOutcome:
    """Adaptive exponential step with the zeroth-order drift weight."""
    if dt <= 0:
        raise ValueError(f"step size must be positive, got {dt}")
    f_field, bdw = _prepare(model, state, spec, dw_field, f_field, x_grid)
    decay = np.exp(-dt * spec.lambdas)
    nxt = decay * (state.coeffs + dt * f_field.coeffs + bdw.coeffs)
    return StepOutcome(state.with_coeffs(nxt), True, l2_norm(f_field))


def step_nsee(
    state: SpectralField,
    spec: OperatorSpectrum,
    model: ModelSpec,
    dt: float,
    dw_field: SpectralField,
    theta: float = 0.25,
    f_field: SpectralField | None = None,
    x_grid: np.ndarray | None = None,
) -> StepOutcome:
    """Nonlinearities-stopped exponential Euler step.

    The drift and diffusion contributions are dropped whenever
    ``||F(X)|| > (1/dt)^theta``, leaving pure semigroup decay.
    """
    if dt <= 0:
        raise ValueError(f"step size must be positive, got {dt}")
    if not 0.0 < theta <= 0.25:
        raise ValueError("nsee exponent theta must lie in (0, 1/4]")
    if f_field is None or x_grid is None:
        f_field, x_grid = drift_with_grid(model, state, spec.c0)
    f_norm = l2_norm(f_field)
    decay = np.exp(-dt * spec.lambdas)
    if f_norm <= (1.0 / dt) ** theta:
        bdw = diffusion_from_grid(model, x_grid, dw_field)
        nxt = decay * (state.coeffs + dt * f_field.coeffs + bdw.coeffs)
        return StepOutcome(state.with_coeffs(nxt), True, f_norm)
    return StepOutcome(state.with_coeffs(decay * state.coeffs), False, f_norm)


def step_tem(
    state: SpectralField,
    spec: OperatorSpectrum,
    model: ModelSpec,
    dt: float,
    dw_field: SpectralField,
    f_field: SpectralField | None = None,
    x_grid: np.ndarray | None = None,
) -> StepOutcome:
    """Tamed explicit Euler step on the combined response -A*X + F(X).

    The combined response is invariant under the c0 shift, so either the
    shifted or the raw spectrum yields the same step.
    """
    if dt <= 0:
        raise ValueError(f"step size must be positive, got {dt}")
    f_field, bdw = _prepare(model, state, spec, dw_field, f_field, x_grid)
    combined = state.with_coeffs(f_field.coeffs - spec.lambdas * state.coeffs)
    tamed = tame(combined, dt)
    nxt = state.coeffs + dt * tamed.coeffs + bdw.coeffs
    return StepOutcome(state.with_coeffs(nxt), True, l2_norm(f_field))


def step_tsetd0(
    state: SpectralField,
    spec: OperatorSpectrum,
    model: ModelSpec,
    dt: float,
    dw_field: SpectralField,
    f_field: SpectralField | None = None,
    x_grid: np.ndarray | None = None,
) -> StepOutcome:
    """Exponential Euler step with a tamed drift response."""
    if dt <= 0:
        raise ValueError(f"step size must be positive, got {dt}")
    f_field, bdw = _prepare(model, state, spec, dw_field, f_field, x_grid)
    f_norm = l2_norm(f_field)
    tamed = tame(f_field, dt)
    decay = np.exp(-dt * spec.lambdas)
    nxt = decay * (state.coeffs + dt * tamed.coeffs + bdw.coeffs)
    return StepOutcome(state.with_coeffs(nxt), True, f_norm)


def one_step(
    cfg: StepperConfig,
    state: SpectralField,
    spec: OperatorSpectrum,
    model: ModelSpec,
    dt: float,
    dw_field: SpectralField,
    f_field: SpectralField | None = None,
    x_grid: np.ndarray | None = None,
) -> StepOutcome:
    """Dispatch one step of the configured scheme."""
    if cfg.scheme == "asetd1":
        return step_asetd1(
            state, spec, model, dt, dw_field, f_field, x_grid,
            single_exp=cfg.asetd1_single_exp,
        )
    if cfg.scheme == "asetd0":
        return step_asetd0(state, spec, model, dt, dw_field, f_field, x_grid)
    if cfg.scheme == "nsee":
        return step_nsee(state, spec, model, dt, dw_field, cfg.theta, f_field, x_grid)
    if cfg.scheme == "tem":
        return step_tem(state, spec, model, dt, dw_field, f_field, x_grid)
    if cfg.scheme == "tsetd0":
        return step_tsetd0(state, spec, model, dt, dw_field, f_field, x_grid)
    raise ValueError(f"unknown scheme {cfg.scheme!r}")
