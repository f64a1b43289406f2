"""Time-step selection and the run-to-final-time driver.

The controller picks each step from the current drift response and
state norm via the enabled selection rules, clamps to
[dt_min, dt_max] with dt_max = rho * dt_min, quantizes down to the
noise path's fine grid, and hands off to the nonlinearities-stopped
backstop whenever the unclamped candidate falls to dt_min or below.

When dt_min itself is not a fine-grid multiple (possible for rho not a
power of two), dt_min remains the exact backstop threshold and realized
steps are clamped to the smallest grid multiple >= dt_min.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, drift_with_grid
from .noise import WienerPath, wiener_field
from .spectral import BlowUpError, OperatorSpectrum, SpectralField, l2_norm
from .steppers import FIXED_STEP_SCHEMES, StepperConfig, one_step, step_nsee

RULES = ("i", "ii", "iii", "iv", "v")

# states with norms beyond this are recorded as diverged, not raised
DIVERGENCE_NORM = 1e10


@dataclass(frozen=True)
class AdaptConfig:
    """Step-size selection parameters.

    ``delta`` is the rule scale (defaults to dt_max); ``theta_rule`` the
    exponent of rule i; ``c2``/``c3`` the drift growth constants used by
    rules ii and iv; ``backstop_theta`` the stopping exponent of the
    backstop scheme.
    """

    dt_max: float
    rho: float = 100.0
    delta: float | None = None
    rules: tuple[str, ...] = ("i",)
    theta_rule: float = 1.0
    backstop_theta: float = 0.25
    c2: float = 2.0
    c3: float | None = None

    def __post_init__(self):
        if self.dt_max <= 0:
            raise ValueError("dt_max must be positive")
        if self.rho < 1:
            raise ValueError("rho must be >= 1")
        if not self.rules:
            raise ValueError("at least one selection rule must be enabled")
        unknown = set(self.rules) - set(RULES)
        if unknown:
            raise ValueError(f"unknown selection rules {sorted(unknown)}; choose from {RULES}")
        if self.delta is not None and not 0 < self.delta <= self.dt_max:
            raise ValueError("delta must lie in (0, dt_max]")
        if self.theta_rule == 0:
            raise ValueError("theta_rule must be nonzero")
        if not 0.0 < self.backstop_theta <= 0.25:
            raise ValueError("backstop_theta must lie in (0, 1/4]")
        if {"ii", "iv"} & set(self.rules):
            if self.c3 is None or self.c3 <= 0:
                raise ValueError("rules ii/iv need a positive growth constant c3")

    @property
    def dt_min(self) -> float:
        return self.dt_max / self.rho

    @property
    def delta_effective(self) -> float:
        return self.dt_max if self.delta is None else self.delta


def _rule_candidate(rule: str, f_norm: float, x_norm: float, cfg: AdaptConfig) -> float:
    delta = cfg.delta_effective
    if rule == "i":
        if f_norm == 0.0:
            return math.inf
        return delta / f_norm ** (1.0 / cfg.theta_rule)
    if rule == "ii":
        return delta / (cfg.c3 * (1.0 + x_norm ** (1.0 + cfg.c2)))
    if rule == "iii":
        if f_norm == 0.0:
            return math.inf
        return delta * x_norm / f_norm
    if rule == "iv":
        return delta * x_norm / (cfg.c3 * (1.0 + x_norm ** (1.0 + cfg.c2)))
    if rule == "v":
        if x_norm == 0.0:
            return math.inf
        return delta / x_norm
    raise ValueError(f"unknown rule {rule!r}")


def _grid_steps(cfg: AdaptConfig, dt_ref: float) -> tuple[int, int]:
    """(min_steps, max_steps) of the realized step in fine-grid units."""
    ratio_max = cfg.dt_max / dt_ref
    max_steps = round(ratio_max)
    if abs(ratio_max - max_steps) > 1e-9 * max(1.0, ratio_max) or max_steps < 1:
        raise ValueError(
            f"dt_max ({cfg.dt_max}) must be a positive integer multiple of dt_ref ({dt_ref})"
        )
    min_steps = max(1, math.ceil(cfg.dt_min / dt_ref - 1e-9))
    return min_steps, max_steps


def select_dt(
    f_norm: float, x_norm: float, cfg: AdaptConfig, dt_ref: float
) -> tuple[float, bool]:
    """Choose the next step size from the current drift response.

    The candidate is the maximum over the enabled rules, the backstop
    flag is raised iff the unclamped candidate is <= dt_min, and the
    returned step is clamped to [dt_min, dt_max] then rounded down to a
    multiple of dt_ref (never below the smallest multiple >= dt_min).
    """
    if not (np.isfinite(f_norm) and np.isfinite(x_norm)):
        raise ValueError("f_norm and x_norm must be finite")
    if f_norm < 0 or x_norm < 0:
        raise ValueError("f_norm and x_norm must be nonnegative")
    candidate = max(_rule_candidate(rule, f_norm, x_norm, cfg) for rule in cfg.rules)
    min_steps, max_steps = _grid_steps(cfg, dt_ref)
    if candidate <= cfg.dt_min:
        return min_steps * dt_ref, True
    if candidate >= cfg.dt_max:
        return max_steps * dt_ref, False
    steps = int(math.floor(candidate / dt_ref * (1.0 + 1e-12)))
    steps = min(max(steps, min_steps), max_steps)
    return steps * dt_ref, False


def admissibility_check(f_norm2: float, x_norm2: float, r1: float, r2: float) -> bool:
    """Whether ||F(X)||^2 <= R1 + R2 * ||X||^2 (boundary inclusive)."""
    if min(f_norm2, x_norm2, r1, r2) < 0:
        raise ValueError("all admissibility inputs must be nonnegative")
    return f_norm2 <= r1 + r2 * x_norm2


def implied_admissibility_bound(cfg: AdaptConfig) -> tuple[float, float] | None:
    """(R1, R2) guaranteed by the active rule, when a single rule with a
    known bound is enabled: rule i gives (rho^(2*theta), 0), rule iii
    gives (0, rho^2).  None otherwise."""
    if cfg.rules == ("i",):
        return cfg.rho ** (2.0 * cfg.theta_rule), 0.0
    if cfg.rules == ("iii",):
        return 0.0, cfg.rho**2
    return None


@dataclass(frozen=True)
class TrajectoryDiagnostics:
    """Per-step record of one solve."""

    t: np.ndarray
    dt: np.ndarray
    f_norm: np.ndarray
    x_norm: np.ndarray
    used_backstop: np.ndarray
    drift_included: np.ndarray
    diverged: bool
    increments: np.ndarray | None = None  # optional raw noise samples (n_steps, modes)

    @property
    def n_steps(self) -> int:
        return self.dt.size

    @property
    def mean_dt(self) -> float:
        return float(np.mean(self.dt)) if self.dt.size else math.nan

    @property
    def backstop_count(self) -> int:
        return int(np.count_nonzero(self.used_backstop))

    @property
    def switch_off_count(self) -> int:
        return int(np.count_nonzero(~self.drift_included))

    @property
    def total_time(self) -> float:
        return float(np.sum(self.dt))


def run_to_T(
    model: ModelSpec,
    spec: OperatorSpectrum,
    path: WienerPath,
    stepper_cfg: StepperConfig,
    adapt_cfg: AdaptConfig,
    t_final: float,
    x0: SpectralField,
    record_increment_modes: tuple[int, ...] = (),
) -> tuple[SpectralField, TrajectoryDiagnostics]:
    """March from x0 to t_final.

    Adaptive schemes pick each step via ``select_dt`` and fall back to a
    nonlinearities-stopped step of (grid-quantized) dt_min whenever the
    backstop triggers; fixed-step schemes run at their configured step.
    The final step is clipped to land exactly on t_final.  A state whose
    norm blows up terminates the solve with ``diverged`` set instead of
    raising.
    """
    horizon = path.fine_index(t_final)
    dt_ref = path.dt_ref
    fixed = stepper_cfg.scheme in FIXED_STEP_SCHEMES
    if fixed:
        dt_fixed = stepper_cfg.dt if stepper_cfg.dt is not None else adapt_cfg.dt_max
        ratio = dt_fixed / dt_ref
        fixed_steps = round(ratio)
        if abs(ratio - fixed_steps) > 1e-9 * max(1.0, ratio) or fixed_steps < 1:
            raise ValueError(
                f"fixed step {dt_fixed} must be a positive integer multiple of dt_ref"
            )
        min_steps = None
    else:
        min_steps, _ = _grid_steps(adapt_cfg, dt_ref)

    rec_t, rec_dt, rec_f, rec_x = [], [], [], []
    rec_back, rec_drift, rec_incr = [], [], []
    sample_modes = list(record_increment_modes)

    state = x0
    i = 0
    diverged = False
    while i < horizon:
        try:
            x_norm = l2_norm(state)
            f_field, x_grid = drift_with_grid(model, state, spec.c0)
            f_norm = l2_norm(f_field)
        except BlowUpError:
            diverged = True
            break
        if x_norm > DIVERGENCE_NORM or f_norm > DIVERGENCE_NORM:
            diverged = True
            break

        if fixed:
            steps, backstop = fixed_steps, False
        else:
            dt_sel, backstop = select_dt(f_norm, x_norm, adapt_cfg, dt_ref)
            steps = min_steps if backstop else round(dt_sel / dt_ref)
        steps = min(steps, horizon - i)  # clip onto t_final
        dt = steps * dt_ref

        dbeta = path.increments_between_indices(i, i + steps)
        dw = wiener_field(dbeta, path.noise)
        try:
            if backstop:
                outcome = step_nsee(
                    state, spec, model, dt, dw,
                    theta=adapt_cfg.backstop_theta, f_field=f_field, x_grid=x_grid,
                )
            else:
                outcome = one_step(
                    stepper_cfg, state, spec, model, dt, dw, f_field, x_grid
                )
        except BlowUpError:
            diverged = True
            break

        rec_t.append(i * dt_ref)
        rec_dt.append(dt)
        rec_f.append(f_norm)
        rec_x.append(x_norm)
        rec_back.append(backstop)
        rec_drift.append(outcome.drift_included)
        if sample_modes:
            rec_incr.append(dbeta[sample_modes])
        state = outcome.next_state
        i += steps

    if not diverged:
        final_norm = (
            float(np.sqrt(state.domain_length * np.vdot(state.coeffs, state.coeffs).real))
            if np.all(np.isfinite(state.coeffs))
            else math.inf
        )
        if not math.isfinite(final_norm) or final_norm > DIVERGENCE_NORM:
            diverged = True

    diag = TrajectoryDiagnostics(
        t=np.asarray(rec_t, dtype=float),
        dt=np.asarray(rec_dt, dtype=float),
        f_norm=np.asarray(rec_f, dtype=float),
        x_norm=np.asarray(rec_x, dtype=float),
        used_backstop=np.asarray(rec_back, dtype=bool),
        drift_included=np.asarray(rec_drift, dtype=bool),
        diverged=diverged,
        increments=np.asarray(rec_incr, dtype=float) if sample_modes else None,
    )
    return state, diag
