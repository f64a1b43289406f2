"""Experiment harness: strong-convergence and efficiency ensembles.

A study is a pure function of its configuration: trial ``m`` derives all
randomness from (master seed, m), the reference solve and every test
scheme consume increments aggregated from the same Wiener path, and
trials are embarrassingly parallel over a process pool whose size never
affects the numbers.  The reference solution is the nonlinearities-
stopped exponential scheme run at the fine resolution dt_ref.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__
from .adapt import (
    AdaptConfig,
    TrajectoryDiagnostics,
    admissibility_check,
    implied_admissibility_bound,
    run_to_T,
)
from .models import (
    ModelSpec,
    allen_cahn,
    build_spectrum,
    growth_constants,
    swift_hohenberg,
)
from .noise import build_q, sample_path
from .spectral import SpectralField, grid_points, to_spectral
from .steppers import ALL_SCHEMES, ADAPTIVE_SCHEMES, StepperConfig

MODELS = ("allen_cahn", "swift_hohenberg")

THREADS_ENV = "SPDE_ADAPT_THREADS"


class EmptyEnsembleError(RuntimeError):
    """Every trial of some ensemble point diverged; no error estimate exists."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one study; see README for the config-file keys."""

    model: str = "allen_cahn"
    nx: int = 128
    j: int | None = None  # noise modes, default nx
    domain_length: float = 32.0 * math.pi
    t_final: float = 1.0
    dt_ref: float = 2.0**-14
    dt_max_list: tuple[float, ...] = (2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7, 2.0**-8, 2.0**-9)
    rho: float = 100.0
    delta: float | None = None  # None -> delta = dt_max
    rule: tuple[str, ...] = ("i",)
    theta: float = 1.0  # rule-i exponent
    nsee_theta: float = 0.25
    r: float = 0.0
    eps_q: float = 0.1
    sigma: float = 1.0
    eta: float = -0.7
    c: float = 1.8
    trials: int = 100
    seed: int = 2024
    schemes: tuple[str, ...] = ("asetd1",)
    outdir: str = "out"
    x0_amplitude: float = 0.1
    block_size: int = 4096
    dealias: bool = False

    @property
    def j_modes(self) -> int:
        return self.nx if self.j is None else self.j

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.nx < 8 or self.nx % 2 != 0:
            raise ValueError("nx must be even and >= 8")
        if not 1 <= self.j_modes <= self.nx:
            raise ValueError("j must lie in [1, nx]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        for s in self.schemes:
            if s not in ALL_SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; choose from {ALL_SCHEMES}")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("noise regularity r must lie in [0, 1]")
        if self.t_final <= 0 or self.dt_ref <= 0:
            raise ValueError("t_final and dt_ref must be positive")
        _check_multiple(self.t_final, self.dt_ref, "t_final", "dt_ref")
        if not self.dt_max_list:
            raise ValueError("dt_max_list must not be empty")
        for dtm in self.dt_max_list:
            _check_multiple(self.t_final, dtm, "t_final", "dt_max")
            _check_multiple(dtm, self.dt_ref, "dt_max", "dt_ref")
        # the adapt/stepper configs re-validate their own fields
        self.adapt_config(self.dt_max_list[0])
        for s in self.schemes:
            self.stepper_config(s)

    def build_model(self) -> ModelSpec:
        if self.model == "allen_cahn":
            base = allen_cahn(sigma=self.sigma, domain_length=self.domain_length)
        else:
            base = swift_hohenberg(
                eta=self.eta, c=self.c, sigma=self.sigma, domain_length=self.domain_length
            )
        return replace(base, dealias=self.dealias) if self.dealias else base

    def adapt_config(self, dt_max: float, c0: float = 0.0, model: ModelSpec | None = None) -> AdaptConfig:
        c3 = None
        if {"ii", "iv"} & set(self.rule):
            mdl = model if model is not None else self.build_model()
            _, c3 = growth_constants(mdl, c0)
        return AdaptConfig(
            dt_max=dt_max,
            rho=self.rho,
            delta=self.delta,
            rules=tuple(self.rule),
            theta_rule=self.theta,
            backstop_theta=self.nsee_theta,
            c3=c3,
        )

    def stepper_config(self, scheme: str) -> StepperConfig:
        return StepperConfig(scheme=scheme, theta=self.nsee_theta)


def _check_multiple(value: float, unit: float, name: str, unit_name: str) -> None:
    ratio = value / unit
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, abs(ratio)) or round(ratio) < 1:
        raise ValueError(f"{name} ({value}) must be a positive integer multiple of {unit_name} ({unit})")


def initial_state(model: ModelSpec, nx: int, amplitude: float = 0.1) -> SpectralField:
    """Small smooth default start: amplitude * (sin(2 pi x / a) + cos(4 pi x / a))."""
    a = model.domain_length
    x = grid_points(nx, a)
    u = amplitude * (np.sin(2.0 * math.pi * x / a) + np.cos(4.0 * math.pi * x / a))
    return to_spectral(u, a)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class TrialPoint:
    sq_error: float | None
    cpu_seconds: float
    mean_dt: float
    n_steps: int
    backstop_steps: int
    switch_off_steps: int
    diverged: bool
    admissibility_violations: int


@dataclass(frozen=True)
class TrialResult:
    trial: int
    ref_diverged: bool
    points: dict


def _scheme_is_shifted(scheme: str, model: ModelSpec) -> bool:
    return scheme != "tem" and model.shift_into_F


def _trial_worker(cfg: ExperimentConfig, trial: int) -> TrialResult:
    model = cfg.build_model()
    spec_shifted = build_spectrum(model, cfg.nx, shifted=model.shift_into_F)
    spec_raw = build_spectrum(model, cfg.nx, shifted=False)
    noise = build_q(cfg.r, cfg.j_modes, spec_shifted, cfg.eps_q)
    path = sample_path(
        noise, cfg.t_final, cfg.dt_ref, cfg.seed, trial, block_size=cfg.block_size
    )
    x0 = initial_state(model, cfg.nx, cfg.x0_amplitude)

    # reference solve: fine-step stopped exponential Euler on the same path;
    # it also warms the path's block cache so timed runs exclude generation
    ref_cfg = StepperConfig("nsee", theta=cfg.nsee_theta, dt=cfg.dt_ref)
    ref_adapt = AdaptConfig(dt_max=cfg.dt_ref, rho=1.0)
    ref_state, ref_diag = run_to_T(
        model, spec_shifted, path, ref_cfg, ref_adapt, cfg.t_final, x0
    )
    if ref_diag.diverged:
        return TrialResult(trial, True, {})

    points: dict = {}
    for scheme in cfg.schemes:
        spec = spec_shifted if _scheme_is_shifted(scheme, model) else spec_raw
        stepper = cfg.stepper_config(scheme)
        for dt_max in cfg.dt_max_list:
            adapt = cfg.adapt_config(dt_max, spec.c0, model)
            t0 = time.perf_counter()
            state, diag = run_to_T(model, spec, path, stepper, adapt, cfg.t_final, x0)
            cpu = time.perf_counter() - t0
            if diag.diverged:
                points[(scheme, dt_max)] = TrialPoint(
                    None, cpu, diag.mean_dt, diag.n_steps,
                    diag.backstop_count, diag.switch_off_count, True, 0,
                )
                continue
            diff = ref_state.coeffs - state.coeffs
            sq = float(model.domain_length * np.vdot(diff, diff).real)
            violations = 0
            if scheme in ADAPTIVE_SCHEMES:
                bound = implied_admissibility_bound(adapt)
                if bound is not None:
                    r1, r2 = bound
                    accepted = ~diag.used_backstop
                    violations = int(
                        sum(
                            not admissibility_check(f * f, x * x, r1, r2)
                            for f, x in zip(
                                diag.f_norm[accepted], diag.x_norm[accepted]
                            )
                        )
                    )
            points[(scheme, dt_max)] = TrialPoint(
                sq, cpu, diag.mean_dt, diag.n_steps,
                diag.backstop_count, diag.switch_off_count, False, violations,
            )
    return TrialResult(trial, False, points)


@dataclass(frozen=True)
class PointResult:
    scheme: str
    dt_max: float
    rms: float
    stderr: float
    mean_dt: float
    backstop_rate: float
    cpu_mean_s: float
    diverged: int
    trials_used: int
    switch_off_steps: int
    admissibility_violations: int
    flagged: bool  # more than 10% of trials diverged at this point


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    half_width: float


@dataclass(frozen=True)
class ErrorReport:
    points: tuple[PointResult, ...]
    slopes: dict
    trials: int

    def point(self, scheme: str, dt_max: float) -> PointResult:
        for p in self.points:
            if p.scheme == scheme and p.dt_max == dt_max:
                return p
        raise KeyError(f"no ensemble point for ({scheme}, {dt_max})")


def fit_slope(points) -> SlopeFit:
    """Least-squares slope of log(rms) against log(dt_max).

    ``half_width`` is twice the standard error of the fitted slope.
    """
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("slope fit needs at least 3 points")
    if any(d <= 0 or v <= 0 for d, v in pts):
        raise ValueError("slope fit needs positive step sizes and errors")
    x = np.log([d for d, _ in pts])
    y = np.log([v for _, v in pts])
    n = x.size
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    sigma2 = float(resid @ resid) / (n - 2)
    return SlopeFit(slope, intercept, 2.0 * math.sqrt(sigma2 / sxx))


def run_ensemble(cfg: ExperimentConfig) -> ErrorReport:
    """Run every (scheme, dt_max) point over the trial ensemble."""
    cfg.validate()
    workers = worker_count()
    results: dict[int, TrialResult] = {}
    if workers <= 1:
        for trial in range(cfg.trials):
            results[trial] = _trial_worker(cfg, trial)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_trial_worker, cfg, trial): trial
                for trial in range(cfg.trials)
            }
            for fut, trial in futures.items():
                results[trial] = fut.result()

    points = []
    for scheme in cfg.schemes:
        for dt_max in cfg.dt_max_list:
            sq, cpu, mean_dts, nsteps = [], [], [], 0
            backstops = switch_offs = diverged = violations = 0
            for trial in range(cfg.trials):
                res = results[trial]
                if res.ref_diverged:
                    diverged += 1
                    continue
                tp = res.points[(scheme, dt_max)]
                if tp.diverged or tp.sq_error is None:
                    diverged += 1
                    continue
                cpu.append(tp.cpu_seconds)
                sq.append(tp.sq_error)
                mean_dts.append(tp.mean_dt)
                nsteps += tp.n_steps
                backstops += tp.backstop_steps
                switch_offs += tp.switch_off_steps
                violations += tp.admissibility_violations
            if not sq:
                raise EmptyEnsembleError(
                    f"all {cfg.trials} trials diverged for scheme={scheme} dt_max={dt_max}"
                )
            sq_arr = np.asarray(sq)
            rms = float(np.sqrt(sq_arr.mean()))
            if len(sq) > 1 and rms > 0:
                se_mean = float(sq_arr.std(ddof=1) / math.sqrt(len(sq)))
                stderr = se_mean / (2.0 * rms)
            else:
                stderr = 0.0
            points.append(
                PointResult(
                    scheme=scheme,
                    dt_max=dt_max,
                    rms=rms,
                    stderr=stderr,
                    mean_dt=float(np.mean(mean_dts)),
                    backstop_rate=backstops / nsteps if nsteps else 0.0,
                    cpu_mean_s=float(np.mean(cpu)),
                    diverged=diverged,
                    trials_used=len(sq),
                    switch_off_steps=switch_offs,
                    admissibility_violations=violations,
                    flagged=diverged > 0.1 * cfg.trials,
                )
            )

    slopes = {}
    for scheme in cfg.schemes:
        pts = [(p.dt_max, p.rms) for p in points if p.scheme == scheme and p.rms > 0]
        if len(pts) >= 3:
            slopes[scheme] = fit_slope(pts)
    return ErrorReport(tuple(points), slopes, cfg.trials)


def strong_error(scheme: str, dt_max: float, cfg: ExperimentConfig) -> float:
    """Root-mean-square distance to the fine reference at t_final for one
    (scheme, dt_max) point."""
    sub = replace(cfg, schemes=(scheme,), dt_max_list=(dt_max,))
    return run_ensemble(sub).point(scheme, dt_max).rms


def efficiency_study(cfg: ExperimentConfig) -> ErrorReport:
    """Error-versus-cost study; identical ensemble with per-run wall
    timing around the solver only."""
    return run_ensemble(cfg)


def realization_trace(
    scheme: str,
    cfg: ExperimentConfig,
    trial_index: int,
    dt_max: float | None = None,
) -> tuple[TrajectoryDiagnostics, str]:
    """Run a single realisation and write its per-step diagnostics CSV.

    Returns the diagnostics and the CSV path.  Uses the first entry of
    dt_max_list unless ``dt_max`` is given.
    """
    cfg.validate()
    if trial_index < 0:
        raise ValueError("trial index must be >= 0")
    if scheme not in ALL_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    dtm = cfg.dt_max_list[0] if dt_max is None else dt_max
    model = cfg.build_model()
    spec_shifted = build_spectrum(model, cfg.nx, shifted=model.shift_into_F)
    spec = (
        spec_shifted
        if _scheme_is_shifted(scheme, model)
        else build_spectrum(model, cfg.nx, shifted=False)
    )
    noise = build_q(cfg.r, cfg.j_modes, spec_shifted, cfg.eps_q)
    path = sample_path(noise, cfg.t_final, cfg.dt_ref, cfg.seed, trial_index, block_size=cfg.block_size)
    x0 = initial_state(model, cfg.nx, cfg.x0_amplitude)
    _, diag = run_to_T(
        model, spec, path, cfg.stepper_config(scheme), cfg.adapt_config(dtm, spec.c0, model),
        cfg.t_final, x0,
    )
    os.makedirs(cfg.outdir, exist_ok=True)
    out_path = os.path.join(cfg.outdir, f"trace_{scheme}_{trial_index}.csv")
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "dt", "f_norm", "backstop", "drift_included"])
        for k in range(diag.n_steps):
            writer.writerow(
                [
                    repr(float(diag.t[k])),
                    repr(float(diag.dt[k])),
                    repr(float(diag.f_norm[k])),
                    int(diag.used_backstop[k]),
                    int(diag.drift_included[k]),
                ]
            )
    write_metadata(out_path, cfg, {"scheme": scheme, "trial": trial_index, "dt_max": dtm, "diverged": diag.diverged})
    return diag, out_path


def write_converge_csv(report: ErrorReport, cfg: ExperimentConfig, out_path: str) -> str:
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scheme", "dt_max", "rms", "stderr", "mean_dt", "backstop_rate", "diverged"]
        )
        for p in report.points:
            writer.writerow(
                [
                    p.scheme,
                    repr(p.dt_max),
                    repr(p.rms),
                    repr(p.stderr),
                    repr(p.mean_dt),
                    repr(p.backstop_rate),
                    p.diverged,
                ]
            )
        for scheme, fit in report.slopes.items():
            fh.write(f"# slope,{scheme},{fit.slope!r},{fit.half_width!r}\n")
    write_metadata(out_path, cfg, {})
    return out_path


def write_efficiency_csv(report: ErrorReport, cfg: ExperimentConfig, out_path: str) -> str:
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "dt_max", "rms", "cpu_mean_s"])
        for p in report.points:
            writer.writerow([p.scheme, repr(p.dt_max), repr(p.rms), repr(p.cpu_mean_s)])
    write_metadata(out_path, cfg, {})
    return out_path


def write_metadata(data_path: str, cfg: ExperimentConfig, extras: dict) -> str:
    meta_path = data_path + ".meta.txt"
    with open(meta_path, "w") as fh:
        fh.write(f"version = {__version__}\n")
        for key, value in sorted(asdict(cfg).items()):
            fh.write(f"{key} = {value}\n")
        for key, value in sorted(extras.items()):
            fh.write(f"{key} = {value}\n")
    return meta_path
