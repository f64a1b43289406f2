"""Built-in quick checks behind the ``selftest`` CLI subcommand.

Each check is independent of the module it exercises where possible
(direct summation transforms, closed-form step values, exact algebraic
bounds).  Intended as a fast smoke layer; the pytest suite is stricter.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .adapt import AdaptConfig, run_to_T, select_dt
from .harness import initial_state
from .models import allen_cahn, build_spectrum, compute_shift, eval_drift, swift_hohenberg
from .noise import aggregate_increment, build_q, sample_path, wiener_field
from .spectral import (
    OperatorSpectrum,
    SpectralField,
    l2_norm,
    phi1_weights,
    project_modes,
    to_physical,
    to_spectral,
)
from .steppers import StepperConfig, step_asetd0, step_asetd1, step_nsee, step_tem, tame


def _decay_test_model(domain_length: float = 2.0 * math.pi):
    # zero drift on an already-positive operator: exponential schemes see
    # pure decay, so no stabilising shift is wanted
    model = allen_cahn(sigma=0.0, domain_length=domain_length)
    return replace(
        model,
        drift_coeffs=(0.0, 0.0, 0.0),
        shift_into_F=False,
        linear_symbol=_shifted_laplacian_symbol,
    )


def _shifted_laplacian_symbol(kappa):
    return -(kappa**2) - 1.0


def _check_transforms(rng):
    grid = rng.standard_normal(64)
    a = 32.0 * math.pi
    back = to_physical(to_spectral(grid, a))
    if np.max(np.abs(back - grid)) > 1e-12 * max(1.0, np.max(np.abs(grid))):
        return "round trip exceeded 1e-12"
    field = to_spectral(grid, a)
    quad = math.sqrt(a / 64 * float(np.sum(grid**2)))
    if abs(l2_norm(field) - quad) > 1e-10 * quad:
        return "Parseval norm disagrees with quadrature"
    return None


def _check_phi1_identity(_rng):
    z = np.logspace(-12, 4, 400)
    defect = np.abs(z * phi1_weights(z) + np.exp(-z) - 1.0)
    if np.max(defect) > 1e-12:
        return f"phi1 identity defect {np.max(defect):.2e}"
    weights = phi1_weights(z)
    if np.any(weights <= 0) or np.any(weights > 1):
        return "phi1 weight outside (0, 1]"
    return None


def _check_semigroup(rng):
    from .spectral import apply_semigroup

    n, a = 32, 2.0 * math.pi
    model = allen_cahn(sigma=0.0, domain_length=a)
    spec = build_spectrum(model, n, shifted=True)
    field = to_spectral(rng.standard_normal(n), a)
    once = apply_semigroup(spec, 0.7, field)
    twice = apply_semigroup(spec, 0.3, apply_semigroup(spec, 0.4, field))
    if np.max(np.abs(once.coeffs - twice.coeffs)) > 1e-14:
        return "semigroup composition broken"
    if l2_norm(once) > l2_norm(field) * (1 + 1e-12):
        return "semigroup is not a contraction"
    return None


def _check_projection(rng):
    n = 64
    field = to_spectral(rng.standard_normal(n), 1.0)
    proj = project_modes(field, 9)
    again = project_modes(proj, 9)
    if np.max(np.abs(proj.coeffs - again.coeffs)) != 0.0:
        return "projection is not idempotent"
    if l2_norm(proj) > l2_norm(field) + 1e-15:
        return "projection expanded the norm"
    return None


def _check_noise(_rng):
    model = allen_cahn()
    spec = build_spectrum(model, 32, shifted=True)
    noise = build_q(0.5, 32, spec)
    if noise.q[0] != 1.0 or np.any(np.diff(noise.q) > 0):
        return "q spectrum not normalized/monotone"
    p1 = sample_path(noise, 1.0, 2.0**-6, 99, 3)
    p2 = sample_path(noise, 1.0, 2.0**-6, 99, 3)
    mid = 13 * 2.0**-6  # deliberately not a dyadic fraction of the horizon
    full = aggregate_increment(p1, 0.0, 1.0)
    split = aggregate_increment(p1, 0.0, mid) + aggregate_increment(p1, mid, 1.0)
    if np.max(np.abs(full - split)) != 0.0:
        return "increment additivity violated"
    if np.max(np.abs(full - aggregate_increment(p2, 0.0, 1.0))) != 0.0:
        return "path regeneration is not bit-identical"
    e1 = np.zeros(noise.j_modes)
    e1[0] = 1.0
    injected = wiener_field(e1, noise)
    want = 1.0 / math.sqrt(noise.domain_length)  # orthonormal constant mode
    if np.max(np.abs(to_physical(injected) - want)) > 1e-12 * want:
        return "rank-1 injection is not the constant basis function"
    if abs(l2_norm(injected) - 1.0) > 1e-12:
        return "basis functions must have unit norm"
    return None


def _check_taming(rng):
    for _ in range(200):
        n = 16
        field = to_spectral(rng.standard_normal(n) * 10 ** rng.uniform(-3, 3), 1.0)
        dt = 10.0 ** rng.uniform(-6, 1)
        tamed = tame(field, dt)
        if l2_norm(tamed) > 1.0 / math.sqrt(dt):
            return "taming bound violated"
    return None


def _check_scheme_algebra(rng):
    n, a = 16, 2.0 * math.pi
    model = allen_cahn(sigma=1.0, domain_length=a)
    spec = build_spectrum(model, n, shifted=True)
    x = np.arange(n) * (a / n)
    state = to_spectral(0.3 * np.sin(x), a)
    noise = build_q(0.0, n, spec)
    dw = wiener_field(0.01 * rng.standard_normal(n), noise)
    two = step_asetd1(state, spec, model, 0.01, dw)
    one = step_asetd1(state, spec, model, 0.01, dw, single_exp=True)
    scale = max(1.0, float(np.max(np.abs(two.next_state.coeffs))))
    if np.max(np.abs(two.next_state.coeffs - one.next_state.coeffs)) > 1e-12 * scale:
        return "the two asetd1 forms disagree"

    quiet = _decay_test_model(a)
    qspec = build_spectrum(quiet, n, shifted=False)
    s0 = step_asetd0(state, qspec, quiet, 0.25, dw)
    s1 = step_asetd1(state, qspec, quiet, 0.25, dw)
    decay = state.coeffs * np.exp(-0.25 * qspec.lambdas)
    if np.max(np.abs(s0.next_state.coeffs - decay)) > 1e-14:
        return "drift-free step is not pure decay"
    if np.max(np.abs(s1.next_state.coeffs - s0.next_state.coeffs)) > 1e-14:
        return "asetd0 and asetd1 differ without drift"
    return None


def _check_nsee_indicator(_rng):
    n, a = 16, 2.0 * math.pi
    model = allen_cahn(sigma=0.0, domain_length=a)
    spec = build_spectrum(model, n, shifted=True)
    noise = build_q(0.0, n, spec)
    dw = wiener_field(np.zeros(n), noise)
    for amplitude, expected in ((0.05, True), (40.0, False)):
        state = to_spectral(np.full(n, amplitude), a)
        out = step_nsee(state, spec, model, 1e-4, dw, theta=0.25)
        if out.drift_included is not expected:
            return f"indicator wrong for amplitude {amplitude}"
    return None


def _check_tem_scalar(_rng):
    n, a = 4, 1.0
    spec = OperatorSpectrum(np.ones(n), 0.0, np.zeros(n), a)
    model = replace(allen_cahn(sigma=0.0, domain_length=a), drift_coeffs=(0.0, 0.0, 0.0))
    state = SpectralField(np.array([1.0, 0, 0, 0], dtype=complex), a, n)
    out = step_tem(state, spec, model, 0.01, SpectralField.zeros(n, a))
    expected = 1.0 - 0.01 / 1.1
    if abs(out.next_state.coeffs[0].real - expected) > 1e-12:
        return f"tamed Euler scalar value {out.next_state.coeffs[0].real} != {expected}"
    return None


def _check_select_dt(_rng):
    cfg = AdaptConfig(dt_max=2.0**-4, rho=16.0)
    dt_ref = 2.0**-12
    dt, backstop = select_dt(1e6, 1.0, cfg, dt_ref)
    if not backstop or dt != cfg.dt_min:
        return "huge drift response must trigger the backstop at dt_min"
    dt, backstop = select_dt(0.0, 1.0, cfg, dt_ref)
    if backstop or dt != cfg.dt_max:
        return "zero drift response must select dt_max"
    dt, backstop = select_dt(16.0, 1.0, cfg, dt_ref)  # candidate == dt_min exactly
    if not backstop:
        return "boundary candidate == dt_min must trigger the backstop"
    return None


def _check_shifts(_rng):
    ac = allen_cahn()
    if compute_shift(ac, 128) != 1.0:
        return "Allen-Cahn shift must be 1"
    sh = swift_hohenberg()
    if compute_shift(sh, 128) != 1.0:
        return "Swift-Hohenberg shift must be 1"
    spec = build_spectrum(ac, 128, shifted=True)
    target = to_spectral(np.full(128, 2.0), ac.domain_length)
    drift = to_physical(eval_drift(ac, target, spec.c0))
    if np.max(np.abs(drift - (-4.0))) > 1e-12:
        return "shifted cubic at u=2 must equal -4"
    return None


def _check_linear_exactness(_rng):
    n = 32
    model = _decay_test_model()
    spec = build_spectrum(model, n, shifted=False)
    noise = build_q(0.0, n, spec)
    path = sample_path(noise, 1.0, 2.0**-6, 5, 0)
    x0 = initial_state(model, n, 0.5)
    final, diag = run_to_T(
        model, spec, path, StepperConfig("asetd1"),
        AdaptConfig(dt_max=2.0**-3, rho=4.0), 1.0, x0,
    )
    exact = x0.coeffs * np.exp(-spec.lambdas)
    if diag.diverged or np.max(np.abs(final.coeffs - exact)) > 1e-12:
        return "exponential scheme is not exact on the linear flow"
    if abs(diag.total_time - 1.0) > 1e-12:
        return "steps do not sum to the horizon"
    return None


CHECKS = (
    ("transform round trip and Parseval", _check_transforms),
    ("phi1 identity and range", _check_phi1_identity),
    ("semigroup composition and contraction", _check_semigroup),
    ("mode projection", _check_projection),
    ("noise spectrum, determinism, additivity", _check_noise),
    ("taming norm cap", _check_taming),
    ("scheme algebra", _check_scheme_algebra),
    ("nonlinearity-stopping indicator", _check_nsee_indicator),
    ("tamed Euler scalar step", _check_tem_scalar),
    ("step selection and backstop boundary", _check_select_dt),
    ("operator shifts and drift values", _check_shifts),
    ("linear exactness end to end", _check_linear_exactness),
)


def run_selftest(verbose: bool = True) -> int:
    """Run all built-in checks; returns the number of failures."""
    rng = np.random.default_rng(171)
    failures = 0
    for name, check in CHECKS:
        try:
            problem = check(rng)
        except Exception as exc:  # a crashed check is a failed check
            problem = f"raised {type(exc).__name__}: {exc}"
        ok = problem is None
        failures += not ok
        if verbose:
            status = "PASS" if ok else "FAIL"
            suffix = "" if ok else f"  ({problem})"
            print(f"[{status}] {name}{suffix}")
    return failures
