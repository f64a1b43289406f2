"""Adaptive exponential time-stepping for semilinear stochastic PDEs
with one-sided Lipschitz drift, plus the strong-convergence and
efficiency benchmark harness."""

__version__ = "0.1.0"

from .spectral import (  # noqa: F401
    BlowUpError,
    OperatorSpectrum,
    SpectralField,
    apply_phi1,
    apply_semigroup,
    l2_norm,
    project_modes,
    to_physical,
    to_spectral,
)
from .models import (  # noqa: F401
    ModelSpec,
    allen_cahn,
    build_spectrum,
    compute_shift,
    drift_norm,
    eval_diffusion_increment,
    eval_drift,
    swift_hohenberg,
)
from .noise import (  # noqa: F401
    NoiseModel,
    WienerPath,
    aggregate_increment,
    build_q,
    sample_path,
    wiener_field,
)
from .steppers import (  # noqa: F401
    ALL_SCHEMES,
    StepOutcome,
    StepperConfig,
    one_step,
    step_asetd0,
    step_asetd1,
    step_nsee,
    step_tem,
    step_tsetd0,
    tame,
)
from .adapt import (  # noqa: F401
    AdaptConfig,
    TrajectoryDiagnostics,
    admissibility_check,
    run_to_T,
    select_dt,
)
from .harness import (  # noqa: F401
    ErrorReport,
    ExperimentConfig,
    efficiency_study,
    fit_slope,
    initial_state,
    realization_trace,
    run_ensemble,
    strong_error,
)
from .config import load_config, parse_config_text  # noqa: F401
