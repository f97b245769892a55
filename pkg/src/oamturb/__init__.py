"""Simulation of OAM entanglement decay in Kolmogorov turbulence."""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    DecayRangeError,
    DegenerateEnsembleError,
    DimensionError,
    DomainError,
    OAMTurbError,
    ResolutionError,
    SamplingError,
    ValidationError,
)
from .grid import GridSpec, SampledField, apply_phase, inner_product, propagate_free_space  # noqa: E402
from .modes import LGModeSpec, evaluate_lg, lg_basis  # noqa: E402
from .quantum import (  # noqa: E402
    BELL_STATE,
    ModalCoefficients,
    ProjectedPureState,
    TwoQubitDensityMatrix,
    accumulate_density,
    concurrence,
    modal_coefficients,
    project_single_photon,
    project_to_physical,
    project_two_photon,
)
from .turbulence import (  # noqa: E402
    PhaseScreen,
    SpectrumModel,
    TurbulenceParams,
    estimate_structure_function,
    fried_parameter,
    generate_screen_pair,
    scintillation_strength,
)
from .experiments import (  # noqa: E402
    CrosstalkMatrix,
    DecayFit,
    Scenario,
    SweepConfig,
    SweepResult,
    crosstalk_matrix,
    decay_distance,
    fit_decay_scale,
    run_sweep,
)
