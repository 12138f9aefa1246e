"""Two-photon interference toolkit.

Biphoton path parameters from two-alternative path diagrams, coincidence
and singles rates, named experiment scenarios and sweeps, synthetic
time-tag streams with a fast coincidence correlator, and dip/fringe
fitting.
"""

__version__ = "0.1.0"

from ._accel import backend
from .coherence import CoherenceModel, CorrelationEnvelope, Spectrum, envelope_from_spectrum, gamma_gaussian
from .errors import (
    BiphotonError,
    ConfigError,
    DataError,
    DegenerateFitError,
    InputDomainError,
    ModelingError,
    ResolutionError,
)
from .fitting import FitResult, FringeModel, fit_sweep, fit_trace
from .pathdiagram import (
    BiphotonParams,
    PathAlternative,
    TwoPhotonPathDiagram,
    derive_biphoton_params,
    double_pass_params,
)
from .rates import DetectionModel, apply_detection, coincidence_rate, double_pass_rate, singles_rate
from .scenarios import ExperimentConfig, SweepSpec, SweepTrace, add_noise, build_scenario, run_sweep
from .tagstream import GenSpec, TagStream, correlate, generate_tags
