"""Steady states, spectra, bifurcations and simulation of a scalar DDE with a
threshold state-dependent delay."""

from .bifurcation import (
    BAUTIN,
    BT,
    CONST_DELAY,
    CUSP,
    FOLD,
    FOLD_HOPF,
    GENERAL,
    HOPF,
    SD_GCONST,
    SUB,
    SUPER,
    UNKNOWN,
    Annotation,
    BifCurve,
    FoldPoint,
    HopfPoint,
    codim2_scan,
    criticality,
    find_folds,
    hopf_const_delay,
    hopf_general,
    hopf_sd_gconst,
    trace_curve,
)
from .errors import (
    ContourError,
    CurveLostError,
    DomainError,
    HistoryTooShortError,
    InconclusiveError,
    NoOscillationError,
    RegimeError,
    StepFailureError,
    TddebifError,
)
from .model import (
    INFINITY,
    ModelParams,
    Nonlinearity,
    corner_gammas,
    fold_discriminant,
    gamma_of_xi,
    steady_delay,
    sufficient_conditions,
)
from .spectrum import (
    CharContext,
    SpectrumReport,
    char_eval,
    find_roots,
    make_context,
    unstable_count,
)
from .steady import (
    LimitingDiagram,
    SteadyState,
    find_steady_states,
    limiting_diagram,
    state_at,
    steady_branch,
)

__version__ = "0.1.0"

__all__ = [
    "INFINITY",
    "ModelParams",
    "Nonlinearity",
    "corner_gammas",
    "fold_discriminant",
    "gamma_of_xi",
    "steady_delay",
    "sufficient_conditions",
    "SteadyState",
    "LimitingDiagram",
    "find_steady_states",
    "state_at",
    "steady_branch",
    "limiting_diagram",
    "CharContext",
    "SpectrumReport",
    "make_context",
    "char_eval",
    "find_roots",
    "unstable_count",
    "HopfPoint",
    "FoldPoint",
    "Annotation",
    "BifCurve",
    "find_folds",
    "hopf_const_delay",
    "hopf_sd_gconst",
    "hopf_general",
    "criticality",
    "trace_curve",
    "codim2_scan",
    "CONST_DELAY",
    "SD_GCONST",
    "GENERAL",
    "SUPER",
    "SUB",
    "UNKNOWN",
    "FOLD",
    "HOPF",
    "CUSP",
    "BT",
    "FOLD_HOPF",
    "BAUTIN",
    "TddebifError",
    "DomainError",
    "RegimeError",
    "ContourError",
    "CurveLostError",
    "StepFailureError",
    "HistoryTooShortError",
    "NoOscillationError",
    "InconclusiveError",
    "__version__",
]
