from .core import (
    INF,
    Configuration,
    CoupledState,
    CurrentObserver,
    HarrisEvent,
    Observations,
    SimError,
    apply_event,
    class_matching,
    cumulative_F,
    discrepancies,
    empty_configuration,
    label_positions,
    make_source,
    occ_leq,
    simulate,
    slope_path,
)
from .kernels import HAVE_NUMBA, use_numba

__all__ = [
    "INF", "Configuration", "CoupledState", "CurrentObserver", "HarrisEvent",
    "Observations", "SimError", "apply_event", "class_matching", "cumulative_F",
    "discrepancies", "empty_configuration", "label_positions", "make_source",
    "occ_leq", "simulate", "slope_path", "HAVE_NUMBA", "use_numba",
]
