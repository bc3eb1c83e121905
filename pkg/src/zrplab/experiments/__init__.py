from .runners import (
    run_cesaro_marginal,
    run_condensation,
    run_convergence,
    run_current_checks,
    run_hydro_compare,
    run_local_equilibrium,
)

__all__ = [
    "run_cesaro_marginal", "run_condensation", "run_convergence",
    "run_current_checks", "run_hydro_compare", "run_local_equilibrium",
]
