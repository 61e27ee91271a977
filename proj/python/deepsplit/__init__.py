"""Deep splitting solver for semilinear parabolic PDEs."""

from ._core import (
    Preset,
    ResultRow,
    SolverResult,
    TimeGrid,
    TrainingSchedule,
    __version__,
    hjb_reference,
    linearized_bs_reference,
    make_grid,
    paper_reference,
    preset,
    radial_fd_reference,
    run_experiment,
    self_check,
    simulate_paths,
    solve,
)

__all__ = [
    "Preset",
    "ResultRow",
    "SolverResult",
    "TimeGrid",
    "TrainingSchedule",
    "__version__",
    "hjb_reference",
    "linearized_bs_reference",
    "make_grid",
    "paper_reference",
    "preset",
    "radial_fd_reference",
    "run_experiment",
    "self_check",
    "simulate_paths",
    "solve",
]
