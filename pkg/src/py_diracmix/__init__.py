__version__ = "0.1.0"

from .decorators import enforce
from .dma import (
    Case,
    DmaProblem,
    SolutionReport,
    classify,
    expand_symmetric,
    init_random,
    solve,
    solve_fully_determined,
    solve_lm_baseline,
    solve_max_entropy,
    solve_overdetermined,
)
from .exceptions import (
    DegenerateInputError,
    MomentRangeError,
    NonFiniteObjectiveError,
    UnboundedProblemError,
    UnknownPresetError,
    ValidationError,
)
from .momentlib import DiracMixture, MomentTable, ScalarGaussian, ScalarGaussianMixture
from .multiindex import MultiIndex
from .pwcdensity import PwcDensity
from .solver import SolverOptions, SolverTrace

__all__ = [
    "Case",
    "DegenerateInputError",
    "DiracMixture",
    "DmaProblem",
    "MomentRangeError",
    "MomentTable",
    "MultiIndex",
    "NonFiniteObjectiveError",
    "PwcDensity",
    "ScalarGaussian",
    "ScalarGaussianMixture",
    "SolutionReport",
    "SolverOptions",
    "SolverTrace",
    "UnboundedProblemError",
    "UnknownPresetError",
    "ValidationError",
    "classify",
    "enforce",
    "expand_symmetric",
    "init_random",
    "solve",
    "solve_fully_determined",
    "solve_lm_baseline",
    "solve_max_entropy",
    "solve_overdetermined",
]
