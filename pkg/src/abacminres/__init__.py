"""All-at-once BLTT solvers: ABAC-preconditioned MINRES with fast sine/Fourier transforms."""

from .abac import (
    AbacPreconditioner,
    AlphaCirculantSpectrum,
    NumericalBreakdownError,
    SingularPreconditionerError,
    apply_preconditioner_inverse,
    build_alpha_spectrum,
    build_preconditioner,
    sqrt_spectrum,
)
from .minres import ContractViolationError, MinresConfig, MinresReport, NotSPDError, solve
from .operator import SparseBlttOperator, bltt_matvec, symmetrized_matvec, time_reverse
from .problems import ProblemSpec, build_problem
from .spectral import SpectralBlttOperator, check_admissible, from_block_sequence
from .transforms import AlphaScaling, DftPlan, Dst1Plan

__version__ = "0.1.0"

__all__ = [
    "AbacPreconditioner",
    "AlphaCirculantSpectrum",
    "AlphaScaling",
    "ContractViolationError",
    "DftPlan",
    "Dst1Plan",
    "MinresConfig",
    "MinresReport",
    "NotSPDError",
    "NumericalBreakdownError",
    "ProblemSpec",
    "SingularPreconditionerError",
    "SparseBlttOperator",
    "SpectralBlttOperator",
    "apply_preconditioner_inverse",
    "bltt_matvec",
    "build_alpha_spectrum",
    "build_preconditioner",
    "build_problem",
    "check_admissible",
    "from_block_sequence",
    "solve",
    "sqrt_spectrum",
    "symmetrized_matvec",
    "time_reverse",
]
