"""Orthogonal-polynomial parameterized circuits for compressing and
classifying flow fields, simulated exactly on statevectors."""

__version__ = "0.1.0"

from .opqnn import Family, OpqnnModel, RegisterLayout, basis_column, basis_matrix
from .projection import EstimatorConfig, tikhonov_solve
from .qsim import Circuit, Gate, circuit_unitary, run

__all__ = [
    "Circuit",
    "EstimatorConfig",
    "Family",
    "Gate",
    "OpqnnModel",
    "RegisterLayout",
    "basis_column",
    "basis_matrix",
    "circuit_unitary",
    "run",
    "tikhonov_solve",
    "__version__",
]
