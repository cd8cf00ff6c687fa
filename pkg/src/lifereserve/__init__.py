"""Reserving engine for multi-state life insurance contracts with modifications."""

from .errors import (
    AssumptionError,
    ConfigurationError,
    ContractParseError,
    ContractValidationError,
    ConvergenceError,
    EquivalenceError,
    PathMismatchError,
    ReserveError,
    SimulationError,
    SolverError,
)
from .fixtures import FIXTURES, load_fixture
from .model import ContractSpec, load_contract, load_contract_file, validate_assumptions
from .reserve_linear import (
    ValueFunction,
    pathwise_bsde_residual,
    solve_thiele_markov,
    solve_thiele_semimarkov,
    sum_at_risk,
)
from .simulate import Path, martingale_diagnostics, simulate_path

__version__ = "0.1.0"
