__version__ = "0.1.0"

from .config import ExperimentConfig, load_config, parse_config
from .errors import (
    BoundaryMassError,
    ConfigError,
    DomainError,
    EigenSolverError,
    GridCapError,
    GridContractError,
    QuadratureError,
    RelKacError,
    SamplerError,
)
from .experiments import (
    ResultRow,
    ResultTable,
    emit_results,
    run_laplace_check,
    run_moment_sweep,
    run_nr_limit_sweep,
    run_oracle_compare,
    run_sample_export,
)
from .fields import FieldConfig, TestFunction
from .fk_engine import Discretization, FeynmanKacEngine, PairingEstimate
from .model import LimitCoefficients, ModelParams, bernstein, exponential_moment, laplace_exponent, levy_density
from .oracle import GridOperator, GridSpec
from .sampler import RngStream, SamplerSettings

__all__ = [
    "BoundaryMassError",
    "ConfigError",
    "Discretization",
    "DomainError",
    "EigenSolverError",
    "ExperimentConfig",
    "FeynmanKacEngine",
    "FieldConfig",
    "GridCapError",
    "GridContractError",
    "GridOperator",
    "GridSpec",
    "LimitCoefficients",
    "ModelParams",
    "PairingEstimate",
    "QuadratureError",
    "RelKacError",
    "ResultRow",
    "ResultTable",
    "RngStream",
    "SamplerError",
    "SamplerSettings",
    "TestFunction",
    "bernstein",
    "emit_results",
    "exponential_moment",
    "laplace_exponent",
    "levy_density",
    "load_config",
    "parse_config",
    "run_laplace_check",
    "run_moment_sweep",
    "run_nr_limit_sweep",
    "run_oracle_compare",
    "run_sample_export",
]
