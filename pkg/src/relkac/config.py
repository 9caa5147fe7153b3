'''
YAML experiment configuration

A config file is one YAML mapping checked against the dataclasses below.
Unknown keys, wrong types and invalid values are fatal and reported as
"file:line: key.path: message". The run-level settings can be overridden
from the environment (RELKAC_SEED, RELKAC_WORKERS, RELKAC_OUT) and again from
the command line, which takes precedence.
'''

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union, get_args, get_origin, get_type_hints

import yaml

from .errors import ConfigError, DomainError
from .fields import MAGNETIC_FIELDS, POTENTIALS, VECTOR_POTENTIALS, FieldConfig, TestFunction, make_preset
from .fk_engine import DEFAULT_CHUNK_SIZE, DEFAULT_KURTOSIS_THRESHOLD, DEFAULT_N_OUTER, ESTIMATORS, SPINLESS, Discretization
from .model import ModelParams
from .oracle import DEFAULT_BOUNDARY_MARGIN, DEFAULT_BOUNDARY_TOL, DEFAULT_GRID_CAP, PEIERLS, STENCILS, GridSpec
from .paths import CONVENTIONS, PRE_JUMP
from .sampler import DEFAULT_MAX_ROUNDS, DEFAULT_SPLIT_ACCEPTANCE, SamplerSettings

ENV_SEED = "RELKAC_SEED"
ENV_WORKERS = "RELKAC_WORKERS"
ENV_OUT = "RELKAC_OUT"
ENV_LOG_LEVEL = "RELKAC_LOG_LEVEL"

EXPERIMENTS = ("laplace", "moments", "compare", "limit", "sample")


@dataclass(frozen=True)
class PresetConfig:
    name: str = "zero"
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class FieldsConfig:
    '''
    Preset names and parameters of a, V and (optionally) b.
    '''

    dimension: int = 1
    vector_potential: PresetConfig = field(default_factory=PresetConfig)
    potential: PresetConfig = field(default_factory=PresetConfig)
    magnetic: Optional[PresetConfig] = None

    def __post_init__(self) -> None:
        self.build()

    def build(self) -> FieldConfig:
        magnetic = None if self.magnetic is None else make_preset(MAGNETIC_FIELDS, self.magnetic.name, self.magnetic.params)
        return FieldConfig(
            dimension=self.dimension,
            vector_potential=make_preset(VECTOR_POTENTIALS, self.vector_potential.name, self.vector_potential.params),
            potential=make_preset(POTENTIALS, self.potential.name, self.potential.params),
            magnetic=magnetic,
        )


@dataclass(frozen=True)
class TestFunctionConfig:
    '''
    A Gaussian wavepacket; spin and spin_imag give the real and imaginary parts of the two spin amplitudes.
    '''

    center: List[float] = field(default_factory=lambda: [0.0])
    width: float = 1.0
    momentum: List[float] = field(default_factory=list)
    spin: Optional[List[float]] = None
    spin_imag: Optional[List[float]] = None

    def __post_init__(self) -> None:
        if self.spin_imag is not None and self.spin is None:
            raise ConfigError("spin_imag needs spin")
        self.build()

    def build(self) -> TestFunction:
        spin = None
        if self.spin is not None:
            imag = self.spin_imag or [0.0] * len(self.spin)
            if len(self.spin) != 2 or len(imag) != 2:
                raise ConfigError("spin amplitudes need exactly two entries")
            spin = (complex(self.spin[0], imag[0]), complex(self.spin[1], imag[1]))
        return TestFunction(tuple(self.center), self.width, tuple(self.momentum), spin)


@dataclass(frozen=True)
class DiscretizationConfig:
    n_outer: int = DEFAULT_N_OUTER
    inner_step: Optional[float] = None
    share_paths: bool = True

    def __post_init__(self) -> None:
        self.build()

    def build(self, convention: str = PRE_JUMP) -> Discretization:
        return Discretization(self.n_outer, self.inner_step, convention, self.share_paths)


@dataclass(frozen=True)
class GridConfig:
    '''
    Oracle grid; boundary_margin and boundary_tol set the rule that test functions keep
    mass at most boundary_tol within boundary_margin cells of the wrap.
    '''

    n_per_axis: int = 64
    half_extent: float = 8.0
    stencil: str = PEIERLS
    cap: int = DEFAULT_GRID_CAP
    boundary_margin: int = DEFAULT_BOUNDARY_MARGIN
    boundary_tol: float = DEFAULT_BOUNDARY_TOL

    def __post_init__(self) -> None:
        if self.stencil not in STENCILS:
            raise ConfigError(f"stencil must be one of {list(STENCILS)}")
        if self.boundary_margin < 0 or self.boundary_tol <= 0.0:
            raise ConfigError("boundary_margin must be >= 0 and boundary_tol positive")

    def build(self, dimension: int, spin: bool) -> GridSpec:
        return GridSpec(dimension, self.n_per_axis, self.half_extent, spin, self.stencil, self.cap)


@dataclass(frozen=True)
class CriteriaConfig:
    '''
    Pass/fail thresholds. SE-based ones are in standard-error units.
    '''

    pass_se: float = 4.0
    outlier_budget: int = 0
    trend_se: float = 2.0
    reject_se: float = 10.0
    slope_rtol: float = 0.15
    gap_tolerance: float = 1e-3
    fourier_tolerance: float = 1e-6
    gauge_tolerance: float = 1e-12
    kurtosis_threshold: float = DEFAULT_KURTOSIS_THRESHOLD


@dataclass(frozen=True)
class SamplerConfig:
    split_acceptance: float = DEFAULT_SPLIT_ACCEPTANCE
    max_rounds: int = DEFAULT_MAX_ROUNDS

    def __post_init__(self) -> None:
        self.build()

    def build(self) -> SamplerSettings:
        return SamplerSettings(self.split_acceptance, self.max_rounds)


@dataclass(frozen=True)
class ExperimentConfig:
    '''
    One experiment run.

    Attributes:
        experiment (str): laplace, moments, compare, limit or sample.
        seed (int): Experiment seed.
        workers (int): Process pool size.
        out (str): Output directory.
        samples (int): Monte Carlo sample count per row.
        chunk_size (int): Samples per parallel chunk.
        params (list): Parameter tuples; sweeps replace c by each of c_values.
        c_values (list): Values of c for sweeps.
        u_values, t_values (list): Transform arguments and times.
        moment_orders (list): Orders n of E|T - t_alpha|^n.
        trend_u (float, optional): Fixed u for the c -> infinity exponential-moment trend rows.
        estimator (str): spinless, pauli_nonrel or pauli_rel for compare runs.
        spin_entries (bool): Estimate all four spin matrix entries with basis spin amplitudes.
        conventions (list): Jump conventions to run for spin estimators.
        gauge_check (bool): Also run the spinless estimator under a + grad(|x|^2 / 2).
        mc_check_c (float, optional): c of the Monte Carlo spot check of a limit sweep.
        coupled_gap (bool): Also estimate the coupled spin-weight gap in spin limit sweeps.
    '''

    experiment: str
    seed: int = 20240101
    workers: int = 1
    out: str = "results"
    samples: int = 100_000
    chunk_size: int = DEFAULT_CHUNK_SIZE
    params: List[ModelParams] = field(default_factory=lambda: [ModelParams.classical()])
    c_values: List[float] = field(default_factory=list)
    u_values: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    t_values: List[float] = field(default_factory=lambda: [1.0])
    moment_orders: List[int] = field(default_factory=lambda: [1, 2, 4])
    trend_u: Optional[float] = None
    estimator: str = SPINLESS
    spin_entries: bool = False
    conventions: List[str] = field(default_factory=lambda: [PRE_JUMP])
    gauge_check: bool = False
    mc_check_c: Optional[float] = None
    coupled_gap: bool = False
    fields: FieldsConfig = field(default_factory=FieldsConfig)
    f: TestFunctionConfig = field(default_factory=TestFunctionConfig)
    g: TestFunctionConfig = field(default_factory=TestFunctionConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    criteria: CriteriaConfig = field(default_factory=CriteriaConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {list(EXPERIMENTS)}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {list(ESTIMATORS)}")
        if not self.conventions or any(c not in CONVENTIONS for c in self.conventions):
            raise ConfigError(f"conventions must be a non-empty subset of {list(CONVENTIONS)}")
        if self.samples < 2 or self.chunk_size < 1 or self.workers < 1:
            raise ConfigError("samples must be >= 2, chunk_size and workers >= 1")
        if not self.params:
            raise ConfigError("params must hold at least one parameter tuple")
        if any(c <= 0.0 for c in self.c_values):
            raise ConfigError("c_values must be positive")
        if any(t < 0.0 for t in self.t_values) or any(u < 0.0 for u in self.u_values):
            raise ConfigError("t_values and u_values must be nonnegative")
        for name in ("f", "g"):
            if len(getattr(self, name).center) != self.fields.dimension:
                raise ConfigError(f"{name}.center must have {self.fields.dimension} entries")

    @property
    def spin(self) -> bool:
        return self.estimator != SPINLESS

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping, source: str = "<dict>") -> "ExperimentConfig":
        return _convert(dict(data), cls, (), _Context(source, {}))


@dataclass
class _Context:
    source: str
    lines: Dict[tuple, int]

    def error(self, path: tuple, message: str) -> ConfigError:
        where = path
        while where not in self.lines and where:
            where = where[:-1]
        line = self.lines.get(where)
        dotted = ".".join(str(p) for p in path) or "<root>"
        location = f"{self.source}:{line}" if line is not None else self.source
        return ConfigError(f"{location}: {dotted}: {message}")


def _convert(value: Any, tp: Any, path: tuple, ctx: _Context) -> Any:
    origin = get_origin(tp)
    if tp is Any:
        return value
    if origin is Union:
        args = [a for a in get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _convert(value, args[0], path, ctx)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ctx.error(path, f"expected a list, got {type(value).__name__}")
        (item_type,) = get_args(tp)
        return [_convert(item, item_type, path + (i,), ctx) for i, item in enumerate(value)]
    if origin in (dict, Dict):
        if not isinstance(value, dict):
            raise ctx.error(path, f"expected a mapping, got {type(value).__name__}")
        _, item_type = get_args(tp)
        return {str(k): _convert(v, item_type, path + (k,), ctx) for k, v in value.items()}
    if dataclasses.is_dataclass(tp):
        return _convert_dataclass(value, tp, path, ctx)
    if tp is bool:
        if not isinstance(value, bool):
            raise ctx.error(path, f"expected true or false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ctx.error(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ctx.error(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ctx.error(path, f"expected a string, got {value!r}")
        return value
    raise ctx.error(path, f"unsupported config type {tp}")


def _convert_dataclass(value: Any, tp: type, path: tuple, ctx: _Context) -> Any:
    if isinstance(value, tp):
        return value
    if not isinstance(value, dict):
        raise ctx.error(path, f"expected a mapping, got {type(value).__name__}")
    hints = get_type_hints(tp)
    names = {f.name for f in dataclasses.fields(tp)}
    for key in value:
        if key not in names:
            raise ctx.error(path + (key,), f"unknown key '{key}'; expected one of {sorted(names)}")
    kwargs = {key: _convert(item, hints[key], path + (key,), ctx) for key, item in value.items()}
    try:
        return tp(**kwargs)
    except (ConfigError, DomainError) as e:
        raise ctx.error(path, str(e)) from e
    except TypeError as e:
        raise ctx.error(path, f"missing required key: {e}") from e


def _line_map(node: yaml.Node, path: tuple, lines: Dict[tuple, int]) -> None:
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            child = path + (key_node.value,)
            _line_map(value_node, child, lines)
            lines[child] = key_node.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_map(item, path + (i,), lines)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """
    Parses YAML text into an ExperimentConfig.

    Raises:
        ConfigError: On YAML syntax errors or schema violations, with file:line context.
    """
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: invalid YAML: {getattr(e, 'problem', e)}") from e
    if node is None or not isinstance(data, dict):
        raise ConfigError(f"{source}:1: <root>: the config must be a YAML mapping")
    lines: Dict[tuple, int] = {}
    _line_map(node, (), lines)
    return _convert(data, ExperimentConfig, (), _Context(source, lines))


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text, source=path)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def apply_overrides(
        config: ExperimentConfig,
        environ: Optional[Mapping[str, str]] = None,
        seed: Optional[int] = None,
        workers: Optional[int] = None,
        out: Optional[str] = None,
    ) -> ExperimentConfig:
    """
    Applies environment overrides, then explicit ones; explicit values win.

    Raises:
        ConfigError: If an environment value does not parse.
    """
    environ = os.environ if environ is None else environ
    changes: Dict[str, Any] = {}
    for key, env, cast in (("seed", ENV_SEED, int), ("workers", ENV_WORKERS, int), ("out", ENV_OUT, str)):
        raw = environ.get(env)
        if raw:
            try:
                changes[key] = cast(raw)
            except ValueError as e:
                raise ConfigError(f"{env}={raw!r} is not a valid {cast.__name__}") from e
    for key, value in (("seed", seed), ("workers", workers), ("out", out)):
        if value is not None:
            changes[key] = value
    return dataclasses.replace(config, **changes) if changes else config


def build_grid(config: ExperimentConfig) -> GridSpec:
    return config.grid.build(config.fields.dimension, config.spin)


def parameter_sweep(config: ExperimentConfig) -> List[Tuple[ModelParams, float]]:
    """
    (params, c) pairs of a sweep: each parameter tuple with c replaced by every entry of c_values.
    """
    if not config.c_values:
        return [(p, p.c) for p in config.params]
    return [(p.with_c(c), c) for p in config.params for c in config.c_values]
