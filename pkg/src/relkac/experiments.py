'''
Experiment harness: Laplace checks, moment sweeps, oracle comparisons, limit sweeps

Every runner takes an ExperimentConfig and returns a ResultTable whose checks
are computed from the table's own rows. emit_results writes the table as CSV
(12 significant digits, no timing columns, so reruns are byte-identical) plus
a JSON sidecar with the config echo, checks and wall times.
'''

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .config import ExperimentConfig, build_grid, parameter_sweep
from .errors import DomainError, RelKacError
from .fields import FieldConfig, GaugedTestFunction, GradientVectorPotential, ShiftedVectorPotential
from .fk_engine import (
    PAULI_REL,
    FeynmanKacEngine,
    PairingEstimate,
    pauli_norm_bound,
    spinless_norm_bound,
)
from .model import (
    LimitCoefficients,
    ModelParams,
    consistency_report,
    exponential_moment,
    laplace_exponent,
    mean_rate,
    variance_rate,
)
from .oracle import (
    apply_bernstein,
    check_boundary_mass,
    discretize_h,
    fourier_pairing,
    limit_generator,
    nonrelativistic_pauli,
    relativistic_operator,
    semigroup_norm_gap,
    semigroup_pairing,
)
from .paths import CONVENTIONS
from .sampler import RngStream, SamplerSettings, sample_subordinator_path, sample_tempered_increment
from .stats import RunningMoments, chunk_ranges, map_ordered

log = logging.getLogger(__name__)

CLOSED_FORM = "closed-form"
ORACLE = "oracle"
FOURIER = "fourier"
LIMIT = "limit"
GAUGE = "gauge"
INFINITE = "infinite"
NONE = "none"

# Limit pairings below this fraction of ||f|| ||g|| count as zero; gaps below it count as converged.
GAP_FLOOR = 1e-12
RELATIVE = "relative"
ABSOLUTE = "absolute"

_TAIL_COLUMNS = [
    "estimate_re", "estimate_im", "stderr",
    "reference_re", "reference_im", "reference_source",
    "abs_gap", "discrepancy_se", "passed", "note",
]


@dataclass
class ResultRow:
    '''
    One line of a result table.

    Attributes:
        experiment (str): Experiment kind.
        case (str): Row label within the experiment.
        parameters (dict): Parameter columns, in insertion order.
        estimate (complex): Monte Carlo or oracle value.
        stderr (float): Standard error; 0 for deterministic rows.
        reference (complex, optional): Value the estimate is checked against.
        reference_source (str): closed-form, oracle, fourier, limit, gauge, infinite or none.
        passed (bool, optional): Row-level verdict when the row carries a criterion.
        note (str): Free text, e.g. a recorded per-row failure.
        wall_time (float): Seconds spent on the row; kept out of the CSV.
    '''

    experiment: str
    case: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    estimate: complex = complex(math.nan, math.nan)
    stderr: float = math.nan
    reference: Optional[complex] = None
    reference_source: str = NONE
    passed: Optional[bool] = None
    note: str = ""
    wall_time: float = 0.0

    @property
    def has_reference(self) -> bool:
        return self.reference is not None and self.reference_source != INFINITE

    @property
    def abs_gap(self) -> float:
        return abs(self.estimate - self.reference) if self.has_reference else math.nan

    @property
    def discrepancy(self) -> float:
        """
        |estimate - reference| / stderr for Monte Carlo rows; nan for deterministic rows or without reference.
        """
        if not self.has_reference or not self.stderr > 0.0:
            if self.has_reference and self.stderr == 0.0 and self.abs_gap == 0.0:
                return 0.0
            return math.nan
        return self.abs_gap / self.stderr

    def to_record(self) -> dict:
        reference = self.reference if self.reference is not None else complex(math.nan, math.nan)
        record = {"experiment": self.experiment, "case": self.case}
        record.update(self.parameters)
        record.update({
            "estimate_re": self.estimate.real,
            "estimate_im": self.estimate.imag,
            "stderr": self.stderr,
            "reference_re": reference.real,
            "reference_im": reference.imag,
            "reference_source": self.reference_source,
            "abs_gap": self.abs_gap,
            "discrepancy_se": self.discrepancy,
            "passed": "" if self.passed is None else str(self.passed).lower(),
            "note": self.note,
        })
        return record


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ResultTable:
    '''
    Rows plus the table-level checks derived from them.

    Methods:
        add:
            Appends a row and logs its outcome.
        check:
            Records a named pass/fail criterion.
        to_frame:
            The rows as a pandas DataFrame in fixed column order.
    '''

    experiment: str
    rows: List[ResultRow] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, row: ResultRow) -> ResultRow:
        self.rows.append(row)
        log.info(
            "%s %s: %.6g%+.6gj (se %.3g) vs %s [%s]%s",
            row.experiment, row.case, row.estimate.real, row.estimate.imag, row.stderr,
            "-" if row.reference is None else f"{row.reference.real:.6g}{row.reference.imag:+.6g}j",
            row.reference_source, "" if row.passed is None else (" ok" if row.passed else " FAIL"),
        )
        return row

    def check(self, name: str, passed: bool, detail: str = "") -> Check:
        result = Check(name, bool(passed), detail)
        self.checks.append(result)
        (log.info if result.passed else log.warning)("check %s: %s %s", name, "pass" if result.passed else "FAIL", detail)
        return result

    def to_frame(self) -> pd.DataFrame:
        records = [row.to_record() for row in self.rows]
        parameter_columns: List[str] = []
        for row in self.rows:
            for key in row.parameters:
                if key not in parameter_columns:
                    parameter_columns.append(key)
        columns = ["experiment", "case"] + parameter_columns + _TAIL_COLUMNS
        if not any(row.has_reference for row in self.rows):
            columns = [c for c in columns if c not in ("abs_gap", "discrepancy_se")]
        return pd.DataFrame.from_records(records, columns=columns)


def _params_columns(params: ModelParams) -> dict:
    return params.to_dict()


def _mc_row(experiment, case, parameters, moments: RunningMoments, reference, source, pass_se) -> ResultRow:
    row = ResultRow(experiment, case, parameters, complex(moments.mean), moments.stderr, reference, source)
    if row.has_reference:
        row.passed = bool(row.discrepancy <= pass_se) if not math.isnan(row.discrepancy) else False
    return row


def _estimate_row(experiment, case, parameters, estimate: PairingEstimate, reference, source, pass_se) -> ResultRow:
    row = ResultRow(experiment, case, parameters, estimate.mean, estimate.stderr, reference, source)
    row.passed = bool(estimate.discrepancy(reference) <= pass_se)
    if estimate.kurtosis_alarm:
        row.note = f"kurtosis alarm ({estimate.kurtosis:.3g})"
    return row


def _failed_row(experiment: str, case: str, parameters: dict, error: Exception) -> ResultRow:
    log.error("%s %s failed: %s", experiment, case, error)
    return ResultRow(experiment, case, parameters, note=f"{type(error).__name__}: {error}", passed=False)


def _timed(table: ResultTable, experiment: str, case: str, parameters: dict, build: Callable[[], Sequence[ResultRow]]) -> List[ResultRow]:
    """
    Runs one row builder, recording a failed row instead of aborting on library errors.
    """
    start = time.perf_counter()
    try:
        rows = list(build())
    except RelKacError as e:
        rows = [_failed_row(experiment, case, parameters, e)]
    elapsed = time.perf_counter() - start
    for row in rows:
        row.wall_time = elapsed / len(rows)
        table.add(row)
    return rows


def derive_seed(seed: int, group: int) -> int:
    """
    Independent 64-bit seed for row group `group` of an experiment.
    """
    return int(np.random.SeedSequence([seed & (2 ** 64 - 1), group]).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class _HorizonChunk:
    seed: int
    params: ModelParams
    t: float
    start: int
    stop: int
    settings: SamplerSettings


def _draw_horizon_chunk(task: _HorizonChunk) -> np.ndarray:
    gen = RngStream(task.seed, task.start).generator()
    return sample_tempered_increment(task.params, task.t, gen, size=task.stop - task.start, settings=task.settings)


def draw_horizons(config: ExperimentConfig, params: ModelParams, t: float, group: int) -> np.ndarray:
    """
    config.samples i.i.d. draws of T_t; the chunk starting at index i uses stream i of the group seed.

    Each chunk draws its block in one vectorized call, so the draws are reproducible for a
    fixed (seed, chunk_size) and independent of workers, but change with chunk_size.
    """
    if t == 0.0:
        return np.zeros(config.samples)
    seed = derive_seed(config.seed, group)
    tasks = [
        _HorizonChunk(seed, params, t, start, stop, config.sampler.build())
        for start, stop in chunk_ranges(config.samples, config.chunk_size)
    ]
    return np.concatenate(map_ordered(_draw_horizon_chunk, tasks, config.workers))


def _decreasing_beyond_noise(values: Sequence[float], errors: Sequence[float], noise_se: float) -> bool:
    return all(
        values[k + 1] - values[k] <= noise_se * math.hypot(errors[k], errors[k + 1])
        for k in range(len(values) - 1)
    )


def limit_pairing_gap(value: complex, limit_value: complex, scale: float) -> Tuple[float, str]:
    """
    |value - limit| relative to |limit|, or relative to `scale` (normally ||f|| ||g||) when
    the limit pairing vanishes, e.g. for spin-orthogonal entries.
    """
    if abs(limit_value) <= GAP_FLOOR * scale:
        return abs(value - limit_value) / scale, ABSOLUTE
    return abs(value - limit_value) / abs(limit_value), RELATIVE


def _loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _outlier_check(table: ResultTable, name: str, rows: Sequence[ResultRow], budget: int) -> None:
    judged = [r for r in rows if r.passed is not None]
    failures = sum(1 for r in judged if not r.passed)
    table.check(name, judged and failures <= budget, f"{failures} of {len(judged)} rows outside threshold (budget {budget})")


def run_laplace_check(config: ExperimentConfig) -> ResultTable:
    """
    Monte Carlo E[exp(-u T_t)] against exp(-t Psi_c(u)), E[exp(theta/2 T_t)] against the
    exponential moment, and, with trend_u set, the approach of E[exp(trend_u T_t)] to
    exp(t kappa trend_u) as c grows.
    """
    table = ResultTable("laplace")
    crit = config.criteria
    trend: Dict[Tuple[int, float], List[Tuple[float, ResultRow, float]]] = {}
    sweep = parameter_sweep(config)
    for group, ((params, c), t) in enumerate(product(sweep, config.t_values)):
        base = _params_columns(params)
        base["t"] = t

        def build(params=params, t=t, group=group, base=base):
            draws = draw_horizons(config, params, t, group)
            rows = []
            for u in config.u_values:
                moments = RunningMoments.from_samples(np.exp(-u * draws))
                reference = complex(math.exp(-t * laplace_exponent(params, u)))
                rows.append(_mc_row("laplace", "laplace", {**base, "u": u}, moments, reference, CLOSED_FORM, crit.pass_se))
            u = params.theta / 2.0
            moments = RunningMoments.from_samples(np.exp(u * draws))
            reference = complex(exponential_moment(params, u, t))
            rows.append(_mc_row("laplace", "exp_moment", {**base, "u": u}, moments, reference, CLOSED_FORM, crit.pass_se))
            if config.trend_u is not None:
                u = config.trend_u
                limit = math.exp(t * LimitCoefficients.from_params(params).kappa * u)
                if u >= params.theta:
                    rows.append(ResultRow("laplace", "trend", {**base, "u": u, "limit": limit}, reference=complex(math.inf), reference_source=INFINITE))
                else:
                    moments = RunningMoments.from_samples(np.exp(u * draws))
                    reference = complex(exponential_moment(params, u, t))
                    rows.append(_mc_row("laplace", "trend", {**base, "u": u, "limit": limit}, moments, reference, CLOSED_FORM, crit.pass_se))
            return rows

        for row in _timed(table, "laplace", "laplace", base, build):
            if row.case == "trend" and row.has_reference:
                key = (_base_index(config, params), t)
                trend.setdefault(key, []).append((c, row, row.parameters["limit"]))

    _outlier_check(table, "laplace_identity", [r for r in table.rows if r.case in ("laplace", "exp_moment")], crit.outlier_budget)
    for (index, t), entries in sorted(trend.items()):
        entries.sort(key=lambda e: e[0])
        distances = [abs(row.estimate.real - limit) for _, row, limit in entries]
        errors = [row.stderr for _, row, _ in entries]
        table.check(
            f"moment_trend[params={index},t={t:g}]",
            _decreasing_beyond_noise(distances, errors, crit.trend_se),
            "distance to exp(t kappa u): " + ", ".join(f"c={c:g}:{d:.4g}" for (c, _, _), d in zip(entries, distances)),
        )
    return table


def _base_index(config: ExperimentConfig, params: ModelParams) -> int:
    for i, p in enumerate(config.params):
        if (p.alpha, p.beta, p.gamma, p.m) == (params.alpha, params.beta, params.gamma, params.m):
            return i
    return -1


def run_moment_sweep(config: ExperimentConfig) -> ResultTable:
    """
    E|T_t - t_alpha|^n over the c sweep; n = 2 is checked against Var + (E T - t_alpha)^2,
    every order must decrease beyond noise, and the n = 2 log-log slope must match -gamma.
    """
    table = ResultTable("moments")
    crit = config.criteria
    c_values = sorted(config.c_values) if config.c_values else None
    group = 0
    for index, base_params in enumerate(config.params):
        report = consistency_report(base_params)
        if not report.derived_constraint_holds:
            log.warning("params %s are not consistent (exponent %.3g); the sweep has no finite limit", base_params, report.exponent)
        for t in config.t_values:
            series: Dict[int, List[ResultRow]] = {n: [] for n in config.moment_orders}
            for c in (c_values or [base_params.c]):
                params = base_params.with_c(c)
                t_alpha = LimitCoefficients.from_params(params).limit_time(t)
                base = {**_params_columns(params), "t": t}

                def build(params=params, t=t, t_alpha=t_alpha, base=base, group=group):
                    deviation = np.abs(draw_horizons(config, params, t, group) - t_alpha)
                    rows = []
                    for n in config.moment_orders:
                        moments = RunningMoments.from_samples(deviation ** n)
                        if n == 2:
                            reference = complex(variance_rate(params, t) + (mean_rate(params, t) - t_alpha) ** 2)
                            rows.append(_mc_row("moments", f"n={n}", {**base, "n": n}, moments, reference, CLOSED_FORM, crit.pass_se))
                        elif t == 0.0:
                            rows.append(_mc_row("moments", f"n={n}", {**base, "n": n}, moments, 0j, CLOSED_FORM, crit.pass_se))
                        else:
                            rows.append(_mc_row("moments", f"n={n}", {**base, "n": n}, moments, None, NONE, crit.pass_se))
                    return rows

                for row in _timed(table, "moments", "moments", base, build):
                    if "n" in row.parameters:
                        series[row.parameters["n"]].append(row)
                group += 1
            if t == 0.0 or len(c_values or []) < 2:
                continue
            for n, rows in series.items():
                values = [r.estimate.real for r in rows]
                table.check(
                    f"decreasing[params={index},t={t:g},n={n}]",
                    _decreasing_beyond_noise(values, [r.stderr for r in rows], crit.trend_se),
                    ", ".join(f"{v:.4g}" for v in values),
                )
            if 2 in series and len(series[2]) == len(c_values) and report.derived_constraint_holds:
                slope = _loglog_slope(c_values, [r.estimate.real for r in series[2]])
                target = -base_params.gamma
                table.check(
                    f"slope[params={index},t={t:g},n=2]",
                    abs(slope - target) <= crit.slope_rtol * abs(target),
                    f"fitted {slope:.4f} vs {target:.4f}",
                )
    _outlier_check(table, "second_moment", [r for r in table.rows if r.passed is not None], crit.outlier_budget)
    return table


def _engine(config: ExperimentConfig) -> FeynmanKacEngine:
    return FeynmanKacEngine(
        seed=config.seed,
        workers=config.workers,
        chunk_size=config.chunk_size,
        settings=config.sampler.build(),
        kurtosis_threshold=config.criteria.kurtosis_threshold,
    )


def _check_boundary(config: ExperimentConfig, f, grid) -> float:
    return check_boundary_mass(f, grid, config.grid.boundary_margin, config.grid.boundary_tol)


def _spin_cases(config: ExperimentConfig):
    f, g = config.f.build(), config.g.build()
    if not config.spin_entries:
        return [("fg", f, g)]
    basis = ((1.0, 0.0), (0.0, 1.0))
    return [(f"{i}{j}", f.with_spin(basis[i]), g.with_spin(basis[j])) for i in range(2) for j in range(2)]


def _compare_spinless(config: ExperimentConfig, table: ResultTable, engine: FeynmanKacEngine) -> None:
    crit = config.criteria
    fields = config.fields.build()
    grid = build_grid(config)
    f, g = config.f.build(), config.g.build()
    _check_boundary(config, f, grid)
    _check_boundary(config, g, grid)
    disc = config.discretization.build()
    for (params, c), t in product(parameter_sweep(config), config.t_values):
        base = {**_params_columns(params), "t": t}

        def build(params=params, t=t, base=base):
            reference = semigroup_pairing(relativistic_operator(fields, grid, params), f, g, t)
            estimate = engine.estimate_pairing_spinless(params, fields, f, g, t, config.samples, disc)
            rows = [_estimate_row("compare", "spinless", base, estimate, reference, ORACLE, crit.pass_se)]
            bound = spinless_norm_bound(fields, t) * f.norm * g.norm
            rows.append(ResultRow(
                "compare", "norm_bound", base, estimate.mean, estimate.stderr, complex(bound), CLOSED_FORM,
                passed=abs(estimate.mean) <= bound + crit.pass_se * estimate.stderr,
            ))
            if fields.dimension == 1:
                free = apply_bernstein(discretize_h(FieldConfig(dimension=1), grid), params)
                grid_value = semigroup_pairing(free, f, g, t)
                quadrature = fourier_pairing(params, f, g, t)
                rows.append(ResultRow(
                    "compare", "fourier", base, grid_value, 0.0, quadrature, FOURIER,
                    passed=abs(grid_value - quadrature) <= crit.fourier_tolerance,
                ))
            if config.gauge_check:
                gauge = GradientVectorPotential(scale=1.0)
                shifted = fields.with_vector_potential(ShiftedVectorPotential(fields.vector_potential, gauge))
                moved = engine.estimate_pairing_spinless(params, shifted, f, g, t, config.samples, disc)
                gauged = engine.estimate_pairing_spinless(
                    params, fields, GaugedTestFunction(f, gauge), GaugedTestFunction(g, gauge), t, config.samples, disc
                )
                rows.append(ResultRow(
                    "compare", "gauge", base, moved.mean, moved.stderr, gauged.mean, GAUGE,
                    passed=abs(moved.mean - gauged.mean) <= crit.gauge_tolerance * max(1.0, abs(gauged.mean)),
                ))
            return rows

        _timed(table, "compare", "spinless", base, build)
    _outlier_check(table, "spinless_vs_oracle", [r for r in table.rows if r.case == "spinless"], crit.outlier_budget)
    for case in ("norm_bound", "fourier", "gauge"):
        rows = [r for r in table.rows if r.case == case]
        if rows:
            table.check(case, all(r.passed for r in rows), f"{len(rows)} rows")


def _compare_pauli(config: ExperimentConfig, table: ResultTable, engine: FeynmanKacEngine) -> None:
    crit = config.criteria
    fields = config.fields.build()
    grid = build_grid(config)
    relativistic = config.estimator == PAULI_REL
    by_convention: Dict[str, List[ResultRow]] = {c: [] for c in config.conventions}
    for (params, c), t in product(parameter_sweep(config), config.t_values):
        op = relativistic_operator(fields, grid, params) if relativistic else nonrelativistic_pauli(fields, grid)
        for label, f, g in _spin_cases(config):
            _check_boundary(config, f, grid)
            _check_boundary(config, g, grid)
            reference = semigroup_pairing(op, f, g, t)
            for convention in config.conventions:
                base = {**_params_columns(params), "t": t, "entry": label, "convention": convention}
                disc = config.discretization.build(convention)

                def build(params=params, f=f, g=g, t=t, disc=disc, base=base, reference=reference):
                    if relativistic:
                        estimate = engine.estimate_pairing_pauli_rel(params, fields, f, g, t, config.samples, disc)
                    else:
                        estimate = engine.estimate_pairing_pauli_nonrel(fields, f, g, t, config.samples, disc)
                    rows = [_estimate_row("compare", config.estimator, base, estimate, reference, ORACLE, crit.pass_se)]
                    if relativistic:
                        bound = pauli_norm_bound(params, fields, t) * f.norm * g.norm
                        rows.append(ResultRow(
                            "compare", "norm_bound", base, estimate.mean, estimate.stderr, complex(bound), CLOSED_FORM,
                            passed=abs(estimate.mean) <= bound + crit.pass_se * estimate.stderr,
                        ))
                    return rows

                for row in _timed(table, "compare", config.estimator, base, build):
                    if row.case == config.estimator:
                        by_convention[convention].append(row)
    if len(config.conventions) == len(CONVENTIONS):
        matching = [c for c, rows in by_convention.items() if rows and all(r.passed for r in rows)]
        rejected = [
            c for c, rows in by_convention.items()
            if any(not math.isnan(r.discrepancy) and r.discrepancy > crit.reject_se for r in rows)
        ]
        winner = matching[0] if len(matching) == 1 else None
        table.metadata["winning_convention"] = winner
        table.check(
            "jump_convention",
            winner is not None and [c for c in config.conventions if c != winner] == rejected,
            f"matching {matching}, rejected beyond {crit.reject_se:g} SE {rejected}",
        )
    else:
        for convention, rows in by_convention.items():
            _outlier_check(table, f"{config.estimator}_vs_oracle[{convention}]", rows, crit.outlier_budget)
    bounds = [r for r in table.rows if r.case == "norm_bound"]
    if bounds:
        table.check("norm_bound", all(r.passed for r in bounds), f"{len(bounds)} rows")


def run_oracle_compare(config: ExperimentConfig) -> ResultTable:
    """
    Runs the configured Feynman-Kac estimator against the grid oracle.

    Spinless runs add the norm bound, the Fourier-side cross-check of the grid oracle
    in one dimension and, optionally, the per-path gauge identity. Pauli runs with both
    jump conventions record which one matches the oracle.
    """
    table = ResultTable("compare")
    engine = _engine(config)
    if config.spin:
        _compare_pauli(config, table, engine)
    else:
        _compare_spinless(config, table, engine)
    return table


def _coupled_gap_rows(config, table, base_params, fields, f, c_values) -> None:
    """
    E|exp(W_T) - exp(W_t_alpha)|^2 from both initial spins at f's center, which must decrease beyond noise in c.
    """
    engine = _engine(config)
    t = config.t_values[0]
    disc = config.discretization.build(config.conventions[0])
    for initial_spin in (1, -1):
        rows = []
        for c in c_values:
            params = base_params.with_c(c)
            base = {**_params_columns(params), "t": t, "initial_spin": initial_spin}

            def build(params=params, base=base, initial_spin=initial_spin):
                estimate = engine.estimate_coupled_weight_gap(params, fields, t, config.samples, f.center, initial_spin, disc)
                return [ResultRow("limit", "coupled_gap", base, estimate.mean, estimate.stderr)]

            rows.extend(r for r in _timed(table, "limit", "coupled_gap", base, build) if r.note == "")
        values = [r.estimate.real for r in rows]
        table.check(
            f"coupled_gap_decreasing[spin={initial_spin:+d}]",
            len(rows) == len(c_values) and _decreasing_beyond_noise(values, [r.stderr for r in rows], config.criteria.trend_se),
            ", ".join(f"{v:.4g}" for v in values),
        )


def run_nr_limit_sweep(config: ExperimentConfig) -> ResultTable:
    """
    Oracle pairings under the relativistic operator for ascending c against the limit generator.

    The gap is relative to the limit pairing, or to ||f|| ||g|| when that pairing vanishes
    (gap_kind column). Checks that the gap decreases strictly until it reaches GAP_FLOOR,
    ends below gap_tolerance, has a log-log slope within slope_rtol of -gamma over the
    upper half of the sweep, and that every pairing respects the computed norm bound.
    Spin runs with coupled_gap set also estimate the coupled spin-weight gap per c, and
    an optional Monte Carlo spot check runs at mc_check_c.

    Raises:
        DomainError: If the parameters are not consistent or no c values are configured.
    """
    table = ResultTable("limit")
    crit = config.criteria
    base_params = config.params[0]
    report = consistency_report(base_params)
    if not report.derived_constraint_holds:
        raise DomainError(f"limit sweeps need consistent parameters; exponent is {report.exponent:.6g}")
    if len(config.c_values) < 2:
        raise DomainError("limit sweeps need at least two c values")
    fields = config.fields.build()
    grid = build_grid(config)
    f, g = config.f.build(), config.g.build()
    _check_boundary(config, f, grid)
    _check_boundary(config, g, grid)
    kappa = LimitCoefficients.from_params(base_params).kappa
    if config.spin and kappa != 1.0 and fields.potential_sup > 0.0:
        log.warning("Pauli limit generator scales V by kappa=%g while the relativistic operator does not", kappa)
    c_values = sorted(config.c_values)
    limit_op = limit_generator(fields, grid, base_params)
    for t in config.t_values:
        limit_value = semigroup_pairing(limit_op, f, g, t)
        gaps = []
        for c in c_values:
            params = base_params.with_c(c)
            base = {**_params_columns(params), "t": t}

            def build(params=params, t=t, base=base):
                op = relativistic_operator(fields, grid, params)
                value = semigroup_pairing(op, f, g, t)
                bound = (pauli_norm_bound(params, fields, t) if config.spin else spinless_norm_bound(fields, t)) * f.norm * g.norm
                gap, kind = limit_pairing_gap(value, limit_value, f.norm * g.norm)
                columns = {**base, "gap": gap, "gap_kind": kind, "norm_gap": semigroup_norm_gap(op, limit_op, t), "bound": bound}
                row = ResultRow("limit", "gap", columns, value, 0.0, limit_value, LIMIT)
                row.passed = abs(value) <= bound * (1.0 + 1e-12)
                return [row]

            for row in _timed(table, "limit", "gap", base, build):
                if "gap" in row.parameters:
                    gaps.append((c, row.parameters["gap"]))
        if len(gaps) == len(c_values):
            values = [gap for _, gap in gaps]
            table.check(
                f"gap_decreasing[t={t:g}]",
                all(b < a or b <= GAP_FLOOR for a, b in zip(values, values[1:])),
                ", ".join(f"{v:.3g}" for v in values),
            )
            table.check(f"final_gap[t={t:g}]", values[-1] < crit.gap_tolerance, f"{values[-1]:.3g} < {crit.gap_tolerance:g}")
            upper = gaps[len(gaps) // 2:] if len(gaps) >= 4 else gaps
            if len(upper) >= 2 and all(v > GAP_FLOOR for _, v in upper):
                slope = _loglog_slope([c for c, _ in upper], [v for _, v in upper])
                target = -base_params.gamma
                table.check(f"gap_slope[t={t:g}]", abs(slope - target) <= crit.slope_rtol * abs(target), f"fitted {slope:.4f} vs {target:.4f}")
    bounds = [r for r in table.rows if r.case == "gap"]
    table.check("uniform_bound", bool(bounds) and all(r.passed for r in bounds), f"{len(bounds)} rows")
    if config.coupled_gap and config.spin:
        _coupled_gap_rows(config, table, base_params, fields, f, c_values)
    if config.mc_check_c is not None:
        engine = _engine(config)
        params = base_params.with_c(config.mc_check_c)
        t = config.t_values[0]
        base = {**_params_columns(params), "t": t}

        def spot_check():
            reference = semigroup_pairing(relativistic_operator(fields, grid, params), f, g, t)
            disc = config.discretization.build(config.conventions[0])
            if config.spin:
                estimate = engine.estimate_pairing_pauli_rel(params, fields, f, g, t, config.samples, disc)
            else:
                estimate = engine.estimate_pairing_spinless(params, fields, f, g, t, config.samples, disc)
            return [_estimate_row("limit", "mc_check", base, estimate, reference, ORACLE, crit.pass_se)]

        rows = _timed(table, "limit", "mc_check", base, spot_check)
        table.check("mc_check", all(r.passed for r in rows), f"c={config.mc_check_c:g}")
    return table


def run_sample_export(config: ExperimentConfig) -> pd.DataFrame:
    """
    Raw subordinator paths in long format (path, s, T) for the first parameter tuple and time.
    """
    params = config.params[0]
    t = config.t_values[0]
    if t <= 0.0:
        raise DomainError("sample export needs a positive time")
    seed = derive_seed(config.seed, 0)
    frames = []
    for i in range(config.samples):
        path = sample_subordinator_path(params, t, config.discretization.n_outer, RngStream(seed, i), config.sampler.build())
        frames.append(pd.DataFrame({"path": i, "s": path.outer_times, "T": path.cumulative}))
    return pd.concat(frames, ignore_index=True)


RUNNERS: Dict[str, Callable[[ExperimentConfig], ResultTable]] = {
    "laplace": run_laplace_check,
    "moments": run_moment_sweep,
    "compare": run_oracle_compare,
    "limit": run_nr_limit_sweep,
}


def _write(path: str, writer: Callable[[str], None]) -> None:
    try:
        writer(path)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e
    log.info("wrote %s", path)


def emit_frame(frame: pd.DataFrame, out_dir: str, stem: str, metadata: dict) -> Tuple[str, str]:
    """
    Writes <stem>.csv (UTF-8, comma, 12 significant digits) and <stem>.json into out_dir.

    Raises:
        OSError: With the offending path when a file cannot be written.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out_dir}: {e}") from e
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    json_path = os.path.join(out_dir, f"{stem}.json")
    _write(csv_path, lambda p: frame.to_csv(p, index=False, float_format="%.12g", encoding="utf-8", lineterminator="\n"))

    def write_json(p: str) -> None:
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(metadata, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")

    _write(json_path, write_json)
    return csv_path, json_path


def emit_results(table: ResultTable, out_dir: str, config: Optional[ExperimentConfig] = None) -> Tuple[str, str]:
    """
    Writes the table CSV and its JSON sidecar (config echo, seed, version, checks, wall times).
    """
    metadata = {
        "experiment": table.experiment,
        "version": __version__,
        "seed": None if config is None else config.seed,
        "config": None if config is None else config.to_dict(),
        "passed": table.passed,
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in table.checks],
        "metadata": table.metadata,
        "wall_times": [{"case": r.case, "seconds": r.wall_time} for r in table.rows],
    }
    return emit_frame(table.to_frame(), out_dir, table.experiment, metadata)
