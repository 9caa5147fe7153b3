'''
Monte Carlo estimators of semigroup pairings (f, exp(-tH) g)

Each sample owns the Philox stream (seed, sample index). Samples are cut into
fixed-size chunks of consecutive indices, chunks may run on a process pool, and
their moments are merged in chunk order, so an estimate never depends on the
number of workers.
'''

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sp_stats

from .errors import DomainError
from .fields import FieldConfig, TestFunction
from .model import LimitCoefficients, ModelParams, exponential_moment
from .paths import (
    CONVENTIONS,
    PRE_JUMP,
    assemble_weight_pauli,
    assemble_weight_spinless,
    merge_time_grid,
    spin_weight,
)
from .sampler import (
    RngStream,
    SamplerSettings,
    deterministic_subordinator_path,
    sample_brownian,
    sample_poisson_spin,
    sample_subordinator_path,
    sample_tempered_increment,
)
from .stats import ComplexMoments, chunk_ranges, map_ordered, merge_all

log = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 1024
DEFAULT_N_OUTER = 128
# Inner grid steps per unit of the limit time t_alpha when no step is configured.
DEFAULT_INNER_STEPS = 512
DEFAULT_KURTOSIS_THRESHOLD = 50.0

SPINLESS = "spinless"
PAULI_NONREL = "pauli_nonrel"
PAULI_REL = "pauli_rel"
ESTIMATORS = (SPINLESS, PAULI_NONREL, PAULI_REL)
COUPLED = "coupled"


@dataclass(frozen=True)
class Discretization:
    '''
    Time discretization and spin options of an estimator run.

    Attributes:
        n_outer (int): Number of outer steps on [0, t].
        inner_step (float, optional): Target step of the inner Brownian grid; defaults to t_alpha / 512.
        convention (str): pre_jump or post_jump spin value in the jump factors.
        share_paths (bool): Reuse one path triple for both initial spins.
    '''

    n_outer: int = DEFAULT_N_OUTER
    inner_step: Optional[float] = None
    convention: str = PRE_JUMP
    share_paths: bool = True

    def __post_init__(self) -> None:
        if self.n_outer < 1:
            raise DomainError("n_outer must be at least 1")
        if self.inner_step is not None and self.inner_step <= 0.0:
            raise DomainError("inner_step must be positive")
        if self.convention not in CONVENTIONS:
            raise DomainError(f"convention must be one of {CONVENTIONS}")

    def resolve_inner_step(self, reference_time: float) -> float:
        if self.inner_step is not None:
            return self.inner_step
        return reference_time / DEFAULT_INNER_STEPS if reference_time > 0.0 else 1.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PairingEstimate:
    '''
    A complex Monte Carlo mean with its provenance.

    Attributes:
        mean (complex): Estimated pairing.
        stderr (float): Larger of the real and imaginary standard errors.
        n_samples (int): Number of samples.
        seed (int): Experiment seed; sample i used stream (seed, i).
        discretization (dict): n_outer and the resolved inner step.
        convention (str, optional): Jump convention for spin estimators.
        kurtosis (float, optional): Excess kurtosis of the e^T (M')^N weight family.
        kurtosis_alarm (bool): Whether the kurtosis exceeded the configured threshold.
    '''

    mean: complex
    stderr: float
    n_samples: int
    seed: int
    discretization: dict = field(default_factory=dict)
    convention: Optional[str] = None
    kurtosis: Optional[float] = None
    kurtosis_alarm: bool = False

    def discrepancy(self, reference: complex) -> float:
        """
        |mean - reference| in units of the standard error.
        """
        gap = abs(self.mean - reference)
        if self.stderr == 0.0:
            return 0.0 if gap == 0.0 else math.inf
        return gap / self.stderr

    def to_dict(self) -> dict:
        data = asdict(self)
        data["mean"] = [self.mean.real, self.mean.imag]
        return data


@dataclass(frozen=True)
class _Job:
    kind: str
    seed: int
    fields: FieldConfig
    f: object
    g: object
    t: float
    n_outer: int
    inner_step: float
    convention: str
    share_paths: bool
    settings: SamplerSettings
    params: Optional[ModelParams] = None
    kappa: Optional[float] = None

    def time_change(self, gen: np.random.Generator):
        if self.kappa is not None:
            return deterministic_subordinator_path(self.kappa, self.t, self.n_outer)
        return sample_subordinator_path(self.params, self.t, self.n_outer, gen, self.settings)


@dataclass(frozen=True)
class _Chunk:
    job: _Job
    start: int
    stop: int


def _first(values) -> complex:
    return complex(np.asarray(values).ravel()[0])


def _spinless_sample(job: _Job, gen: np.random.Generator) -> Tuple[complex, float]:
    x = job.f.proposal_sample(gen)
    w0 = np.conj(_first(job.f.value(x))) / float(job.f.proposal_density(x)[0])
    if job.t == 0.0:
        return w0 * _first(job.g.value(x)), 0.0
    spath = job.time_change(gen)
    grid = merge_time_grid(spath.horizon, job.inner_step, spath.cumulative)
    bpath = sample_brownian(job.fields.dimension, grid, x, gen)
    weight = assemble_weight_spinless(job.fields, bpath, spath)
    return w0 * _first(job.g.value(bpath.positions[-1])) * weight, spath.horizon


def _pauli_paths(job: _Job, gen: np.random.Generator):
    x = job.f.proposal_sample(gen)
    if job.kind == PAULI_REL:
        outer = sample_subordinator_path(job.params, job.t, job.n_outer, gen, job.settings)
        horizon = outer.horizon
    else:
        outer = deterministic_subordinator_path(1.0, job.t, job.n_outer)
        horizon = job.t
    spin = sample_poisson_spin(horizon, 1, gen)
    grid = merge_time_grid(horizon, job.inner_step, outer.cumulative, spin.jump_times)
    bpath = sample_brownian(job.fields.dimension, grid, x, gen)
    return x, outer, spin, bpath, horizon


def _pauli_sample(job: _Job, gen: np.random.Generator) -> Tuple[complex, float]:
    if job.t == 0.0:
        x = job.f.proposal_sample(gen)
        q = float(job.f.proposal_density(x)[0])
        total = sum(np.conj(_first(job.f.value(x, s))) * _first(job.g.value(x, s)) for s in (0, 1))
        return total / q, 1.0
    paths = _pauli_paths(job, gen) if job.share_paths else None
    total = 0j
    diagnostic = 0.0
    for slot, theta0 in ((0, 1), (1, -1)):
        if not job.share_paths:
            paths = _pauli_paths(job, gen)
        x, outer, spin, bpath, horizon = paths
        spin = spin.with_initial_spin(theta0)
        end_slot = 0 if int(spin.spin_at(horizon)) == 1 else 1
        w0 = np.conj(_first(job.f.value(x, slot))) / float(job.f.proposal_density(x)[0])
        weight = assemble_weight_pauli(job.fields, bpath, spin, horizon, outer, job.convention)
        total += w0 * _first(job.g.value(bpath.positions[-1], end_slot)) * weight
        diagnostic = float(np.exp(horizon)) * job.fields.M_prime ** spin.jump_times.size
    return complex(np.exp(horizon) * total), diagnostic


@dataclass(frozen=True)
class _CoupledJob:
    seed: int
    params: ModelParams
    fields: FieldConfig
    start: Tuple[float, ...]
    initial_spin: int
    t: float
    inner_step: float
    convention: str
    settings: SamplerSettings
    kind: str = COUPLED


def _coupled_sample(job: _CoupledJob, gen: np.random.Generator) -> Tuple[complex, float]:
    horizon = sample_tempered_increment(job.params, job.t, gen, settings=job.settings)
    t_alpha = LimitCoefficients.from_params(job.params).limit_time(job.t)
    end = max(horizon, t_alpha)
    spin = sample_poisson_spin(end, job.initial_spin, gen)
    grid = merge_time_grid(end, job.inner_step, [horizon, t_alpha], spin.jump_times)
    bpath = sample_brownian(job.fields.dimension, grid, job.start, gen)
    at_horizon = spin_weight(job.fields, bpath, spin, horizon, job.convention)
    at_limit = spin_weight(job.fields, bpath, spin, t_alpha, job.convention)
    return complex(abs(at_horizon - at_limit) ** 2), horizon


_SAMPLERS = {SPINLESS: _spinless_sample, PAULI_NONREL: _pauli_sample, PAULI_REL: _pauli_sample, COUPLED: _coupled_sample}


def _run_chunk(chunk: _Chunk) -> Tuple[ComplexMoments, np.ndarray]:
    job = chunk.job
    sample = _SAMPLERS[job.kind]
    values = np.empty(chunk.stop - chunk.start, dtype=complex)
    diagnostics = np.empty(chunk.stop - chunk.start)
    for i, stream_id in enumerate(range(chunk.start, chunk.stop)):
        values[i], diagnostics[i] = sample(job, RngStream(job.seed, stream_id).generator())
    return ComplexMoments.from_samples(values), diagnostics


class FeynmanKacEngine:
    '''
    Runs the Feynman-Kac estimators under one seed and parallel layout.

    Attributes:
        seed (int): Experiment seed.
        workers (int): Size of the process pool; 1 runs inline.
        chunk_size (int): Samples per chunk; results depend on it but not on workers.
        settings (SamplerSettings): Tempered-stable sampler knobs.
        kurtosis_threshold (float): Excess kurtosis above which the relativistic Pauli estimator warns.

    Methods:
        estimate_pairing_spinless:
            (f, exp(-t H_c) g) for the spinless relativistic operator Psi_c(h(a)) + V.
        estimate_pairing_pauli_nonrel:
            (f, exp(-t H) g) for the Pauli operator with the e^t prefactor.
        estimate_pairing_pauli_rel:
            (f, exp(-t (Psi_c(H0) + V)) g) with the random prefactor e^T.
        estimate_pairing_limit:
            The same pairings for the c -> infinity limit generators.
    '''

    def __init__(
            self,
            seed: int,
            workers: int = 1,
            chunk_size: int = DEFAULT_CHUNK_SIZE,
            settings: SamplerSettings = SamplerSettings(),
            kurtosis_threshold: float = DEFAULT_KURTOSIS_THRESHOLD,
        ) -> None:

        if workers < 1:
            raise DomainError("workers must be at least 1")
        self.seed = seed
        self.workers = workers
        self.chunk_size = chunk_size
        self.settings = settings
        self.kurtosis_threshold = kurtosis_threshold

    def _run(self, job: _Job, n: int) -> Tuple[ComplexMoments, np.ndarray]:
        if n < 2:
            raise DomainError("at least two samples are needed for an error bar")
        chunks = [_Chunk(job, start, stop) for start, stop in chunk_ranges(n, self.chunk_size)]
        results = map_ordered(_run_chunk, chunks, self.workers)
        return merge_all(r[0] for r in results), np.concatenate([r[1] for r in results])

    def _estimate(self, job: _Job, n: int) -> PairingEstimate:
        moments, diagnostics = self._run(job, n)
        kurtosis = None
        alarm = False
        if job.kind == PAULI_REL and job.t > 0.0:
            with np.errstate(all="ignore"):
                kurtosis = float(sp_stats.kurtosis(diagnostics))
            alarm = math.isfinite(kurtosis) and kurtosis > self.kurtosis_threshold
            if alarm:
                log.warning(
                    "e^T weights have excess kurtosis %.3g > %.3g at c=%g; use a larger c or more samples",
                    kurtosis, self.kurtosis_threshold, job.params.c,
                )
        estimate = PairingEstimate(
            mean=moments.mean,
            stderr=moments.stderr,
            n_samples=moments.count,
            seed=self.seed,
            discretization={"n_outer": job.n_outer, "inner_step": job.inner_step},
            convention=None if job.kind == SPINLESS else job.convention,
            kurtosis=kurtosis,
            kurtosis_alarm=alarm,
        )
        log.debug("%s estimate %s +- %.3g from %d samples", job.kind, estimate.mean, estimate.stderr, estimate.n_samples)
        return estimate

    def _job(self, kind, fields, f, g, t, discretization, reference_time, params=None, kappa=None) -> _Job:
        if t < 0.0:
            raise DomainError("t must be nonnegative")
        spin = kind != SPINLESS
        for name, fn in (("f", f), ("g", g)):
            if fn.dimension != fields.dimension:
                raise DomainError(f"{name} lives in dimension {fn.dimension}, fields in {fields.dimension}")
            if fn.has_spin != spin:
                raise DomainError(f"{name} must {'' if spin else 'not '}carry a spin part for the {kind} estimator")
        if spin and fields.dimension not in (0, 3):
            raise DomainError("Pauli estimators need dimension 3 or the spin-only dimension 0")
        return _Job(
            kind=kind,
            seed=self.seed,
            fields=fields,
            f=f,
            g=g,
            t=t,
            n_outer=discretization.n_outer,
            inner_step=discretization.resolve_inner_step(reference_time),
            convention=discretization.convention,
            share_paths=discretization.share_paths,
            settings=self.settings,
            params=params,
            kappa=kappa,
        )

    def estimate_pairing_spinless(
            self,
            params: ModelParams,
            fields: FieldConfig,
            f: TestFunction,
            g: TestFunction,
            t: float,
            n: int,
            discretization: Discretization = Discretization(),
        ) -> PairingEstimate:
        """
        Estimates (f, exp(-t (Psi_c(h(a)) + V)) g).

        Each sample draws x from the proposal matched to f, the subordinator on the
        outer grid and the Brownian path on the merged inner grid, and averages
        conj(f(x)) / q(x) * g(B_T(t)) * exp(-i phase - outer potential integral).

        Args:
            params (ModelParams): Parameters of the subordinator.
            fields (FieldConfig): a and V; b is ignored.
            f, g (TestFunction): Spinless test functions in fields.dimension.
            t (float): Nonnegative time.
            n (int): Number of samples, at least 2.
            discretization (Discretization, optional): Grid knobs.

        Returns:
            PairingEstimate: The estimate.
        """
        kappa = LimitCoefficients.from_params(params).kappa
        job = self._job(SPINLESS, fields, f, g, t, discretization, kappa * t, params=params)
        return self._estimate(job, n)

    def estimate_pairing_pauli_nonrel(
            self,
            fields: FieldConfig,
            f: TestFunction,
            g: TestFunction,
            t: float,
            n: int,
            discretization: Discretization = Discretization(),
        ) -> PairingEstimate:
        """
        Estimates (f, exp(-t H) g) for H = h(a) - (1/2) sigma . b + V.

        Both initial spins are enumerated per sample and the sum is multiplied by e^t.
        """
        job = self._job(PAULI_NONREL, fields, f, g, t, discretization, t)
        return self._estimate(job, n)

    def estimate_pairing_pauli_rel(
            self,
            params: ModelParams,
            fields: FieldConfig,
            f: TestFunction,
            g: TestFunction,
            t: float,
            n: int,
            discretization: Discretization = Discretization(),
        ) -> PairingEstimate:
        """
        Estimates (f, exp(-t (Psi_c(H0) + V)) g), H0 = h(a) - (1/2) sigma . b.

        The Brownian motion and the spin run up to the random horizon T(t), the potential is
        integrated in outer time, and each sample carries the prefactor e^T(t). The excess
        kurtosis of e^T (M')^N is checked against the engine threshold.
        """
        kappa = LimitCoefficients.from_params(params).kappa
        job = self._job(PAULI_REL, fields, f, g, t, discretization, kappa * t, params=params)
        return self._estimate(job, n)

    def estimate_pairing_limit(
            self,
            params: ModelParams,
            fields: FieldConfig,
            f: TestFunction,
            g: TestFunction,
            t: float,
            n: int,
            discretization: Discretization = Discretization(),
        ) -> PairingEstimate:
        """
        Estimates the pairing for the limit generator: kappa h(a) + V without spin,
        kappa (h(a) - (1/2) sigma . b + V) with spin.

        The spinless case replaces the subordinator by the time change s -> kappa s; the
        spin case is the non-relativistic Pauli estimator run to time kappa t.
        """
        kappa = LimitCoefficients.from_params(params).kappa
        if f.has_spin:
            job = self._job(PAULI_NONREL, fields, f, g, kappa * t, discretization, kappa * t)
        else:
            job = self._job(SPINLESS, fields, f, g, t, discretization, kappa * t, params=params, kappa=kappa)
        return self._estimate(job, n)

    def estimate_coupled_weight_gap(
            self,
            params: ModelParams,
            fields: FieldConfig,
            t: float,
            n: int,
            start: Sequence[float] = (),
            initial_spin: int = 1,
            discretization: Discretization = Discretization(),
        ) -> PairingEstimate:
        """
        Estimates E|exp(W_T(t)) - exp(W_t_alpha)|^2 for paths started at (start, initial_spin).

        W is the spin weight without the potential. Each sample evaluates one Brownian
        path and one spin path at the random horizon T(t) and at t_alpha = kappa t, so
        the estimate tends to 0 as c grows.

        Args:
            params (ModelParams): Parameters of the subordinator.
            fields (FieldConfig): a and b in dimension 0 or 3; V is ignored.
            t (float): Nonnegative time.
            n (int): Number of samples, at least 2.
            start (sequence, optional): Starting point, of length fields.dimension.
            initial_spin (int, optional): +1 or -1.
            discretization (Discretization, optional): inner_step and convention; n_outer is unused.

        Returns:
            PairingEstimate: The gap as a real-valued mean.

        Raises:
            DomainError: On a negative t, a bad dimension, start or spin.
        """
        if t < 0.0:
            raise DomainError("t must be nonnegative")
        if fields.dimension not in (0, 3):
            raise DomainError("Pauli estimators need dimension 3 or the spin-only dimension 0")
        if len(start) != fields.dimension:
            raise DomainError(f"start must have {fields.dimension} entries")
        if initial_spin not in (1, -1):
            raise DomainError("initial_spin must be +1 or -1")
        t_alpha = LimitCoefficients.from_params(params).limit_time(t)
        if t == 0.0:
            return PairingEstimate(mean=0j, stderr=0.0, n_samples=n, seed=self.seed, convention=discretization.convention)
        job = _CoupledJob(
            seed=self.seed,
            params=params,
            fields=fields,
            start=tuple(float(x) for x in start),
            initial_spin=initial_spin,
            t=t,
            inner_step=discretization.resolve_inner_step(t_alpha),
            convention=discretization.convention,
            settings=self.settings,
        )
        moments, _ = self._run(job, n)
        estimate = PairingEstimate(
            mean=moments.mean,
            stderr=moments.stderr,
            n_samples=moments.count,
            seed=self.seed,
            discretization={"inner_step": job.inner_step},
            convention=job.convention,
        )
        log.debug("coupled weight gap at c=%g: %.6g +- %.3g", params.c, estimate.mean.real, estimate.stderr)
        return estimate


@dataclass(frozen=True)
class IntegrabilityReport:
    '''
    Advisory check of the log-integrability of the transverse field.

    Attributes:
        max_abs_log (float): Largest finite |log (1/2) sqrt(b1^2 + b2^2)| on the sample grid (nan if none).
        degenerate (bool): Whether b1^2 + b2^2 vanishes somewhere on the sample grid.
        heat_kernel_means (tuple): (x, s, mean) triples of |log| averaged against the Gaussian kernel of variance s.
    '''

    max_abs_log: float
    degenerate: bool
    heat_kernel_means: tuple = ()


def check_jump_weight_integrability(
        fields: FieldConfig,
        sample_points: Optional[np.ndarray] = None,
        starts: Optional[Sequence] = None,
        times: Sequence[float] = (0.5, 1.0, 2.0),
        half_extent: float = 40.0,
        n_per_axis: int = 9,
    ) -> IntegrabilityReport:
    """
    Samples |log (1/2) sqrt(b1^2 + b2^2)| on a sample grid and averages it against heat kernels.

    A zero of b1^2 + b2^2 makes the logarithmic form of the jump weight degenerate;
    it is flagged, and only the product form stays meaningful.

    Returns:
        IntegrabilityReport: Purely advisory diagnostics.
    """
    d = fields.dimension
    if sample_points is None:
        axis = np.linspace(-half_extent, half_extent, n_per_axis)
        sample_points = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d) if d else np.zeros((1, 0))
    b = fields.b(sample_points)
    r = 0.5 * np.hypot(b[:, 0], b[:, 1])
    positive = r > 0.0
    degenerate = bool(not np.all(positive))
    with np.errstate(divide="ignore"):
        abs_log = np.abs(np.log(r))
    max_abs_log = float(np.max(abs_log[positive])) if np.any(positive) else math.nan
    means = []
    for x in (starts if starts is not None else [np.zeros(d)]):
        x = np.asarray(x, dtype=float)
        r2 = np.sum((sample_points - x) ** 2, axis=1)
        for s in times:
            kernel = np.exp(-0.5 * r2 / s)
            kernel /= kernel.sum()
            mean = float(np.sum(kernel[positive] * abs_log[positive])) if not degenerate else math.inf
            means.append((tuple(x.tolist()), s, mean))
    if degenerate:
        log.warning("b1^2 + b2^2 vanishes on the sample grid; the log form of the jump weight degenerates")
    return IntegrabilityReport(max_abs_log=max_abs_log, degenerate=degenerate, heat_kernel_means=tuple(means))


def spinless_norm_bound(fields: FieldConfig, t: float) -> float:
    """
    e^(t ||V||) bounding ||exp(-t (Psi_c(h(a)) + V))|| for every c.
    """
    return math.exp(t * fields.potential_sup)


def pauli_norm_bound(params: ModelParams, fields: FieldConfig, t: float) -> float:
    """
    e^(t ||V||) * E[exp((1/2) sup|b| T_t)] bounding ||exp(-t (Psi_c(H0) + V))||.

    H0 is bounded below by -(1/2) sup|b|, so Psi_c(H0) is bounded below by the continuation
    Psi_c(-(1/2) sup|b|), whose exponential is the exponential moment. Infinite when
    (1/2) sup|b| reaches theta.
    """
    return math.exp(t * fields.potential_sup) * exponential_moment(params, 0.5 * fields.magnetic_sup, t)
