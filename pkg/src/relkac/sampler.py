'''
Exact-law random generation for subordinated Brownian motion with spin

Every draw goes through a numpy Generator built on the counter-based Philox
bit generator, keyed by (seed, stream_id). A sample index is a stream id, so
a path set is reproducible bit for bit however the stream ids are spread over
workers.
'''

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, GridContractError, SamplerError
from .model import ModelParams

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1

# Horizon splitting keeps the per-sub-increment acceptance probability at or above this value.
DEFAULT_SPLIT_ACCEPTANCE = 0.1
DEFAULT_MAX_ROUNDS = 10_000_000


@dataclass(frozen=True)
class RngStream:
    '''
    A (seed, stream_id) pair naming one independent Philox stream.

    Attributes:
        seed (int): 64-bit experiment seed.
        stream_id (int): 64-bit stream index, normally the sample index.
    '''

    seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        """
        Returns a fresh Generator positioned at the start of this stream.
        """
        key = ((self.stream_id & _MASK64) << 64) | (self.seed & _MASK64)
        return np.random.Generator(np.random.Philox(key=key))


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


@dataclass(frozen=True)
class SamplerSettings:
    '''
    Knobs of the tempered-stable rejection sampler.

    Attributes:
        split_acceptance (float): Lower bound for the acceptance probability of one sub-increment.
        max_rounds (int): Rejection rounds after which a draw is aborted.
    '''

    split_acceptance: float = DEFAULT_SPLIT_ACCEPTANCE
    max_rounds: int = DEFAULT_MAX_ROUNDS

    def __post_init__(self) -> None:
        if not 0.0 < self.split_acceptance < 1.0:
            raise DomainError("split_acceptance must lie in (0, 1)")
        if self.max_rounds < 1:
            raise DomainError("max_rounds must be at least 1")


@dataclass(frozen=True, eq=False)
class SubordinatorPath:
    '''
    Values of T^c on the outer time grid.

    Attributes:
        outer_times (ndarray): s_0 = 0 < ... < s_n = t.
        increments (ndarray): Nonnegative increments T(s_j+1) - T(s_j).
        cumulative (ndarray): T(s_j), starting at 0.
    '''

    outer_times: np.ndarray
    increments: np.ndarray
    cumulative: np.ndarray

    @property
    def t(self) -> float:
        return float(self.outer_times[-1])

    @property
    def horizon(self) -> float:
        return float(self.cumulative[-1])


@dataclass(frozen=True, eq=False)
class BrownianPath:
    '''
    A d-dimensional Brownian motion sampled on an inner time grid.

    Attributes:
        inner_times (ndarray): Strictly increasing times starting at 0.
        positions (ndarray): Shape (len(inner_times), d); positions[0] == start.
        start (ndarray): Starting point x.
    '''

    inner_times: np.ndarray
    positions: np.ndarray
    start: np.ndarray

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    def indices_of(self, times) -> np.ndarray:
        """
        Grid indices of times that must be grid knots.

        Raises:
            GridContractError: If any time is not exactly on the grid.
        """
        times = np.asarray(times, dtype=float)
        idx = np.searchsorted(self.inner_times, times)
        idx_clipped = np.minimum(idx, len(self.inner_times) - 1)
        if np.any(self.inner_times[idx_clipped] != times):
            missing = times[self.inner_times[idx_clipped] != times]
            raise GridContractError(f"times {missing[:3]} are not knots of the inner grid")
        return idx_clipped

    def positions_at(self, times) -> np.ndarray:
        return self.positions[self.indices_of(times)]


@dataclass(frozen=True, eq=False)
class SpinPath:
    '''
    Jump times of a unit-rate Poisson process on [0, horizon] and the initial spin.

    The spin is theta_s = initial_spin * (-1)^(number of jumps <= s).
    '''

    jump_times: np.ndarray
    initial_spin: int
    horizon: float

    def spin_at(self, s) -> np.ndarray:
        count = np.searchsorted(self.jump_times, np.asarray(s, dtype=float), side="right")
        return self.initial_spin * np.where(count % 2 == 0, 1, -1)

    def with_initial_spin(self, initial_spin: int) -> "SpinPath":
        return SpinPath(jump_times=self.jump_times, initial_spin=initial_spin, horizon=self.horizon)


def sample_stable_increment(
        rho: float,
        scale: float,
        dt: float,
        rng: RngLike,
        size: Optional[int] = None,
    ):
    """
    Draws from the one-sided rho-stable law with Laplace transform exp(-dt * scale * u^rho).

    Uses Kanter's representation: with U uniform on (0, pi] and E standard exponential,
    sin(rho U) / sin(U)^(1/rho) * (sin((1 - rho) U) / E)^((1 - rho) / rho)
    has Laplace transform exp(-u^rho); the stable scaling then multiplies it by (dt * scale)^(1/rho).

    Args:
        rho (float): Stable index in (0, 1).
        scale (float): Positive scale.
        dt (float): Positive time increment.
        rng (RngStream or Generator): Source of randomness.
        size (int, optional): Number of draws; a scalar is returned when omitted.

    Returns:
        float or ndarray: Positive draws.

    Raises:
        DomainError: On parameters outside their domains.
    """
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    if scale <= 0.0 or dt <= 0.0:
        raise DomainError("scale and dt must be positive")
    gen = as_generator(rng)
    u = math.pi * (1.0 - gen.random(size))
    e = gen.standard_exponential(size)
    standard = np.sin(rho * u) / np.sin(u) ** (1.0 / rho) * (np.sin((1.0 - rho) * u) / e) ** ((1.0 - rho) / rho)
    draw = (dt * scale) ** (1.0 / rho) * standard
    return float(draw) if size is None else draw


def split_count(params: ModelParams, dt: float, split_acceptance: float = DEFAULT_SPLIT_ACCEPTANCE) -> int:
    """
    Number of equal sub-increments of dt whose acceptance probability exp(-sub_dt * m c^gamma) stays >= split_acceptance.
    """
    return max(1, math.ceil(dt * params.rest_energy / -math.log(split_acceptance)))


def sample_tilted_batch(
        params: ModelParams,
        dt: float,
        count: int,
        rng: RngLike,
        max_rounds: int = DEFAULT_MAX_ROUNDS,
    ) -> Tuple[np.ndarray, int]:
    """
    Draws count exponentially tilted stable variables by rejection, without horizon splitting.

    Candidates come from the sigma-scaled rho-stable law over dt and are accepted with
    probability exp(-theta * candidate), so accepted values have Laplace transform exp(-dt Psi_c(u)).

    Returns:
        tuple: (draws, number of proposals made).

    Raises:
        SamplerError: If some draw is still pending after max_rounds rounds.
    """
    gen = as_generator(rng)
    values = np.empty(count)
    pending = np.arange(count)
    proposals = 0
    rounds = 0
    while pending.size:
        if rounds >= max_rounds:
            log.error("tempered sampler aborted after %d rounds (dt=%g, params=%s)", rounds, dt, params)
            raise SamplerError(
                f"tempered-stable rejection exceeded {max_rounds} rounds; acceptance probability "
                f"{math.exp(-dt * params.rest_energy):.3g} is too small for dt={dt}"
            )
        candidates = sample_stable_increment(params.rho, params.sigma, dt, gen, size=pending.size)
        accept = gen.random(pending.size) < np.exp(-params.theta * candidates)
        values[pending[accept]] = candidates[accept]
        proposals += pending.size
        pending = pending[~accept]
        rounds += 1
    return values, proposals


def sample_tempered_increment(
        params: ModelParams,
        dt: float,
        rng: RngLike,
        size: Optional[int] = None,
        settings: SamplerSettings = SamplerSettings(),
    ):
    """
    Draws increments of T^c over a time step dt, i.e. with Laplace transform exp(-dt Psi_c(u)).

    dt is split into k equal parts so that each part is accepted with probability at
    least settings.split_acceptance, and the k tilted draws are summed.

    Args:
        params (ModelParams): Parameters of the family.
        dt (float): Nonnegative time step; dt = 0 returns exact zeros.
        rng (RngStream or Generator): Source of randomness.
        size (int, optional): Number of independent increments.
        settings (SamplerSettings, optional): Split threshold and iteration cap.

    Returns:
        float or ndarray: Nonnegative increments.

    Raises:
        DomainError: If dt < 0.
        SamplerError: If the iteration cap is hit.
    """
    if dt < 0.0:
        raise DomainError("dt must be nonnegative")
    n = 1 if size is None else size
    if dt == 0.0:
        return 0.0 if size is None else np.zeros(n)
    k = split_count(params, dt, settings.split_acceptance)
    log.debug("splitting dt=%g into %d sub-increments", dt, k)
    draws, _ = sample_tilted_batch(params, dt / k, n * k, rng, settings.max_rounds)
    total = draws.reshape(n, k).sum(axis=1)
    return float(total[0]) if size is None else total


def sample_subordinator_path(
        params: ModelParams,
        t: float,
        n_outer: int,
        rng: RngLike,
        settings: SamplerSettings = SamplerSettings(),
    ) -> SubordinatorPath:
    """
    Samples T^c on the uniform outer grid s_j = j t / n_outer from i.i.d. exact increments.

    Raises:
        DomainError: If t <= 0 or n_outer < 1.
    """
    if t <= 0.0:
        raise DomainError("t must be positive")
    if n_outer < 1:
        raise DomainError("n_outer must be at least 1")
    outer_times = np.linspace(0.0, t, n_outer + 1)
    increments = sample_tempered_increment(params, t / n_outer, rng, size=n_outer, settings=settings)
    return SubordinatorPath(outer_times, increments, np.concatenate(([0.0], np.cumsum(increments))))


def deterministic_subordinator_path(kappa: float, t: float, n_outer: int) -> SubordinatorPath:
    """
    The time change s -> kappa s on the outer grid, the c -> infinity limit of T^c.
    """
    if kappa <= 0.0 or t <= 0.0 or n_outer < 1:
        raise DomainError("kappa and t must be positive and n_outer at least 1")
    outer_times = np.linspace(0.0, t, n_outer + 1)
    cumulative = kappa * outer_times
    return SubordinatorPath(outer_times, np.diff(cumulative), cumulative)


def sample_brownian(
        d: int,
        inner_times: Sequence[float],
        start,
        rng: RngLike,
    ) -> BrownianPath:
    """
    Samples a standard d-dimensional Brownian motion started at `start` on the given grid.

    Raises:
        DomainError: If the grid does not start at 0 or is not strictly increasing.
    """
    times = np.asarray(inner_times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] != 0.0:
        raise DomainError("inner_times must be a 1-d grid starting at 0")
    dts = np.diff(times)
    if np.any(dts <= 0.0):
        raise DomainError("inner_times must be strictly increasing")
    start = np.asarray(start, dtype=float).reshape(d)
    gen = as_generator(rng)
    steps = gen.standard_normal((dts.size, d)) * np.sqrt(dts)[:, None]
    positions = np.empty((times.size, d))
    positions[0] = start
    positions[1:] = start + np.cumsum(steps, axis=0)
    return BrownianPath(times, positions, start)


def sample_poisson_spin(horizon: float, initial_spin: int, rng: RngLike) -> SpinPath:
    """
    Samples the spin process on [0, horizon]: a Poisson(horizon) jump count, then i.i.d. uniform sorted jump times.

    Raises:
        DomainError: If horizon < 0 or initial_spin is not +1 or -1.
    """
    if horizon < 0.0:
        raise DomainError("horizon must be nonnegative")
    if initial_spin not in (1, -1):
        raise DomainError("initial_spin must be +1 or -1")
    gen = as_generator(rng)
    count = gen.poisson(horizon)
    jump_times = np.sort(gen.uniform(0.0, horizon, count)) if count else np.empty(0)
    return SpinPath(jump_times, int(initial_spin), float(horizon))
