'''
Path functionals entering the Feynman-Kac weights

All functionals are deterministic given sampled paths. Times at which a
functional needs the Brownian position (subordination times, spin jump times,
the horizon) must be knots of the inner grid; merge_time_grid builds such a
grid and every functional checks the contract.
'''

from typing import Optional

import numpy as np

from .errors import DomainError, GridContractError
from .fields import FieldConfig
from .sampler import BrownianPath, SpinPath, SubordinatorPath

PRE_JUMP = "pre_jump"
POST_JUMP = "post_jump"
CONVENTIONS = (PRE_JUMP, POST_JUMP)


def merge_time_grid(horizon: float, inner_step: float, *event_times) -> np.ndarray:
    """
    A uniform grid of step inner_step on [0, horizon] merged with every event time in [0, horizon].

    Args:
        horizon (float): Last grid time.
        inner_step (float): Target step of the uniform part.
        *event_times (array_like): Times that must be knots.

    Returns:
        ndarray: Sorted, duplicate-free grid starting at 0 and ending at horizon.
    """
    if horizon < 0.0:
        raise DomainError("horizon must be nonnegative")
    if inner_step <= 0.0:
        raise DomainError("inner_step must be positive")
    parts = [np.arange(0.0, horizon, inner_step), [horizon]]
    for times in event_times:
        times = np.asarray(times, dtype=float).ravel()
        parts.append(times[(times >= 0.0) & (times <= horizon)])
    return np.unique(np.concatenate(parts))


def _horizon_index(bpath: BrownianPath, horizon: float) -> int:
    if horizon > bpath.inner_times[-1]:
        raise GridContractError(f"horizon {horizon} exceeds the inner grid end {bpath.inner_times[-1]}")
    return int(bpath.indices_of([horizon])[0])


def stratonovich_integral(fields: FieldConfig, bpath: BrownianPath, horizon: Optional[float] = None) -> float:
    """
    Midpoint-rule approximation of the Stratonovich integral of a along the path.

    Sums a((x_k + x_k+1) / 2) . (x_k+1 - x_k) over grid steps up to horizon (the whole path by default).
    The rule is exact for gradients of quadratic functions.
    """
    stop = len(bpath.inner_times) - 1 if horizon is None else _horizon_index(bpath, horizon)
    if stop == 0 or bpath.dimension == 0:
        return 0.0
    x = bpath.positions[: stop + 1]
    steps = np.diff(x, axis=0)
    midpoints = 0.5 * (x[1:] + x[:-1])
    return float(np.sum(fields.a(midpoints) * steps))


def outer_potential_integral(fields: FieldConfig, bpath: BrownianPath, spath: SubordinatorPath) -> float:
    """
    Left-endpoint sum of V(B(T(s_j))) * (s_j+1 - s_j) over the outer grid.

    Raises:
        GridContractError: If some T(s_j) is not a knot of the inner grid.
    """
    idx = bpath.indices_of(spath.cumulative[:-1])
    return float(np.sum(fields.V(bpath.positions[idx]) * np.diff(spath.outer_times)))


def spin_b3_integral(fields: FieldConfig, bpath: BrownianPath, spin: SpinPath, horizon: float) -> float:
    """
    Left-endpoint sum of (1/2) theta_s b3(B_s) ds over the inner grid on [0, horizon].

    Jump times up to the horizon must be grid knots so the spin is constant on every step.

    Raises:
        GridContractError: On horizon overflow or a jump time missing from the grid.
    """
    stop = _horizon_index(bpath, horizon)
    jumps = spin.jump_times[spin.jump_times <= horizon]
    bpath.indices_of(jumps)
    if stop == 0:
        return 0.0
    times = bpath.inner_times[: stop + 1]
    b3 = fields.b(bpath.positions[:stop])[:, 2]
    return float(0.5 * np.sum(spin.spin_at(times[:-1]) * b3 * np.diff(times)))


def jump_weight_factors(
        fields: FieldConfig,
        bpath: BrownianPath,
        spin: SpinPath,
        horizon: float,
        convention: str = PRE_JUMP,
    ) -> np.ndarray:
    """
    The factors (1/2)(b1(B_tau) - i theta b2(B_tau)) at the jump times tau <= horizon.

    theta is the spin just before the jump for pre_jump and just after it for post_jump.
    """
    if convention not in CONVENTIONS:
        raise DomainError(f"unknown jump convention '{convention}'")
    _horizon_index(bpath, horizon)
    jumps = spin.jump_times[spin.jump_times <= horizon]
    if jumps.size == 0:
        return np.empty(0, dtype=complex)
    b = fields.b(bpath.positions_at(jumps))
    theta = spin.initial_spin * np.where(np.arange(jumps.size) % 2 == 0, 1.0, -1.0)
    if convention == POST_JUMP:
        theta = -theta
    return 0.5 * (b[:, 0] - 1j * theta * b[:, 1])


def jump_weight_product(
        fields: FieldConfig,
        bpath: BrownianPath,
        spin: SpinPath,
        horizon: float,
        convention: str = PRE_JUMP,
    ) -> complex:
    """
    Product of the jump factors; 1 without jumps and 0 as soon as one factor vanishes.
    """
    return complex(np.prod(jump_weight_factors(fields, bpath, spin, horizon, convention)))


def assemble_weight_spinless(fields: FieldConfig, bpath: BrownianPath, spath: SubordinatorPath) -> complex:
    """
    exp(-i * phase over [0, T(t)]) * exp(-outer potential integral).
    """
    phase = stratonovich_integral(fields, bpath, spath.horizon)
    return complex(np.exp(-1j * phase - outer_potential_integral(fields, bpath, spath)))


def assemble_weight_pauli(
        fields: FieldConfig,
        bpath: BrownianPath,
        spin: SpinPath,
        horizon: float,
        outer: SubordinatorPath,
        convention: str = PRE_JUMP,
    ) -> complex:
    """
    The spin weight exp(Z): phase and spin-b3 integral up to `horizon`, potential along `outer`, jump product.

    For the non-relativistic formula pass the identity time change on [0, t] as `outer`
    and horizon = t; for the relativistic one pass the subordinator path and horizon = T(t).
    """
    weight = spin_weight(fields, bpath, spin, horizon, convention)
    if weight == 0:
        return 0j
    return complex(weight * np.exp(-outer_potential_integral(fields, bpath, outer)))


def spin_weight(
        fields: FieldConfig,
        bpath: BrownianPath,
        spin: SpinPath,
        horizon: float,
        convention: str = PRE_JUMP,
    ) -> complex:
    """
    exp(W_horizon): the phase, the spin-b3 integral and the jump product up to `horizon`, without the potential.
    """
    product = jump_weight_product(fields, bpath, spin, horizon, convention)
    if product == 0:
        return 0j
    exponent = -1j * stratonovich_integral(fields, bpath, horizon) + spin_b3_integral(fields, bpath, spin, horizon)
    return complex(np.exp(exponent) * product)
