'''
Closed-form analytics of the alpha/2-relativistic Bernstein function family

    Psi_c(u) = (2 c^beta u + (m c^gamma)^(2/alpha))^(alpha/2) - m c^gamma

written in stable/tempered form as sigma*(u + theta)^rho - sigma*theta^rho.
Every sampler, estimator and oracle in the package is checked against the
functions defined here.
'''

import math
from dataclasses import asdict, dataclass, replace
from typing import Union

import numpy as np
from scipy import integrate, special

from .errors import DomainError, QuadratureError

ArrayLike = Union[float, np.ndarray]

# Relative tolerance used when checking the algebraic constraints on (alpha, beta, gamma).
CONSTRAINT_RTOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    '''
    The parameter tuple (alpha, beta, gamma, m, c) of the subordinator family.

    Attributes:
        alpha (float): Stability parameter in (0, 2); the subordinator is alpha/2-stable at small scales.
        beta (float): Exponent of c in the kinetic coefficient 2 c^beta.
        gamma (float): Exponent of c in the rest energy m c^gamma.
        m (float): Mass.
        c (float): Speed-of-light parameter.

    Derived quantities:
        rho: Stable index alpha/2.
        sigma: Scale (2 c^beta)^(alpha/2).
        theta: Tempering rate (m c^gamma)^(2/alpha) / (2 c^beta).
        rest_energy: m c^gamma, which equals sigma * theta^rho.
        consistency_exponent: gamma + beta - 2 gamma / alpha.
    '''

    alpha: float
    beta: float
    gamma: float
    m: float
    c: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 2.0:
            raise DomainError(f"alpha must lie in (0, 2), got {self.alpha}")
        for name in ("beta", "gamma", "m", "c"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise DomainError(f"{name} must be a finite positive number, got {value}")

    @classmethod
    def classical(cls, m: float = 1.0, c: float = 1.0) -> "ModelParams":
        """
        The relativistic case alpha=1, beta=gamma=2, where Psi(u) = sqrt(2 c^2 u + m^2 c^4) - m c^2.
        """
        return cls(alpha=1.0, beta=2.0, gamma=2.0, m=m, c=c)

    def with_c(self, c: float) -> "ModelParams":
        return replace(self, c=c)

    @property
    def rho(self) -> float:
        return self.alpha / 2.0

    @property
    def sigma(self) -> float:
        return (2.0 * self.c ** self.beta) ** self.rho

    @property
    def theta(self) -> float:
        return self.rest_energy ** (2.0 / self.alpha) / (2.0 * self.c ** self.beta)

    @property
    def rest_energy(self) -> float:
        return self.m * self.c ** self.gamma

    @property
    def consistency_exponent(self) -> float:
        return self.gamma + self.beta - 2.0 * self.gamma / self.alpha

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LimitCoefficients:
    '''
    Coefficients of the c -> infinity limit.

    Attributes:
        kappa (float): Limit diffusion coefficient alpha * m^(1 - 2/alpha), acting on h(a).
    '''

    kappa: float

    @classmethod
    def from_params(cls, params: ModelParams) -> "LimitCoefficients":
        return cls(kappa=params.alpha * params.m ** (1.0 - 2.0 / params.alpha))

    def limit_time(self, t: ArrayLike) -> ArrayLike:
        """
        The deterministic time t_alpha = kappa * t that T_t^c concentrates on as c grows.
        """
        return self.kappa * t


@dataclass(frozen=True)
class ConsistencyReport:
    exponent: float
    paper_constraint_holds: bool
    derived_constraint_holds: bool


def bernstein(params: ModelParams, u: ArrayLike) -> ArrayLike:
    """
    Evaluates sigma*(u + theta)^rho - sigma*theta^rho on its natural domain u >= -theta.

    This is Psi_c for u >= 0 and its continuation below zero, which is what the
    exponential moments and the spectral calculus on operators with negative
    spectrum need. It is computed as m c^gamma * expm1(rho * log1p(u / theta))
    so the large-c regime (u << theta) keeps full relative precision.

    Raises:
        DomainError: If any u < -theta.
    """
    u_arr = np.asarray(u, dtype=float)
    theta = params.theta
    if np.any(u_arr < -theta):
        raise DomainError(f"Psi continuation is only defined for u >= -theta = {-theta:.6g}")
    with np.errstate(divide="ignore"):
        value = params.rest_energy * np.expm1(params.rho * np.log1p(u_arr / theta))
    return float(value) if np.ndim(value) == 0 else value


def laplace_exponent(params: ModelParams, u: ArrayLike) -> ArrayLike:
    """
    Laplace exponent Psi_c(u) of T_t^c: E[exp(-u T_t^c)] = exp(-t Psi_c(u)).

    Args:
        params (ModelParams): Parameters of the family.
        u (float or ndarray): Nonnegative argument(s).

    Returns:
        float or ndarray: Psi_c(u), nonnegative, increasing and concave, with Psi_c(0) = 0.

    Raises:
        DomainError: If any u < 0.
    """
    if np.any(np.asarray(u) < 0.0):
        raise DomainError("laplace_exponent requires u >= 0")
    return bernstein(params, u)


def levy_density(params: ModelParams, y: ArrayLike) -> ArrayLike:
    """
    Density of the Levy measure nu_c(dy) = sigma * rho / Gamma(1 - rho) * exp(-theta y) * y^(-1-rho) dy.

    Raises:
        DomainError: If any y <= 0.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= 0.0):
        raise DomainError("levy_density requires y > 0")
    rho = params.rho
    prefactor = params.sigma * rho / special.gamma(1.0 - rho)
    value = prefactor * np.exp(-params.theta * y_arr) * y_arr ** (-1.0 - rho)
    return float(value) if np.ndim(value) == 0 else value


def _quad(func, lower: float, upper: float, tol: float, limit: int) -> float:
    result = integrate.quad(func, lower, upper, epsabs=tol, epsrel=1e-12, limit=limit, full_output=1)
    if len(result) == 4:
        raise QuadratureError(f"quadrature on [{lower}, {upper}] did not converge: {result[3]}")
    return result[0]


def levy_integral(params: ModelParams, u: float, tol: float = 1e-10, limit: int = 400) -> float:
    """
    Computes the integral of (1 - exp(-u y)) against nu_c by adaptive quadrature.

    The substitution w = y^(1 - alpha/2) turns the integrable singularity at y = 0
    into a bounded integrand, which keeps the quadrature accurate for alpha close to 2.

    Raises:
        DomainError: If u < 0.
        QuadratureError: If scipy's adaptive quadrature reports non-convergence.
    """
    if u < 0.0:
        raise DomainError("levy_integral requires u >= 0")
    if u == 0.0:
        return 0.0
    rho = params.rho
    theta = params.theta
    weight = params.sigma * rho / special.gamma(1.0 - rho) / (1.0 - rho)
    power = 1.0 / (1.0 - rho)

    def integrand(w: float) -> float:
        if w == 0.0:
            return weight * u
        y = w ** power
        return weight * math.exp(-theta * y) * (-math.expm1(-u * y)) / y

    w_split = (1.0 / (theta + u)) ** (1.0 - rho)
    return _quad(integrand, 0.0, w_split, tol / 2.0, limit) + _quad(integrand, w_split, math.inf, tol / 2.0, limit)


def verify_levy_representation(params: ModelParams, u: float, tol: float = 1e-8) -> float:
    """
    Returns |quadrature of the Levy-Khintchine integral - closed-form Psi_c(u)|.

    Args:
        params (ModelParams): Parameters of the family.
        u (float): Nonnegative argument.
        tol (float): Absolute tolerance handed to the quadrature; the residual is expected to stay below it.

    Returns:
        float: The residual.

    Raises:
        DomainError: If u < 0 or tol <= 0.
        QuadratureError: If the quadrature does not converge.
    """
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    return abs(levy_integral(params, u, tol=tol / 10.0) - laplace_exponent(params, u))


def levy_drift(params: ModelParams) -> float:
    """
    Drift of the Levy triplet, the integral of y over (0, 1] against nu_c.

    Closed form sigma * rho * theta^(rho - 1) * P(1 - rho, theta) with P the regularized lower incomplete gamma function.
    """
    rho = params.rho
    return params.sigma * rho * params.theta ** (rho - 1.0) * special.gammainc(1.0 - rho, params.theta)


def exponential_moment(params: ModelParams, u: float, t: float) -> float:
    """
    E[exp(u T_t^c)] = exp(-t * (sigma (theta - u)^rho - sigma theta^rho)), finite for u < theta.

    Args:
        params (ModelParams): Parameters of the family.
        u (float): Any real; u <= 0 gives the Laplace transform exp(-t Psi_c(-u)).
        t (float): Nonnegative time.

    Returns:
        float: The moment, or math.inf when u >= theta.

    Raises:
        DomainError: If t < 0.
    """
    if t < 0.0:
        raise DomainError("exponential_moment requires t >= 0")
    if u >= params.theta:
        return math.inf
    return math.exp(-t * bernstein(params, -u))


def mean_rate(params: ModelParams, t: float) -> float:
    """
    E[T_t^c] = t * sigma * rho * theta^(rho - 1); equals t_alpha * c^e with e the consistency exponent.
    """
    if t < 0.0:
        raise DomainError("mean_rate requires t >= 0")
    return t * params.sigma * params.rho * params.theta ** (params.rho - 1.0)


def variance_rate(params: ModelParams, t: float) -> float:
    """
    Var(T_t^c) = t * sigma * rho * (1 - rho) * theta^(rho - 2).

    When the consistency exponent vanishes this scales as c^(-gamma).
    """
    if t < 0.0:
        raise DomainError("variance_rate requires t >= 0")
    rho = params.rho
    return t * params.sigma * rho * (1.0 - rho) * params.theta ** (rho - 2.0)


def consistency_report(params: ModelParams) -> ConsistencyReport:
    """
    Flags both candidate constraints on (alpha, beta, gamma) without rejecting anything.

    paper_constraint_holds: 2 alpha = beta gamma + gamma^2.
    derived_constraint_holds: alpha (beta + gamma) = 2 gamma, i.e. the c-exponent of the
    linearized Psi vanishes and the c -> infinity limit is nondegenerate.
    """
    alpha, beta, gamma = params.alpha, params.beta, params.gamma
    return ConsistencyReport(
        exponent=params.consistency_exponent,
        paper_constraint_holds=math.isclose(2.0 * alpha, beta * gamma + gamma ** 2, rel_tol=CONSTRAINT_RTOL),
        derived_constraint_holds=math.isclose(alpha * (beta + gamma), 2.0 * gamma, rel_tol=CONSTRAINT_RTOL),
    )


def limit_gap(params: ModelParams, u: ArrayLike) -> ArrayLike:
    """
    Psi_c(u) - kappa * u, the distance of the Bernstein function from its c -> infinity limit.
    """
    return laplace_exponent(params, u) - LimitCoefficients.from_params(params).kappa * np.asarray(u, dtype=float)


def predicted_limit_gap(params: ModelParams, u: ArrayLike) -> ArrayLike:
    """
    Leading Taylor term m c^gamma * rho (rho - 1) / 2 * (u / theta)^2 of limit_gap for consistent params.

    It scales as c^(-gamma) once the consistency exponent is zero.
    """
    rho = params.rho
    ratio = np.asarray(u, dtype=float) / params.theta
    return params.rest_energy * rho * (rho - 1.0) / 2.0 * ratio ** 2
