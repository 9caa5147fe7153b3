'''
Deterministic grid oracle for the relativistic and Pauli semigroups

Operators live on the periodic grid [-L, L)^d with n points per axis, laid out
site-major (C order over axes) and, for spin grids, spin-minor: index
2 * site + slot with slot 0 for theta = +1. Functions of Hermitian matrices
go through one eigendecomposition.
'''

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate

from .errors import BoundaryMassError, DomainError, EigenSolverError, GridCapError, QuadratureError
from .fields import FieldConfig
from .model import LimitCoefficients, ModelParams, bernstein

log = logging.getLogger(__name__)

DEFAULT_GRID_CAP = 8192
HERMITIAN_RTOL = 1e-12
# Roundoff negatives of a kinetic operator above -CLAMP_TOL are mapped to 0 before Psi is applied.
CLAMP_TOL = 1e-10
DEFAULT_BOUNDARY_MARGIN = 3
DEFAULT_BOUNDARY_TOL = 1e-10

PEIERLS = "peierls"
SPECTRAL = "spectral"
STENCILS = (PEIERLS, SPECTRAL)

_SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class GridSpec:
    '''
    A periodic grid on [-L, L)^d, optionally carrying a spin index.

    Attributes:
        dimension (int): 0 (a single site, spin-only mode) to 3.
        n_per_axis (int): Points per axis.
        half_extent (float): L.
        spin (bool): Whether every site carries two spin slots.
        stencil (str): peierls (nearest neighbour with link phases) or spectral (Fourier derivative).
        cap (int): Largest admissible matrix size.
    '''

    dimension: int = 1
    n_per_axis: int = 64
    half_extent: float = 8.0
    spin: bool = False
    stencil: str = PEIERLS
    cap: int = DEFAULT_GRID_CAP

    def __post_init__(self) -> None:
        if self.dimension not in (0, 1, 2, 3):
            raise DomainError("grid dimension must be 0, 1, 2 or 3")
        if self.n_per_axis < 2 or self.half_extent <= 0.0:
            raise DomainError("grid needs n_per_axis >= 2 and a positive half_extent")
        if self.stencil not in STENCILS:
            raise DomainError(f"stencil must be one of {STENCILS}")
        if self.size > self.cap:
            raise GridCapError(f"grid matrix size {self.size} exceeds the cap {self.cap}")

    @property
    def n_sites(self) -> int:
        return self.n_per_axis ** self.dimension

    @property
    def size(self) -> int:
        return self.n_sites * (2 if self.spin else 1)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / self.n_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dimension

    def axis(self) -> np.ndarray:
        return -self.half_extent + self.spacing * np.arange(self.n_per_axis)

    def points(self) -> np.ndarray:
        d = self.dimension
        if d == 0:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*([self.axis()] * d), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, d)


@dataclass(frozen=True, eq=False)
class GridOperator:
    '''
    A Hermitian matrix on a grid with a free-text label for diagnostics.
    '''

    grid: GridSpec
    matrix: np.ndarray
    label: str = ""

    def hermiticity_error(self) -> float:
        scale = max(float(np.max(np.abs(self.matrix))), 1.0)
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T))) / scale

    def is_hermitian(self, rtol: float = HERMITIAN_RTOL) -> bool:
        return self.hermiticity_error() <= rtol

    def eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Eigenvalues (ascending) and eigenvectors of the Hermitian part.

        Raises:
            EigenSolverError: If LAPACK does not converge.
        """
        try:
            return np.linalg.eigh(0.5 * (self.matrix + self.matrix.conj().T))
        except np.linalg.LinAlgError as e:
            raise EigenSolverError(f"eigendecomposition of '{self.label}' failed: {e}") from e

    def spectral_map(self, func: Callable[[np.ndarray], np.ndarray], label: str) -> "GridOperator":
        values, vectors = self.eigh()
        return GridOperator(self.grid, (vectors * func(values)) @ vectors.conj().T, label)

    def semigroup(self, t: float) -> np.ndarray:
        """
        exp(-t M) through the eigendecomposition.
        """
        values, vectors = self.eigh()
        return (vectors * np.exp(-t * values)) @ vectors.conj().T

    def __add__(self, other: "GridOperator") -> "GridOperator":
        return GridOperator(self.grid, self.matrix + other.matrix, f"{self.label} + {other.label}")

    def scaled(self, factor: float, label: Optional[str] = None) -> "GridOperator":
        return GridOperator(self.grid, factor * self.matrix, label or f"{factor:g} * {self.label}")


def _kron_axis(block: np.ndarray, axis: int, dimension: int, n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for mu in range(dimension):
        out = np.kron(out, block if mu == axis else np.eye(n))
    return out


def _fourier_derivative(n: int, spacing: float) -> np.ndarray:
    k = 2.0 * math.pi * np.fft.fftfreq(n, d=spacing)
    dft = np.fft.fft(np.eye(n), axis=0)
    p = np.fft.ifft(k[:, None] * dft, axis=0)
    return 0.5 * (p + p.conj().T)


def _peierls_h(fields: FieldConfig, grid: GridSpec) -> np.ndarray:
    d, n, dx = grid.dimension, grid.n_per_axis, grid.spacing
    points = grid.points()
    sites = np.arange(grid.n_sites).reshape((n,) * d)
    matrix = np.diag(np.full(grid.n_sites, d / dx ** 2)).astype(complex)
    for mu in range(d):
        neighbour = np.roll(sites, -1, axis=mu).ravel()
        step = np.zeros(d)
        step[mu] = dx
        link = np.exp(-1j * fields.a(points + 0.5 * step)[:, mu] * dx)
        np.add.at(matrix, (sites.ravel(), neighbour), -link / (2.0 * dx ** 2))
        np.add.at(matrix, (neighbour, sites.ravel()), -link.conj() / (2.0 * dx ** 2))
    return matrix


def _spectral_h(fields: FieldConfig, grid: GridSpec) -> np.ndarray:
    d, n = grid.dimension, grid.n_per_axis
    a = fields.a(grid.points())
    p1 = _fourier_derivative(n, grid.spacing)
    matrix = np.zeros((grid.n_sites, grid.n_sites), dtype=complex)
    for mu in range(d):
        covariant = _kron_axis(p1, mu, d, n) - np.diag(a[:, mu])
        matrix += 0.5 * covariant @ covariant
    return matrix


def discretize_h(fields: FieldConfig, grid: GridSpec) -> GridOperator:
    """
    The magnetic kinetic operator (1/2)(-i grad - a)^2 on a spinless grid.

    The peierls stencil is
        (h u)(x) = (1 / (2 dx^2)) sum_mu [2 u(x) - U(x, x+e) u(x+e) - U(x, x-e) u(x-e)]
    with link phases U(x, y) = exp(-i a((x+y)/2) . (y - x)); it is exactly gauge covariant.
    The spectral stencil squares the covariant Fourier derivative and reproduces the
    continuum dispersion |xi|^2 / 2 on every grid frequency.

    Raises:
        DomainError: On a spin grid or a field/grid dimension mismatch.
    """
    if grid.spin:
        raise DomainError("discretize_h needs a spinless grid")
    if fields.dimension != grid.dimension:
        raise DomainError("field and grid dimensions differ")
    if grid.dimension == 0:
        return GridOperator(grid, np.zeros((1, 1), dtype=complex), "h(a)")
    matrix = _peierls_h(fields, grid) if grid.stencil == PEIERLS else _spectral_h(fields, grid)
    return GridOperator(grid, matrix, f"h(a) [{grid.stencil}]")


def _spinless(grid: GridSpec) -> GridSpec:
    return GridSpec(grid.dimension, grid.n_per_axis, grid.half_extent, False, grid.stencil, grid.cap)


def spin_block(fields: FieldConfig, grid: GridSpec) -> np.ndarray:
    """
    The site-diagonal spin term -(1/2) sigma . b(x) in site-major, spin-minor order.
    """
    b = fields.b(grid.points())
    return -0.5 * sum(np.kron(np.diag(b[:, i]), _SIGMA[i]) for i in range(3))


def discretize_pauli0(fields: FieldConfig, grid: GridSpec, kinetic: bool = True) -> GridOperator:
    """
    H0 = h(a) (x) I - (1/2) sigma . b on a spin grid.

    Row slot 0 (theta = +1) couples to slot 1 through -(1/2)(b1 - i b2), row slot 1 to
    slot 0 through -(1/2)(b1 + i b2). With kinetic=False only the spin term is kept.

    Raises:
        DomainError: On a spinless grid.
    """
    if not grid.spin:
        raise DomainError("discretize_pauli0 needs a spin grid")
    spin_term = spin_block(fields, grid)
    if kinetic and grid.dimension > 0:
        h = discretize_h(fields, _spinless(grid)).matrix
        matrix = np.kron(h, np.eye(2)) + spin_term
    else:
        matrix = spin_term
    return GridOperator(grid, matrix, "H0(a, b)" if kinetic else "-(1/2) sigma.b")


def potential_operator(fields: FieldConfig, grid: GridSpec) -> GridOperator:
    values = fields.V(grid.points())
    if grid.spin:
        values = np.repeat(values, 2)
    return GridOperator(grid, np.diag(values).astype(complex), "V")


def add_potential(op: GridOperator, fields: FieldConfig) -> GridOperator:
    return op + potential_operator(fields, op.grid)


def apply_bernstein(op: GridOperator, params: ModelParams, clamp_tol: float = CLAMP_TOL) -> GridOperator:
    """
    Psi_c(op) by spectral calculus.

    Eigenvalues in [-clamp_tol, 0) are treated as roundoff and clamped to 0; eigenvalues
    further below zero but above -theta go through the continuation of Psi, which Pauli
    operators with a spin term need.

    Raises:
        DomainError: If some eigenvalue is <= -theta.
        EigenSolverError: If the eigendecomposition fails.
    """
    theta = params.theta

    def psi(values: np.ndarray) -> np.ndarray:
        values = np.where((values < 0.0) & (values >= -clamp_tol), 0.0, values)
        if np.any(values <= -theta):
            raise DomainError(
                f"'{op.label}' has eigenvalue {values.min():.6g} <= -theta = {-theta:.6g}; Psi_c of it is undefined"
            )
        if np.any(values < 0.0):
            log.debug("'%s' has negative eigenvalues down to %.6g; using the continuation of Psi", op.label, values.min())
        return np.asarray(bernstein(params, values))

    return op.spectral_map(psi, f"Psi_c({op.label})")


def relativistic_operator(fields: FieldConfig, grid: GridSpec, params: ModelParams, kinetic: bool = True) -> GridOperator:
    """
    Psi_c(h(a)) + V on a spinless grid, Psi_c(H0(a, b)) + V on a spin grid.
    """
    base = discretize_pauli0(fields, grid, kinetic) if grid.spin else discretize_h(fields, grid)
    return add_potential(apply_bernstein(base, params), fields)


def nonrelativistic_pauli(fields: FieldConfig, grid: GridSpec, kinetic: bool = True) -> GridOperator:
    return add_potential(discretize_pauli0(fields, grid, kinetic), fields)


def limit_generator(fields: FieldConfig, grid: GridSpec, params: ModelParams, kinetic: bool = True) -> GridOperator:
    """
    The c -> infinity generator: kappa h(a) + V without spin, kappa (H0(a, b) + V) with spin.

    The potential is scaled by kappa only in the spin case.
    """
    kappa = LimitCoefficients.from_params(params).kappa
    if grid.spin:
        return nonrelativistic_pauli(fields, grid, kinetic).scaled(kappa, "H_alpha,Z2")
    return add_potential(discretize_h(fields, grid).scaled(kappa), fields)


def grid_vector(function, grid: GridSpec) -> np.ndarray:
    return np.asarray(function.grid_values(grid.points(), grid.spin), dtype=complex)


def semigroup_pairing(op: GridOperator, f, g, t: float) -> complex:
    """
    <f, exp(-t M) g> with quadrature weight dx^d.

    Raises:
        DomainError: If t < 0.
    """
    if t < 0.0:
        raise DomainError("t must be nonnegative")
    fv, gv = grid_vector(f, op.grid), grid_vector(g, op.grid)
    if t == 0.0:
        return complex(np.vdot(fv, gv) * op.grid.cell_volume)
    values, vectors = op.eigh()
    fc = vectors.conj().T @ fv
    gc = vectors.conj().T @ gv
    return complex(np.sum(fc.conj() * np.exp(-t * values) * gc) * op.grid.cell_volume)


def semigroup_norm_gap(op_a: GridOperator, op_b: GridOperator, t: float) -> float:
    """
    Spectral norm of exp(-t A) - exp(-t B).
    """
    return float(np.linalg.norm(op_a.semigroup(t) - op_b.semigroup(t), ord=2))


def fourier_pairing(params: ModelParams, f, g, t: float, tol: float = 1e-12) -> complex:
    """
    The free spinless pairing in one dimension by quadrature on the Fourier side:
    integral of conj(f^(xi)) g^(xi) exp(-t Psi_c(xi^2 / 2)) dxi.

    Raises:
        DomainError: Outside one dimension.
        QuadratureError: On non-convergence.
    """
    if f.dimension != 1 or g.dimension != 1:
        raise DomainError("fourier_pairing is one-dimensional")

    def integrand(xi: float) -> complex:
        point = np.array([[xi]])
        return complex(np.conj(f.fourier_transform(point)[0]) * g.fourier_transform(point)[0]) * math.exp(
            -t * bernstein(params, 0.5 * xi * xi)
        )

    total = 0j
    for part, lower, upper in (("real", -math.inf, 0.0), ("real", 0.0, math.inf), ("imag", -math.inf, 0.0), ("imag", 0.0, math.inf)):
        result = integrate.quad(lambda xi: getattr(integrand(xi), part), lower, upper, epsabs=tol, epsrel=1e-12, limit=400, full_output=1)
        if len(result) == 4:
            raise QuadratureError(f"Fourier-side quadrature did not converge: {result[3]}")
        total += result[0] if part == "real" else 1j * result[0]
    return total


def check_boundary_mass(
        f,
        grid: GridSpec,
        margin_cells: int = DEFAULT_BOUNDARY_MARGIN,
        tol: float = DEFAULT_BOUNDARY_TOL,
    ) -> float:
    """
    Mass of |f|^2 within margin_cells spacings of the boundary of [-L, L]^d.

    Raises:
        BoundaryMassError: If the mass exceeds tol.
    """
    if grid.dimension == 0:
        return 0.0
    points = grid.points()
    near = np.any(np.abs(points) >= grid.half_extent - margin_cells * grid.spacing, axis=1)
    values = grid_vector(f, grid)
    density = np.abs(values) ** 2
    if grid.spin:
        density = density.reshape(-1, 2).sum(axis=1)
    mass = float(np.sum(density[near]) * grid.cell_volume)
    if mass > tol:
        raise BoundaryMassError(
            f"test function has mass {mass:.3g} within {margin_cells} cells of the boundary; increase half_extent"
        )
    return mass
