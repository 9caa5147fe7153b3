'''
Closed-form field presets and Gaussian wavepacket test functions

Vector potentials, scalar potentials and magnetic fields are small frozen
dataclasses evaluated on point arrays of shape (k, d); they pickle cleanly so
they can be shipped to worker processes. Config files refer to them by the
names registered in VECTOR_POTENTIALS, POTENTIALS and MAGNETIC_FIELDS.
'''

import math
from dataclasses import asdict, dataclass, field
from typing import ClassVar, Dict, Optional, Tuple

import numpy as np

from .errors import DomainError

# Width of the Gaussian proposal relative to the test function width.
PROPOSAL_WIDTH_FACTOR = 1.5


def _points(x, dimension: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and x.shape[0] == dimension:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dimension:
        raise DomainError(f"expected points of shape (k, {dimension}), got {x.shape}")
    return x


class _Preset:
    name: ClassVar[str] = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "params": asdict(self)}


# Vector potentials

@dataclass(frozen=True)
class ZeroVectorPotential(_Preset):
    name: ClassVar[str] = "zero"

    def __call__(self, x, dimension: int) -> np.ndarray:
        return np.zeros_like(_points(x, dimension))


@dataclass(frozen=True)
class GradientVectorPotential(_Preset):
    '''
    A pure gauge a = grad chi with chi(x) = scale |x|^2 / 2 + wavevector . x.

    Attributes:
        scale (float): Coefficient of the quadratic part.
        wavevector (tuple): Coefficients of the linear part; empty means zero.
    '''

    name: ClassVar[str] = "gradient"
    scale: float = 1.0
    wavevector: Tuple[float, ...] = ()

    def _k(self, dimension: int) -> np.ndarray:
        if not self.wavevector:
            return np.zeros(dimension)
        if len(self.wavevector) != dimension:
            raise DomainError(f"wavevector needs {dimension} components")
        return np.asarray(self.wavevector, dtype=float)

    def chi(self, x, dimension: int) -> np.ndarray:
        x = _points(x, dimension)
        return 0.5 * self.scale * np.sum(x * x, axis=1) + x @ self._k(dimension)

    def __call__(self, x, dimension: int) -> np.ndarray:
        x = _points(x, dimension)
        return self.scale * x + self._k(dimension)


@dataclass(frozen=True)
class ConstantMagneticGauge(_Preset):
    '''
    Linear gauge of a constant magnetic field b.

    In three dimensions a(x) = (b2 x3, b3 x1, b1 x2), whose curl is (b1, b2, b3).
    In two dimensions a(x) = (0, b3 x1). The gauge is not periodic, so on a
    periodic grid it is only meaningful for wavepackets localized away from the wrap.
    '''

    name: ClassVar[str] = "constant_magnetic"
    b: Tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __call__(self, x, dimension: int) -> np.ndarray:
        x = _points(x, dimension)
        b1, b2, b3 = self.b
        if dimension == 0:
            return x.copy()
        if dimension == 3:
            return np.stack([b2 * x[:, 2], b3 * x[:, 0], b1 * x[:, 1]], axis=1)
        if dimension == 2 and b1 == 0.0 and b2 == 0.0:
            return np.stack([np.zeros(len(x)), b3 * x[:, 0]], axis=1)
        raise DomainError(f"constant_magnetic gauge with b={self.b} is not defined in dimension {dimension}")

    def curl(self) -> "ConstantMagneticField":
        return ConstantMagneticField(b=self.b)


@dataclass(frozen=True)
class ShiftedVectorPotential(_Preset):
    '''
    The gauge transform a + grad chi of a base vector potential.
    '''

    name: ClassVar[str] = "shifted"
    base: object = field(default_factory=ZeroVectorPotential)
    gradient: GradientVectorPotential = field(default_factory=GradientVectorPotential)

    def __call__(self, x, dimension: int) -> np.ndarray:
        return self.base(x, dimension) + self.gradient(x, dimension)

    def curl(self):
        return self.base.curl() if hasattr(self.base, "curl") else None

    def to_dict(self) -> dict:
        return {"name": self.name, "params": {"base": self.base.to_dict(), "gradient": self.gradient.to_dict()}}


# Scalar potentials

@dataclass(frozen=True)
class ZeroPotential(_Preset):
    name: ClassVar[str] = "zero"

    def __call__(self, x, dimension: int) -> np.ndarray:
        return np.zeros(len(_points(x, dimension)))

    def sup_norm(self, dimension: int) -> float:
        return 0.0


@dataclass(frozen=True)
class ConstantPotential(_Preset):
    name: ClassVar[str] = "constant"
    value: float = 0.0

    def __call__(self, x, dimension: int) -> np.ndarray:
        return np.full(len(_points(x, dimension)), float(self.value))

    def sup_norm(self, dimension: int) -> float:
        return abs(self.value)


@dataclass(frozen=True)
class CosinePotential(_Preset):
    '''
    V(x) = amplitude * sum over axes of cos(wavenumber * x_mu).
    '''

    name: ClassVar[str] = "cosine"
    amplitude: float = 1.0
    wavenumber: float = 1.0

    def __call__(self, x, dimension: int) -> np.ndarray:
        x = _points(x, dimension)
        return self.amplitude * np.sum(np.cos(self.wavenumber * x), axis=1)

    def sup_norm(self, dimension: int) -> float:
        return abs(self.amplitude) * dimension


@dataclass(frozen=True)
class HarmonicBoxPotential(_Preset):
    '''
    A harmonic well strength |x|^2 / 2 smoothly saturated at `cap` through cap * tanh(. / cap).
    '''

    name: ClassVar[str] = "harmonic_box"
    strength: float = 1.0
    cap: float = 4.0

    def __post_init__(self) -> None:
        if self.cap <= 0.0:
            raise DomainError("harmonic_box cap must be positive")

    def __call__(self, x, dimension: int) -> np.ndarray:
        x = _points(x, dimension)
        return self.cap * np.tanh(0.5 * self.strength * np.sum(x * x, axis=1) / self.cap)

    def sup_norm(self, dimension: int) -> float:
        return self.cap


@dataclass(frozen=True)
class GaussianBumpPotential(_Preset):
    name: ClassVar[str] = "gaussian_bump"
    amplitude: float = 1.0
    width: float = 1.0
    center: Tuple[float, ...] = ()

    def __call__(self, x, dimension: int) -> np.ndarray:
        x = _points(x, dimension)
        center = np.asarray(self.center, dtype=float) if self.center else np.zeros(dimension)
        r2 = np.sum((x - center) ** 2, axis=1)
        return self.amplitude * np.exp(-0.5 * r2 / self.width ** 2)

    def sup_norm(self, dimension: int) -> float:
        return abs(self.amplitude)


# Magnetic fields; always three components, even below three dimensions

@dataclass(frozen=True)
class ZeroMagneticField(_Preset):
    name: ClassVar[str] = "zero"

    def __call__(self, x, dimension: int) -> np.ndarray:
        return np.zeros((len(_points(x, dimension)), 3))

    def sup_norm(self) -> float:
        return 0.0

    def sup_b3(self) -> float:
        return 0.0

    def sup_transverse(self) -> float:
        return 0.0


@dataclass(frozen=True)
class ConstantMagneticField(_Preset):
    name: ClassVar[str] = "constant"
    b: Tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __call__(self, x, dimension: int) -> np.ndarray:
        k = len(_points(x, dimension))
        return np.tile(np.asarray(self.b, dtype=float), (k, 1))

    def sup_norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.b))

    def sup_b3(self) -> float:
        return abs(self.b[2])

    def sup_transverse(self) -> float:
        return 0.5 * math.hypot(self.b[0], self.b[1])


@dataclass(frozen=True)
class GaussianBumpB1Field(_Preset):
    '''
    b = (amplitude * exp(-|x|^2 / (2 width^2)), 0, 0); b1 vanishes in the far field.
    '''

    name: ClassVar[str] = "gaussian_bump_b1"
    amplitude: float = 1.0
    width: float = 1.0

    def __call__(self, x, dimension: int) -> np.ndarray:
        x = _points(x, dimension)
        out = np.zeros((len(x), 3))
        out[:, 0] = self.amplitude * np.exp(-0.5 * np.sum(x * x, axis=1) / self.width ** 2)
        return out

    def sup_norm(self) -> float:
        return abs(self.amplitude)

    def sup_b3(self) -> float:
        return 0.0

    def sup_transverse(self) -> float:
        return 0.5 * abs(self.amplitude)


VECTOR_POTENTIALS = {cls.name: cls for cls in (ZeroVectorPotential, GradientVectorPotential, ConstantMagneticGauge)}
POTENTIALS = {cls.name: cls for cls in (ZeroPotential, ConstantPotential, CosinePotential, HarmonicBoxPotential, GaussianBumpPotential)}
MAGNETIC_FIELDS = {cls.name: cls for cls in (ZeroMagneticField, ConstantMagneticField, GaussianBumpB1Field)}


def make_preset(registry: Dict[str, type], name: str, params: Optional[dict] = None):
    """
    Builds a registered preset by name; list-valued parameters become tuples.

    Raises:
        DomainError: On an unknown name or parameter.
    """
    if name not in registry:
        raise DomainError(f"unknown preset '{name}', expected one of {sorted(registry)}")
    params = {key: tuple(value) if isinstance(value, list) else value for key, value in (params or {}).items()}
    try:
        return registry[name](**params)
    except TypeError as e:
        raise DomainError(f"bad parameters for preset '{name}': {e}") from e


@dataclass(frozen=True)
class FieldConfig:
    '''
    The triple (a, V, b) on R^dimension.

    When `magnetic` is omitted, b is derived from the vector potential when it
    has a closed-form curl, and is zero otherwise.

    Attributes:
        dimension (int): 0 (spin-only mode), 1, 2 or 3.
        vector_potential: Callable a(x, dimension) -> (k, d).
        potential: Callable V(x, dimension) -> (k,) with a computable sup-norm.
        magnetic: Optional callable b(x, dimension) -> (k, 3).
    '''

    dimension: int = 1
    vector_potential: object = field(default_factory=ZeroVectorPotential)
    potential: object = field(default_factory=ZeroPotential)
    magnetic: Optional[object] = None

    def __post_init__(self) -> None:
        if self.dimension not in (0, 1, 2, 3):
            raise DomainError(f"dimension must be 0, 1, 2 or 3, got {self.dimension}")

    @property
    def magnetic_field(self):
        if self.magnetic is not None:
            return self.magnetic
        curl = getattr(self.vector_potential, "curl", None)
        derived = curl() if curl is not None else None
        return derived if derived is not None else ZeroMagneticField()

    def a(self, x) -> np.ndarray:
        return self.vector_potential(x, self.dimension)

    def V(self, x) -> np.ndarray:
        return self.potential(x, self.dimension)

    def b(self, x) -> np.ndarray:
        return self.magnetic_field(x, self.dimension)

    @property
    def potential_sup(self) -> float:
        return self.potential.sup_norm(self.dimension)

    @property
    def M(self) -> float:
        """sup |b3|."""
        return self.magnetic_field.sup_b3()

    @property
    def M_prime(self) -> float:
        """sup of half the transverse field strength."""
        return self.magnetic_field.sup_transverse()

    @property
    def magnetic_sup(self) -> float:
        return self.magnetic_field.sup_norm()

    def with_vector_potential(self, vector_potential) -> "FieldConfig":
        return FieldConfig(self.dimension, vector_potential, self.potential, self.magnetic)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "vector_potential": self.vector_potential.to_dict(),
            "potential": self.potential.to_dict(),
            "magnetic": None if self.magnetic is None else self.magnetic.to_dict(),
        }


@dataclass(frozen=True)
class TestFunction:
    '''
    A Gaussian wavepacket, optionally with a spin part.

        f(x, s) = amplitude * spin[s] * (pi w^2)^(-d/4) * exp(-|x - center|^2 / (2 w^2) + i momentum . x)

    The spatial factor has unit L2 norm, so the norm is |amplitude| times the
    Euclidean norm of the spin amplitudes. Spin slot 0 is theta = +1, slot 1 is theta = -1.

    Methods:
        value:
            Evaluates the function at points, for one spin slot when spinful.
        fourier_transform:
            Unitary Fourier transform of the spatial part.
        proposal_sample / proposal_density:
            The Gaussian importance density N(center, (1.5 w)^2 I) matched to the wavepacket.
    '''

    center: Tuple[float, ...] = (0.0,)
    width: float = 1.0
    momentum: Tuple[float, ...] = ()
    spin: Optional[Tuple[complex, complex]] = None
    amplitude: complex = 1.0

    def __post_init__(self) -> None:
        if self.width <= 0.0:
            raise DomainError("test function width must be positive")
        if self.momentum and len(self.momentum) != len(self.center):
            raise DomainError("momentum and center must have the same length")
        if self.spin is not None and len(self.spin) != 2:
            raise DomainError("spin amplitudes need exactly two entries")

    @property
    def dimension(self) -> int:
        return len(self.center)

    @property
    def has_spin(self) -> bool:
        return self.spin is not None

    @property
    def norm(self) -> float:
        spin_norm = 1.0 if self.spin is None else math.sqrt(sum(abs(s) ** 2 for s in self.spin))
        return abs(self.amplitude) * spin_norm

    def _momentum(self) -> np.ndarray:
        return np.asarray(self.momentum, dtype=float) if self.momentum else np.zeros(self.dimension)

    def spatial(self, x) -> np.ndarray:
        x = _points(x, self.dimension)
        d = self.dimension
        center = np.asarray(self.center, dtype=float)
        r2 = np.sum((x - center) ** 2, axis=1)
        return (math.pi * self.width ** 2) ** (-d / 4.0) * np.exp(-0.5 * r2 / self.width ** 2 + 1j * (x @ self._momentum()))

    def value(self, x, slot: Optional[int] = None) -> np.ndarray:
        if self.spin is None:
            if slot is not None:
                raise DomainError("spinless test function evaluated with a spin slot")
            return self.amplitude * self.spatial(x)
        if slot not in (0, 1):
            raise DomainError("spinful test function needs slot 0 or 1")
        return self.amplitude * self.spin[slot] * self.spatial(x)

    def grid_values(self, points, spin: bool) -> np.ndarray:
        """
        Values on grid points, interleaved site-major and spin-minor when spin is True.
        """
        if not spin:
            return self.value(points)
        return np.stack([self.value(points, 0), self.value(points, 1)], axis=1).ravel()

    def fourier_transform(self, xi) -> np.ndarray:
        """
        (2 pi)^(-d/2) * integral of f(x) exp(-i xi . x) dx for the spatial part times amplitude.
        """
        xi = _points(xi, self.dimension)
        center = np.asarray(self.center, dtype=float)
        shift = xi - self._momentum()
        w = self.width
        per_axis = (math.pi * w ** 2) ** -0.25 * w * np.exp(-0.5 * w ** 2 * shift ** 2 - 1j * shift * center)
        return self.amplitude * np.prod(per_axis, axis=1)

    @property
    def proposal_width(self) -> float:
        return PROPOSAL_WIDTH_FACTOR * self.width

    def proposal_sample(self, rng: np.random.Generator) -> np.ndarray:
        center = np.asarray(self.center, dtype=float)
        return center + self.proposal_width * rng.standard_normal(self.dimension)

    def proposal_density(self, x) -> np.ndarray:
        x = _points(x, self.dimension)
        s = self.proposal_width
        r2 = np.sum((x - np.asarray(self.center, dtype=float)) ** 2, axis=1)
        return (2.0 * math.pi * s * s) ** (-self.dimension / 2.0) * np.exp(-0.5 * r2 / (s * s))

    def with_spin(self, spin: Optional[Tuple[complex, complex]]) -> "TestFunction":
        return TestFunction(self.center, self.width, self.momentum, spin, self.amplitude)

    def scaled(self, factor: complex) -> "TestFunction":
        return TestFunction(self.center, self.width, self.momentum, self.spin, self.amplitude * factor)


@dataclass(frozen=True)
class GaugedTestFunction:
    '''
    exp(-i chi) * base for a pure gauge chi; shares the base proposal.

    With a -> a + grad chi the path weights pick up exp(-i (chi(B_end) - chi(B_start))),
    which is exactly absorbed by applying this transform to both test functions.
    '''

    base: TestFunction
    gauge: GradientVectorPotential

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def has_spin(self) -> bool:
        return self.base.has_spin

    @property
    def norm(self) -> float:
        return self.base.norm

    def value(self, x, slot: Optional[int] = None) -> np.ndarray:
        return np.exp(-1j * self.gauge.chi(x, self.dimension)) * self.base.value(x, slot)

    def grid_values(self, points, spin: bool) -> np.ndarray:
        phase = np.exp(-1j * self.gauge.chi(points, self.dimension))
        if spin:
            phase = np.repeat(phase, 2)
        return phase * self.base.grid_values(points, spin)

    def proposal_sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.base.proposal_sample(rng)

    def proposal_density(self, x) -> np.ndarray:
        return self.base.proposal_density(x)
