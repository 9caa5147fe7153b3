import math
import unittest

import numpy as np

from relkac.errors import BoundaryMassError, DomainError, GridCapError
from relkac.fields import (
    ConstantMagneticField,
    ConstantMagneticGauge,
    ConstantPotential,
    CosinePotential,
    FieldConfig,
    GradientVectorPotential,
    TestFunction,
)
from relkac.model import ModelParams
from relkac.oracle import (
    SPECTRAL,
    GridOperator,
    GridSpec,
    apply_bernstein,
    check_boundary_mass,
    discretize_h,
    discretize_pauli0,
    fourier_pairing,
    limit_generator,
    nonrelativistic_pauli,
    relativistic_operator,
    semigroup_norm_gap,
    semigroup_pairing,
)

CLASSICAL = ModelParams.classical()
SPIN_ONLY = GridSpec(0, 2, 1.0, spin=True)


class TestGrid(unittest.TestCase):

    def test_sizes(self):
        grid = GridSpec(2, 4, 2.0, spin=True)
        self.assertEqual(grid.n_sites, 16)
        self.assertEqual(grid.size, 32)
        self.assertEqual(grid.spacing, 1.0)
        self.assertEqual(grid.points().shape, (16, 2))
        self.assertEqual(SPIN_ONLY.size, 2)

    def test_cap(self):
        with self.assertRaises(GridCapError):
            GridSpec(3, 32, 8.0)
        with self.assertRaises(DomainError):
            GridSpec(1, 1, 8.0)


class TestKineticOperator(unittest.TestCase):

    def test_free_eigenvalues(self):
        grid = GridSpec(1, 8, math.pi)
        values = np.sort(np.linalg.eigvalsh(discretize_h(FieldConfig(dimension=1), grid).matrix))
        expected = np.sort((1.0 - np.cos(2.0 * math.pi * np.arange(8) / 8)) / grid.spacing ** 2)
        np.testing.assert_allclose(values, expected, atol=1e-10)

    def test_hermitian_with_magnetic_gauge(self):
        fields = FieldConfig(dimension=2, vector_potential=ConstantMagneticGauge((0.0, 0.0, 0.7)))
        for stencil in ("peierls", SPECTRAL):
            op = discretize_h(fields, GridSpec(2, 6, 3.0, stencil=stencil))
            self.assertTrue(op.is_hermitian())

    def test_gauge_covariance(self):
        """
        A linear gauge that winds an integer number of times around the box is exact on the lattice.
        """
        grid = GridSpec(1, 8, math.pi)
        gauge = GradientVectorPotential(scale=0.0, wavevector=(1.0,))
        h0 = discretize_h(FieldConfig(dimension=1), grid).matrix
        h1 = discretize_h(FieldConfig(dimension=1, vector_potential=gauge), grid).matrix
        phase = np.diag(np.exp(1j * gauge.chi(grid.points(), 1)))
        np.testing.assert_allclose(h1, phase @ h0 @ phase.conj().T, atol=1e-12)

    def test_spectral_dispersion(self):
        grid = GridSpec(1, 16, 4.0, stencil=SPECTRAL)
        values = np.sort(np.linalg.eigvalsh(discretize_h(FieldConfig(dimension=1), grid).matrix))
        k = 2.0 * math.pi * np.fft.fftfreq(16, d=grid.spacing)
        np.testing.assert_allclose(values, np.sort(0.5 * k ** 2), atol=1e-10)


class TestSpinOperators(unittest.TestCase):

    def test_spin_term_eigenvalues(self):
        op = discretize_pauli0(FieldConfig(dimension=0, magnetic=ConstantMagneticField((0.0, 0.0, 1.0))), SPIN_ONLY)
        np.testing.assert_allclose(np.linalg.eigvalsh(op.matrix), [-0.5, 0.5], atol=1e-15)

    def test_spin_only_semigroup(self):
        fields = FieldConfig(dimension=0, magnetic=ConstantMagneticField((1.0, 0.0, 0.0)))
        op = nonrelativistic_pauli(fields, SPIN_ONLY)
        up = TestFunction(center=(), spin=(1.0, 0.0))
        down = TestFunction(center=(), spin=(0.0, 1.0))
        self.assertAlmostEqual(semigroup_pairing(op, up, up, 1.0), math.cosh(0.5), delta=1e-12)
        self.assertAlmostEqual(semigroup_pairing(op, up, down, 1.0), math.sinh(0.5), delta=1e-12)
        self.assertAlmostEqual(math.cosh(0.5), 1.127626, delta=1e-6)
        self.assertAlmostEqual(math.sinh(0.5), 0.521095, delta=1e-6)

    def test_off_diagonal_sign(self):
        fields = FieldConfig(dimension=0, magnetic=ConstantMagneticField((0.0, 1.0, 0.0)))
        op = nonrelativistic_pauli(fields, SPIN_ONLY)
        np.testing.assert_allclose(op.semigroup(1.0)[0, 1], -1j * math.sinh(0.5), atol=1e-12)

    def test_pauli_requires_spin_grid(self):
        with self.assertRaises(DomainError):
            discretize_pauli0(FieldConfig(dimension=1), GridSpec(1, 8, 4.0))
        with self.assertRaises(DomainError):
            discretize_h(FieldConfig(dimension=1), GridSpec(1, 8, 4.0, spin=True))


class TestSpectralCalculus(unittest.TestCase):

    def test_scalar_case(self):
        op = GridOperator(GridSpec(0, 2, 1.0), np.eye(1, dtype=complex), "one")
        self.assertAlmostEqual(apply_bernstein(op, CLASSICAL).matrix[0, 0].real, math.sqrt(3.0) - 1.0, delta=1e-12)

    def test_roundoff_clamp_and_continuation(self):
        grid = GridSpec(0, 2, 1.0)
        clamped = apply_bernstein(GridOperator(grid, np.array([[-1e-12]], dtype=complex)), CLASSICAL)
        self.assertEqual(clamped.matrix[0, 0], 0.0)
        continued = apply_bernstein(GridOperator(grid, np.array([[-0.25]], dtype=complex)), CLASSICAL)
        self.assertAlmostEqual(continued.matrix[0, 0].real, math.sqrt(0.5) - 1.0, delta=1e-12)
        with self.assertRaises(DomainError):
            apply_bernstein(GridOperator(grid, np.array([[-0.5]], dtype=complex)), CLASSICAL)

    def test_relativistic_pauli_is_hermitian(self):
        fields = FieldConfig(dimension=0, potential=ConstantPotential(0.25), magnetic=ConstantMagneticField((0.5, 0.0, 0.5)))
        op = relativistic_operator(fields, SPIN_ONLY, CLASSICAL.with_c(4.0))
        self.assertTrue(op.is_hermitian())

    def test_limit_generator_for_unit_kappa(self):
        fields = FieldConfig(dimension=0, potential=ConstantPotential(0.3), magnetic=ConstantMagneticField((0.2, 0.1, 0.4)))
        limit = limit_generator(fields, SPIN_ONLY, CLASSICAL)
        np.testing.assert_allclose(limit.matrix, nonrelativistic_pauli(fields, SPIN_ONLY).matrix, atol=1e-15)
        self.assertEqual(semigroup_norm_gap(limit, limit, 1.0), 0.0)

    def test_limit_gap_shrinks(self):
        fields = FieldConfig(dimension=1, potential=CosinePotential(0.5))
        grid = GridSpec(1, 32, 8.0, stencil=SPECTRAL)
        limit = limit_generator(fields, grid, CLASSICAL)
        gaps = [semigroup_norm_gap(relativistic_operator(fields, grid, CLASSICAL.with_c(c)), limit, 1.0) for c in (2.0, 4.0, 8.0)]
        self.assertLess(gaps[1], gaps[0])
        self.assertLess(gaps[2], gaps[1])


class TestPairings(unittest.TestCase):

    def test_zero_time(self):
        grid = GridSpec(1, 64, 8.0)
        f = TestFunction(center=(0.0,))
        self.assertAlmostEqual(semigroup_pairing(discretize_h(FieldConfig(dimension=1), grid), f, f, 0.0), 1.0, delta=1e-10)
        with self.assertRaises(DomainError):
            semigroup_pairing(discretize_h(FieldConfig(dimension=1), grid), f, f, -1.0)

    def test_fourier_side_agreement(self):
        grid = GridSpec(1, 256, 12.0, stencil=SPECTRAL)
        f = TestFunction(center=(0.0,))
        g = TestFunction(center=(0.5,), momentum=(0.3,))
        op = apply_bernstein(discretize_h(FieldConfig(dimension=1), grid), CLASSICAL)
        self.assertLess(abs(semigroup_pairing(op, f, g, 1.0) - fourier_pairing(CLASSICAL, f, g, 1.0)), 1e-6)

    def test_linearity_and_conjugate_symmetry(self):
        grid = GridSpec(1, 64, 8.0, stencil=SPECTRAL)
        op = relativistic_operator(FieldConfig(dimension=1, potential=CosinePotential(0.5)), grid, CLASSICAL.with_c(2.0))
        f = TestFunction(center=(0.0,))
        g = TestFunction(center=(0.5,), momentum=(0.3,))
        a = 0.4 - 1.3j
        base = semigroup_pairing(op, f, g, 0.7)
        self.assertLess(abs(semigroup_pairing(op, f, g.scaled(a), 0.7) - a * base), 1e-10)
        self.assertLess(abs(semigroup_pairing(op, f.scaled(a), g, 0.7) - np.conj(a) * base), 1e-10)
        self.assertLess(abs(semigroup_pairing(op, g, f, 0.7) - np.conj(base)), 1e-10)
        fields = FieldConfig(dimension=0, magnetic=ConstantMagneticField((0.5, 0.2, 0.3)))
        pauli = relativistic_operator(fields, SPIN_ONLY, CLASSICAL.with_c(2.0))
        up = TestFunction(center=(), spin=(1.0, 0.0))
        mixed = TestFunction(center=(), spin=(0.6, 0.8j))
        forward = semigroup_pairing(pauli, up, mixed, 0.7)
        self.assertLess(abs(semigroup_pairing(pauli, mixed, up, 0.7) - np.conj(forward)), 1e-12)

    def test_fourier_pairing_is_one_dimensional(self):
        f = TestFunction(center=(0.0, 0.0))
        with self.assertRaises(DomainError):
            fourier_pairing(CLASSICAL, f, f, 1.0)

    def test_boundary_mass(self):
        grid = GridSpec(1, 64, 8.0)
        self.assertLess(check_boundary_mass(TestFunction(center=(0.0,)), grid), 1e-10)
        with self.assertRaises(BoundaryMassError):
            check_boundary_mass(TestFunction(center=(0.0,), width=3.0), grid)


if __name__ == "__main__":

    unittest.main()
