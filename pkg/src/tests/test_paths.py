import math
import unittest

import numpy as np

from relkac.errors import DomainError, GridContractError
from relkac.fields import ConstantMagneticField, ConstantPotential, FieldConfig, GradientVectorPotential
from relkac.paths import (
    POST_JUMP,
    PRE_JUMP,
    assemble_weight_pauli,
    assemble_weight_spinless,
    jump_weight_factors,
    jump_weight_product,
    merge_time_grid,
    outer_potential_integral,
    spin_b3_integral,
    stratonovich_integral,
)
from relkac.sampler import (
    RngStream,
    SpinPath,
    deterministic_subordinator_path,
    sample_brownian,
    sample_subordinator_path,
)
from relkac.model import ModelParams


class TestTimeGrid(unittest.TestCase):

    def test_events_become_knots(self):
        grid = merge_time_grid(1.0, 0.25, [0.4, 2.0], np.array([0.8]))
        np.testing.assert_array_equal(grid, [0.0, 0.25, 0.4, 0.5, 0.75, 0.8, 1.0])
        self.assertEqual(grid[0], 0.0)
        self.assertEqual(grid[-1], 1.0)

    def test_zero_horizon(self):
        np.testing.assert_array_equal(merge_time_grid(0.0, 0.1), [0.0])

    def test_validation(self):
        with self.assertRaises(DomainError):
            merge_time_grid(-1.0, 0.1)
        with self.assertRaises(DomainError):
            merge_time_grid(1.0, 0.0)


class TestStratonovich(unittest.TestCase):

    def test_exact_for_quadratic_gauge(self):
        """
        The midpoint sum of grad(|x|^2 / 2) telescopes to (|x_end|^2 - |x_0|^2) / 2.
        """
        fields = FieldConfig(dimension=2, vector_potential=GradientVectorPotential(scale=1.0))
        path = sample_brownian(2, np.linspace(0.0, 1.0, 257), [0.5, -1.0], RngStream(1, 0))
        expected = 0.5 * (np.sum(path.positions[-1] ** 2) - np.sum(path.positions[0] ** 2))
        self.assertAlmostEqual(stratonovich_integral(fields, path), expected, delta=1e-12)

    def test_linear_gauge(self):
        fields = FieldConfig(dimension=1, vector_potential=GradientVectorPotential(scale=0.0, wavevector=(2.0,)))
        path = sample_brownian(1, np.linspace(0.0, 1.0, 33), [0.0], RngStream(2, 0))
        self.assertAlmostEqual(stratonovich_integral(fields, path, 0.5), 2.0 * path.positions[16, 0], delta=1e-12)

    def test_horizon_beyond_grid(self):
        fields = FieldConfig(dimension=1)
        path = sample_brownian(1, [0.0, 0.5], [0.0], RngStream(0, 0))
        with self.assertRaises(GridContractError):
            stratonovich_integral(fields, path, 1.0)


class TestPotentialIntegral(unittest.TestCase):

    def test_constant_potential(self):
        fields = FieldConfig(dimension=1, potential=ConstantPotential(2.0))
        spath = sample_subordinator_path(ModelParams.classical(), 1.5, 8, RngStream(3, 0))
        grid = merge_time_grid(spath.horizon, 0.01, spath.cumulative)
        bpath = sample_brownian(1, grid, [0.0], RngStream(3, 1))
        self.assertAlmostEqual(outer_potential_integral(fields, bpath, spath), 3.0, delta=1e-12)

    def test_contract(self):
        fields = FieldConfig(dimension=1, potential=ConstantPotential(1.0))
        spath = deterministic_subordinator_path(1.0, 1.0, 3)
        bpath = sample_brownian(1, [0.0, 0.5, 1.0], [0.0], RngStream(0, 0))
        with self.assertRaises(GridContractError):
            outer_potential_integral(fields, bpath, spath)

    def test_spinless_weight_without_fields(self):
        spath = deterministic_subordinator_path(1.0, 1.0, 4)
        bpath = sample_brownian(1, merge_time_grid(1.0, 0.1, spath.cumulative), [0.0], RngStream(4, 0))
        self.assertEqual(assemble_weight_spinless(FieldConfig(dimension=1), bpath, spath), 1.0 + 0j)


class TestSpinWeights(unittest.TestCase):

    def _path(self, jumps, horizon=1.0):
        grid = merge_time_grid(horizon, 0.05, jumps)
        return sample_brownian(0, grid, [], RngStream(5, 0))

    def test_b3_integral(self):
        fields = FieldConfig(dimension=0, magnetic=ConstantMagneticField((0.0, 0.0, 2.0)))
        spin = SpinPath(np.array([0.25]), 1, 1.0)
        bpath = self._path(spin.jump_times)
        # theta = +1 on [0, 0.25), -1 on [0.25, 1]
        self.assertAlmostEqual(spin_b3_integral(fields, bpath, spin, 1.0), 0.5 * 2.0 * (0.25 - 0.75), delta=1e-12)

    def test_jump_conventions(self):
        fields = FieldConfig(dimension=0, magnetic=ConstantMagneticField((0.0, 1.0, 0.0)))
        spin = SpinPath(np.array([0.2, 0.7]), 1, 1.0)
        bpath = self._path(spin.jump_times)
        np.testing.assert_allclose(jump_weight_factors(fields, bpath, spin, 1.0, PRE_JUMP), [-0.5j, 0.5j])
        np.testing.assert_allclose(jump_weight_factors(fields, bpath, spin, 1.0, POST_JUMP), [0.5j, -0.5j])
        self.assertAlmostEqual(jump_weight_product(fields, bpath, spin, 1.0), 0.25 + 0j, delta=1e-15)
        with self.assertRaises(DomainError):
            jump_weight_factors(fields, bpath, spin, 1.0, "midpoint")

    def test_jump_off_grid(self):
        fields = FieldConfig(dimension=0, magnetic=ConstantMagneticField((1.0, 0.0, 0.0)))
        spin = SpinPath(np.array([0.333]), 1, 1.0)
        bpath = self._path([])
        with self.assertRaises(GridContractError):
            jump_weight_factors(fields, bpath, spin, 1.0)

    def test_empty_product(self):
        fields = FieldConfig(dimension=0, magnetic=ConstantMagneticField((1.0, 0.0, 0.0)))
        spin = SpinPath(np.empty(0), -1, 1.0)
        self.assertEqual(jump_weight_product(fields, self._path([]), spin, 1.0), 1.0 + 0j)

    def test_vanishing_transverse_field_kills_jumping_paths(self):
        fields = FieldConfig(dimension=0, magnetic=ConstantMagneticField((0.0, 0.0, 1.0)))
        spin = SpinPath(np.array([0.5]), 1, 1.0)
        outer = deterministic_subordinator_path(1.0, 1.0, 4)
        grid = merge_time_grid(1.0, 0.05, spin.jump_times, outer.cumulative)
        bpath = sample_brownian(0, grid, [], RngStream(6, 0))
        self.assertEqual(assemble_weight_pauli(fields, bpath, spin, 1.0, outer), 0j)

    def test_pauli_weight_without_jumps(self):
        fields = FieldConfig(dimension=0, potential=ConstantPotential(0.5), magnetic=ConstantMagneticField((0.0, 0.0, 1.0)))
        spin = SpinPath(np.empty(0), 1, 1.0)
        outer = deterministic_subordinator_path(1.0, 1.0, 4)
        bpath = sample_brownian(0, merge_time_grid(1.0, 0.05, outer.cumulative), [], RngStream(7, 0))
        self.assertAlmostEqual(assemble_weight_pauli(fields, bpath, spin, 1.0, outer), math.exp(-0.5 + 0.5), delta=1e-12)


if __name__ == "__main__":

    unittest.main()
