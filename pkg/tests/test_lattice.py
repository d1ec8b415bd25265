"""Tests for the lattice, quadrature rules and binary serialization."""

import json
import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate

from enskog_mild_lib.mild.errors import InputError
from enskog_mild_lib.mild.lattice import (
    FieldLattice,
    GridSpec,
    Trajectory,
    interpolate,
    lattice_mass,
    lattice_nodes,
    load_lattice,
    load_trajectory,
    momentum_rule,
    save_lattice,
    save_trajectory,
    sphere_rule,
    truncation_loss,
    weight_lattice,
    weighted_norm,
)
from enskog_mild_lib.mild.operator import density

from .conftest import gaussian_field


class TestGridSpec:
    """Node counts, axes and validation."""

    def test_even_node_count_rejected(self):
        with pytest.raises(ValidationError, match="odd"):
            GridSpec(n_x=4)

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            GridSpec(n_y=3)

    def test_axes_and_shape(self, tiny_grid):
        np.testing.assert_array_equal(tiny_grid.x_axis, [-2.0, 0.0, 2.0])
        assert tiny_grid.shape == (3, 3, 3, 3, 3, 3)
        np.testing.assert_allclose(tiny_grid.times, [0.0, 0.25, 0.5])
        assert tiny_grid.panels_p == 2

    def test_node_order_is_c_order(self, tiny_grid):
        xs, ps = lattice_nodes(tiny_grid)
        assert xs.shape == (27, 3)
        np.testing.assert_array_equal(xs[1], [-2.0, -2.0, 0.0])
        np.testing.assert_array_equal(ps[9], [0.0, -2.0, -2.0])


class TestFieldLattice:
    """Construction, immutability and interpolation."""

    def test_wrong_shape_rejected(self, tiny_grid):
        with pytest.raises(InputError, match="shape"):
            FieldLattice(tiny_grid, np.zeros((3, 3)))

    def test_non_finite_rejected(self, tiny_grid):
        values = np.zeros(tiny_grid.shape)
        values[0, 0, 0, 0, 0, 0] = np.nan
        with pytest.raises(InputError, match="finite"):
            FieldLattice(tiny_grid, values)

    def test_values_are_read_only(self, tiny_grid):
        field = FieldLattice.zeros(tiny_grid)
        with pytest.raises(ValueError):
            field.values[0, 0, 0, 0, 0, 0] = 1.0

    def test_interpolation_reproduces_nodes(self, tiny_grid):
        field = gaussian_field(tiny_grid)
        xs, ps = lattice_nodes(tiny_grid)
        x = np.repeat(xs, len(ps), axis=0)
        p = np.tile(ps, (len(xs), 1))
        np.testing.assert_allclose(interpolate(field, x, p), field.values.ravel(), rtol=1e-14, atol=1e-15)

    def test_interpolation_exact_for_multilinear(self, tiny_grid):
        def fn(x, p):
            return 1.0 + x[:, 0] - 0.5 * x[:, 2] + 2.0 * p[:, 1] + x[:, 1] * p[:, 0]

        field = FieldLattice.from_function(tiny_grid, fn)
        x = np.array([[0.3, -1.1, 1.7], [-0.2, 0.4, -1.9]])
        p = np.array([[1.2, 0.5, -0.6], [-1.5, -0.3, 0.9]])
        np.testing.assert_allclose(field.interpolate(x, p), fn(x, p), rtol=1e-12)

    def test_interpolation_linear_in_values(self, tiny_grid):
        rng = np.random.default_rng(8)
        F = FieldLattice(tiny_grid, rng.normal(size=tiny_grid.shape))
        G = FieldLattice(tiny_grid, rng.normal(size=tiny_grid.shape))
        alpha, beta = 1.7, -0.4
        combined = F.scaled(alpha) + G.scaled(beta)
        x = rng.uniform(-2.0, 2.0, (50, 3))
        p = rng.uniform(-2.0, 2.0, (50, 3))
        np.testing.assert_allclose(
            interpolate(combined, x, p), alpha * interpolate(F, x, p) + beta * interpolate(G, x, p), atol=1e-12
        )

    def test_zero_outside_box(self, tiny_grid):
        field = gaussian_field(tiny_grid)
        assert interpolate(field, (2.5, 0.0, 0.0), (0.0, 0.0, 0.0)) == 0.0
        assert interpolate(field, (0.0, 0.0, 0.0), (0.0, 0.0, -2.1)) == 0.0

    def test_arithmetic_checks_grid(self, tiny_grid):
        other = GridSpec(x_max=3.0, p_max=2.0, n_x=3, n_p=3, n_omega=6, t_max=0.5, n_t=3)
        with pytest.raises(InputError, match="mismatch"):
            FieldLattice.zeros(tiny_grid) + FieldLattice.zeros(other)


class TestTrajectory:
    """Time-indexed slices."""

    def test_slice_count_must_match_time_nodes(self, tiny_grid):
        with pytest.raises(InputError):
            Trajectory(tiny_grid, (FieldLattice.zeros(tiny_grid),))

    def test_linear_combination(self, tiny_grid):
        f = Trajectory.constant_in_time(gaussian_field(tiny_grid))
        combined = f.scaled(3.0) - f
        np.testing.assert_allclose(combined.stacked(), 2.0 * f.stacked())
        assert len(combined) == tiny_grid.n_t


class TestQuadrature:
    """Sphere and momentum rules."""

    def test_sphere_weights_and_nodes(self):
        rule = sphere_rule(32)
        assert rule.weights.sum() == pytest.approx(4.0 * math.pi, rel=1e-13)
        np.testing.assert_allclose(np.linalg.norm(rule.nodes, axis=1), 1.0, rtol=1e-14)

    def test_sphere_second_moment(self):
        rule = sphere_rule(6)
        assert rule.weights @ rule.nodes[:, 2] ** 2 == pytest.approx(4.0 * math.pi / 3.0, rel=1e-13)
        assert rule.weights @ rule.nodes[:, 0] ** 2 == pytest.approx(4.0 * math.pi / 3.0, rel=1e-13)

    def test_sphere_first_moment_vanishes(self):
        rule = sphere_rule(32)
        np.testing.assert_allclose(rule.weights @ rule.nodes, 0.0, atol=1e-10)

    def test_sphere_refinement_on_smooth_integrand(self):
        """int exp(w.e) dw = 4 pi sinh|e| / |e|."""
        e = np.array([0.3, 0.0, 0.4])
        exact = 4.0 * math.pi * math.sinh(0.5) / 0.5
        coarse, fine = (rule.weights @ np.exp(rule.nodes @ e) for rule in (sphere_rule(16), sphere_rule(64)))
        assert abs(coarse - fine) / fine < 1e-4
        assert fine == pytest.approx(exact, rel=1e-9)

    def test_sphere_rule_rejects_tiny_counts(self):
        with pytest.raises(InputError):
            sphere_rule(4)

    def test_momentum_rule_volume(self, tiny_grid):
        grid = tiny_grid.model_copy(update={"n_quad_p": 3, "n_panels_p": 5})
        rule = momentum_rule(grid)
        assert len(rule.nodes) == 15 ** 3
        assert rule.weights.sum() == pytest.approx(64.0, rel=1e-13)

    def test_momentum_rule_against_sampled_integral(self):
        """int exp(-p0) d^3p over [-6, 6]^3 against 10^7 uniform samples."""
        rule = momentum_rule(GridSpec(p_max=6.0, n_x=3, n_p=13, n_quad_p=4))
        quadrature = float(rule.weights @ np.exp(-np.sqrt(1.0 + np.sum(rule.nodes ** 2, axis=1))))
        rng = np.random.default_rng(0)
        total = total_sq = 0.0
        n = 10_000_000
        for _ in range(10):
            p = rng.uniform(-6.0, 6.0, size=(n // 10, 3))
            sample = 12.0 ** 3 * np.exp(-np.sqrt(1.0 + np.sum(p * p, axis=1)))
            total += float(sample.sum())
            total_sq += float((sample * sample).sum())
        mean = total / n
        se = math.sqrt((total_sq / n - mean * mean) / n)
        assert abs(quadrature - mean) <= 3.0 * se

    def test_density_integrates_the_interpolant(self, tiny_grid):
        """Cell midpoints integrate multilinear data exactly, like the trapezoid rule."""
        field = gaussian_field(tiny_grid)
        expected = field.values[1, 1, 1]
        for _ in range(3):
            expected = integrate.trapezoid(expected, dx=tiny_grid.dp, axis=0)
        assert density(field, 0.0, (0.0, 0.0, 0.0)) == pytest.approx(float(expected), rel=1e-12)

    def test_gaussian_density(self):
        grid = GridSpec(x_max=2.0, p_max=4.0, n_x=3, n_p=11, n_omega=6, t_max=0.5, n_t=2)
        field = FieldLattice.from_function(grid, lambda x, p: np.exp(-np.sum(p * p, axis=1)))
        assert density(field, 0.0, (0.0, 0.0, 0.0)) == pytest.approx(math.pi ** 1.5, rel=1e-3)


class TestNormsAndMass:
    """Weighted norm, lattice mass and truncation loss."""

    def test_weight_has_unit_norm(self, tiny_grid, kernel):
        m = weight_lattice(tiny_grid, kernel)
        assert weighted_norm(m, kernel) == pytest.approx(1.0)
        assert weighted_norm(m.scaled(-0.25), kernel) == pytest.approx(0.25)
        assert weighted_norm(Trajectory.zeros(tiny_grid), kernel) == 0.0

    def test_norm_axioms_on_random_trajectories(self, tiny_grid, kernel):
        rng = np.random.default_rng(9)
        m = weight_lattice(tiny_grid, kernel).values
        for _ in range(10):
            f, g = (
                Trajectory.from_stacked(tiny_grid, m[None] * rng.normal(size=(tiny_grid.n_t, *tiny_grid.shape)))
                for _ in range(2)
            )
            assert weighted_norm(f + g, kernel) <= weighted_norm(f, kernel) + weighted_norm(g, kernel) + 1e-12
            lam = rng.uniform(-3.0, 3.0)
            assert weighted_norm(f.scaled(lam), kernel) == pytest.approx(abs(lam) * weighted_norm(f, kernel), rel=1e-12)

    def test_mass_of_constant_field(self, tiny_grid):
        field = FieldLattice(tiny_grid, np.ones(tiny_grid.shape))
        assert lattice_mass(field) == pytest.approx(4.0 ** 6)

    def test_truncation_loss_shrinks_with_box(self):
        small = GridSpec(p_max=2.0, n_x=3, n_p=9, n_quad_p=3)
        large = GridSpec(p_max=8.0, n_x=3, n_p=9, n_quad_p=3)
        assert truncation_loss(small) > 0.2
        assert 0.0 <= truncation_loss(large) < 0.05
        assert truncation_loss(large) < truncation_loss(small)


class TestSerialization:
    """Little-endian float64 binary plus a JSON header."""

    def test_lattice_round_trip_is_bit_exact(self, tiny_grid, temp_dir):
        field = gaussian_field(tiny_grid, amplitude=0.3)
        save_lattice(field, temp_dir / "f0.bin")
        loaded = load_lattice(temp_dir / "f0.bin")
        assert loaded.spec == tiny_grid
        assert loaded.values.tobytes() == field.values.tobytes()

    def test_trajectory_header(self, tiny_grid, temp_dir):
        traj = Trajectory.constant_in_time(gaussian_field(tiny_grid))
        save_trajectory(traj, temp_dir / "trajectory.bin")
        header = json.loads((temp_dir / "header.json").read_text())
        assert header["kind"] == "trajectory"
        assert header["dtype"] == "<f8"
        assert header["shape"] == [3, 3, 3, 3, 3, 3, 3]
        assert (temp_dir / "trajectory.bin").stat().st_size == 8 * 3 ** 7
        np.testing.assert_array_equal(load_trajectory(temp_dir / "trajectory.bin").stacked(), traj.stacked())

    def test_kind_mismatch_rejected(self, tiny_grid, temp_dir):
        save_trajectory(Trajectory.zeros(tiny_grid), temp_dir / "trajectory.bin", temp_dir / "t.json")
        with pytest.raises(InputError, match="trajectory"):
            load_lattice(temp_dir / "trajectory.bin", temp_dir / "t.json")
