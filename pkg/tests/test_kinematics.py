"""Tests for the relativistic collision geometry."""

import math

import numpy as np
import pytest

from enskog_mild_lib.mild import kinematics
from enskog_mild_lib.mild.errors import DegenerateCollisionError, DomainError, InputError, IssueCollector, IssueType
from enskog_mild_lib.mild.kinematics import (
    COS_CLAMP_TOL,
    CollisionGeometry,
    Momentum3,
    collision_invariants,
    energy,
    in_S_plus,
    kinematics_selftest,
    omega_flux,
    post_collision,
    relative_velocity,
    sample_collisions,
    scattering_angle,
)


class TestHeadOnCollision:
    """p = (1, 0, 0) hitting a particle at rest along -x."""

    P = (1.0, 0.0, 0.0)
    P1 = (0.0, 0.0, 0.0)
    OMEGA = (-1.0, 0.0, 0.0)

    def test_momentum_transfer_is_one(self):
        _, _, q = post_collision(self.P, self.P1, self.OMEGA)
        assert q == pytest.approx(1.0, abs=1e-14)

    def test_momenta_are_exchanged(self):
        p_prime, p1_prime, _ = post_collision(self.P, self.P1, self.OMEGA)
        np.testing.assert_allclose(p_prime, [0.0, 0.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(p1_prime, [1.0, 0.0, 0.0], atol=1e-14)

    def test_full_exchange_scatters_by_pi(self):
        geom = CollisionGeometry.from_pair(self.P, self.P1, self.OMEGA)
        assert geom.theta == pytest.approx(math.pi, abs=1e-6)
        assert scattering_angle(geom) == pytest.approx(math.pi, abs=1e-6)

    def test_omega_flux_is_root_two(self):
        assert omega_flux(self.P, self.P1, self.OMEGA) == pytest.approx(math.sqrt(2.0), rel=1e-14)

    def test_omega_flux_differs_from_g_over_root_s(self):
        s, g, _ = collision_invariants(self.P, self.P1)
        assert g / math.sqrt(s) == pytest.approx(0.207, abs=1e-3)
        assert omega_flux(self.P, self.P1, self.OMEGA) != pytest.approx(g / math.sqrt(s))

    def test_omega_outside_hemisphere_rejected(self):
        with pytest.raises(DomainError):
            post_collision(self.P, self.P1, (1.0, 0.0, 0.0))


class TestInvariants:
    """s, g and the Moller velocity."""

    def test_energy_at_rest(self):
        assert energy((0.0, 0.0, 0.0)) == 1.0
        assert Momentum3.of(0.0, 0.0, 0.0).energy == 1.0

    def test_s_equals_four_plus_four_g_squared(self):
        s, g, _ = collision_invariants((0.3, -1.2, 2.0), (-0.7, 0.4, 0.1))
        assert s == pytest.approx(4.0 + 4.0 * g * g, rel=1e-13)

    def test_equal_momenta_give_threshold_invariants(self):
        s, g, v_m = collision_invariants((0.5, 0.5, 0.5), (0.5, 0.5, 0.5))
        assert g == 0.0
        assert s == pytest.approx(4.0, rel=1e-14)
        assert v_m == 0.0

    def test_moller_velocity_below_relative_speed(self):
        p, p1 = np.array([1.0, 2.0, -0.5]), np.array([-3.0, 0.2, 1.0])
        _, _, v_m = collision_invariants(p, p1)
        assert v_m <= np.linalg.norm(relative_velocity(p, p1))

    def test_broadcasts_over_stacked_momenta(self):
        p = np.zeros((4, 3))
        p1 = np.eye(3)[[0, 1, 2, 0]]
        s, g, v_m = collision_invariants(p, p1)
        assert s.shape == (4,)
        assert np.all(g > 0.0)


class TestHemisphere:
    """The S+ membership test and the w-flux factor."""

    def test_grazing_direction_is_admissible(self):
        assert in_S_plus((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 1.0, 0.0))

    def test_non_unit_omega_rejected(self):
        with pytest.raises(InputError):
            in_S_plus((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 2.0, 0.0))

    def test_grazing_collision_leaves_momenta_unchanged(self):
        p_prime, p1_prime, q = post_collision((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 1.0, 0.0))
        assert q == 0.0
        np.testing.assert_array_equal(p_prime, [1.0, 0.0, 0.0])
        geom = CollisionGeometry.from_pair((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 1.0, 0.0))
        assert geom.theta == pytest.approx(0.0, abs=1e-7)

    def test_omega_flux_vanishes_at_grazing(self):
        assert omega_flux((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 1.0, 0.0)) == 0.0
        assert omega_flux((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), (-1.0, 0.0, 0.0)) > 0.0

    def test_sampled_directions_lie_in_hemisphere(self):
        p, p1, omega = sample_collisions(1000, 5.0, np.random.default_rng(3))
        assert np.all(in_S_plus(p, p1, omega))
        assert np.all(np.linalg.norm(p, axis=1) <= 5.0)


class TestDegenerateCollision:
    """g = 0 leaves the scattering angle undefined."""

    def test_from_pair_uses_zero_angle(self):
        geom = CollisionGeometry.from_pair((0.5, 0.0, 0.0), (0.5, 0.0, 0.0), (0.0, 0.0, 1.0))
        assert geom.g == 0.0
        assert geom.theta == 0.0

    def test_scattering_angle_raises(self):
        geom = CollisionGeometry.from_pair((0.5, 0.0, 0.0), (0.5, 0.0, 0.0), (0.0, 0.0, 1.0))
        with pytest.raises(DegenerateCollisionError):
            scattering_angle(geom)


class TestSelfTest:
    """Conservation and identity sweeps over random collisions."""

    def test_small_sweep_conserves(self):
        worst = kinematics_selftest(n=20_000, seed=1)
        assert worst["momentum_conservation"] < 1e-10
        assert worst["energy_conservation"] < 1e-10
        assert worst["s_identity"] < 1e-10
        assert worst["v_moller_identity"] < 1e-10
        assert worst["v_moller_bound_excess"] < 1e-12
        assert worst["invariants_preserved"] < 1e-8
        assert worst["q_min"] >= 0.0

    def test_million_collisions(self):
        worst = kinematics_selftest(n=1_000_000, seed=0, p_max=10.0)
        assert worst["momentum_conservation"] < 1e-10
        assert worst["energy_conservation"] < 1e-10
        assert worst["s_identity"] < 1e-10
        assert worst["v_moller_identity"] < 1e-10

    def test_same_seed_same_result(self):
        assert kinematics_selftest(n=5_000, seed=7) == kinematics_selftest(n=5_000, seed=7)


class TestClampedCosine:
    """Round-off excursions of cos(theta) are clipped and reported."""

    def test_clipped_value_reported(self):
        collector = IssueCollector()
        clipped = kinematics._clamp_cos(np.array([1.0 + 5e-13, 0.5, -1.0]), collector, "geometry")
        np.testing.assert_array_equal(clipped, [1.0, 0.5, -1.0])
        assert len(collector.issues) == 1
        issue = collector.issues[0]
        assert issue.issue_type == IssueType.CLAMPED_COSINE
        assert issue.stage == "geometry"
        assert issue.value == pytest.approx(5e-13, rel=1e-3)
        assert issue.context["count"] == 1

    def test_in_range_values_leave_no_issue(self):
        collector = IssueCollector()
        kinematics._clamp_cos(np.array([1.0, 0.0, -1.0]), collector)
        assert collector.issues == []

    def test_large_excursion_raises(self):
        with pytest.raises(DomainError):
            kinematics._clamp_cos(np.array([1.0 + 1e-9]), IssueCollector())

    def test_from_pair_forwards_collector(self, monkeypatch):
        monkeypatch.setattr(kinematics, "_cos_theta", lambda *args: np.asarray(-1.0 - 2e-13))
        collector = IssueCollector()
        geom = CollisionGeometry.from_pair((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), (-1.0, 0.0, 0.0), collector=collector)
        assert geom.theta == pytest.approx(math.pi)
        assert [i.issue_type for i in collector.issues] == [IssueType.CLAMPED_COSINE]

    def test_selftest_excess_within_tolerance(self):
        collector = IssueCollector()
        worst = kinematics_selftest(n=20_000, seed=3, collector=collector)
        assert 0.0 <= worst["cos_theta_excess"] <= COS_CLAMP_TOL
        assert len(collector.issues) <= 1
        for issue in collector.issues:
            assert issue.issue_type == IssueType.CLAMPED_COSINE
            assert issue.stage == "selftest"
            assert issue.value == pytest.approx(worst["cos_theta_excess"])
