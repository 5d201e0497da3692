import math

import numpy as np
import pytest

from swarmshape import (
    Kernel,
    SamplePointSet,
    ShapePose,
    f_max,
    f_total,
    f_uni,
    grad_f_robot,
    mass_at,
    mass_vector,
    to_world,
)
from conftest import random_world


def scalar_mass(positions, q, beta):
    """Independent scalar oracle for the mass definition."""
    total = 0.0
    for p in positions:
        d2 = sum((qc - pc) ** 2 for qc, pc in zip(q, p))
        total += math.exp(-beta * d2)
    return total / len(positions)


def fd_gradient(positions, world, masses_of, kernel, i, h=1e-6):
    """Central finite differences of f_total through the mass computation."""
    base = np.array(positions, dtype=float)
    grad = np.zeros(base.shape[1])
    for c in range(base.shape[1]):
        up, dn = base.copy(), base.copy()
        up[i, c] += h
        dn[i, c] -= h
        grad[c] = (f_total(masses_of(up)) - f_total(masses_of(dn))) / (2 * h)
    return grad


class TestMassAt:
    def test_single_robot_on_point(self, kernel):
        assert mass_at(np.array([[2.0, 3.0]]), np.array([2.0, 3.0]), kernel) == 1.0

    def test_two_robot_hand_value(self, kernel):
        pos = np.array([[0.0, 0.0], [1.0, 0.0]])
        got = mass_at(pos, np.array([0.0, 0.0]), kernel)
        assert got == pytest.approx((1 + math.exp(-1.5)) / 2, abs=1e-15)
        assert got == pytest.approx(0.6115651, abs=1e-7)

    def test_far_robots_vanish(self, kernel):
        pos = np.array([[1e4, 0.0], [0.0, 1e4]])
        assert mass_at(pos, np.zeros(2), kernel) == 0.0

    def test_matches_scalar_oracle_on_random_inputs(self, kernel):
        rng = np.random.default_rng(21)
        for _ in range(50):
            pos = rng.uniform(-3, 3, size=(rng.integers(1, 8), 2))
            q = rng.uniform(-3, 3, size=2)
            assert mass_at(pos, q, kernel) == pytest.approx(
                scalar_mass(pos, q, kernel.beta), rel=1e-14
            )

    def test_empty_swarm_rejected(self, kernel):
        with pytest.raises(ValueError, match="n = 0"):
            mass_at(np.zeros((0, 2)), np.zeros(2), kernel)

    def test_result_in_unit_interval(self, kernel):
        rng = np.random.default_rng(22)
        for _ in range(100):
            pos = rng.uniform(-5, 5, size=(rng.integers(1, 10), 2))
            q = rng.uniform(-5, 5, size=2)
            v = mass_at(pos, q, kernel)
            assert 0.0 < v <= 1.0


class TestMassVector:
    def test_single_point_reduces_to_mass_at(self, kernel, identity_world):
        single = to_world(
            SamplePointSet.from_points([identity_world.points[0]]),
            ShapePose(position=identity_world.points[0]),
        )
        pos = np.array([[0.3, 0.1], [0.9, 0.9]])
        vec = mass_vector(pos, single, kernel)
        assert vec.shape == (1,)
        assert vec[0] == mass_at(pos, single.points[0], kernel)

    def test_permutation_invariance(self, kernel, identity_world):
        rng = np.random.default_rng(23)
        pos = rng.uniform(0, 1, size=(6, 2))
        base = mass_vector(pos, identity_world, kernel)
        perm = mass_vector(pos[::-1], identity_world, kernel)
        assert np.allclose(perm, base, rtol=1e-15)

    def test_duplicating_all_robots_is_invariant(self, kernel, identity_world):
        rng = np.random.default_rng(24)
        pos = rng.uniform(0, 1, size=(5, 2))
        base = mass_vector(pos, identity_world, kernel)
        doubled = mass_vector(np.vstack([pos, pos]), identity_world, kernel)
        assert np.allclose(doubled, base, rtol=1e-15)


class TestMetrics:
    def test_f_max_single_unit_mass(self):
        assert f_max(np.array([1.0])) == 0.0

    def test_f_max_hand_value(self):
        assert f_max(np.array([0.5, 0.5])) == pytest.approx(-math.log(math.sqrt(0.5)), abs=1e-15)
        assert f_max(np.array([0.5, 0.5])) == pytest.approx(0.3465736, abs=1e-7)

    def test_f_max_scaling_identity(self):
        rng = np.random.default_rng(30)
        P = rng.uniform(0.1, 1.0, size=12)
        for c in (0.5, 2.0, 7.3):
            assert f_max(c * P) == pytest.approx(f_max(P) - math.log(c), rel=1e-12)

    def test_f_uni_zero_iff_equal(self):
        for m in (1, 2, 5, 40):
            assert abs(f_uni(np.full(m, 0.37))) < 1e-12
        assert f_uni(np.array([0.5, 0.50001])) > 0.0

    def test_f_uni_hand_value(self):
        got = f_uni(np.array([1.0, 0.5]))
        assert got == pytest.approx(-0.25 * math.log(0.64), abs=1e-15)
        assert got == pytest.approx(0.1115718, abs=1e-7)

    def test_f_uni_scale_invariant(self):
        rng = np.random.default_rng(31)
        P = rng.uniform(0.05, 2.0, size=9)
        assert f_uni(3.7 * P) == pytest.approx(f_uni(P), rel=1e-12)

    def test_f_uni_nonnegative_random(self):
        rng = np.random.default_rng(32)
        for _ in range(200):
            P = rng.uniform(1e-4, 2.0, size=rng.integers(1, 30))
            assert f_uni(P) >= -1e-12

    def test_f_total_single_unit(self):
        assert f_total(np.array([1.0])) == 0.0

    def test_f_total_decomposition_identity(self):
        rng = np.random.default_rng(33)
        for _ in range(100):
            P = rng.uniform(1e-3, 1.0, size=rng.integers(1, 25))
            m = P.shape[0]
            closed_form = -np.log(P).mean() - 0.5 * math.log(m)
            assert f_total(P) == pytest.approx(closed_form, rel=1e-10, abs=1e-12)

    def test_f_total_two_mass_case_is_zero(self):
        # f_max(1, 0.5) = -f_uni(1, 0.5): the scalar oracle gives exactly 0
        assert f_total(np.array([1.0, 0.5])) == pytest.approx(0.0, abs=1e-15)

    def test_nonpositive_masses_rejected(self):
        for bad in ([0.0, 1.0], [1.0, -0.5]):
            with pytest.raises(ValueError, match="positive"):
                f_max(np.array(bad))
            with pytest.raises(ValueError, match="positive"):
                f_uni(np.array(bad))

    def test_error_names_offending_index(self):
        with pytest.raises(ValueError, match=r"\[1\]"):
            f_total(np.array([1.0, -1.0, 2.0]))


class TestGradient:
    def test_zero_at_coincident_single_pair(self, kernel):
        pos = np.array([[1.0, 2.0]])
        world = random_world(np.random.default_rng(0), 1)
        world.points[0] = pos[0]
        P = mass_vector(pos, world, kernel)
        g = grad_f_robot(pos, 0, world, P, kernel)
        assert np.array_equal(g, np.zeros(2))

    def test_matches_central_differences(self, kernel):
        # relative comparison is only meaningful above the central-difference
        # noise floor (~1e-9 absolute), so near-critical configs are redrawn
        rng = np.random.default_rng(40)
        worst = 0.0
        checked = 0
        while checked < 100:
            n = int(rng.integers(1, 6))
            m = int(rng.integers(1, 8))
            world = random_world(rng, m, span=2.0)
            pos = rng.uniform(-2, 2, size=(n, 2))
            P = mass_vector(pos, world, kernel)
            i = int(rng.integers(0, n))
            analytic = grad_f_robot(pos, i, world, P, kernel)
            fd = fd_gradient(pos, world, lambda p: mass_vector(p, world, kernel), kernel, i)
            if np.linalg.norm(fd) < 1e-2:
                continue
            checked += 1
            worst = max(worst, np.linalg.norm(analytic - fd) / np.linalg.norm(fd))
        assert worst < 1e-6

    def test_symmetric_points_cancel_along_axis(self, kernel):
        world = random_world(np.random.default_rng(1), 2)
        world.points[0] = np.array([-1.0, 0.0])
        world.points[1] = np.array([1.0, 0.0])
        pos = np.array([[0.0, 0.7]])
        P = mass_vector(pos, world, kernel)
        g = grad_f_robot(pos, 0, world, P, kernel)
        assert g[0] == 0.0

    def test_rejects_nonpositive_masses(self, kernel):
        world = random_world(np.random.default_rng(2), 3)
        pos = np.array([[0.0, 0.0]])
        with pytest.raises(ValueError, match="positive"):
            grad_f_robot(pos, 0, world, np.array([0.5, 0.0, 0.1]), kernel)
