import io

import numpy as np
import pytest

from conftest import balanced_pair, random_measure
from uotkit import (
    DiscreteMeasure,
    ExplicitMatrix,
    PowerDistance,
    SparsePlan,
    build_cost_matrix,
    check_complementary_slackness,
    solve_ot_1d,
)
from uotkit.duality import DualPair
from uotkit.exceptions import MassBalanceError, SubmodularityError
from uotkit.ot1d import read_plan_csv, write_plan_csv


def certify(a, b, plan, d, C, value_tol=1e-9):
    np.testing.assert_allclose(plan.row_sums(len(a)), a.weights, atol=1e-12 * max(1, a.mass))
    np.testing.assert_allclose(plan.col_sums(len(b)), b.weights, atol=1e-12 * max(1, b.mass))
    assert check_complementary_slackness(plan, d, C)
    primal = plan.cost_value(C)
    dual = float(np.dot(a.weights, d.f) + np.dot(b.weights, d.g))
    assert abs(primal - dual) <= value_tol * (1 + abs(primal))
    return primal


class TestSolveOt1d:
    def test_single_atoms(self):
        a = DiscreteMeasure([0.0], [1.0])
        b = DiscreteMeasure([1.0], [1.0])
        plan, d = solve_ot_1d(a, b, PowerDistance(1.0))
        assert list(zip(plan.source_idx, plan.target_idx, plan.mass)) == [(0, 0, 1.0)]
        assert d.f.tolist() == [0.0]
        assert d.g.tolist() == [1.0]

    def test_identical_measures_identity_plan(self, rng):
        a = random_measure(rng, 6)
        plan, d = solve_ot_1d(a, a, PowerDistance(2.0))
        assert plan.source_idx.tolist() == plan.target_idx.tolist() == list(range(6))
        C = build_cost_matrix(a, a, PowerDistance(2.0))
        assert plan.cost_value(C) == 0.0

    def test_hand_worked_two_by_two(self):
        # frozen from a by-hand run of the monotone sweep
        a = DiscreteMeasure([0.0, 1.0], [0.7, 0.3])
        b = DiscreteMeasure([0.0, 1.0], [0.4, 0.6])
        plan, d = solve_ot_1d(a, b, PowerDistance(1.0))
        entries = list(zip(plan.source_idx, plan.target_idx, plan.mass))
        assert [(i, j) for i, j, _ in entries] == [(0, 0), (0, 1), (1, 1)]
        np.testing.assert_allclose([m for _, _, m in entries], [0.4, 0.3, 0.3])
        np.testing.assert_allclose(d.f, [0.0, -1.0])
        np.testing.assert_allclose(d.g, [0.0, 1.0])
        C = build_cost_matrix(a, b, PowerDistance(1.0))
        assert certify(a, b, plan, d, C) == pytest.approx(0.3)

    def test_random_instances_certified(self, rng):
        for _ in range(60):
            n, m = rng.integers(1, 51, 2)
            p = float(rng.choice([1.0, 2.0]))
            a = random_measure(rng, n, min_w=0.0)
            b = random_measure(rng, m, mass=a.mass, min_w=0.0)
            plan, d = solve_ot_1d(a, b, PowerDistance(p))
            C = build_cost_matrix(a, b, PowerDistance(p))
            certify(a, b, plan, d, C)
            assert len(plan) <= n + m - 1

    def test_zero_weight_atoms_handled(self):
        a = DiscreteMeasure([0.0, 0.5, 1.0], [0.5, 0.0, 0.5])
        b = DiscreteMeasure([0.2, 0.9], [0.6, 0.4])
        plan, d = solve_ot_1d(a, b, PowerDistance(2.0))
        C = build_cost_matrix(a, b, PowerDistance(2.0))
        certify(a, b, plan, d, C)

    def test_cost_shift_moves_value_not_plan(self, rng):
        a, b = balanced_pair(rng, 8, 6)
        C = build_cost_matrix(a, b, PowerDistance(2.0))
        plan0, d0 = solve_ot_1d(a, b, PowerDistance(2.0))
        plan5, d5 = solve_ot_1d(a, b, ExplicitMatrix(C + 5.0))
        assert plan0.source_idx.tolist() == plan5.source_idx.tolist()
        assert plan0.target_idx.tolist() == plan5.target_idx.tolist()
        np.testing.assert_allclose(plan0.mass, plan5.mass)
        assert plan5.cost_value(C + 5.0) == pytest.approx(
            plan0.cost_value(C) + 5.0 * a.mass, rel=1e-12
        )

    def test_mass_mismatch_rejected(self, rng):
        a = random_measure(rng, 4)
        b = DiscreteMeasure([0.0], [a.mass * 1.5])
        with pytest.raises(MassBalanceError):
            solve_ot_1d(a, b, PowerDistance(1.0))

    def test_non_submodular_matrix_rejected(self):
        a = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
        b = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
        with pytest.raises(SubmodularityError):
            solve_ot_1d(a, b, ExplicitMatrix(np.array([[1.0, 0.0], [0.0, 1.0]])))

    def test_explicit_submodular_accepted(self, rng):
        a, b = balanced_pair(rng, 5, 5)
        C = build_cost_matrix(a, b, PowerDistance(2.0)) * 0.37
        plan, d = solve_ot_1d(a, b, ExplicitMatrix(C))
        certify(a, b, plan, d, C)


class TestComplementarySlackness:
    def test_solver_output_passes(self, rng):
        a, b = balanced_pair(rng, 6, 7)
        plan, d = solve_ot_1d(a, b, PowerDistance(1.0))
        C = build_cost_matrix(a, b, PowerDistance(1.0))
        assert check_complementary_slackness(plan, d, C)

    def test_perturbed_dual_fails(self, rng):
        a, b = balanced_pair(rng, 6, 7)
        plan, d = solve_ot_1d(a, b, PowerDistance(1.0))
        C = build_cost_matrix(a, b, PowerDistance(1.0))
        f = d.f.copy()
        f[plan.source_idx[0]] += 0.1
        assert not check_complementary_slackness(plan, DualPair(f, d.g), C)

    def test_zero_duals_nonzero_cost_fail(self):
        a = DiscreteMeasure([0.0], [1.0])
        b = DiscreteMeasure([1.0], [1.0])
        plan, _ = solve_ot_1d(a, b, PowerDistance(1.0))
        C = build_cost_matrix(a, b, PowerDistance(1.0))
        assert not check_complementary_slackness(plan, DualPair.zeros(1, 1), C)


class TestSparsePlan:
    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            SparsePlan(np.array([0]), np.array([0]), np.array([0.0]))

    def test_rejects_non_monotone(self):
        with pytest.raises(ValueError):
            SparsePlan(np.array([0, 1]), np.array([1, 0]), np.array([0.5, 0.5]))

    def test_rejects_repeats(self):
        with pytest.raises(ValueError):
            SparsePlan(np.array([0, 0]), np.array([0, 0]), np.array([0.5, 0.5]))

    def test_csv_round_trip(self, rng):
        a, b = balanced_pair(rng, 4, 5)
        plan, _ = solve_ot_1d(a, b, PowerDistance(2.0))
        buf = io.StringIO()
        write_plan_csv(plan, buf)
        again = read_plan_csv(io.StringIO(buf.getvalue()))
        assert again.source_idx.tolist() == plan.source_idx.tolist()
        assert again.target_idx.tolist() == plan.target_idx.tolist()
        np.testing.assert_array_equal(again.mass, plan.mass)
