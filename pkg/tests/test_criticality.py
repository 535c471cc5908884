# tests/test_criticality.py

import math

import numpy as np
import pytest

from criticality import (
    MinimizerKind,
    MinimizerSet,
    Selection,
    bisect_critical_step,
    classify_outcome,
    critical_step_size,
    in_domain_Dprime,
    p_minus_p_plus,
    prior_step_bound,
    q_bar,
    sensitivity_witnesses,
    small_step_thresholds,
    state_distance,
)
from error_handler import DomainError
from quotient_dynamics import BranchId
from scalar_dynamics import OutcomeKind, ScalarProblem, ScalarState, StepConfig


# =========================================================================
# 臨界ステップサイズ
# =========================================================================

def test_critical_step_orthogonal_example():
    assert critical_step_size(1.0, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)


def test_critical_step_zero_target():
    u0, v0 = np.array([0.6, -0.2]), np.array([1.1, 0.4])
    S = float(u0 @ u0 + v0 @ v0)
    assert critical_step_size(0.0, u0, v0) == pytest.approx(4.0 / S)


def test_critical_step_at_origin_is_one_over_y():
    assert critical_step_size(2.0, [0.0], [0.0]) == pytest.approx(0.5)
    assert critical_step_size(0.0, [0.0], [0.0]) == math.inf


def test_critical_step_improves_prior_bound(rng):
    for _ in range(100):
        y = rng.uniform(-2, 2)
        u0, v0 = rng.normal(size=2), rng.normal(size=2)
        assert critical_step_size(y, u0, v0) >= prior_step_bound(y, u0, v0) - 1e-12


def test_q_bar_matches_scaled_Q():
    s = ScalarState([3.0], [3.0])
    # S = 18, √(324 − 16·8) = 14
    assert q_bar(1.0, s) == pytest.approx(32.0)
    assert critical_step_size(1.0, s.u, s.v) == pytest.approx(0.25)


def test_in_domain_Dprime():
    s = ScalarState([3.0], [3.0])
    assert in_domain_Dprime(1.0, 0.2, s)
    assert not in_domain_Dprime(1.0, 0.3, s)
    with pytest.raises(DomainError):
        in_domain_Dprime(1.0, 1.0, s)


def test_small_step_thresholds_example():
    converge, select = small_step_thresholds(0.5, 0.2, ScalarState([1.0], [1.0]))
    assert converge == pytest.approx(8.0 / 2.8)
    assert select == pytest.approx(4.0 / 2.8)
    assert converge == pytest.approx(2.857, abs=1e-3)
    assert select == pytest.approx(1.429, abs=1e-3)


@pytest.mark.slow
def test_bisection_agrees_with_closed_form():
    p = ScalarProblem(y=1.0)
    s0 = ScalarState([3.0], [3.0])
    eta = bisect_critical_step(p, s0, rel_tol=1e-4)
    assert eta == pytest.approx(critical_step_size(1.0, s0.u, s0.v), rel=1e-3)


# =========================================================================
# 最小点集合と p±
# =========================================================================

def test_minimizer_set_kinds():
    assert MinimizerSet.from_problem(ScalarProblem(y=1.0)).kind is MinimizerKind.HYPERBOLOID
    assert MinimizerSet.from_problem(ScalarProblem(y=0.5, lam=0.6)).kind is MinimizerKind.ORIGIN_ONLY
    m = MinimizerSet.from_problem(ScalarProblem(y=0.5, lam=0.2))
    assert m.kind is MinimizerKind.SPHERE
    assert m.radius_sq == pytest.approx(0.3)


def test_p_minus_p_plus_example():
    m = MinimizerSet.from_problem(ScalarProblem(y=0.5, lam=0.2))
    p_minus, p_plus = p_minus_p_plus(m, ScalarState([1.0], [1.0]))
    r = math.sqrt(0.3)
    np.testing.assert_allclose(p_minus.as_vector(), [r, r])
    np.testing.assert_allclose(p_plus.as_vector(), [-r, -r])


def test_p_minus_p_plus_negative_target():
    m = MinimizerSet.from_problem(ScalarProblem(y=-0.5, lam=0.2))
    p_minus, _ = p_minus_p_plus(m, ScalarState([1.0], [-1.0]))
    r = math.sqrt(0.3)
    np.testing.assert_allclose(p_minus.as_vector(), [r, -r])


def test_p_minus_p_plus_undefined_direction():
    m = MinimizerSet.from_problem(ScalarProblem(y=0.5, lam=0.2))
    with pytest.raises(DomainError):
        p_minus_p_plus(m, ScalarState([1.0], [-1.0]))
    with pytest.raises(DomainError):
        p_minus_p_plus(MinimizerSet.from_problem(ScalarProblem(y=1.0)), ScalarState([1.0], [1.0]))


def test_state_distance():
    assert state_distance(ScalarState([0.0], [0.0]), ScalarState([3.0], [4.0])) == pytest.approx(5.0)

# =========================================================================
# 分類
# =========================================================================

def test_small_step_selects_nearest_minimizer():
    p = ScalarProblem(y=0.5, lam=0.2)
    s0 = ScalarState([0.9], [0.7])
    _, select = small_step_thresholds(0.5, 0.2, s0)
    c = StepConfig(eta=0.5 * select, max_iters=50000, loss_tol=1e-13)
    out = classify_outcome(p, c, s0)
    assert out.kind is OutcomeKind.CONVERGED_MINIMIZER
    assert out.selection is Selection.P_MINUS
    assert out.selection_distance <= 1e-5
    assert out.stable


def test_classify_non_converged_has_no_diagnostics():
    out = classify_outcome(ScalarProblem(y=1.0), StepConfig(eta=0.6), ScalarState([3.0], [3.0]))
    assert out.kind is OutcomeKind.DIVERGED
    assert out.selection is None
    assert out.to_dict()["kind"] == "Diverged"


def test_classify_unregularized_reports_norm():
    out = classify_outcome(ScalarProblem(y=1.0), StepConfig(eta=0.2), ScalarState([3.0], [3.0]))
    assert out.kind is OutcomeKind.CONVERGED_MINIMIZER
    assert out.squared_norm < 2.0 / 0.2
    assert out.selection is None

# =========================================================================
# 感度の証拠
# =========================================================================

@pytest.mark.slow
def test_regularized_witnesses_reach_both_minimizers():
    p = ScalarProblem(y=0.5, lam=0.2)
    pairs = sensitivity_witnesses(p, 1.0, [[], [BranchId.G0], [BranchId.G2]], eps=1e-4)
    assert pairs
    for pair in pairs:
        assert pair.separation < 1e-4
    assert any(pair.certified for pair in pairs)
    certified = next(pair for pair in pairs if pair.certified)
    assert {certified.first_outcome.selection, certified.second_outcome.selection} == {
        Selection.P_MINUS, Selection.P_PLUS}


@pytest.mark.slow
def test_unregularized_witnesses_differ_in_norm():
    p = ScalarProblem(y=1.0)
    pairs = sensitivity_witnesses(p, 0.05, [[], [BranchId.G1]], eps=1e-4, norm_gap=10.0)
    certified = [pair for pair in pairs if pair.certified]
    assert certified
    pair = certified[0]
    assert abs(pair.first_outcome.squared_norm - pair.second_outcome.squared_norm) >= 10.0


def test_witnesses_reject_large_regularization():
    with pytest.raises(DomainError):
        sensitivity_witnesses(ScalarProblem(y=0.5, lam=0.6), 1.0, [[]])
