import math

import numpy as np
import pytest

from qcport.barrier import solve
from qcport.bisection import FEASIBLE, bisect, find_initial_bounds, iteration_bound
from qcport.dual import build_dual
from qcport.errors import InfeasibleProblem, UnboundedRisk, ValidationError
from qcport.oracle import solve_primal
from qcport.risk import RiskMeasure
from qcport.scenarios import Portfolio, ScenarioSet, generate_synthetic

EL = RiskMeasure.expected_loss()
ENT1 = RiskMeasure.entropic(1.0)
QCE, LCE = RiskMeasure.quadratic_ce(), RiskMeasure.logarithmic_ce()


def test_iteration_bound():
    assert iteration_bound(0.0, 1.0, 0.1) == 4
    assert iteration_bound(0.0, 1.0, 2.0) == 0
    assert iteration_bound(-1.0, -1.0, 1e-3) == 0


def test_initial_bounds_lp(deterministic):
    l1, u1, w0 = find_initial_bounds(EL, EL, deterministic, -1.0)
    assert l1 == pytest.approx(-2.15)
    assert u1 == pytest.approx(-1.1)
    np.testing.assert_allclose(w0.weights, [1.0, 0.0], atol=1e-9)
    with pytest.raises(InfeasibleProblem) as exc:
        find_initial_bounds(EL, EL, deterministic, -1.2)
    assert exc.value.evidence["min_g2"] == pytest.approx(-1.1)


def test_initial_bounds_ordered(syn20):
    for rho1 in (ENT1, QCE, LCE):
        l1, u1, _ = find_initial_bounds(rho1, LCE, syn20, -0.99)
        assert l1 <= u1


def test_supplied_w0(deterministic):
    l1, u1, w0 = find_initial_bounds(EL, EL, deterministic, -1.0, w0=Portfolio([0.5, 0.5]))
    assert u1 == pytest.approx(-1.075)
    with pytest.raises(InfeasibleProblem):
        find_initial_bounds(EL, EL, deterministic, -1.09, w0=Portfolio([0.5, 0.5]))


def test_unbounded_lower_bracket():
    s = ScenarioSet([0.5, 0.5], [[0.0, 0.0], [1.0, 1.2]])
    with pytest.raises(UnboundedRisk):
        find_initial_bounds(LCE, EL, s, 0.0)


def test_zero_width_bracket():
    s = generate_synthetic(8, 1, seed=2)
    tr = bisect(QCE, LCE, s, 0.0, 1e-3)
    assert tr.final.K == 0 and tr.iterations == []
    np.testing.assert_array_equal(tr.final.w.weights, [1.0])


def test_epsilon_validation(syn20):
    with pytest.raises(ValidationError):
        bisect(QCE, LCE, syn20, -0.99, 0.0)


def test_quadratic_log_pairing():
    s = generate_synthetic(10, 2, seed=0)
    r, eps = -0.9, 1e-3
    tr = bisect(QCE, LCE, s, r, eps)
    orc = solve_primal(QCE, LCE, s, r)
    f = tr.final
    assert f.value <= orc.p_value + eps
    assert f.value <= f.t_K + 1e-7
    assert f.g2 <= r + 1e-6
    w = f.w.weights
    assert abs(w.sum() - 1) <= 1e-6 and w.min() >= -1e-6
    # exact halving, and K equals the bound since there is no early exit
    widths = [u - l for l, u in tr.bounds_history]
    for a, b in zip(widths, widths[1:]):
        assert b == pytest.approx(a / 2, rel=1e-12)
    assert f.K == tr.K_bound == math.ceil(math.log2((tr.u1 - tr.l1) / eps))
    # the bracket always contains p(r)
    for l, u in tr.bounds_history:
        assert l <= orc.p_value + 1e-6 and orc.p_value <= u + 1e-6
    assert any(st.verdict == FEASIBLE for st in tr.iterations)


def test_log_quadratic_pairing(syn20):
    r, eps = -0.92, 1e-3
    tr = bisect(LCE, QCE, syn20, r, eps)
    orc = solve_primal(LCE, QCE, syn20, r)
    assert tr.final.value - orc.p_value <= eps + 1e-4
    assert tr.final.g2 <= r + 1e-6


def test_cross_route_convex(syn20):
    r, eps = -0.99, 1e-3
    tr = bisect(ENT1, LCE, syn20, r, eps)
    d = solve(build_dual(ENT1, LCE, syn20, r)).value
    assert abs(tr.final.value - d) <= eps + 1e-4


def test_deterministic(syn20):
    a = bisect(QCE, LCE, syn20, -0.99, 1e-2)
    b = bisect(QCE, LCE, syn20, -0.99, 1e-2)
    assert [s.t for s in a.iterations] == [s.t for s in b.iterations]
    np.testing.assert_array_equal(a.final.w.weights, b.final.w.weights)
