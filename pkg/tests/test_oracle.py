from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from qcport.barrier import solve
from qcport.dual import build_dual
from qcport.errors import ResolutionTooCoarse, ValidationError
from qcport.oracle import (check_feasible, default_resolution, grid_step_band, minimize_risk,
                           project_simplex, risk_of, simplex_lattice, solve_primal)
from qcport.risk import RiskMeasure
from qcport.scenarios import generate_synthetic

EL = RiskMeasure.expected_loss()
ENT1 = RiskMeasure.entropic(1.0)
QCE, LCE = RiskMeasure.quadratic_ce(), RiskMeasure.logarithmic_ce()


@pytest.mark.parametrize("n,k", [(1, 5), (2, 7), (3, 6), (4, 5)])
def test_lattice(n, k):
    W = simplex_lattice(n, k)
    assert W.shape == (comb(k + n - 1, n - 1), n)
    np.testing.assert_allclose(W.sum(axis=1), 1.0)
    assert np.all(W >= 0)
    assert np.allclose(W * k, np.round(W * k))


def test_default_resolution():
    for n in (2, 3, 4, 6):
        k = default_resolution(n)
        assert comb(k + n - 1, n - 1) <= 20000 < comb(k + n, n - 1)


@pytest.mark.parametrize("method", ["grid", "vertex", "refined"])
def test_lp_example(deterministic, method):
    res = solve_primal(EL, EL, deterministic, -1.0, method=method)
    assert res.p_value == pytest.approx(-1.1, abs=1e-12)
    np.testing.assert_allclose(res.w_best.weights, [1.0, 0.0], atol=1e-9)
    assert res.certificate == 0.0


def test_unknown_method(deterministic):
    with pytest.raises(ValidationError):
        solve_primal(EL, EL, deterministic, -1.0, method="simplex")


def test_inactive_constraint(syn20):
    for rho1, rho2 in [(ENT1, LCE), (QCE, EL)]:
        res = solve_primal(rho1, rho2, syn20, 1e6)
        assert res.p_value == pytest.approx(minimize_risk(rho1, syn20)[0], abs=1e-8)


def test_two_state_exhaustive(two_state):
    w = np.linspace(0, 1, 10001)
    W = np.stack([w, 1 - w], axis=1)
    g1, g2 = risk_of(ENT1, two_state, W), risk_of(EL, two_state, W)
    brute = g1[g2 <= -1.0 + 1e-12].min()
    res = solve_primal(ENT1, EL, two_state, -1.0)
    assert res.p_value == pytest.approx(brute, abs=1e-6)
    assert res.p_value <= brute + 1e-12


def test_infeasible_returns_inf(syn20):
    res = solve_primal(ENT1, LCE, syn20, -5.0)
    assert res.p_value == np.inf and res.w_best is None


def test_resolution_too_coarse(two_state):
    rho2 = RiskMeasure.entropic(5.0)
    with pytest.raises(ResolutionTooCoarse):
        solve_primal(ENT1, rho2, two_state, -0.999, resolution=2, method="grid")
    res = solve_primal(ENT1, rho2, two_state, -0.999, resolution=2, method="refined")
    assert np.isfinite(res.p_value)


def test_grid_sandwich(syn20):
    r = -0.99
    d = solve(build_dual(ENT1, LCE, syn20, r)).value
    vals = [solve_primal(ENT1, LCE, syn20, r, resolution=k, method="grid").p_value for k in (10, 20, 40, 80)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
    assert all(v >= d - 1e-4 for v in vals)


def test_subgradient_close_to_refined(syn20):
    ref = solve_primal(ENT1, LCE, syn20, -0.99)
    sg = solve_primal(ENT1, LCE, syn20, -0.99, method="subgradient", iterations=3000)
    assert ref.p_value <= sg.p_value + 1e-9
    assert sg.p_value - ref.p_value <= 2e-2
    assert sg.certificate <= 1e-9


def test_check_feasible_examples(syn20):
    r = -0.99
    w0 = minimize_risk(LCE, syn20)[1]
    t = float(risk_of(ENT1, syn20, w0.weights)) + 1.0
    assert check_feasible(ENT1, LCE, syn20, t, r).feasible
    lattice_min = np.min(risk_of(ENT1, syn20, simplex_lattice(3, 20)))
    v = check_feasible(ENT1, LCE, syn20, lattice_min - 1.0, r, resolution=20)
    assert not v.feasible and v.label == "infeasible_at_resolution"


def test_expected_loss_pair_vertices():
    s = generate_synthetic(12, 3, seed=4)
    mu = s.mean_returns()
    rng = np.random.default_rng(0)
    for _ in range(30):
        t, r = rng.uniform(-mu.max() - 0.02, -mu.min() + 0.02, 2)
        expect = mu.max() >= max(-t, -r)
        assert check_feasible(EL, EL, s, t, r).feasible == expect


def test_feasible_points_contiguous(two_state):
    # quasiconvex g1, g2 on a segment: the feasible set in w1 is an interval
    W = simplex_lattice(2, 400)
    for rho1, rho2, t, r in [(QCE, ENT1, -0.97, -0.98), (ENT1, LCE, -0.99, -0.99)]:
        g1, g2 = risk_of(rho1, two_state, W), risk_of(rho2, two_state, W)
        idx = np.flatnonzero((g1 <= t) & (g2 <= r))
        assert idx.size > 0
        assert np.all(np.diff(idx) == 1)


def test_grid_step_band(syn20):
    band = grid_step_band(ENT1, LCE, syn20, resolution=20)
    finer = grid_step_band(ENT1, LCE, syn20, resolution=40)
    assert 0 < finer < band < 0.1


@given(arrays(float, 5, elements=st.floats(-10, 10)))
def test_projection(v):
    w = project_simplex(v)
    assert abs(w.sum() - 1) <= 1e-9 and np.all(w >= 0)
    np.testing.assert_allclose(project_simplex(w), w, atol=1e-12)
    # optimality: w = (v - tau)^+ for a single threshold tau
    pos = w > 0
    tau = (v[pos] - w[pos]).mean()
    np.testing.assert_allclose(w[pos], v[pos] - tau, atol=1e-9)
    assert np.all(v[~pos] <= tau + 1e-9)
