"""Acceptance suite: eight criteria, each printed as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or directly with ``python3 tests/test_acceptance.py``.
"""
import time
from functools import lru_cache

import numpy as np
import pytest

from qcport import penalty as P
from qcport.barrier import OPTIMAL, SolverConfig, solve
from qcport.bisection import FEASIBLE, bisect, classify, iteration_bound
from qcport.dual import build_dual, build_feasibility_dual
from qcport.oracle import (check_feasible, default_resolution, grid_step_band, minimize_risk,
                           risk_of, solve_primal)
from qcport.risk import RiskMeasure, monotone_rescale_check
from qcport.scenarios import generate_synthetic

RESULTS = {}
THETAS = (0.5, 1.0, 2.0, 5.0)


def _record(key, ok, summary):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {summary}"
    RESULTS[key] = line
    print(line)
    return ok


def _measure(kind, rng):
    if kind == "el":
        return RiskMeasure.expected_loss()
    if kind == "ent":
        return RiskMeasure.entropic(float(rng.choice(THETAS)))
    return RiskMeasure.logarithmic_ce()


@lru_cache(maxsize=None)
def instances():
    """20 seeded instances: m in 5..30, n in 2..4, convex rho1, r set from phase 0."""
    out = []
    rng = np.random.default_rng(20240601)
    for k in range(20):
        m, n = int(rng.integers(5, 31)), int(rng.integers(2, 5))
        s = generate_synthetic(m, n, seed=1000 + k)
        rho1 = _measure(("el", "ent")[k % 2], rng)
        rho2 = _measure(("el", "ent", "log")[k % 3], rng)
        m2, _ = minimize_risk(rho2, s)
        top = max(float(risk_of(rho2, s, np.eye(n)[i])) for i in range(n))
        r = m2 + float(rng.uniform(0.05, 0.6)) * (top - m2) + 1e-4
        out.append((s, rho1, rho2, r))
    return tuple(out)


@lru_cache(maxsize=None)
def solved():
    rows = []
    for s, rho1, rho2, r in instances():
        t0 = time.perf_counter()
        out = solve(build_dual(rho1, rho2, s, r))
        elapsed = time.perf_counter() - t0
        orc = solve_primal(rho1, rho2, s, r)
        rows.append((out, orc, elapsed))
    return tuple(rows)


# --------------------------------------------------------------------------- criteria

def criterion_1():
    worst_gap, worst_time, bad = 0.0, 0.0, 0
    for (s, rho1, rho2, r), (out, orc, dt) in zip(instances(), solved()):
        gap = abs(out.value - orc.p_value)
        worst_gap, worst_time = max(worst_gap, gap), max(worst_time, dt)
        bad += not (out.status == OPTIMAL and gap <= 1e-4 and dt <= 5.0)
    return _record(1, bad == 0, f"strong duality on 20 instances, max |d - p| = {worst_gap:.2e} "
                                f"(tol 1e-4), max time {worst_time:.2f}s (limit 5s), failures {bad}")


def criterion_2():
    worst_simplex, worst_g2, worst_g1, bad = 0.0, -np.inf, -np.inf, 0
    for (s, rho1, rho2, r), (out, orc, _) in zip(instances(), solved()):
        w = out.point.w
        simplex = max(abs(w.sum() - 1.0), max(0.0, -w.min()))
        g2 = float(risk_of(rho2, s, w)) - r
        g1 = float(risk_of(rho1, s, w)) - orc.p_value
        worst_simplex, worst_g2, worst_g1 = max(worst_simplex, simplex), max(worst_g2, g2), max(worst_g1, g1)
        bad += not (simplex <= 1e-6 and g2 <= 1e-6 and g1 <= 1e-4)
    return _record(2, bad == 0, f"multiplier recovery, simplex error {worst_simplex:.1e} (tol 1e-6), "
                                f"max g2(w)-r {worst_g2:.1e} (tol 1e-6), max g1(w)-p {worst_g1:.1e} "
                                f"(tol 1e-4), failures {bad}")


def criterion_3(probes=50):
    cfg = SolverConfig()
    rng = np.random.default_rng(7)
    strict, banded, total, n_feas, near = 0, 0, 0, 0, 0
    for s, rho1, rho2, _ in instances():
        k = default_resolution(s.n)
        band = grid_step_band(rho1, rho2, s, k)
        g1_lo, _ = minimize_risk(rho1, s, k)
        g2_lo, _ = minimize_risk(rho2, s, k)
        g1_hi = max(float(risk_of(rho1, s, np.eye(s.n)[i])) for i in range(s.n))
        g2_hi = max(float(risk_of(rho2, s, np.eye(s.n)[i])) for i in range(s.n))
        for _ in range(probes):
            t = float(rng.uniform(g1_lo - 0.02, g1_hi + 0.01))
            r = float(rng.uniform(g2_lo - 0.01, g2_hi + 0.01))
            dual = classify(solve(build_feasibility_dual(rho1, rho2, s, t, r), cfg), cfg) == FEASIBLE
            primal = check_feasible(rho1, rho2, s, t, r, k)
            total += 1
            n_feas += primal.feasible
            near += abs(primal.margin) <= 10 * band
            if dual != primal.feasible:
                if abs(primal.margin) <= band:
                    banded += 1
                else:
                    strict += 1
    return _record(3, strict == 0, f"feasibility verdicts on {total} probes, strict contradictions "
                                   f"{strict}, disagreements inside one grid step {banded} ({n_feas} feasible, "
                                   f"{near} within ten grid steps of the boundary)")


def criterion_4(eps=1e-3):
    rng = np.random.default_rng(44)
    worst, worst_time, bad = -np.inf, 0.0, 0
    cases, binding = 0, 0
    for k in range(6):
        m, n = int(rng.integers(8, 31)), int(rng.integers(2, 4))
        s = generate_synthetic(m, n, seed=2000 + k)
        rho1 = RiskMeasure.quadratic_ce()
        rho2 = (RiskMeasure.logarithmic_ce(), RiskMeasure.entropic(2.0), RiskMeasure.expected_loss())[k % 3]
        m2, _ = minimize_risk(rho2, s)
        r = m2 + 0.01 * abs(m2) + 1e-3
        t0 = time.perf_counter()
        tr = bisect(rho1, rho2, s, r, eps)
        dt = time.perf_counter() - t0
        orc = solve_primal(rho1, rho2, s, r)
        diff = tr.final.value - orc.p_value
        binding += orc.p_value > minimize_risk(rho1, s)[0] + 1e-6
        K_ok = tr.final.K <= iteration_bound(tr.l1, tr.u1, eps)
        worst, worst_time = max(worst, diff), max(worst_time, dt)
        bad += not (diff <= eps + 1e-4 and K_ok and dt <= 30.0 and tr.final.g2 <= r + 1e-6)
        cases += 1
    return _record(4, bad == 0, f"bisection with quadratic CE on {cases} instances, max g1(w)-p "
                                f"{worst:.2e} (tol {eps + 1e-4:.1e}), max time {worst_time:.2f}s "
                                f"(limit 30s), binding constraint in {binding}, failures {bad}")


def criterion_5(samples=100):
    rng = np.random.default_rng(55)
    s6 = generate_synthetic(6, 1, seed=5)
    worst_gen = 0.0
    for rho, lo, hi in ((RiskMeasure.quadratic_ce(), -0.999, 3.0), (RiskMeasure.logarithmic_ce(), -5.0, -1e-3)):
        for _ in range(samples):
            V = rng.uniform(0.05, 3.0, 6)
            t = float(rng.uniform(lo, hi))
            worst_gen = max(worst_gen, abs(P.alpha_generic_ce(rho.loss, s6, V, t) - P.alpha(rho, s6, V, t)))
    lo_dev, hi_dev = 0.0, 0.0
    kinds = [RiskMeasure.expected_loss(), RiskMeasure.avar(0.3), RiskMeasure.entropic(1.0),
             RiskMeasure.quadratic_ce(), RiskMeasure.logarithmic_ce()]
    for m in (2, 4, 6):
        s = generate_synthetic(m, 1, seed=m)
        for rho in kinds:
            for _ in range(6):
                V = rng.uniform(0.3, 2.0, m)
                if rho.kind == "expected_loss":
                    V = np.full(m, V[0])
                if rho.kind == "avar":
                    V = np.minimum(V, 0.99 * (s.probs @ V) / rho.param)
                t = float(rng.uniform(-1.0, 1.0) if rho.is_convex else rng.uniform(-0.95, -0.05))
                closed, orc = P.alpha(rho, s, V, t), P.alpha_oracle(rho, s, V, t)
                lo_dev, hi_dev = max(lo_dev, orc - closed), max(hi_dev, closed - orc)
    ok = worst_gen <= 1e-8 and lo_dev <= 1e-6 and hi_dev <= 1e-3
    return _record(5, ok, f"generic vs closed max {worst_gen:.1e} (tol 1e-8); oracle above closed "
                          f"{lo_dev:.1e} (tol 1e-6), closed above oracle {hi_dev:.1e} (tol 1e-3)")


def criterion_6(samples=200):
    rng = np.random.default_rng(66)
    s = generate_synthetic(8, 1, seed=6)
    worst_lin, worst_tilde = 0.0, 0.0
    for rho in (RiskMeasure.expected_loss(), RiskMeasure.avar(0.25), RiskMeasure.entropic(0.7),
                RiskMeasure.entropic(3.0)):
        for _ in range(samples):
            V = rng.uniform(0.05, 4.0, 8)
            if rho.kind == "expected_loss":
                V = np.full(8, V[0])
            if rho.kind == "avar":
                V = np.minimum(V, 0.99 * (s.probs @ V) / rho.param)
            t = float(rng.uniform(-5, 5))
            worst_lin = max(worst_lin, abs(P.alpha(rho, s, V, t) - P.alpha(rho, s, V, 0.0) - t * P.mean(s, V)))
            W = V / P.mean(s, V)
            g = P.gamma(rho, s, W)
            worst_tilde = max(worst_tilde, abs(P.alpha_tilde(rho, s, W) + g))
            # on E[V] = 1, t - alpha(V, t) is constant in t and equals -gamma(V)
            for tt in rng.uniform(-5, 5, 3):
                worst_tilde = max(worst_tilde, abs((tt - P.alpha(rho, s, W, tt)) + g))
    ok = worst_lin <= 1e-10 and worst_tilde <= 1e-10
    return _record(6, ok, f"convex identities, alpha(V,t)-alpha(V,0)-tE[V] max {worst_lin:.1e}, "
                          f"alpha~ + gamma max {worst_tilde:.1e} (tol 1e-10)")


def criterion_7(trials=1000):
    s = generate_synthetic(6, 1, seed=77)
    kinds = [RiskMeasure.expected_loss(), RiskMeasure.avar(0.2), RiskMeasure.avar(1.0),
             RiskMeasure.entropic(0.5), RiskMeasure.entropic(4.0), RiskMeasure.quadratic_ce(),
             RiskMeasure.logarithmic_ce()]
    total = 0
    details = []
    for rho in kinds:
        rep = monotone_rescale_check(rho, s, trials=trials, seed=7, tol=1e-9)
        v = sum(rep.violations.values())
        total += v
        details.append(f"{rho.label}:{'/'.join(sorted(rep.violations))}")
    return _record(7, total == 0, f"axiom suites with {trials} trials on {len(kinds)} measures, "
                                  f"violations {total} ({'; '.join(details)})")


def criterion_8(eps=1e-3, count=10):
    worst, bad = 0.0, 0
    for (s, rho1, rho2, r), (out, _, _) in list(zip(instances(), solved()))[:count]:
        tr = bisect(rho1, rho2, s, r, eps)
        diff = abs(tr.final.value - out.value)
        worst = max(worst, diff)
        bad += diff > eps + 1e-4
    return _record(8, bad == 0, f"dual vs bisection on {count} convex instances, max difference "
                                f"{worst:.2e} (tol {eps + 1e-4:.1e}), failures {bad}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8]


@pytest.mark.parametrize("k", range(1, 9))
def test_criterion(k):
    assert CRITERIA[k - 1](), RESULTS[k]


if __name__ == "__main__":
    ok = [fn() for fn in CRITERIA]
    raise SystemExit(0 if all(ok) else 1)
