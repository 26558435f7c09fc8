"""Bisection on the objective level t using the feasibility dual.

Each step solves the homogeneous feasibility program at t_k = (l_k + u_k)/2:
a finite (zero) optimum means some portfolio reaches risk t_k under the
constraint, and the barrier multipliers give that portfolio; divergence means
none does.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barrier import OPTIMAL, UNBOUNDED, SolverConfig, solve
from .dual import build_feasibility_dual
from .errors import InfeasibleProblem, QCPortError, SolverFailure, UnboundedRisk, ValidationError
from .oracle import minimize_risk, risk_of
from .risk import RiskMeasure, evaluate
from .scenarios import Portfolio, ScenarioSet

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"


@dataclass
class BisectionStep:
    t: float
    verdict: str
    w: Portfolio | None
    status: str
    value: float
    newton_steps: int


@dataclass
class BisectionFinal:
    w: Portfolio
    value: float  # g1(w)
    t_K: float  # final upper bound
    epsilon: float
    K: int
    g2: float
    from_multiplier: bool


@dataclass
class BisectionTrace:
    l1: float
    u1: float
    w0: Portfolio
    K_bound: int
    iterations: list = field(default_factory=list)
    bounds_history: list = field(default_factory=list)
    final: BisectionFinal | None = None
    warnings: list = field(default_factory=list)


def iteration_bound(l1: float, u1: float, epsilon: float) -> int:
    """Smallest K with (u1 - l1) / 2^K <= epsilon."""
    width = u1 - l1
    if width <= epsilon:
        return 0
    return math.ceil(math.log2(width / epsilon))


def find_initial_bounds(rho1: RiskMeasure, rho2: RiskMeasure, s: ScenarioSet, r: float,
                        w0: Portfolio | None = None, resolution: int | None = None):
    """(l1, u1, w0): l1 = rho1 of the all-assets payoff, u1 = g1 at a feasible w0.

    Returns are nonnegative, so w^T X <= 1^T X scenariowise and monotonicity
    makes l1 a lower bound on g1 over the simplex.
    """
    l1 = float(evaluate(rho1, s, s.aggregate_return()))
    if not np.isfinite(l1):
        raise UnboundedRisk(f"{rho1.label} of the aggregate payoff is {l1}")
    if w0 is None:
        m2, w0 = minimize_risk(rho2, s, resolution)
        if m2 > r:
            raise InfeasibleProblem(f"min over portfolios of {rho2.label} is {m2:.12g} > r = {r:.12g}",
                                    evidence={"min_g2": m2, "w": w0.weights.tolist()})
    else:
        g2 = float(risk_of(rho2, s, w0.weights))
        if g2 > r:
            raise InfeasibleProblem(f"supplied w0 has {rho2.label} = {g2:.12g} > r = {r:.12g}",
                                    evidence={"g2": g2, "w": w0.weights.tolist()})
    u1 = float(risk_of(rho1, s, w0.weights))
    if not np.isfinite(u1):
        raise UnboundedRisk(f"{rho1.label} at w0 is {u1}")
    if l1 > u1:
        # cannot happen for a monotone measure; keep the bracket ordered regardless
        l1 = u1
    return l1, u1, w0


def classify(outcome, cfg: SolverConfig) -> str:
    """Feasible iff the feasibility program solved to a value within 10 feas_tol of 0."""
    if outcome.status == OPTIMAL and abs(outcome.value) <= 10 * cfg.feas_tol:
        return FEASIBLE
    return INFEASIBLE


def bisect(rho1: RiskMeasure, rho2: RiskMeasure, s: ScenarioSet, r: float, epsilon: float,
           cfg: SolverConfig | None = None, w0: Portfolio | None = None,
           resolution: int | None = None) -> BisectionTrace:
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    cfg = cfg or SolverConfig()
    l, u, w0 = find_initial_bounds(rho1, rho2, s, r, w0, resolution)
    trace = BisectionTrace(l, u, w0, iteration_bound(l, u, epsilon))
    trace.bounds_history.append((l, u))
    kept = None
    while u - l > epsilon:
        t = 0.5 * (l + u)
        try:
            out = solve(build_feasibility_dual(rho1, rho2, s, t, r), cfg)
        except QCPortError:
            raise
        except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
            raise SolverFailure(f"feasibility solve failed at t = {t:.12g}: {exc}", trace) from exc
        verdict = classify(out, cfg)
        w = None
        if verdict == FEASIBLE:
            w = out.point.portfolio
            kept = w
            u = t
        else:
            if out.status != UNBOUNDED:
                trace.warnings.append(f"t = {t:.12g}: status {out.status} ({out.message}) read as infeasible")
            l = t
        trace.iterations.append(BisectionStep(t, verdict, w, out.status, out.value, out.newton_steps))
        trace.bounds_history.append((l, u))
    w_final = kept if kept is not None else w0
    if kept is None and trace.iterations:
        trace.warnings.append("no feasible verdict; returning the phase-0 portfolio")
    g1 = float(risk_of(rho1, s, w_final.weights))
    g2 = float(risk_of(rho2, s, w_final.weights))
    trace.final = BisectionFinal(w_final, g1, u, epsilon, len(trace.iterations), g2, kept is not None)
    return trace
