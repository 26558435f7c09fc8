"""Dual calculus of the catalog measures.

Penalties are extended reals carried as Python floats (``inf``/``-inf``);
``ext_add`` implements inf-addition so that ``(+inf) + (-inf) = +inf``.
Densities ``V`` are per-scenario arrays, so ``E[V Y] = sum_k p_k V_k Y_k``.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .errors import NotConvexMeasure, RootBracketFailure, UnsupportedMeasure, ValidationError
from .risk import (AVAR, CERTAINTY_EQUIVALENT, ENTROPIC, EXPECTED_LOSS, LossFunction,
                   RiskMeasure, evaluate)
from .scenarios import ScenarioSet

NORMALIZED_TOL = 1e-10
DOMAIN_TOL = 1e-10


def ext_add(*terms: float) -> float:
    """Sum of extended reals with inf-addition."""
    vals = [float(t) for t in terms]
    if any(np.isposinf(v) for v in vals):
        return np.inf
    return float(sum(vals))


def _density(s: ScenarioSet, V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if V.shape != (s.m,):
        raise ValidationError(f"density must have {s.m} entries")
    if np.any(V < 0):
        raise ValidationError("density must be nonnegative")
    return V


def mean(s: ScenarioSet, V) -> float:
    return float(s.probs @ V)


def norm2(s: ScenarioSet, V) -> float:
    return float(np.sqrt(s.probs @ (np.asarray(V) ** 2)))


def geometric_mean(s: ScenarioSet, V) -> float:
    """exp(E[log V]), continuously extended by 0 when V vanishes on some scenario."""
    V = np.asarray(V, dtype=float)
    if np.any(V <= 0):
        return 0.0
    return float(np.exp(s.probs @ np.log(V)))


def is_normalized(s: ScenarioSet, V, tol: float = NORMALIZED_TOL) -> bool:
    return abs(mean(s, V) - 1.0) <= tol


def _xlogx(V):
    V = np.asarray(V, dtype=float)
    out = np.zeros_like(V)
    pos = V > 0
    out[pos] = V[pos] * np.log(V[pos])
    return out


def gamma(spec: RiskMeasure, s: ScenarioSet, V) -> float:
    """Penalty of a convex risk measure, so that alpha(V, t) = gamma(V) + t E[V]."""
    if not spec.is_convex:
        raise NotConvexMeasure(f"{spec.label} is not a convex risk measure")
    V = _density(s, V)
    EV = mean(s, V)
    if EV <= 0:
        raise ValidationError("gamma needs a nonzero density")
    scale = DOMAIN_TOL * (1.0 + float(V.max()))
    if spec.kind == ENTROPIC:
        return float((s.probs @ _xlogx(V) - EV * np.log(EV)) / spec.param)
    if spec.kind == EXPECTED_LOSS:
        return 0.0 if float(V.max() - V.min()) <= scale else np.inf
    if spec.kind == AVAR:
        return 0.0 if float(V.max()) <= EV / spec.param + scale else np.inf
    raise UnsupportedMeasure(spec.label)


def alpha(spec: RiskMeasure, s: ScenarioSet, V, t: float) -> float:
    """Minimal penalty alpha(V, t) = sup{E[-V Y] : rho(Y) <= t} in closed form."""
    V = _density(s, V)
    t = float(t)
    if spec.is_convex:
        if not np.any(V > 0):
            return 0.0
        return ext_add(gamma(spec, s, V), t * mean(s, V))
    if spec.kind == CERTAINTY_EQUIVALENT:
        kind = spec.loss_kind
        if kind == "quadratic":
            # rho >= -1, so the acceptance set is empty below -1
            if t > -1:
                return (1.0 + t) * norm2(s, V) - mean(s, V)
            if t == -1:
                return -mean(s, V)
            return -np.inf
        if kind == "logarithmic":
            # sup over strictly positive payoffs of E[-V Y] is 0 once t >= 0
            return t * geometric_mean(s, V) if t < 0 else 0.0
        raise UnsupportedMeasure("custom loss: use alpha_generic_ce or alpha_oracle")
    raise UnsupportedMeasure(spec.label)


def alpha_minus(spec: RiskMeasure, s: ScenarioSet, V, t: float) -> float:
    """Left-continuous version sup_{t' < t} alpha(V, t')."""
    if spec.kind == CERTAINTY_EQUIVALENT and spec.loss_kind == "quadratic" and t <= -1:
        return -np.inf
    return alpha(spec, s, V, t)


def alpha_generic_ce(loss: LossFunction, s: ScenarioSet, V, t: float) -> float:
    """Certainty-equivalent penalty through the multiplier equation.

    Solves E[ell(h(lam * V / E[V]))] = ell^+(t) for lam > 0 on a geometrically
    expanded bracket, then returns E[V h(lam V / E[V])].  Returns +inf when
    ell^+(t) is infinite.
    """
    V = _density(s, V)
    EV = mean(s, V)
    if EV <= 0:
        raise ValidationError("alpha_generic_ce needs a nonzero density")
    target = loss.ell_plus(float(t))
    if np.isposinf(target):
        return np.inf
    z = V / EV
    p = s.probs

    def level(lam):
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = loss.ell(loss.h(lam * z))
        return float(p @ vals)

    def excess(lam):
        return level(lam) - target

    hi = 1.0
    for _ in range(1000):
        if excess(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise RootBracketFailure(f"multiplier map never reaches ell^+({t!r})")
    lo = hi / 2.0
    for _ in range(1000):
        if excess(lo) <= 0:
            break
        lo /= 2.0
    else:
        raise RootBracketFailure(f"multiplier map stays above ell^+({t!r})")
    if not np.isfinite(excess(lo)):
        raise RootBracketFailure("multiplier map is not finite near zero")
    if excess(lo) == 0:
        lam = lo
    elif excess(hi) == 0:
        lam = hi
    else:
        lam = brentq(excess, lo, hi, xtol=1e-300, rtol=1e-13, maxiter=500)
    with np.errstate(divide="ignore", invalid="ignore"):
        hv = loss.h(lam * z)
    terms = np.where(V > 0, V * np.where(V > 0, hv, 0.0), 0.0)
    return float(p @ terms)


def beta(spec: RiskMeasure, s: ScenarioSet, V, sval: float) -> float:
    """Maximal risk function inf{t : sval <= alpha(V, t)}."""
    V = _density(s, V)
    EV = mean(s, V)
    if EV <= 0:
        raise ValidationError("beta needs a nonzero density")
    sval = float(sval)
    if spec.is_convex:
        g = gamma(spec, s, V)
        return -np.inf if np.isposinf(g) else (sval - g) / EV
    if spec.kind == CERTAINTY_EQUIVALENT:
        if spec.loss_kind == "quadratic":
            if sval > -EV:
                return (sval + EV) / norm2(s, V) - 1.0
            return -1.0
        if spec.loss_kind == "logarithmic":
            if sval < 0:
                G = geometric_mean(s, V)
                return sval / G if G > 0 else -np.inf
            return 0.0
        return _beta_bisect(lambda t: alpha_generic_ce(spec.loss, s, V, t), sval)
    raise UnsupportedMeasure(spec.label)


def _beta_bisect(alpha_fn, sval: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    def ok(t):
        try:
            return sval <= alpha_fn(t)
        except RootBracketFailure:
            return False

    hi, step = 0.0, 1.0
    for _ in range(200):
        if ok(hi):
            break
        hi += step
        step *= 2.0
    else:
        return np.inf
    lo, step = hi - 1.0, 1.0
    for _ in range(200):
        if not ok(lo):
            break
        lo -= step
        step *= 2.0
    else:
        return -np.inf
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def alpha_tilde(spec: RiskMeasure, s: ScenarioSet, V) -> float:
    """inf_t (t - alpha(V, t)); equals -gamma(V) on E[V] = 1 and -inf elsewhere."""
    if not spec.is_convex:
        raise NotConvexMeasure(f"{spec.label} is not a convex risk measure")
    V = _density(s, V)
    if not is_normalized(s, V):
        return -np.inf
    g = gamma(spec, s, V)
    return -np.inf if np.isposinf(g) else -g


def alpha_tilde_numeric(spec: RiskMeasure, s: ScenarioSet, V, t_range=(-1e3, 1e3)) -> float:
    """Brute 1-D minimization of t - alpha(V, t) over a bounded range (testing aid)."""
    lo, hi = t_range

    def f(t):
        a = alpha(spec, s, V, t)
        return np.inf if np.isposinf(-a) else t - a

    grid = np.linspace(lo, hi, 201)
    vals = np.array([f(t) for t in grid])
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-10})
    return float(min(res.fun, vals[k]))


# --------------------------------------------------------------------------- numeric oracle

def _feasible_start(spec: RiskMeasure, t: float, m: int, bound: float):
    """A constant payoff with rho <= t, or None."""
    if spec.kind == CERTAINTY_EQUIVALENT and spec.loss_kind == "logarithmic":
        c = -t if t < 0 else 1e-6
    elif spec.kind == CERTAINTY_EQUIVALENT and spec.loss_kind == "quadratic":
        if t < -1:
            return None
        c = -t
    else:
        c = -t
    return np.full(m, float(np.clip(c, -bound, bound)))


def _certify(spec, s, Y, t, bound):
    """Shift Y upward until rho(Y) <= t; monotonicity keeps the result a valid lower bound."""
    if evaluate(spec, s, Y) <= t:
        return Y
    lo, hi = 0.0, 1e-12
    while evaluate(spec, s, Y + hi) > t:
        hi *= 4.0
        if hi > 4 * bound:
            return None
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if evaluate(spec, s, Y + mid) <= t:
            hi = mid
        else:
            lo = mid
    return Y + hi


def alpha_oracle(spec: RiskMeasure, s: ScenarioSet, V, t: float, bound: float = 1e3,
                 starts: int = 6, seed: int = 0) -> float:
    """Certified lower bound on alpha(V, t) from the acceptance-set definition.

    Maximizes E[-V Y] over payoffs with rho(Y) <= t and |Y| <= bound by SLSQP
    from several starts; each candidate is shifted into the acceptance set
    before it is scored, so the result never exceeds the true supremum.
    Returns -inf when no acceptable payoff is found.
    """
    V = _density(s, V)
    t = float(t)
    m = s.m
    w = s.probs * V
    rng = np.random.default_rng(seed)
    positive = spec.kind == CERTAINTY_EQUIVALENT and spec.loss_kind == "logarithmic"
    lower = 1e-9 if positive else -bound
    base = _feasible_start(spec, t, m, bound)
    if base is None:
        if spec.kind == CERTAINTY_EQUIVALENT and spec.loss_kind == "quadratic":
            return -np.inf
        base = np.full(m, -t)

    def con(Y):
        val = evaluate(spec, s, Y)
        return t - val if np.isfinite(val) else -1e6

    best = -np.inf
    for k in range(starts):
        if k == 0:
            y0 = base.copy()
        else:
            noise = rng.normal(0.0, 0.5, m)
            y0 = base + noise
            if positive:
                y0 = np.abs(base) * np.exp(noise)
        y0 = np.clip(y0, lower, bound)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(lambda Y: float(w @ Y), y0, jac=lambda Y: w, method="SLSQP",
                           bounds=[(lower, bound)] * m,
                           constraints=[{"type": "ineq", "fun": con}],
                           options={"maxiter": 500, "ftol": 1e-14})
        for cand in (res.x, y0):
            cert = _certify(spec, s, np.asarray(cand, dtype=float), t, bound)
            if cert is not None:
                best = max(best, float(-(w @ cert)))
    return best
