"""Direct primal solution on the simplex: lattice search, local polish, subgradient.

This module is the independent reference for every duality check, so it only
uses risk evaluation on portfolio payoffs and never touches penalties.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.optimize import minimize

from .errors import ResolutionTooCoarse, ValidationError
from .risk import RiskMeasure, evaluate
from .scenarios import Portfolio, ScenarioSet, portfolio_return

FEAS_TOL = 1e-9
MAX_LATTICE = 20000
METHODS = ("grid", "subgradient", "vertex", "refined")


@dataclass
class OracleResult:
    p_value: float
    w_best: Portfolio | None
    method: str
    certificate: float  # max(g2(w_best) - r, 0); +inf when nothing feasible was found
    resolution: int = 0
    evaluations: int = 0


@dataclass
class FeasibilityVerdict:
    feasible: bool
    witness: Portfolio | None
    margin: float  # min over searched w of max(g1 - t, g2 - r)
    resolution: int

    @property
    def label(self) -> str:
        return "feasible" if self.feasible else "infeasible_at_resolution"


# --------------------------------------------------------------------------- lattice

def default_resolution(n: int, max_points: int = MAX_LATTICE) -> int:
    """Largest k with C(k+n-1, n-1) <= max_points."""
    if n <= 1:
        return 1
    k = 1
    while comb(k + 1 + n - 1, n - 1) <= max_points:
        k += 1
    return k


def simplex_lattice(n: int, k: int) -> np.ndarray:
    """All w with entries in {0, 1/k, ..., 1} summing to 1, one per row (stars and bars)."""
    if n < 1 or k < 1:
        raise ValidationError("lattice needs n >= 1 and k >= 1")
    if n == 1:
        return np.ones((1, 1))
    bars = np.array(list(itertools.combinations(range(k + n - 1), n - 1)))
    edges = np.hstack([np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), k + n - 1)])
    counts = np.diff(edges, axis=1) - 1
    return counts / k


def risk_of(spec: RiskMeasure, s: ScenarioSet, W) -> np.ndarray | float:
    """g(w) = spec(w^T X) for one weight vector or a batch (rows)."""
    W = np.asarray(W, dtype=float)
    return evaluate(spec, s, portfolio_return(s, W))


def _g(spec, s):
    def f(w):
        return float(risk_of(spec, s, np.clip(w, 0.0, None)))
    return f


# --------------------------------------------------------------------------- local polish

def _slsqp(fun, cons, w0, n):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(fun, w0, method="SLSQP", bounds=[(0.0, 1.0)] * n,
                       constraints=[{"type": "eq", "fun": lambda w: np.sum(w) - 1.0}] + cons,
                       options={"ftol": 1e-13, "maxiter": 500})
    w = np.clip(res.x, 0.0, None)
    total = w.sum()
    return w / total if total > 0 else None


def _starts(W, score, count=4):
    order = np.argsort(score, kind="stable")
    picks = [W[i] for i in order[:count] if np.isfinite(score[i])]
    return picks


def minimize_risk(spec: RiskMeasure, s: ScenarioSet, resolution: int | None = None):
    """Phase 0: min over the simplex of spec(w^T X); returns (value, Portfolio)."""
    k = resolution or default_resolution(s.n)
    W = simplex_lattice(s.n, k)
    vals = np.asarray(risk_of(spec, s, W), dtype=float)
    g = _g(spec, s)
    best_i = int(np.argmin(vals))
    best_v, best_w = float(vals[best_i]), W[best_i]
    for w0 in _starts(W, vals) + [np.full(s.n, 1.0 / s.n)]:
        w = _slsqp(g, [], w0, s.n)
        if w is not None:
            v = g(w)
            if v < best_v:
                best_v, best_w = v, w
    return best_v, Portfolio.from_raw(best_w)


def _polish(g1, g2, r, starts, n):
    best_v, best_w = np.inf, None
    cons = [{"type": "ineq", "fun": lambda w: r - g2(w)}]
    for w0 in starts:
        w = _slsqp(g1, cons, w0, n)
        if w is None or not g2(w) <= r + FEAS_TOL:
            continue
        v = g1(w)
        if v < best_v:
            best_v, best_w = v, w
    return best_v, best_w


# --------------------------------------------------------------------------- primal solve

def solve_primal(rho1: RiskMeasure, rho2: RiskMeasure, s: ScenarioSet, r: float,
                 resolution: int | None = None, method: str = "refined",
                 iterations: int = 10_000) -> OracleResult:
    """p(r) = min g1(w) s.t. g2(w) <= r over the simplex."""
    if method not in METHODS:
        raise ValidationError(f"unknown oracle method {method!r}")
    g1, g2 = _g(rho1, s), _g(rho2, s)
    if method == "vertex":
        W = np.eye(s.n)
        k = 1
    elif method == "subgradient":
        return _subgradient(g1, g2, s.n, r, iterations)
    else:
        k = resolution or default_resolution(s.n)
        W = simplex_lattice(s.n, k)
    v1 = np.asarray(risk_of(rho1, s, W), dtype=float)
    v2 = np.asarray(risk_of(rho2, s, W), dtype=float)
    feas = v2 <= r + FEAS_TOL
    score = np.where(feas, v1, np.inf)
    best_v, best_w = np.inf, None
    if np.any(feas):
        i = int(np.argmin(score))
        best_v, best_w = float(v1[i]), W[i]
    if method == "refined":
        starts = _starts(W, score)
        if not starts:
            m2, w2 = minimize_risk(rho2, s, k)
            if m2 <= r + FEAS_TOL:
                starts = [w2.weights]
        pv, pw = _polish(g1, g2, r, starts, s.n)
        if pv < best_v:
            best_v, best_w = pv, pw
    if best_w is None:
        if method == "grid":
            m2, _ = minimize_risk(rho2, s, k)
            if m2 <= r:
                raise ResolutionTooCoarse(f"no feasible lattice point at resolution {k}, "
                                          f"but min g2 = {m2:.6g} <= r = {r:.6g}")
        return OracleResult(np.inf, None, method, np.inf, k, W.shape[0])
    return OracleResult(best_v, Portfolio.from_raw(best_w), method,
                        max(g2(best_w) - r, 0.0), k, W.shape[0])


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1} by sorting."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = idx[u - css / idx > 0][-1]
    return np.maximum(v - css[rho - 1] / rho, 0.0)


def _fd_grad(f, w, h=1e-7):
    f0 = f(w)
    g = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(w + e) - f0) / h
    return g


def _subgradient(g1, g2, n, r, iterations, penalty=10.0):
    """Projected subgradient on max(g1, g1 + penalty*(g2 - r)^+) with steps 1/sqrt(k)."""
    w = np.full(n, 1.0 / n)
    best_v, best_w = np.inf, None

    def merit(x):
        return g1(x) + penalty * max(g2(x) - r, 0.0)

    for it in range(1, iterations + 1):
        v1, v2 = g1(w), g2(w)
        if v2 <= r + FEAS_TOL and v1 < best_v:
            best_v, best_w = v1, w.copy()
        if not (np.isfinite(v1) and np.isfinite(v2)):
            w = project_simplex(0.5 * w + 0.5 / n)
            continue
        d = _fd_grad(merit, w)
        nrm = np.linalg.norm(d)
        if nrm == 0:
            break
        w = project_simplex(w - (0.1 / np.sqrt(it)) * d / nrm)
    if best_w is None:
        return OracleResult(np.inf, None, "subgradient", np.inf, 0, iterations)
    return OracleResult(best_v, Portfolio.from_raw(best_w), "subgradient",
                        max(g2(best_w) - r, 0.0), 0, iterations)


# --------------------------------------------------------------------------- feasibility

def check_feasible(rho1: RiskMeasure, rho2: RiskMeasure, s: ScenarioSet, t: float, r: float,
                   resolution: int | None = None, polish: bool = True) -> FeasibilityVerdict:
    """Is there w with g1(w) <= t and g2(w) <= r (within 1e-9)?"""
    k = resolution or default_resolution(s.n)
    W = simplex_lattice(s.n, k)
    v1 = np.asarray(risk_of(rho1, s, W), dtype=float)
    v2 = np.asarray(risk_of(rho2, s, W), dtype=float)
    gap = np.maximum(v1 - t, v2 - r)
    i = int(np.argmin(gap))
    margin, wit = float(gap[i]), W[i]
    if margin > FEAS_TOL and polish:
        g1, g2 = _g(rho1, s), _g(rho2, s)
        n = s.n

        def obj(x):
            return x[-1]

        def mk(g, lvl):
            return lambda x: x[-1] - (g(x[:-1]) - lvl)

        for w0 in _starts(W, gap):
            x0 = np.append(w0, max(gap.min(), 0.0) + 1e-3)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = minimize(obj, x0, method="SLSQP", bounds=[(0.0, 1.0)] * n + [(None, None)],
                               constraints=[{"type": "eq", "fun": lambda x: np.sum(x[:-1]) - 1.0},
                                            {"type": "ineq", "fun": mk(g1, t)},
                                            {"type": "ineq", "fun": mk(g2, r)}],
                               options={"ftol": 1e-13, "maxiter": 300})
            w = np.clip(res.x[:-1], 0.0, None)
            if w.sum() <= 0:
                continue
            w = w / w.sum()
            val = max(g1(w) - t, g2(w) - r)
            if val < margin:
                margin, wit = val, w
    feasible = margin <= FEAS_TOL
    return FeasibilityVerdict(feasible, Portfolio.from_raw(wit) if np.all(np.isfinite(wit)) else None,
                              margin, k)


def grid_step_band(rho1: RiskMeasure, rho2: RiskMeasure, s: ScenarioSet,
                   resolution: int | None = None, sample: int = 2000, seed: int = 0) -> float:
    """Largest change of g1 or g2 between adjacent lattice points (one grid step)."""
    k = resolution or default_resolution(s.n)
    if s.n == 1:
        return 0.0
    W = simplex_lattice(s.n, k)
    rng = np.random.default_rng(seed)
    if W.shape[0] > sample:
        W = W[rng.choice(W.shape[0], sample, replace=False)]
    band = 0.0
    for i in range(s.n):
        for j in range(s.n):
            if i == j:
                continue
            mask = W[:, i] >= 1.0 / k - 1e-12
            if not np.any(mask):
                continue
            A = W[mask]
            B = A.copy()
            B[:, i] -= 1.0 / k
            B[:, j] += 1.0 / k
            B = np.clip(B, 0.0, None)
            for spec in (rho1, rho2):
                da = np.asarray(risk_of(spec, s, A), float)
                db = np.asarray(risk_of(spec, s, B), float)
                ok = np.isfinite(da) & np.isfinite(db)
                if np.any(ok):
                    band = max(band, float(np.max(np.abs(da[ok] - db[ok]))))
    return band
