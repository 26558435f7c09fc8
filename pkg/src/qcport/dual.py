"""Assembly of the dual problems as smooth concave programs over (V1, V2, y).

Variables are stacked as ``x = [V1 (m), V2 (m), y]``.  Every program carries
the n-row block ``E[V1 X_i] + E[V2 X_i] - y <= 0`` whose multipliers are the
portfolio weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotConvexMeasure, UnsupportedMeasure
from .risk import AVAR, CERTAINTY_EQUIVALENT, ENTROPIC, EXPECTED_LOSS, RiskMeasure
from .scenarios import ScenarioSet

DUAL = "dual"
FEASIBILITY = "feasibility"


# --------------------------------------------------------------------------- objective terms

class LinearTerm:
    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    def value(self, x):
        return float(self.c @ x)

    def add_grad(self, x, g):
        g += self.c

    def add_hess(self, x, H):
        pass


class RelEntropyTerm:
    """-coef * (E[V log V] - E[V] log E[V]) on one density block."""

    def __init__(self, sl, probs, coef):
        self.sl, self.p, self.coef = sl, probs, float(coef)

    def value(self, x):
        v = x[self.sl]
        E = float(self.p @ v)
        if np.any(v < 0):
            return -np.inf
        pos = v > 0
        xlx = float(self.p[pos] @ (v[pos] * np.log(v[pos])))
        ent = xlx - (E * np.log(E) if E > 0 else 0.0)
        return -self.coef * ent

    def add_grad(self, x, g):
        v = x[self.sl]
        E = float(self.p @ v)
        g[self.sl] -= self.coef * self.p * (np.log(v) - np.log(E))

    def add_hess(self, x, H):
        v = x[self.sl]
        E = float(self.p @ v)
        H[self.sl, self.sl] -= self.coef * (np.diag(self.p / v) - np.outer(self.p, self.p) / E)


class NormTerm:
    """-coef * ||V||_2 with ||V||_2 = E[V^2]^(1/2)."""

    def __init__(self, sl, probs, coef):
        self.sl, self.p, self.coef = sl, probs, float(coef)

    def value(self, x):
        v = x[self.sl]
        return -self.coef * float(np.sqrt(self.p @ (v * v)))

    def add_grad(self, x, g):
        v = x[self.sl]
        nrm = float(np.sqrt(self.p @ (v * v)))
        g[self.sl] -= self.coef * self.p * v / nrm

    def add_hess(self, x, H):
        v = x[self.sl]
        nrm = float(np.sqrt(self.p @ (v * v)))
        pv = self.p * v
        H[self.sl, self.sl] -= self.coef * (np.diag(self.p) / nrm - np.outer(pv, pv) / nrm**3)


class GeoMeanTerm:
    """coef * exp(E[log V]); concave for coef >= 0."""

    def __init__(self, sl, probs, coef):
        self.sl, self.p, self.coef = sl, probs, float(coef)

    def _G(self, v):
        if np.any(v <= 0):
            return 0.0
        return float(np.exp(self.p @ np.log(v)))

    def value(self, x):
        v = x[self.sl]
        if np.any(v < 0):
            return -np.inf
        return self.coef * self._G(v)

    def add_grad(self, x, g):
        v = x[self.sl]
        g[self.sl] += self.coef * self._G(v) * self.p / v

    def add_hess(self, x, H):
        v = x[self.sl]
        q = self.p / v
        H[self.sl, self.sl] += self.coef * self._G(v) * (np.outer(q, q) - np.diag(self.p / v**2))


class EmptyAcceptanceTerm:
    """-alpha(V, t) when the acceptance set is empty: +inf for V != 0, 0 at V = 0."""

    def __init__(self, sl):
        self.sl = sl

    def value(self, x):
        return np.inf if np.any(x[self.sl] != 0) else 0.0

    def add_grad(self, x, g):
        raise UnsupportedMeasure("objective is +inf on the interior")

    add_hess = add_grad


# --------------------------------------------------------------------------- program

@dataclass
class StructuredProgram:
    """maximize sum(terms)(x) s.t. block_G x <= 0, aux_G x <= aux_h, A_eq x = b_eq, V >= 0."""

    s: ScenarioSet
    terms: list
    block_G: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    aux_G: np.ndarray
    aux_h: np.ndarray
    kind: str
    labels: tuple
    r: float
    t: float | None = None
    notes: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.s.m

    @property
    def n(self) -> int:
        return self.s.n

    @property
    def size(self) -> int:
        return 2 * self.s.m + 1

    @property
    def trivially_unbounded(self) -> bool:
        return any(isinstance(term, EmptyAcceptanceTerm) for term in self.terms)

    def split(self, x):
        m = self.m
        return x[:m], x[m:2 * m], float(x[2 * m])

    def stack(self, V1, V2, y):
        return np.concatenate([np.asarray(V1, float), np.asarray(V2, float), [float(y)]])

    def objective(self, x) -> float:
        total = 0.0
        for term in self.terms:
            val = term.value(x)
            if np.isposinf(val):
                return np.inf
            total += val
        return total

    def gradient(self, x) -> np.ndarray:
        g = np.zeros(self.size)
        for term in self.terms:
            term.add_grad(x, g)
        return g

    def hessian(self, x) -> np.ndarray:
        H = np.zeros((self.size, self.size))
        for term in self.terms:
            term.add_hess(x, H)
        return H

    def block_lhs(self, x) -> np.ndarray:
        """E[V1 X_i] + E[V2 X_i] - y for each asset i."""
        return self.block_G @ x

    def interior_start(self) -> np.ndarray:
        """V1 = V2 = 1 (satisfies every emitted equality row), y above the block by 1."""
        m = self.m
        x = np.ones(self.size)
        x[2 * m] = 0.0
        x[2 * m] = float(np.max(self.block_G @ x)) + 1.0
        return x


def _block_rows(s: ScenarioSet) -> np.ndarray:
    m, n = s.m, s.n
    coef = (s.probs[:, None] * s.returns).T
    G = np.zeros((n, 2 * m + 1))
    G[:, :m] = coef
    G[:, m:2 * m] = coef
    G[:, 2 * m] = -1.0
    return G


def _penalty_terms(spec: RiskMeasure, s: ScenarioSet, offset: int, level: float, size: int):
    """Terms and rows realizing -alpha(V, level) on the block starting at ``offset``.

    For convex kinds the gamma-domain restrictions are emitted as linear rows.
    Returns (terms, eq_rows, eq_rhs, aux_rows, aux_rhs).
    """
    m, p = s.m, s.probs
    sl = slice(offset, offset + m)
    lin = np.zeros(size)
    terms, eq_rows, aux_rows = [], [], []

    def lin_on_block(c):
        lin[sl] += c

    kind = spec.kind
    if kind == AVAR and spec.param >= 1.0:
        kind = EXPECTED_LOSS
    if kind in (ENTROPIC, EXPECTED_LOSS, AVAR):
        lin_on_block(-level * p)
        if kind == ENTROPIC:
            terms.append(RelEntropyTerm(sl, p, 1.0 / spec.param))
        elif kind == EXPECTED_LOSS:
            for k in range(m - 1):
                row = np.zeros(size)
                row[offset + k], row[offset + k + 1] = 1.0, -1.0
                eq_rows.append(row)
        else:
            for k in range(m):
                row = np.zeros(size)
                row[sl] = -p / spec.param
                row[offset + k] += 1.0
                aux_rows.append(row)
    elif kind == CERTAINTY_EQUIVALENT and spec.loss_kind == "quadratic":
        if level > -1:
            terms.append(NormTerm(sl, p, 1.0 + level))
            lin_on_block(p)
        elif level == -1:
            lin_on_block(p)
        else:
            terms.append(EmptyAcceptanceTerm(sl))
    elif kind == CERTAINTY_EQUIVALENT and spec.loss_kind == "logarithmic":
        if level < 0:
            terms.append(GeoMeanTerm(sl, p, -level))
    else:
        raise UnsupportedMeasure(f"no closed-form penalty for {spec.label}")
    if np.any(lin):
        terms.insert(0, LinearTerm(lin))
    eq = np.array(eq_rows).reshape(-1, size)
    aux = np.array(aux_rows).reshape(-1, size)
    return terms, eq, np.zeros(eq.shape[0]), aux, np.zeros(aux.shape[0])


def _assemble(s, parts, extra_eq, kind, labels, r, t):
    size = 2 * s.m + 1
    y_lin = np.zeros(size)
    y_lin[2 * s.m] = -1.0
    terms = [LinearTerm(y_lin)]
    eqs, eq_rhs, auxs, aux_rhs = [], [], [], []
    for part in parts:
        tm, eq, eb, aux, ab = part
        terms.extend(tm)
        eqs.append(eq)
        eq_rhs.append(eb)
        auxs.append(aux)
        aux_rhs.append(ab)
    for row, rhs in extra_eq:
        eqs.append(row.reshape(1, -1))
        eq_rhs.append(np.array([rhs]))
    A = np.vstack(eqs) if eqs else np.zeros((0, size))
    b = np.concatenate(eq_rhs) if eq_rhs else np.zeros(0)
    Ga = np.vstack(auxs) if auxs else np.zeros((0, size))
    ha = np.concatenate(aux_rhs) if aux_rhs else np.zeros(0)
    return StructuredProgram(s, terms, _block_rows(s), A, b, Ga, ha, kind, labels, float(r),
                             None if t is None else float(t))


def build_dual(rho1: RiskMeasure, rho2: RiskMeasure, s: ScenarioSet, r: float) -> StructuredProgram:
    """maximize -gamma1(V1) - alpha2(V2, r) - y with E[V1] = 1 and the asset block."""
    if not rho1.is_convex:
        raise NotConvexMeasure(f"{rho1.label} is not convex; use the bisection route")
    size = 2 * s.m + 1
    part1 = _penalty_terms(rho1, s, 0, 0.0, size)
    part2 = _penalty_terms(rho2, s, s.m, float(r), size)
    norm_row = np.zeros(size)
    norm_row[:s.m] = s.probs
    return _assemble(s, [part1, part2], [(norm_row, 1.0)], DUAL, (rho1.label, rho2.label), r, None)


def build_feasibility_dual(rho1: RiskMeasure, rho2: RiskMeasure, s: ScenarioSet,
                           t: float, r: float) -> StructuredProgram:
    """maximize -alpha1(V1, t) - alpha2(V2, r) - y over the asset block; value 0 or +inf."""
    size = 2 * s.m + 1
    part1 = _penalty_terms(rho1, s, 0, float(t), size)
    part2 = _penalty_terms(rho2, s, s.m, float(r), size)
    return _assemble(s, [part1, part2], [], FEASIBILITY, (rho1.label, rho2.label), r, t)
