"""Log-barrier Newton method for StructuredProgram, with multiplier extraction.

The asset-block rows are carried with explicit slack variables
``s_i = y - E[V1 X_i] - E[V2 X_i] > 0`` so that the multiplier estimate
``w_i = mu / s_i`` does not lose precision to cancellation when a row is
nearly active.  Equality rows (including the slack definitions) are
eliminated through an orthonormal null-space basis.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .dual import FEASIBILITY, StructuredProgram
from .errors import ValidationError
from .scenarios import Portfolio

OPTIMAL = "Optimal"
UNBOUNDED = "Unbounded"
INFEASIBLE = "Infeasible"
MAX_ITER = "MaxIter"


@dataclass(frozen=True)
class SolverConfig:
    mu0: float = 1.0
    mu_shrink: float = 0.2
    gap_tol: float = 1e-8
    newton_tol: float = 1e-9
    max_outer: int = 60
    max_newton: int = 100
    unbounded_threshold: float = 1e8
    feas_tol: float = 1e-7

    def __post_init__(self):
        if not 0 < self.mu_shrink < 1:
            raise ValidationError("mu_shrink must lie in (0, 1)")
        for name in ("mu0", "gap_tol", "newton_tol", "unbounded_threshold", "feas_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.max_outer < 1 or self.max_newton < 1:
            raise ValidationError("iteration limits must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> "SolverConfig":
        if not d:
            return cls()
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown solver options {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DualPoint:
    V1: np.ndarray
    V2: np.ndarray
    y: float
    w: np.ndarray
    mu: float

    @property
    def portfolio(self) -> Portfolio:
        return Portfolio.from_raw(self.w)


@dataclass
class SolveOutcome:
    status: str
    value: float
    point: DualPoint | None
    residuals: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    newton_steps: int = 0
    outer_steps: int = 0
    message: str = ""


_EPS_FLOOR = 100 * np.finfo(float).eps
_HOMOG_CERT = 1e-10


class _Stall(Exception):
    pass


class _Diverged(Exception):
    pass


class _Barrier:
    """Barrier objective in null-space coordinates z = z0 + Z u, z = [x, slacks]."""

    def __init__(self, prog: StructuredProgram):
        self.prog = prog
        N, n, m = prog.size, prog.n, prog.m
        self.N, self.n, self.m = N, n, m
        n_eq = prog.A_eq.shape[0]
        E = np.zeros((n_eq + n, N + n))
        E[:n_eq, :N] = prog.A_eq
        E[n_eq:, :N] = prog.block_G
        E[n_eq:, N:] = np.eye(n)
        self.E = E
        self.e_rhs = np.concatenate([prog.b_eq, np.zeros(n)])
        self.Z = sla.null_space(E)
        self.Ga, self.ha = prog.aux_G, prog.aux_h
        self.pos_idx = np.concatenate([np.arange(2 * m), N + np.arange(n)])
        self.n_barrier = self.pos_idx.size + self.Ga.shape[0]
        self.homogeneous = prog.kind == FEASIBILITY
        self.best_F = -np.inf  # best objective over all accepted (feasible) iterates

    def start(self) -> np.ndarray:
        x0 = self.prog.interior_start()
        return np.concatenate([x0, -self.prog.block_G @ x0])

    def interior(self, z) -> bool:
        if np.any(z[self.pos_idx] <= 0):
            return False
        if self.Ga.shape[0] and np.any(self.ha - self.Ga @ z[:self.N] <= 0):
            return False
        return True

    def value(self, z, mu):
        F = self.prog.objective(z[:self.N])
        bar = np.sum(np.log(z[self.pos_idx]))
        if self.Ga.shape[0]:
            bar += np.sum(np.log(self.ha - self.Ga @ z[:self.N]))
        return F + mu * bar, F

    def derivatives(self, z, mu):
        N = self.N
        x = z[:N]
        g = np.zeros(z.size)
        H = np.zeros((z.size, z.size))
        g[:N] = self.prog.gradient(x)
        H[:N, :N] = self.prog.hessian(x)
        v = z[self.pos_idx]
        g[self.pos_idx] += mu / v
        H[self.pos_idx, self.pos_idx] -= mu / v**2
        if self.Ga.shape[0]:
            sl = self.ha - self.Ga @ x
            g[:N] -= mu * self.Ga.T @ (1.0 / sl)
            H[:N, :N] -= mu * (self.Ga.T * (1.0 / sl**2)) @ self.Ga
        return g, H

    def max_step(self, z, dz) -> float:
        step = np.inf
        v, dv = z[self.pos_idx], dz[self.pos_idx]
        neg = dv < 0
        if np.any(neg):
            step = min(step, float(np.min(-v[neg] / dv[neg])))
        if self.Ga.shape[0]:
            sl = self.ha - self.Ga @ z[:self.N]
            dsl = -self.Ga @ dz[:self.N]
            neg = dsl < 0
            if np.any(neg):
                step = min(step, float(np.min(-sl[neg] / dsl[neg])))
        return step


def _newton_direction(g, H):
    A = -H
    scale = max(1.0, float(np.max(np.abs(np.diag(A))))) if A.size else 1.0
    reg = 0.0
    for _ in range(12):
        try:
            c = sla.cho_factor(A + reg * np.eye(A.shape[0]), check_finite=True)
            return sla.cho_solve(c, g)
        except (np.linalg.LinAlgError, ValueError):
            reg = 1e-10 * scale if reg == 0.0 else reg * 100.0
    raise _Stall("Hessian not negative definite", None)


def _center(bar: _Barrier, z, mu, cfg: SolverConfig):
    """Damped Newton on the barrier objective; returns (z, steps)."""
    Z = bar.Z
    prev = np.inf
    for it in range(1, cfg.max_newton + 1):
        g_full, H_full = bar.derivatives(z, mu)
        g = Z.T @ g_full
        H = Z.T @ H_full @ Z
        try:
            d = _newton_direction(g, H)
        except _Stall as exc:
            raise _Stall(exc.args[0], z) from None
        dec2 = float(g @ d)
        phi0, _ = bar.value(z, mu)
        # round-off floor on the decrement, relative to the barrier value
        floor = (_EPS_FLOOR * max(1.0, abs(phi0))) ** 2
        if dec2 <= max((cfg.newton_tol ** 2) * mu, floor):
            return z, it - 1
        # quadratic region that no longer makes progress: rounding dominates
        if dec2 < 1e-12 * mu and dec2 >= 0.5 * prev:
            return z, it - 1
        prev = dec2
        dz = Z @ d
        smax = bar.max_step(z, dz)
        step = min(1.0, 0.99 * smax)
        full_region = dec2 < 1e-6 * max(mu, 1e-300) and step == 1.0
        accepted = False
        for _ in range(60):
            zn = z + step * dz
            if bar.interior(zn):
                phin, Fn = bar.value(zn, mu)
                if np.isfinite(phin) and (full_region or phin >= phi0 + 0.25 * step * dec2):
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            if dec2 <= 1e-6 * mu:
                return z, it
            raise _Stall(f"line search failed (decrement {dec2:.3e})", z)
        z = zn
        if Fn > bar.best_F:
            bar.best_F = Fn
        if Fn > cfg.unbounded_threshold:
            raise _Diverged(z, it)
        # homogeneous objective: a feasible point with positive value scales to +inf
        if bar.homogeneous and Fn > _HOMOG_CERT * (1.0 + float(np.linalg.norm(z[:bar.N]))):
            raise _Diverged(z, it)
    raise _Diverged(z, cfg.max_newton) if _recedes(bar, z, dz, cfg) else _Stall("Newton iteration limit", z)


def _recedes(bar: _Barrier, z, dz, cfg: SolverConfig) -> bool:
    """Probe the ray z + a dz: feasible for all a > 0 and objective beyond the threshold."""
    if np.any(dz[bar.pos_idx] < 0):
        return False
    if bar.Ga.shape[0] and np.any(bar.Ga @ dz[:bar.N] > 0):
        return False
    scale = max(1.0, float(np.linalg.norm(z))) / max(float(np.linalg.norm(dz)), 1e-300)
    for a in (1e2, 1e4, 1e6, 1e8, 1e10):
        F = bar.prog.objective((z + a * scale * dz)[:bar.N])
        if F > cfg.unbounded_threshold:
            return True
    return False


def _point(prog, z, mu):
    N = prog.size
    V1, V2, y = prog.split(z[:N])
    w = mu / z[N:]
    return DualPoint(V1.copy(), V2.copy(), y, w, mu)


def solve(prog: StructuredProgram, cfg: SolverConfig | None = None) -> SolveOutcome:
    """Maximize the program by a barrier method and read w off the asset-block multipliers."""
    cfg = cfg or SolverConfig()
    bar = _Barrier(prog)
    z = bar.start()
    if prog.trivially_unbounded:
        return SolveOutcome(UNBOUNDED, np.inf, None, message="empty acceptance set")
    mu = cfg.mu0
    history, steps = [], 0
    status, message = MAX_ITER, ""
    outer = 0
    for outer in range(1, cfg.max_outer + 1):
        try:
            z, k = _center(bar, z, mu, cfg)
            steps += k
        except _Diverged as exc:
            z = exc.args[0]
            steps += exc.args[1]
            F = prog.objective(z[:prog.size])
            msg = ("feasible point with positive value in a homogeneous program"
                   if bar.homogeneous and F <= cfg.unbounded_threshold
                   else "objective exceeds unboundedness threshold")
            return SolveOutcome(UNBOUNDED, np.inf, _point(prog, z, mu), {}, history + [F],
                                steps, outer, msg)
        except _Stall as exc:
            message = exc.args[0]
            if exc.args[1] is not None:
                z = exc.args[1]
            break
        history.append(prog.objective(z[:prog.size]))
        if bar.n_barrier * mu <= cfg.gap_tol:
            status = OPTIMAL
            break
        mu *= cfg.mu_shrink
    point = _point(prog, z, mu)
    value = prog.objective(z[:prog.size])
    residuals = check_kkt(prog, point)
    if status == OPTIMAL:
        ok = (residuals["ineq_violation"] <= cfg.feas_tol and residuals["eq_violation"] <= cfg.feas_tol
              and abs(residuals["sum_w_minus_1"]) <= cfg.feas_tol
              and residuals["complementarity"] <= 10 * cfg.gap_tol)
        if not ok:
            status, message = MAX_ITER, "residuals above tolerance at final center"
    if status == MAX_ITER:
        # every interior iterate is dual feasible, so the best seen is a valid lower bound
        value = max(value, bar.best_F)
    return SolveOutcome(status, value, point, residuals, history, steps, outer, message)


def check_kkt(prog: StructuredProgram, point: DualPoint) -> dict:
    """Residuals of the barrier KKT system at ``point`` with its multiplier estimate."""
    x = prog.stack(point.V1, point.V2, point.y)
    w = np.asarray(point.w, dtype=float)
    lhs = prog.block_lhs(x)
    slack = -lhs
    comp = w * slack
    eq_viol = float(np.max(np.abs(prog.A_eq @ x - prog.b_eq))) if prog.A_eq.shape[0] else 0.0
    aux_viol = 0.0
    if prog.aux_G.shape[0]:
        aux_viol = float(max(0.0, np.max(prog.aux_G @ x - prog.aux_h)))
    V = x[:2 * prog.m]
    out = {
        "ineq_violation": float(max(0.0, np.max(lhs), aux_viol, -np.min(V))),
        "eq_violation": eq_viol,
        "sum_w_minus_1": float(w.sum() - 1.0),
        "min_w": float(w.min()),
        "complementarity": float(np.max(np.abs(comp))),
        "complementarity_rows": comp.tolist(),
    }
    if np.all(V > 0) and point.mu > 0:
        try:
            grad = prog.gradient(x)
        except Exception:
            grad = None
        if grad is not None:
            r = grad - prog.block_G.T @ w
            r[:2 * prog.m] += point.mu / V
            if prog.aux_G.shape[0]:
                sl = prog.aux_h - prog.aux_G @ x
                r -= point.mu * prog.aux_G.T @ (1.0 / np.maximum(sl, 1e-300))
            if prog.A_eq.shape[0]:
                Z = sla.null_space(prog.A_eq)
                r = Z.T @ r
            out["stationarity"] = float(np.max(np.abs(r))) if r.size else 0.0
    return out
