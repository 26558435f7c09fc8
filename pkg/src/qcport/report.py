"""Run configuration, report assembly and the solve / frontier / verify commands."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import penalty
from .barrier import OPTIMAL, UNBOUNDED, SolverConfig, check_kkt, solve
from .bisection import bisect, iteration_bound
from .dual import build_dual
from .errors import (InfeasibleProblem, NotConvexMeasure, QCPortError, SolverFailure,
                     ValidationError)
from .oracle import minimize_risk, risk_of, solve_primal
from .risk import CERTAINTY_EQUIVALENT, RiskMeasure
from .scenarios import ScenarioSet, generate_synthetic, load_scenarios

SCHEMA_VERSION = 1
MODES = ("auto", "dual", "bisect", "oracle")
SIG_DIGITS = 12

EXIT_OK = 0
EXIT_BREACH = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4


# --------------------------------------------------------------------------- config

@dataclass(frozen=True)
class RunConfig:
    rho1: RiskMeasure
    rho2: RiskMeasure
    r: float
    scenario_path: str | None = None
    synthetic: dict | None = None
    epsilon: float = 1e-3
    mode: str = "auto"
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: str = "-"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if (self.scenario_path is None) == (self.synthetic is None):
            raise ValidationError("give exactly one of scenarios.path or scenarios.synthetic")
        if not math.isfinite(self.r):
            raise ValidationError("r must be finite")
        if self.mode == "dual" and not self.rho1.is_convex:
            raise ValidationError(f"mode 'dual' needs a convex rho1, got {self.rho1.label}")
        if self.route in ("bisect",) and not self.epsilon > 0:
            raise ValidationError("epsilon must be positive for bisection")

    @property
    def route(self) -> str:
        if self.mode == "auto":
            return "dual" if self.rho1.is_convex else "bisect"
        return self.mode

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValidationError(f"unsupported schema_version {version!r}")
        try:
            src = d["scenarios"]
            rho1 = RiskMeasure.from_dict(d["rho1"])
            rho2 = RiskMeasure.from_dict(d["rho2"])
            r = float(d["r"])
        except KeyError as exc:
            raise ValidationError(f"config is missing {exc.args[0]!r}") from None
        path = src.get("path")
        if path is not None and base_dir is not None and not Path(path).is_absolute():
            path = str(base_dir / path)
        return cls(rho1=rho1, rho2=rho2, r=r, scenario_path=path, synthetic=src.get("synthetic"),
                   epsilon=float(d.get("epsilon", 1e-3)), mode=d.get("mode", "auto"),
                   solver=SolverConfig.from_dict(d.get("solver")), output=d.get("output", "-"),
                   seed=int(d.get("seed", 0)))

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data, path.parent)

    def to_dict(self) -> dict:
        src = {"path": self.scenario_path} if self.scenario_path else {"synthetic": self.synthetic}
        return {"schema_version": SCHEMA_VERSION, "scenarios": src, "rho1": self.rho1.to_dict(),
                "rho2": self.rho2.to_dict(), "r": self.r, "epsilon": self.epsilon, "mode": self.mode,
                "solver": self.solver.to_dict(), "output": self.output, "seed": self.seed}

    def scenarios(self) -> ScenarioSet:
        if self.scenario_path:
            return load_scenarios(self.scenario_path)
        syn = self.synthetic
        try:
            return generate_synthetic(int(syn["m"]), int(syn["n"]), int(syn.get("seed", self.seed)))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"synthetic scenarios need m and n ({exc})") from None


# --------------------------------------------------------------------------- serialization

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIG_DIGITS}g}")
    return x


def to_json(obj) -> str:
    """Deterministic JSON: sorted keys, 12 significant digits, infinities as strings."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2)


def write_output(text: str, dest: str | None) -> None:
    if not dest or dest == "-":
        print(text)
    else:
        Path(dest).write_text(text + "\n", encoding="utf-8")


def convention_notices(*measures: RiskMeasure) -> list[str]:
    """Sign and domain conventions that affect how results should be read."""
    notes = []
    for rho in measures:
        if rho.kind == CERTAINTY_EQUIVALENT and rho.loss_kind == "quadratic":
            notes.append(f"{rho.label}: risk is bounded below by -1, so levels t < -1 have an "
                         "empty acceptance set and penalty -inf")
        if rho.kind == CERTAINTY_EQUIVALENT and rho.loss_kind == "logarithmic":
            notes.append(f"{rho.label}: payoffs that are nonpositive in some scenario have risk +inf; "
                         "penalty is 0 for t >= 0")
    return notes


# --------------------------------------------------------------------------- solve

def _phase0(rho2, s, r):
    m2, w0 = minimize_risk(rho2, s)
    if m2 > r:
        raise InfeasibleProblem(f"no portfolio meets {rho2.label} <= {r:.12g}; the minimum is {m2:.12g}",
                                evidence={"min_g2": m2, "argmin": w0.weights.tolist()})
    return m2, w0


def solve_config(cfg: RunConfig, s: ScenarioSet | None = None, route: str | None = None) -> dict:
    """Run one problem along ``route`` (default: the config's) and return the report dict."""
    s = s if s is not None else cfg.scenarios()
    route = route or cfg.route
    rho1, rho2, r = cfg.rho1, cfg.rho2, cfg.r
    if route == "dual" and not rho1.is_convex:
        raise NotConvexMeasure(f"route 'dual' needs a convex rho1, got {rho1.label}")
    t0 = time.perf_counter()
    min_g2, _ = _phase0(rho2, s, r)
    rep = {
        "schema_version": SCHEMA_VERSION,
        "problem": {"rho1": rho1.to_dict(), "rho2": rho2.to_dict(), "rho1_label": rho1.label,
                    "rho2_label": rho2.label, "r": r, "m": s.m, "n": s.n,
                    "assets": list(s.asset_names)},
        "route": route,
        "phase0_min_g2": min_g2,
        "warnings": convention_notices(rho1, rho2),
        "d_value": None,
        "residuals": None,
        "iterations": None,
    }
    if route == "dual":
        out = solve(build_dual(rho1, rho2, s, r), cfg.solver)
        rep["status"] = out.status
        if out.status == UNBOUNDED:
            raise InfeasibleProblem(f"dual unbounded: constraint {rho2.label} <= {r:.12g} cannot be met",
                                    evidence={"min_g2": min_g2})
        if out.status != OPTIMAL:
            rep["warnings"].append(f"solver stopped with {out.status}: {out.message}")
        w = out.point.portfolio
        res = check_kkt(build_dual(rho1, rho2, s, r), out.point)
        res.pop("complementarity_rows", None)
        rep.update(d_value=out.value, residuals=res,
                   iterations={"newton": out.newton_steps, "outer": out.outer_steps})
    elif route == "bisect":
        tr = bisect(rho1, rho2, s, r, cfg.epsilon, cfg.solver)
        w = tr.final.w
        rep["status"] = OPTIMAL
        rep["warnings"].extend(tr.warnings)
        rep["bisection"] = {"l1": tr.l1, "u1": tr.u1, "t_K": tr.final.t_K, "epsilon": cfg.epsilon,
                            "K": tr.final.K, "K_bound": iteration_bound(tr.l1, tr.u1, cfg.epsilon),
                            "from_multiplier": tr.final.from_multiplier,
                            "steps": [{"t": st.t, "verdict": st.verdict, "status": st.status}
                                      for st in tr.iterations]}
        rep["iterations"] = {"bisection": tr.final.K,
                             "newton": sum(st.newton_steps for st in tr.iterations)}
    elif route == "oracle":
        res = solve_primal(rho1, rho2, s, r)
        if res.w_best is None:
            raise InfeasibleProblem("oracle found no feasible portfolio", evidence={"min_g2": min_g2})
        w = res.w_best
        rep["status"] = OPTIMAL
        rep["iterations"] = {"evaluations": res.evaluations, "resolution": res.resolution}
    else:
        raise ValidationError(f"unknown route {route!r}")
    g1 = float(risk_of(rho1, s, w.weights))
    g2 = float(risk_of(rho2, s, w.weights))
    rep.update(portfolio=dict(zip(s.asset_names, w.weights.tolist())), g1=g1, g2=g2, p_value=g1)
    if rep["d_value"] is not None:
        rep["duality_gap"] = g1 - rep["d_value"]
    rep["wall_time"] = time.perf_counter() - t0
    return rep


def cmd_solve(cfg: RunConfig) -> tuple[dict, int]:
    try:
        rep = solve_config(cfg)
    except InfeasibleProblem as exc:
        return {"schema_version": SCHEMA_VERSION, "status": "Infeasible", "error": str(exc),
                "evidence": exc.evidence}, EXIT_INFEASIBLE
    except SolverFailure as exc:
        return {"schema_version": SCHEMA_VERSION, "status": "SolverFailure", "error": str(exc)}, EXIT_SOLVER
    code = EXIT_OK if rep["status"] == OPTIMAL else EXIT_SOLVER
    return rep, code


# --------------------------------------------------------------------------- frontier

def cmd_frontier(cfg: RunConfig, r_min: float, r_max: float, steps: int) -> tuple[dict, int]:
    if not r_min <= r_max or steps < 2:
        raise ValidationError("frontier needs r_min <= r_max and steps >= 2")
    s = cfg.scenarios()
    rows, warnings = [], []
    for r in np.linspace(r_min, r_max, steps):
        point = replace(cfg, r=float(r))
        row = {"r": float(r)}
        try:
            rep = solve_config(point, s)
            row.update(status=rep["status"], p_value=rep["p_value"], g2=rep["g2"],
                       weights=[rep["portfolio"][a] for a in s.asset_names])
        except InfeasibleProblem as exc:
            row.update(status="Infeasible", p_value=math.inf, error=str(exc))
        except QCPortError as exc:
            row.update(status="Failed", p_value=math.nan, error=str(exc))
        rows.append(row)
    finite = [(row["r"], row["p_value"]) for row in rows if math.isfinite(row["p_value"])]
    for (ra, pa), (rb, pb) in zip(finite, finite[1:]):
        if pb > pa + 1e-6:
            warnings.append(f"p(r) increased from {pa:.12g} at r={ra:.12g} to {pb:.12g} at r={rb:.12g}")
    table = {"schema_version": SCHEMA_VERSION, "assets": list(s.asset_names),
             "rho1_label": cfg.rho1.label, "rho2_label": cfg.rho2.label, "route": cfg.route,
             "rows": rows, "warnings": warnings}
    code = EXIT_OK if any(row["status"] == OPTIMAL for row in rows) else EXIT_INFEASIBLE
    return table, code


def frontier_csv(table: dict) -> str:
    head = ["r", "status", "p_value"] + [f"w_{a}" for a in table["assets"]]
    lines = [",".join(head)]
    for row in table["rows"]:
        ws = row.get("weights") or [math.nan] * len(table["assets"])
        cells = [row["r"], row["status"], row["p_value"], *ws]
        lines.append(",".join(c if isinstance(c, str) else f"{c:.{SIG_DIGITS}g}" for c in cells))
    return "\n".join(lines)


# --------------------------------------------------------------------------- verify

def _check(name, passed, **detail):
    return {"name": name, "passed": bool(passed), **detail}


def _penalty_checks(rho: RiskMeasure, s: ScenarioSet, alpha_fn, rng, samples: int) -> list:
    """Closed-form penalty against the acceptance-set oracle (and generic root-finding for CE)."""
    k = min(s.m, 6)
    p = s.probs[:k] / s.probs[:k].sum()
    small = ScenarioSet(p, s.returns[:k], s.asset_names)
    out = []
    worst_lo, worst_hi, worst_gen = 0.0, 0.0, 0.0
    for _ in range(samples):
        if rho.is_convex:
            V = rng.uniform(0.5, 1.5, k)
            V = V / (p @ V)
            if rho.kind == "expected_loss":
                V = np.ones(k)
            if rho.kind == "avar":
                V = np.minimum(V, 0.999 / rho.param)
        else:
            V = rng.uniform(0.2, 2.0, k)
        t = float(rng.uniform(-1.5, -0.2)) if not rho.is_convex else float(rng.uniform(-1.0, 1.0))
        closed = alpha_fn(rho, small, V, t)
        orc = penalty.alpha_oracle(rho, small, V, t)
        if math.isfinite(closed) and math.isfinite(orc):
            worst_lo = max(worst_lo, orc - closed)
            worst_hi = max(worst_hi, closed - orc)
        elif closed != orc:
            worst_lo = math.inf
        if rho.kind == CERTAINTY_EQUIVALENT and math.isfinite(closed):
            gen = penalty.alpha_generic_ce(rho.loss, small, V, t)
            worst_gen = max(worst_gen, abs(gen - closed))
    out.append(_check(f"penalty oracle bracket {rho.label}", worst_lo <= 1e-6 and worst_hi <= 1e-3,
                      oracle_above_closed=worst_lo, closed_above_oracle=worst_hi,
                      tolerance=[-1e-6, 1e-3]))
    if rho.kind == CERTAINTY_EQUIVALENT:
        out.append(_check(f"generic penalty {rho.label}", worst_gen <= 1e-8, max_abs_diff=worst_gen,
                          tolerance=1e-8))
    if rho.is_convex:
        worst = 0.0
        for _ in range(samples):
            V = rng.uniform(0.5, 1.5, k)
            V = V / (p @ V)
            if rho.kind == "expected_loss":
                V = np.ones(k)
            if rho.kind == "avar":
                V = np.minimum(V, 0.999 / rho.param)
                V = V / (p @ V)
            t = float(rng.uniform(-2, 2))
            a_t, a_0 = alpha_fn(rho, small, V, t), alpha_fn(rho, small, V, 0.0)
            worst = max(worst, abs((a_t - a_0) - t * (p @ V)))
        out.append(_check(f"convex identity {rho.label}", worst <= 1e-10, max_abs_diff=worst,
                          tolerance=1e-10))
    return out


def cmd_verify(cfg: RunConfig, alpha_fn=None, samples: int = 10) -> tuple[dict, int]:
    """Oracle vs solver route, KKT residuals and penalty cross-checks on the configured instance."""
    alpha_fn = alpha_fn or penalty.alpha
    s = cfg.scenarios()
    rng = np.random.default_rng(cfg.seed)
    checks = []
    try:
        rep = solve_config(cfg, s)
    except InfeasibleProblem as exc:
        return {"schema_version": SCHEMA_VERSION, "checks": [], "error": str(exc)}, EXIT_INFEASIBLE
    orc = solve_primal(cfg.rho1, cfg.rho2, s, cfg.r)
    p = orc.p_value
    g1, g2 = rep["g1"], rep["g2"]
    w = np.array(list(rep["portfolio"].values()))
    checks.append(_check("portfolio in simplex", abs(w.sum() - 1) <= 1e-6 and w.min() >= -1e-6,
                         sum=w.sum(), min=w.min()))
    checks.append(_check("constraint g2(w) <= r", g2 <= cfg.r + 1e-6, g2=g2, r=cfg.r))
    if rep["route"] == "dual":
        d = rep["d_value"]
        checks.append(_check("oracle vs dual", abs(d - p) <= 1e-4, oracle=p, dual=d, diff=d - p,
                             tolerance=1e-4))
        checks.append(_check("g1(w) vs oracle", g1 <= p + 1e-4, g1=g1, oracle=p, tolerance=1e-4))
        res = rep["residuals"]
        checks.append(_check("KKT residuals", abs(res["sum_w_minus_1"]) <= 1e-6
                             and res["ineq_violation"] <= 1e-6, **res))
    elif rep["route"] == "bisect":
        b = rep["bisection"]
        checks.append(_check("bisection vs oracle", g1 - p <= cfg.epsilon + 1e-4, g1=g1, oracle=p,
                             diff=g1 - p, tolerance=cfg.epsilon + 1e-4))
        checks.append(_check("bisection iteration bound", b["K"] <= b["K_bound"], K=b["K"],
                             K_bound=b["K_bound"]))
    for rho in (cfg.rho1, cfg.rho2):
        checks.extend(_penalty_checks(rho, s, alpha_fn, rng, samples))
    ok = all(c["passed"] for c in checks)
    return ({"schema_version": SCHEMA_VERSION, "route": rep["route"], "checks": checks, "passed": ok},
            EXIT_OK if ok else EXIT_BREACH)
