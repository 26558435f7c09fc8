"""Risk measure catalog: primal evaluation and convexity classification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatch, PropertyViolation, RootBracketFailure, ValidationError
from .scenarios import ScenarioSet

EXPECTED_LOSS = "expected_loss"
AVAR = "avar"
ENTROPIC = "entropic"
CERTAINTY_EQUIVALENT = "certainty_equivalent"

CONVEX_KINDS = frozenset({EXPECTED_LOSS, AVAR, ENTROPIC})


# --------------------------------------------------------------------------- losses

def _quadratic_ell(y):
    y = np.asarray(y, dtype=float)
    return np.where(y >= -1.0, 0.5 * y * y + y, -0.5)


def _quadratic_dell(y):
    return np.maximum(np.asarray(y, dtype=float) + 1.0, 0.0)


def _quadratic_h(z):
    return np.asarray(z, dtype=float) - 1.0


def _quadratic_inverse(v):
    v = np.asarray(v, dtype=float)
    with np.errstate(invalid="ignore"):
        out = -1.0 + np.sqrt(np.maximum(1.0 + 2.0 * v, 0.0))
    # values below -1/2 by round-off only still map to the floor -1
    return np.where(v < -0.5 - 1e-12, -np.inf, out)


def _log_ell(y):
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(y < 0, -np.log(np.where(y < 0, -y, 1.0)), np.inf)


def _log_dell(y):
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(y < 0, -1.0 / np.where(y < 0, y, -1.0), np.inf)


def _log_h(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(z > 0, -1.0 / np.where(z > 0, z, 1.0), -np.inf)


def _log_inverse(v):
    v = np.asarray(v, dtype=float)
    return np.where(np.isposinf(v), np.inf, -np.exp(-v))


@dataclass(frozen=True)
class LossFunction:
    """Convex increasing loss with derivative ``dell`` and ``h``, the
    right-continuous inverse of ``dell``.  ``domain`` bounds where ell is finite.

    ``inverse`` is the closed-form left-continuous inverse when one is known;
    otherwise it is computed by bracketing bisection.
    """

    kind: str
    ell: Callable = field(repr=False, compare=False)
    dell: Callable = field(repr=False, compare=False)
    h: Callable = field(repr=False, compare=False)
    domain: tuple = (-np.inf, np.inf)
    inverse: Optional[Callable] = field(default=None, repr=False, compare=False)
    name: str = ""

    @classmethod
    def quadratic(cls) -> "LossFunction":
        return cls("quadratic", _quadratic_ell, _quadratic_dell, _quadratic_h,
                   (-np.inf, np.inf), _quadratic_inverse, "quadratic")

    @classmethod
    def logarithmic(cls) -> "LossFunction":
        return cls("logarithmic", _log_ell, _log_dell, _log_h, (-np.inf, 0.0),
                   _log_inverse, "logarithmic")

    @classmethod
    def custom(cls, ell, dell, h, domain=(-np.inf, np.inf), name="custom") -> "LossFunction":
        return cls("custom", ell, dell, h, tuple(domain), None, name)

    def ell_plus(self, t: float) -> float:
        """Right-continuous version of ell."""
        lo, hi = self.domain
        if t >= hi:
            return np.inf
        return float(self.ell(t))

    def ell_inverse(self, v):
        """inf{y : ell(y) >= v}, elementwise."""
        if self.inverse is not None:
            return self.inverse(v)
        return np.vectorize(self._bisect_inverse, otypes=[float])(v)

    def _bisect_inverse(self, v: float) -> float:
        if np.isposinf(v):
            return np.inf
        lo, hi = self.domain
        a = lo if np.isfinite(lo) else -1.0
        b = np.nextafter(hi, -np.inf) if np.isfinite(hi) else 1.0
        if np.isfinite(hi) and b <= a:
            a = hi - 1.0
        step = 1.0
        for _ in range(1000):
            if float(self.ell(b)) >= v:
                break
            if np.isfinite(hi):
                b = hi - (hi - b) / 2.0
            else:
                b += step
                step *= 2.0
        else:
            raise RootBracketFailure(f"ell never reaches {v!r}")
        step = 1.0
        for _ in range(1000):
            if float(self.ell(a)) < v:
                break
            if np.isfinite(lo) and a <= lo:
                return float(lo)
            a -= step
            step *= 2.0
        else:
            return -np.inf
        for _ in range(200):
            mid = 0.5 * (a + b)
            if float(self.ell(mid)) >= v:
                b = mid
            else:
                a = mid
            if b - a <= 1e-13 * max(1.0, abs(b)):
                break
        return float(b)


def check_loss(loss: LossFunction, trials: int = 1000, seed: int = 0) -> dict:
    """Spot-check convexity, monotonicity and h(ell'(y)) = y on the interior of the domain."""
    rng = np.random.default_rng(seed)
    lo, hi = loss.domain
    a = lo if np.isfinite(lo) else -5.0
    b = hi if np.isfinite(hi) else 5.0
    pts = rng.uniform(a, b, size=(trials, 2))
    pts = pts[(pts > lo).all(axis=1) & (pts < hi).all(axis=1)]
    x, y = pts[:, 0], pts[:, 1]
    lam = rng.uniform(0, 1, size=x.size)
    mid = loss.ell(lam * x + (1 - lam) * y)
    convex_bad = int(np.sum(mid > lam * loss.ell(x) + (1 - lam) * loss.ell(y) + 1e-9 * (1 + np.abs(mid))))
    lo_pt, hi_pt = np.minimum(x, y), np.maximum(x, y)
    mono_bad = int(np.sum(loss.ell(lo_pt) > loss.ell(hi_pt) + 1e-12))
    d = loss.dell(x)
    strict = d > 0
    inv_bad = int(np.sum(np.abs(loss.h(d[strict]) - x[strict]) > 1e-8 * (1 + np.abs(x[strict]))))
    return {"convexity": convex_bad, "monotonicity": mono_bad, "inverse_derivative": inv_bad}


# --------------------------------------------------------------------------- measures

@dataclass(frozen=True)
class RiskMeasure:
    """Tagged description of a risk measure instance.

    ``param`` is the AVaR level lambda in (0, 1] or the entropic risk aversion theta > 0.
    """

    kind: str
    param: Optional[float] = None
    loss: Optional[LossFunction] = None
    label: str = ""

    def __post_init__(self):
        if self.kind == AVAR:
            if self.param is None or not 0 < self.param <= 1:
                raise ValidationError(f"AVaR level must lie in (0, 1], got {self.param!r}")
        elif self.kind == ENTROPIC:
            if self.param is None or not self.param > 0:
                raise ValidationError(f"entropic theta must be positive, got {self.param!r}")
        elif self.kind == CERTAINTY_EQUIVALENT:
            if self.loss is None:
                raise ValidationError("certainty equivalent needs a loss function")
        elif self.kind != EXPECTED_LOSS:
            raise ValidationError(f"unknown risk measure kind {self.kind!r}")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        if self.kind == AVAR:
            return f"AVaR({self.param:g})"
        if self.kind == ENTROPIC:
            return f"Entropic({self.param:g})"
        if self.kind == CERTAINTY_EQUIVALENT:
            return f"CE[{self.loss.name or self.loss.kind}]"
        return "ExpectedLoss"

    @classmethod
    def expected_loss(cls) -> "RiskMeasure":
        return cls(EXPECTED_LOSS)

    @classmethod
    def avar(cls, lam: float) -> "RiskMeasure":
        return cls(AVAR, float(lam))

    @classmethod
    def entropic(cls, theta: float) -> "RiskMeasure":
        return cls(ENTROPIC, float(theta))

    @classmethod
    def certainty_equivalent(cls, loss: LossFunction) -> "RiskMeasure":
        return cls(CERTAINTY_EQUIVALENT, loss=loss)

    @classmethod
    def quadratic_ce(cls) -> "RiskMeasure":
        return cls.certainty_equivalent(LossFunction.quadratic())

    @classmethod
    def logarithmic_ce(cls) -> "RiskMeasure":
        return cls.certainty_equivalent(LossFunction.logarithmic())

    @property
    def is_convex(self) -> bool:
        """Convex (and translative) kinds go to the direct dual route."""
        return self.kind in CONVEX_KINDS

    @property
    def loss_kind(self) -> Optional[str]:
        return self.loss.kind if self.loss is not None else None

    def to_dict(self) -> dict:
        if self.kind == AVAR:
            return {"kind": AVAR, "lambda": self.param}
        if self.kind == ENTROPIC:
            return {"kind": ENTROPIC, "theta": self.param}
        if self.kind == CERTAINTY_EQUIVALENT:
            return {"kind": CERTAINTY_EQUIVALENT, "loss": self.loss.kind}
        return {"kind": EXPECTED_LOSS}

    @classmethod
    def from_dict(cls, d: dict) -> "RiskMeasure":
        kind = d.get("kind")
        label = d.get("label", "")
        if kind == EXPECTED_LOSS:
            return cls(EXPECTED_LOSS, label=label)
        if kind == AVAR:
            return cls(AVAR, float(d["lambda"]), label=label)
        if kind == ENTROPIC:
            return cls(ENTROPIC, float(d["theta"]), label=label)
        if kind == CERTAINTY_EQUIVALENT:
            loss = d.get("loss")
            if loss == "quadratic":
                return cls(CERTAINTY_EQUIVALENT, loss=LossFunction.quadratic(), label=label)
            if loss == "logarithmic":
                return cls(CERTAINTY_EQUIVALENT, loss=LossFunction.logarithmic(), label=label)
            raise ValidationError(f"loss {loss!r} cannot be configured from JSON")
        raise ValidationError(f"unknown risk measure kind {kind!r}")


def _avar(losses: np.ndarray, probs: np.ndarray, lam: float) -> np.ndarray:
    # min_z z + E[(L - z)^+] / lam is attained at a scenario loss value
    order = np.argsort(-losses, axis=-1, kind="stable")
    L = np.take_along_axis(losses, order, axis=-1)
    p = probs[order]
    cum_p = np.cumsum(p, axis=-1)
    cum_pl = np.cumsum(p * L, axis=-1)
    vals = L + (cum_pl - cum_p * L) / lam
    return vals.min(axis=-1)


def evaluate(spec: RiskMeasure, s: ScenarioSet, Y):
    """rho(Y) for a payoff vector (or a stack of them along the last axis)."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape[-1] != s.m:
        raise DimensionMismatch(f"payoff has {Y.shape[-1]} scenarios, model has {s.m}")
    p = s.probs
    if spec.kind == EXPECTED_LOSS:
        out = -(Y @ p)
    elif spec.kind == ENTROPIC:
        theta = spec.param
        out = logsumexp(-theta * Y, b=p, axis=-1) / theta
    elif spec.kind == AVAR:
        out = _avar(-Y, p, spec.param)
    elif spec.loss.kind == "quadratic":
        # l^-1(E[l(-Y)]) simplifies to -1 + ||(1 - Y)^+||_2 without cancellation
        short = np.maximum(1.0 - Y, 0.0)
        out = -1.0 + np.sqrt((short * short) @ p)
    else:
        loss = spec.loss
        with np.errstate(invalid="ignore"):
            v = loss.ell(-Y) @ p
        v = np.where(np.isnan(v), np.inf, v)
        out = np.where(np.isposinf(v), np.inf, loss.ell_inverse(np.where(np.isposinf(v), 0.0, v)))
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out)


# --------------------------------------------------------------------------- properties

@dataclass
class PropertyReport:
    measure: str
    trials: int
    checked: tuple
    violations: dict
    witnesses: dict

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def raise_if_failed(self) -> None:
        for name, count in self.violations.items():
            if count:
                raise PropertyViolation(f"{self.measure}: {count} {name} violations",
                                        self.witnesses.get(name))


def _sample_payoffs(spec: RiskMeasure, rng, size):
    if spec.kind == CERTAINTY_EQUIVALENT and spec.loss_kind == "logarithmic":
        return np.exp(rng.normal(0.0, 0.5, size=size))
    if spec.kind == CERTAINTY_EQUIVALENT and spec.loss_kind == "quadratic":
        return 1.0 + rng.normal(0.0, 0.6, size=size)
    return rng.normal(0.0, 1.0, size=size)


def monotone_rescale_check(spec: RiskMeasure, s: ScenarioSet, trials: int = 1000, seed: int = 0,
                           properties=None, tol: float = 1e-9) -> PropertyReport:
    """Randomized check of the risk measure axioms.

    Monotonicity and quasiconvexity are checked for every kind; convexity and
    translativity only for convex-classified kinds unless ``properties`` says
    otherwise.
    """
    if properties is None:
        properties = ("monotonicity", "quasiconvexity")
        if spec.is_convex:
            properties += ("convexity", "translativity")
    rng = np.random.default_rng(seed)
    m = s.m
    Y1 = _sample_payoffs(spec, rng, (trials, m))
    bump = np.abs(rng.normal(0.0, 0.5, (trials, m))) * (rng.uniform(size=(trials, m)) < 0.7)
    Y2 = Y1 + bump
    Y3 = _sample_payoffs(spec, rng, (trials, m))
    lam = rng.uniform(0.0, 1.0, size=(trials, 1))
    c = rng.normal(0.0, 1.0, size=trials)

    violations, witnesses = {}, {}

    def record(name, bad, payload):
        idx = np.flatnonzero(bad)
        violations[name] = int(idx.size)
        if idx.size:
            k = idx[0]
            witnesses[name] = {key: np.asarray(val)[k].tolist() for key, val in payload.items()}

    r1 = evaluate(spec, s, Y1)
    if "monotonicity" in properties:
        r2 = evaluate(spec, s, Y2)
        record("monotonicity", r2 > r1 + tol * (1 + np.abs(r1)), {"Y1": Y1, "Y2": Y2})
    r3 = evaluate(spec, s, Y3)
    mix = lam * Y1 + (1 - lam) * Y3
    rmix = evaluate(spec, s, mix)
    if "quasiconvexity" in properties:
        bound = np.maximum(r1, r3)
        with np.errstate(invalid="ignore"):
            bad = rmix > bound + tol * (1 + np.abs(bound))
        record("quasiconvexity", bad, {"Y1": Y1, "Y2": Y3, "lam": lam[:, 0]})
    if "convexity" in properties:
        with np.errstate(invalid="ignore"):
            bound = lam[:, 0] * r1 + (1 - lam[:, 0]) * r3
        bound = np.where(np.isnan(bound), np.inf, bound)
        with np.errstate(invalid="ignore"):
            bad = rmix > bound + tol * (1 + np.abs(bound))
        record("convexity", bad, {"Y1": Y1, "Y2": Y3, "lam": lam[:, 0]})
    if "translativity" in properties:
        shifted = evaluate(spec, s, Y1 + c[:, None])
        with np.errstate(invalid="ignore"):
            diff = np.abs(shifted - (r1 - c))
        bad = ~(diff <= tol * (1 + np.abs(r1)))
        record("translativity", bad, {"Y": Y1, "c": c})
    return PropertyReport(spec.label, trials, tuple(properties), violations, witnesses)
