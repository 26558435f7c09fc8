"""Finite probability model: scenario probabilities, gross returns, portfolios."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, ParseError, ValidationError

PROB_TOL = 1e-12
WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class ScenarioSet:
    """m equally-or-unequally weighted scenarios of gross returns for n assets.

    ``returns[k, i]`` is the payoff of one unit invested in asset ``i`` in
    scenario ``k``, as a multiple of its initial price.
    """

    probs: np.ndarray
    returns: np.ndarray
    asset_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).reshape(-1)
        returns = np.array(self.returns, dtype=float)
        if returns.ndim == 1:
            returns = returns.reshape(1, -1) if probs.size == 1 else returns.reshape(-1, 1)
        if returns.ndim != 2:
            raise ValidationError("returns must be an m x n matrix")
        m, n = returns.shape
        if m < 1 or n < 1:
            raise ValidationError("need at least one scenario and one asset")
        if probs.size != m:
            raise DimensionMismatch(f"{probs.size} probabilities for {m} scenarios")
        if not np.all(np.isfinite(returns)) or not np.all(np.isfinite(probs)):
            raise ValidationError("non-finite input")
        if np.any(probs <= 0):
            raise ValidationError("scenario probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValidationError(f"probabilities sum to {probs.sum()!r}, not 1")
        if np.any(returns < 0):
            raise ValidationError("gross returns must be nonnegative")
        names = tuple(self.asset_names) or tuple(f"A{i + 1}" for i in range(n))
        if len(names) != n:
            raise DimensionMismatch(f"{len(names)} asset names for {n} assets")
        if len(set(names)) != n:
            raise ValidationError("asset names must be pairwise distinct")
        probs.setflags(write=False)
        returns.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "asset_names", names)

    @property
    def m(self) -> int:
        return self.returns.shape[0]

    @property
    def n(self) -> int:
        return self.returns.shape[1]

    def expect(self, values) -> float:
        """E[values] under the scenario probabilities."""
        return float(self.probs @ np.asarray(values, dtype=float))

    def mean_returns(self) -> np.ndarray:
        return self.probs @ self.returns

    def aggregate_return(self) -> np.ndarray:
        """Payoff of holding one unit of every asset, i.e. the all-ones coefficient vector."""
        return self.returns.sum(axis=1)


@dataclass(frozen=True)
class Portfolio:
    """Long-only fully-invested weight vector."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size < 1:
            raise ValidationError("empty portfolio")
        if np.any(w < -WEIGHT_TOL):
            raise ValidationError(f"negative weight {w.min()!r}")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"weights sum to {w.sum()!r}")
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_raw(cls, raw: Sequence[float]) -> "Portfolio":
        """Clamp negatives to zero and renormalize, e.g. for solver multipliers."""
        w = np.clip(np.asarray(raw, dtype=float), 0.0, None)
        total = w.sum()
        if not np.isfinite(total) or total <= 0:
            raise ValidationError("cannot normalize a zero weight vector")
        return cls(w / total)

    @classmethod
    def unit(cls, n: int, i: int) -> "Portfolio":
        w = np.zeros(n)
        w[i] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls, n: int) -> "Portfolio":
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.weights.size


def _coefficients(w) -> np.ndarray:
    if isinstance(w, Portfolio):
        return w.weights
    return np.asarray(w, dtype=float)


def portfolio_return(s: ScenarioSet, w) -> np.ndarray:
    """Scenario payoffs of ``w``; ``w`` may be a Portfolio or any coefficient vector."""
    coef = _coefficients(w)
    if coef.shape[-1] != s.n:
        raise DimensionMismatch(f"portfolio has {coef.shape[-1]} weights, scenarios have {s.n} assets")
    return s.returns @ coef if coef.ndim == 1 else coef @ s.returns.T


def load_scenarios(path, format: str = "csv") -> ScenarioSet:
    """Read a scenario CSV: header row, optional leading ``prob`` column, one row per scenario."""
    if format != "csv":
        raise ParseError(f"unsupported scenario format {format!r}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    has_prob = header[0].lower() == "prob"
    names = header[1:] if has_prob else header
    if not names:
        raise ParseError(f"{path}: no asset columns")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
    if not data:
        raise ParseError(f"{path}: no scenario rows")
    arr = np.array(data)
    if has_prob:
        probs, returns = arr[:, 0], arr[:, 1:]
        if np.any(probs <= 0):
            raise ValidationError(f"{path}: scenario probabilities must be strictly positive")
        total = probs.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"{path}: probabilities sum to {total!r}")
        probs = probs / total
    else:
        returns = arr
        probs = np.full(arr.shape[0], 1.0 / arr.shape[0])
    return ScenarioSet(probs, returns, tuple(names))


def save_scenarios(s: ScenarioSet, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prob", *s.asset_names])
        for p, row in zip(s.probs, s.returns):
            writer.writerow([repr(float(p)), *(repr(float(x)) for x in row)])


def generate_synthetic(m: int, n: int, seed: int) -> ScenarioSet:
    """Lognormal gross returns with one common factor and uniform probabilities.

    Asset volatilities are spread over [0.05, 0.30]; log-returns are mean zero,
    so riskier assets carry a higher expected gross return exp(sigma^2 / 2).
    """
    if m < 1 or n < 1:
        raise ValidationError("m and n must be positive")
    rng = np.random.default_rng(seed)
    vols = np.sort(rng.uniform(0.05, 0.30, size=n))
    loading = 0.5
    factor = rng.standard_normal((m, 1))
    idio = rng.standard_normal((m, n))
    z = loading * factor + np.sqrt(1.0 - loading**2) * idio
    returns = np.exp(vols * z)
    return ScenarioSet(np.full(m, 1.0 / m), returns, tuple(f"A{i + 1}" for i in range(n)))
