"""Brute-force ground truth on small instances.

Everything here is computed by direct enumeration or clip-and-renormalise
arithmetic, deliberately without reusing the fast paths in :mod:`ustat` or the
marginal classes in :mod:`distributions`, so the two can check each other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .distributions import DiscreteAtomic, PiecewiseUniform
from .errors import EnumerationBudgetError, SpecError
from .truncation import TruncationRule, impossibility_adversary
from .ustat import variance_upper_bound

MAX_SUPPORT = 8
ENUMERATION_BUDGET = 10**6


@dataclass(frozen=True)
class EnumerableLaw:
    """At most eight atoms in R^d with positive probabilities summing to 1."""

    atoms: tuple[tuple[float, ...], ...]
    probs: tuple[float, ...]
    name: str = ""

    def __post_init__(self):
        pts = np.asarray(self.atoms, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        p = np.asarray(self.probs, dtype=float).ravel()
        if pts.shape[0] != p.size or p.size == 0:
            raise SpecError("need one probability per atom")
        if p.size > MAX_SUPPORT:
            raise SpecError(f"support size {p.size} exceeds {MAX_SUPPORT}")
        if np.any(p <= 0) or abs(math.fsum(p) - 1.0) > 1e-12:
            raise SpecError("probabilities must be positive and sum to 1")
        object.__setattr__(self, "atoms", tuple(tuple(float(x) for x in row) for row in pts))
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    @classmethod
    def from_spec(cls, spec: DiscreteAtomic, name: str = "") -> "EnumerableLaw":
        keep = [i for i, w in enumerate(spec.weights) if w > 0]
        return cls(tuple(spec.atoms[i] for i in keep), tuple(spec.weights[i] for i in keep), name)

    @property
    def support_size(self) -> int:
        return len(self.probs)

    @property
    def dimension(self) -> int:
        return len(self.atoms[0])

    @property
    def points(self) -> np.ndarray:
        return np.array(self.atoms)

    def mean(self) -> np.ndarray:
        pts = self.points
        return np.array([math.fsum(p * x for p, x in zip(self.probs, pts[:, k])) for k in range(self.dimension)])

    def covariance(self) -> np.ndarray:
        y = self.points - self.mean()
        return (y * np.asarray(self.probs)[:, None]).T @ y


def exact_F_moments(law: EnumerableLaw, n: int, budget: int = ENUMERATION_BUDGET) -> tuple[float, float]:
    """Exact mean and variance of the pairwise inner-product average over n draws.

    Enumerates all ``support_size ** n`` outcome tuples with product weights
    and evaluates the U-statistic from its definition, pair by pair.
    """
    if n < 2:
        raise SpecError("n must be at least 2")
    k = law.support_size
    if k**n > budget:
        raise EnumerationBudgetError(f"{k}^{n} = {k**n} outcome tuples exceed the budget of {budget}")
    pts = law.points
    gram = pts @ pts.T
    probs = law.probs
    pairs = list(itertools.combinations(range(n), 2))
    values, weights = [], []
    for tup in itertools.product(range(k), repeat=n):
        values.append(math.fsum(gram[tup[i], tup[j]] for i, j in pairs) / len(pairs))
        weights.append(math.prod(probs[t] for t in tup))
    mean = math.fsum(w * f for w, f in zip(weights, values))
    var = math.fsum(w * (f - mean) ** 2 for w, f in zip(weights, values))
    return mean, var


def _clip_segments(segments, densities, keep):
    out_s, out_r = [], []
    for (lo, hi), rho in zip(segments, densities):
        for a, b in keep:
            l, h = max(lo, a), min(hi, b)
            if h > l and rho > 0:
                out_s.append((l, h))
                out_r.append(rho)
    return out_s, out_r


def exact_truncated_law(law, rule: TruncationRule):
    """The conditional law P(. | S), exactly.

    Atomic laws keep the atoms the rule accepts and renormalise. A 1-d
    piecewise-uniform law needs a rule that records its kept intervals; the
    segments are clipped to them and the densities rescaled.
    """
    if isinstance(law, DiscreteAtomic):
        law = EnumerableLaw.from_spec(law)
    if isinstance(law, EnumerableLaw):
        mask = rule.contains(law.points)
        mass = math.fsum(p for p, m in zip(law.probs, mask) if m)
        if mass <= 0:
            raise SpecError("the rule removes all of the mass")
        atoms = tuple(a for a, m in zip(law.atoms, mask) if m)
        return EnumerableLaw(atoms, tuple(p / mass for p, m in zip(law.probs, mask) if m), law.name)
    if isinstance(law, PiecewiseUniform):
        if law.dimension != 1:
            raise SpecError("exact truncation of piecewise laws is one-dimensional only")
        if rule.intervals is None:
            raise SpecError("rule does not record its kept set; cannot clip segments exactly")
        keep = list(rule.intervals)
        if rule.direction is not None:
            v = float(rule.direction[0])
            if v == 0:
                raise SpecError("rule direction must be nonzero")
            keep = [tuple(sorted((a / v, b / v))) for a, b in keep]
        segs, dens = _clip_segments(law.segments, law.densities, keep)
        mass = math.fsum(r * (h - l) for (l, h), r in zip(segs, dens))
        if mass <= 0:
            raise SpecError("the rule removes all of the mass")
        return PiecewiseUniform(tuple(segs), tuple(r / mass for r in dens))
    raise SpecError(f"no exact truncation for {type(law).__name__}")


def exact_median_1d(law) -> float:
    """Smallest t with P(X <= t) >= 1/2 (the leftmost median)."""
    if isinstance(law, DiscreteAtomic):
        law = EnumerableLaw.from_spec(law)
    if isinstance(law, EnumerableLaw):
        if law.dimension != 1:
            raise SpecError("law must be one-dimensional")
        acc = 0.0
        for p, x in sorted(zip(law.probs, (a[0] for a in law.atoms)), key=lambda t: t[1]):
            acc += p
            if acc >= 0.5 - 1e-12:
                return x
        return max(a[0] for a in law.atoms)
    if isinstance(law, PiecewiseUniform):
        if law.dimension != 1:
            raise SpecError("law must be one-dimensional")
        acc = 0.0
        for (lo, hi), rho in zip(law.segments, law.densities):
            m = rho * (hi - lo)
            if m > 0 and acc + m >= 0.5 - 1e-12:
                return lo + max(0.5 - acc, 0.0) / rho
            acc += m
        return law.segments[-1][1]
    raise SpecError(f"no exact median for {type(law).__name__}")


def oracle_grid() -> list[EnumerableLaw]:
    """Small laws covering symmetric, skewed, degenerate and multivariate cases."""
    h1, _ = impossibility_adversary(0.04, 2.0)
    return [
        EnumerableLaw(((-1.0,), (1.0,)), (0.5, 0.5), "rademacher"),
        EnumerableLaw(((1.0, 0.0),), (1.0,), "point-mass-e0"),
        EnumerableLaw.from_spec(h1.base, "impossibility-eps0.04-p2"),
        EnumerableLaw(((-1.0,), (0.0,), (0.5,), (2.0,), (3.0,)), (0.1, 0.3, 0.25, 0.2, 0.15), "skewed-5"),
        EnumerableLaw(((0.0, 0.0), (1.0, 0.5), (-0.5, 2.0)), (0.5, 0.3, 0.2), "planar-3"),
        EnumerableLaw(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (-1.0, -1.0, 0.5)),
                      (0.4, 0.3, 0.2, 0.1), "space-4"),
        EnumerableLaw(tuple((0.3 + math.cos(k * math.pi / 4), -0.2 + math.sin(k * math.pi / 4)) for k in range(8)),
                      tuple([0.2, 0.05, 0.1, 0.15, 0.1, 0.05, 0.25, 0.1]), "octagon-8"),
    ]


@dataclass(frozen=True)
class OracleRow:
    law: str
    n: int
    exact_mean: float
    norm_sq: float
    mean_ok: bool
    exact_var: float
    var_bound: float
    var_ok: bool

    @property
    def ok(self) -> bool:
        return self.mean_ok and self.var_ok


def verify_grid(laws=None, ns=(2, 3, 4), mean_tol: float = 1e-12) -> list[OracleRow]:
    """Exact unbiasedness and the variance bound on every (law, n) pair."""
    rows = []
    for law in oracle_grid() if laws is None else laws:
        mu = law.mean()
        sigma = law.covariance()
        quad = max(float(mu @ sigma @ mu), 0.0)
        tr_sq = float(np.sum(sigma * sigma.T))
        norm_sq = math.fsum(mu * mu)
        for n in ns:
            mean, var = exact_F_moments(law, n)
            bound = variance_upper_bound(quad, tr_sq, n)
            rows.append(OracleRow(law.name, n, mean, norm_sq, abs(mean - norm_sq) <= mean_tol,
                                  var, bound, var <= bound + 1e-12))
    return rows
