"""Truncation sets, rejection sampling from P(. | S), and adversarial constructions.

A :class:`TruncationRule` is a vectorized membership predicate. Rules built
from slabs along a single direction also record the kept set as intervals of
``<x, direction>``, which lets the oracle clip continuous laws exactly.

The sharpness construction's gap parameter is called ``alpha_gap`` here to
keep it apart from the signal level ``alpha`` used by the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distributions import (
    DiscreteAtomic,
    DistributionSpec,
    IsotropicGaussian,
    DiagonalGaussian,
    PiecewiseUniform,
    SampleBatch,
    _rng_trace,
    spec_from_dict,
)
from .errors import SamplingError, SpecError

Predicate = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TruncationRule:
    """Acceptance set S with its declared bound on the hidden mass P(S^c).

    ``predicate`` maps an (m, d) array to a boolean mask of length m. When
    ``direction`` and ``intervals`` are set, S is exactly
    ``{x : <x, direction> in union of closed intervals}`` up to endpoints;
    ``intervals == ((-inf, inf),)`` without a direction is the whole space.
    ``severe`` allows ``declared_epsilon`` beyond 1/2, for constructions that
    deliberately leave the standing assumption.
    """

    predicate: Predicate
    declared_epsilon: float
    description: str = ""
    direction: np.ndarray | None = field(default=None, compare=False)
    intervals: tuple[tuple[float, float], ...] | None = None
    severe: bool = False

    def __post_init__(self):
        eps = float(self.declared_epsilon)
        upper = 1.0 if self.severe else 0.5
        if not (0.0 <= eps <= upper) or (self.severe and eps >= 1.0):
            raise SpecError(f"declared_epsilon must lie in [0, {upper}] (got {eps})")
        object.__setattr__(self, "declared_epsilon", eps)
        if self.direction is not None:
            v = np.asarray(self.direction, dtype=float).ravel()
            v.setflags(write=False)
            object.__setattr__(self, "direction", v)

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.predicate(x), dtype=bool)


def full_space(description: str = "full space") -> TruncationRule:
    return TruncationRule(lambda x: np.ones(x.shape[0], dtype=bool), 0.0, description,
                          intervals=((-math.inf, math.inf),))


def slab_rule(direction, intervals, epsilon: float, description: str = "", severe: bool = False) -> TruncationRule:
    """Keep x iff <x, direction> falls in one of the closed ``intervals``."""
    v = np.asarray(direction, dtype=float).ravel()
    ivs = tuple((float(lo), float(hi)) for lo, hi in intervals)

    def predicate(x):
        z = x @ v
        keep = np.zeros(z.shape[0], dtype=bool)
        for lo, hi in ivs:
            keep |= (z >= lo) & (z <= hi)
        return keep

    return TruncationRule(predicate, epsilon, description, v, ivs, severe)


@dataclass(frozen=True)
class AdversaryInstance:
    """A law P together with a truncation set S and exact bookkeeping where known."""

    base: DistributionSpec
    rule: TruncationRule
    exact_truncated_mean: np.ndarray | None = field(default=None, compare=False)
    exact_survival_mass: float | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = self.exact_survival_mass
        if m is not None and m < 1.0 - self.rule.declared_epsilon - 1e-12:
            raise SpecError(
                f"survival mass {m} is below 1 - declared_epsilon = {1 - self.rule.declared_epsilon}"
            )

    @property
    def epsilon(self) -> float:
        return self.rule.declared_epsilon

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise SpecError("instances with user predicates cannot be serialized")
        return {"adversary": self.kind, **self.params}

    def to_json(self) -> str:
        import json

        return json.dumps(self.to_dict(), sort_keys=True)


def truncated_sampler(instance: AdversaryInstance, n: int, rng: np.random.Generator) -> SampleBatch:
    """Draw ``n`` rows from P(. | S) by rejection from the base law.

    Raises :class:`SamplingError` once more than ``10 n / (1 - eps)`` base
    draws are consumed, which signals a mis-declared epsilon.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    eps = instance.rule.declared_epsilon
    if eps >= 1.0:
        raise ValueError("declared epsilon must be below 1")
    cap = int(math.ceil(10.0 * n / (1.0 - eps)))
    accept_guess = 1.0 - eps
    kept: list[np.ndarray] = []
    have = used = 0
    while have < n:
        budget = cap - used
        if budget <= 0:
            raise SamplingError(
                f"rejection cap of {cap} base draws exceeded with {have}/{n} accepted; "
                f"declared epsilon {eps} looks too small"
            )
        want = int(math.ceil((n - have) / accept_guess * 1.05)) + 16
        m = min(want, budget)
        x = instance.base.draw(m, rng)
        used += m
        x = x[instance.rule.contains(x)]
        kept.append(x)
        have += x.shape[0]
    return SampleBatch(np.concatenate(kept)[:n], _rng_trace(rng))


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------


def impossibility_adversary(epsilon: float, p: float, dimension: int = 1):
    """Two-atom law (1 - eps) delta_0 + eps delta_{eps^(-1/p)} cut at x_0 <= 0.

    Returns ``(h1, h0)``: the truncated alternative instance, whose truncated
    law is exactly the point mass at the origin, and that point mass itself.
    """
    if not (0.0 < epsilon <= 0.5):
        raise SpecError("epsilon must lie in (0, 1/2]")
    if p < 2:
        raise SpecError("p must be at least 2")
    far = np.zeros(dimension)
    far[0] = epsilon ** (-1.0 / p)
    base = DiscreteAtomic((tuple(np.zeros(dimension)), tuple(far)), (1.0 - epsilon, epsilon))
    e0 = np.eye(dimension)[0]
    rule = slab_rule(e0, [(-math.inf, 0.0)], epsilon, f"x_0 <= 0 (impossibility, eps={epsilon}, p={p})")
    h1 = AdversaryInstance(
        base, rule, np.zeros(dimension), 1.0 - epsilon, "impossibility",
        {"epsilon": epsilon, "p": p, "dimension": dimension},
    )
    return h1, DiscreteAtomic.point_mass(np.zeros(dimension))


def sharpness_construction(xi: float, epsilon: float, R: float) -> AdversaryInstance:
    """Median-regular law whose epsilon-truncation pushes the median past R.

    Base: unit density on [-R-eta, -R], [R, R+eta] and [-xi, xi] with
    eta = 1/2 - xi. Kept set: [-R-eta+alpha_gap, -R] U [1, inf) with
    alpha_gap = min(eps - 2 xi, eta).
    """
    if not (0.0 < xi < 0.5):
        raise SpecError("xi must lie in (0, 1/2)")
    if not epsilon > 2.0 * xi:
        raise SpecError("epsilon must exceed 2 xi")
    if not epsilon < 1.0:
        raise SpecError("epsilon must be below 1")
    if not R > 1.0:
        raise SpecError("R must exceed 1")
    eta = 0.5 - xi
    alpha_gap = min(epsilon - 2.0 * xi, eta)
    base = PiecewiseUniform(((-R - eta, -R), (R, R + eta), (-xi, xi)), (1.0, 1.0, 1.0))
    kept = ((-R - eta + alpha_gap, -R), (1.0, math.inf))
    rule = slab_rule([1.0], kept, epsilon, f"S_R (xi={xi}, eps={epsilon}, R={R})", severe=epsilon > 0.5)
    mass = 1.0 - alpha_gap - 2.0 * xi
    left_lo = -R - eta + alpha_gap
    mean = ((-R * -R - left_lo * left_lo) / 2.0 + ((R + eta) ** 2 - R * R) / 2.0) / mass
    return AdversaryInstance(
        base, rule, np.array([mean]), mass, "sharpness",
        {"xi": xi, "epsilon": epsilon, "R": R, "alpha_gap": alpha_gap, "eta": eta},
    )


def _regression_direction(spec: DistributionSpec, v: np.ndarray) -> np.ndarray:
    """E[X - mu | <X - mu, v> = z] = z * b; return b."""
    if isinstance(spec, (IsotropicGaussian, DiagonalGaussian)):
        cv = spec.covariance() @ v
        return cv / float(v @ cv)
    return v


def halfspace_adversary(spec: DistributionSpec, epsilon: float, direction) -> AdversaryInstance:
    """Remove the top epsilon-tail of <X - mu, v>.

    Keeps ``{x : <x - mu, v> <= q}`` with q the exact (1 - eps)-quantile of the
    projection, which is the mean-shifting worst case along ``v``.
    """
    if not (0.0 <= epsilon <= 0.5):
        raise SpecError("epsilon must lie in [0, 1/2]")
    v = np.asarray(direction, dtype=float).ravel()
    marg = spec.projection(v)
    mu = spec.true_mean()
    offset = float(mu @ v)
    q = math.inf if epsilon == 0 else marg.ppf(1.0 - epsilon)
    if math.isinf(q):
        mass = 1.0
    else:
        # a continuous projection keeps exactly 1 - eps; atoms may keep more
        mass = 1.0 - epsilon if marg.continuous else marg.cdf(q)
    removed_partial = marg.upper_partial(q)
    shift = -removed_partial / mass
    tmean = mu + shift * _regression_direction(spec, v)
    rule = slab_rule(v, [(-math.inf, offset + q)], epsilon, f"halfspace <x-mu,v> <= {q!r} (eps={epsilon})")
    return AdversaryInstance(
        spec, rule, tmean, mass, "halfspace",
        {"base": spec.to_dict(), "epsilon": epsilon, "direction": v.tolist(), "quantile": q},
    )


def center_hollowing_adversary(spec: DistributionSpec, epsilon: float, direction=None) -> AdversaryInstance:
    """Remove the slab 0 < <X - mu, v> <= q carrying mass epsilon just above the center.

    ``direction`` defaults to e_0; the projection law along it must be
    available (Gaussian families, or +-e_0 for the embedded families).
    """
    if not (0.0 <= epsilon <= 0.5):
        raise SpecError("epsilon must lie in [0, 1/2]")
    d = spec.dimension
    v = np.eye(d)[0] if direction is None else np.asarray(direction, dtype=float).ravel()
    marg = spec.projection(v)
    mu = spec.true_mean()
    offset = float(mu @ v)
    if epsilon == 0:
        return AdversaryInstance(
            spec, full_space("center hollowing, eps=0"), mu, 1.0, "center-hollowing",
            {"base": spec.to_dict(), "epsilon": 0.0, "direction": v.tolist()},
        )
    c0 = marg.cdf(0.0)
    if c0 + epsilon > 1.0:
        raise SpecError("not enough mass above the center to hollow")
    if marg.continuous:
        q = marg.ppf(c0 + epsilon)
        removed = epsilon
    else:
        # whole atoms only: stop at the last atom that keeps the removed mass within eps
        q, removed = 0.0, 0.0
        for z in sorted(z for z in marg.values if z > 0):
            if marg.cdf(z) - c0 > epsilon + 1e-12:
                break
            q, removed = z, marg.cdf(z) - c0
    mass = 1.0 - removed
    shift = -marg.partial_mean(0.0, q) / mass
    tmean = mu + shift * _regression_direction(spec, v)
    rule = slab_rule(
        v, [(-math.inf, offset), (float(np.nextafter(offset + q, math.inf)), math.inf)], epsilon,
        f"remove 0 < <x-mu,v> <= {q!r} (eps={epsilon})",
    )
    return AdversaryInstance(
        spec, rule, tmean, mass, "center-hollowing",
        {"base": spec.to_dict(), "epsilon": epsilon, "direction": v.tolist(), "upper": q},
    )


def gaussian_halfspace_variance(epsilon: float, sigma: float = 1.0) -> float:
    """Exact variance of N(0, sigma^2) conditioned on the lower (1 - eps) half-line."""
    from scipy import stats

    if epsilon == 0:
        return sigma**2
    b = stats.norm.isf(epsilon)
    lam = stats.norm.pdf(b) / (1.0 - epsilon)
    return sigma**2 * (1.0 - b * lam - lam * lam)


def adversary_from_dict(obj: dict):
    """Rebuild a serialized adversary (returns the h1 instance for impossibility)."""
    kind = obj.get("adversary")
    if kind == "impossibility":
        return impossibility_adversary(obj["epsilon"], obj["p"], obj.get("dimension", 1))[0]
    if kind == "sharpness":
        return sharpness_construction(obj["xi"], obj["epsilon"], obj["R"])
    if kind == "halfspace":
        return halfspace_adversary(spec_from_dict(obj["base"]), obj["epsilon"], obj["direction"])
    if kind == "center-hollowing":
        return center_hollowing_adversary(spec_from_dict(obj["base"]), obj["epsilon"], obj.get("direction"))
    raise SpecError(f"unknown adversary kind {kind!r}")
