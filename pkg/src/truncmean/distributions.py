"""Samplable distribution families with exactly known population parameters.

Every family exposes its mean, covariance, directional moments (where a closed
form exists) and the law of its centered one-dimensional projections, which the
truncation module uses to build adversaries with exact bookkeeping.

Heavy-tailed and piecewise-uniform families put the interesting law on
coordinate 0 and pad the remaining coordinates with independent standard
normals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, ClassVar

import jsonschema
import numpy as np
from scipy import special, stats

from .errors import SpecError

_MASS_TOL = 1e-12


def abs_normal_moment(p: float) -> float:
    """E|Z|^p for a standard normal Z."""
    return 2.0 ** (p / 2.0) * special.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)


def abs_student_t_moment(p: float, df: float) -> float:
    """E|T|^p for a standard Student-t with ``df`` degrees of freedom; inf for p >= df."""
    if p >= df:
        return math.inf
    logm = (
        (p / 2.0) * math.log(df)
        + special.gammaln((p + 1.0) / 2.0)
        + special.gammaln((df - p) / 2.0)
        - 0.5 * math.log(math.pi)
        - special.gammaln(df / 2.0)
    )
    return math.exp(logm)


# ---------------------------------------------------------------------------
# centered one-dimensional marginals
# ---------------------------------------------------------------------------


class Marginal1D:
    """Law of a centered projection Z = <X - mu, v>.

    ``upper_partial(t)`` is E[Z; Z > t]. Quantiles are leftmost.
    """

    continuous: bool = True

    def cdf(self, t: float) -> float:
        raise NotImplementedError

    def ppf(self, q: float) -> float:
        raise NotImplementedError

    def upper_partial(self, t: float) -> float:
        raise NotImplementedError

    def negated(self) -> "Marginal1D":
        raise NotImplementedError

    def partial_mean(self, lo: float, hi: float) -> float:
        """E[Z; lo < Z <= hi]."""
        return self.upper_partial(lo) - self.upper_partial(hi)


@dataclass(frozen=True)
class NormalMarginal(Marginal1D):
    scale: float

    def cdf(self, t):
        return float(stats.norm.cdf(t / self.scale))

    def ppf(self, q):
        return float(self.scale * stats.norm.ppf(q))

    def pdf(self, t):
        return float(stats.norm.pdf(t / self.scale) / self.scale)

    def upper_partial(self, t):
        if math.isinf(t):
            return 0.0
        return float(self.scale * stats.norm.pdf(t / self.scale))

    def negated(self):
        return self


@dataclass(frozen=True)
class StudentTMarginal(Marginal1D):
    df: float
    scale: float = 1.0

    def cdf(self, t):
        return float(stats.t.cdf(t / self.scale, self.df))

    def ppf(self, q):
        return float(self.scale * stats.t.ppf(q, self.df))

    def pdf(self, t):
        return float(stats.t.pdf(t / self.scale, self.df) / self.scale)

    def upper_partial(self, t):
        if math.isinf(t):
            return 0.0
        u = t / self.scale
        k = self.df
        return float(self.scale * (k + u * u) / (k - 1.0) * stats.t.pdf(u, k))

    def negated(self):
        return self


@dataclass(frozen=True)
class SymmetricParetoMarginal(Marginal1D):
    """Z = sign * x_m * U^(-1/tail): |Z| is Pareto(tail, x_m), sign fair."""

    tail: float
    x_m: float = 1.0

    def cdf(self, t):
        a, k = self.x_m, self.tail
        if t >= a:
            return 1.0 - 0.5 * (a / t) ** k
        if t <= -a:
            return 0.5 * (a / -t) ** k
        return 0.5

    def ppf(self, q):
        a, k = self.x_m, self.tail
        if q <= 0.0:
            return -math.inf
        if q >= 1.0:
            return math.inf
        if q > 0.5:
            return a * (2.0 * (1.0 - q)) ** (-1.0 / k)
        return -a * (2.0 * q) ** (-1.0 / k)

    def upper_partial(self, t):
        if math.isinf(t):
            return 0.0
        a, k = self.x_m, self.tail
        return 0.5 * k * a**k * max(abs(t), a) ** (1.0 - k) / (k - 1.0)

    def negated(self):
        return self


@dataclass(frozen=True)
class PiecewiseMarginal(Marginal1D):
    """Piecewise-constant density on sorted disjoint segments (already centered)."""

    segments: tuple[tuple[float, float], ...]
    densities: tuple[float, ...]

    def _masses(self):
        return [rho * (hi - lo) for (lo, hi), rho in zip(self.segments, self.densities)]

    def cdf(self, t):
        total = 0.0
        for (lo, hi), rho in zip(self.segments, self.densities):
            if t >= hi:
                total += rho * (hi - lo)
            elif t > lo:
                total += rho * (t - lo)
        return total

    def pdf(self, t):
        for (lo, hi), rho in zip(self.segments, self.densities):
            if lo <= t <= hi:
                return rho
        return 0.0

    def ppf(self, q):
        acc = 0.0
        for (lo, hi), rho in zip(self.segments, self.densities):
            m = rho * (hi - lo)
            if acc + m >= q and m > 0:
                return lo + max(q - acc, 0.0) / rho
            acc += m
        return self.segments[-1][1]

    def upper_partial(self, t):
        total = 0.0
        for (lo, hi), rho in zip(self.segments, self.densities):
            a = max(lo, t)
            if hi > a:
                total += rho * (hi * hi - a * a) / 2.0
        return total

    def negated(self):
        segs = tuple((-hi, -lo) for lo, hi in reversed(self.segments))
        return PiecewiseMarginal(segs, tuple(reversed(self.densities)))


@dataclass(frozen=True)
class AtomicMarginal(Marginal1D):
    values: tuple[float, ...]
    weights: tuple[float, ...]
    continuous: bool = field(default=False, init=False)

    def cdf(self, t):
        return float(sum(w for z, w in zip(self.values, self.weights) if z <= t))

    def ppf(self, q):
        order = np.argsort(self.values, kind="stable")
        acc = 0.0
        for i in order:
            acc += self.weights[i]
            if acc >= q - _MASS_TOL:
                return float(self.values[i])
        return float(self.values[order[-1]])

    def upper_partial(self, t):
        return float(sum(w * z for z, w in zip(self.values, self.weights) if z > t))

    def negated(self):
        return AtomicMarginal(tuple(-z for z in self.values), self.weights)


# ---------------------------------------------------------------------------
# distribution specs
# ---------------------------------------------------------------------------

_REGISTRY: dict[str, type["DistributionSpec"]] = {}

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}


def _vec(x) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(x, dtype=float).ravel())


def _is_axis0(v: np.ndarray) -> int:
    """Return +1/-1 if ``v`` is +-e_0, else 0."""
    if v.size == 1:
        return 1 if v[0] > 0 else -1
    if np.allclose(v[1:], 0.0, atol=1e-12) and abs(abs(v[0]) - 1.0) < 1e-12:
        return 1 if v[0] > 0 else -1
    return 0


class DistributionSpec:
    """Base class for the declarative distribution families."""

    family: ClassVar[str] = ""
    schema: ClassVar[dict] = {}

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.family:
            _REGISTRY[cls.family] = cls

    @property
    def dimension(self) -> int:
        raise NotImplementedError

    def true_mean(self) -> np.ndarray:
        raise NotImplementedError

    def covariance(self) -> np.ndarray:
        raise NotImplementedError

    def cov_opnorm(self) -> float:
        return float(np.linalg.eigvalsh(self.covariance())[-1])

    def directional_moment(self, p: float) -> float | None:
        return None

    def projection(self, direction) -> Marginal1D:
        """Law of <X - mu, v> for a unit vector ``v``."""
        raise SpecError(f"{self.family}: projection law unavailable")

    def shifted(self, delta) -> "DistributionSpec":
        raise SpecError(f"{self.family}: location shift unsupported")

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        import json

        return json.dumps(self.to_dict(), sort_keys=True)


def _padding_cov(first_var: float, d: int) -> np.ndarray:
    c = np.eye(d)
    c[0, 0] = first_var
    return c


def _unit(direction, d: int) -> np.ndarray:
    v = np.asarray(direction, dtype=float).ravel()
    if v.size != d:
        raise SpecError(f"direction has {v.size} entries, expected {d}")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > 1e-10:
        raise SpecError("direction must be a unit vector")
    return v


@dataclass(frozen=True)
class IsotropicGaussian(DistributionSpec):
    mean: tuple[float, ...]
    sigma: float = 1.0

    family: ClassVar[str] = "IsotropicGaussian"
    schema: ClassVar[dict] = {
        "type": "object",
        "required": ["family", "mean"],
        "properties": {"family": {"const": "IsotropicGaussian"}, "dimension": {"type": "integer"},
                       "mean": _VEC, "sigma": {"type": "number", "minimum": 0}},
        "additionalProperties": False,
    }

    def __post_init__(self):
        object.__setattr__(self, "mean", _vec(self.mean))
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise SpecError("sigma must be finite and nonnegative")

    @property
    def dimension(self):
        return len(self.mean)

    def true_mean(self):
        return np.array(self.mean)

    def covariance(self):
        return self.sigma**2 * np.eye(self.dimension)

    def cov_opnorm(self):
        return self.sigma**2

    def directional_moment(self, p):
        return self.sigma * abs_normal_moment(p) ** (1.0 / p)

    def projection(self, direction):
        _unit(direction, self.dimension)
        return NormalMarginal(self.sigma)

    def shifted(self, delta):
        return replace(self, mean=tuple(np.add(self.mean, delta)))

    def draw(self, n, rng):
        return np.array(self.mean) + self.sigma * rng.standard_normal((n, self.dimension))

    def to_dict(self):
        return {"family": self.family, "dimension": self.dimension, "mean": list(self.mean), "sigma": self.sigma}


@dataclass(frozen=True)
class DiagonalGaussian(DistributionSpec):
    mean: tuple[float, ...]
    stds: tuple[float, ...]

    family: ClassVar[str] = "DiagonalGaussian"
    schema: ClassVar[dict] = {
        "type": "object",
        "required": ["family", "mean", "stds"],
        "properties": {"family": {"const": "DiagonalGaussian"}, "dimension": {"type": "integer"},
                       "mean": _VEC, "stds": {"type": "array", "items": {"type": "number", "minimum": 0}}},
        "additionalProperties": False,
    }

    def __post_init__(self):
        object.__setattr__(self, "mean", _vec(self.mean))
        object.__setattr__(self, "stds", _vec(self.stds))
        if len(self.stds) != len(self.mean):
            raise SpecError("stds and mean must have the same length")
        if any(s < 0 or not math.isfinite(s) for s in self.stds):
            raise SpecError("stds must be finite and nonnegative")

    @property
    def dimension(self):
        return len(self.mean)

    def true_mean(self):
        return np.array(self.mean)

    def covariance(self):
        return np.diag(np.square(self.stds))

    def cov_opnorm(self):
        return max(self.stds) ** 2

    def directional_moment(self, p):
        return max(self.stds) * abs_normal_moment(p) ** (1.0 / p)

    def projection(self, direction):
        v = _unit(direction, self.dimension)
        return NormalMarginal(float(np.sqrt(np.sum((v * np.array(self.stds)) ** 2))))

    def shifted(self, delta):
        return replace(self, mean=tuple(np.add(self.mean, delta)))

    def draw(self, n, rng):
        return np.array(self.mean) + np.array(self.stds) * rng.standard_normal((n, self.dimension))

    def to_dict(self):
        return {"family": self.family, "dimension": self.dimension, "mean": list(self.mean), "stds": list(self.stds)}


class _EmbeddedHeavyTail(DistributionSpec):
    """Coordinate 0 carries a scaled heavy-tailed law; the rest is N(mean_i, 1)."""

    mean: tuple[float, ...]
    tail: float

    def _check(self):
        object.__setattr__(self, "mean", _vec(self.mean))
        if not self.tail > 2:
            raise SpecError(f"{self.family}: tail exponent must exceed 2 (got {self.tail})")

    @property
    def dimension(self):
        return len(self.mean)

    def true_mean(self):
        return np.array(self.mean)

    def _first_var(self) -> float:
        raise NotImplementedError

    def _first_abs_moment(self, p: float) -> float:
        raise NotImplementedError

    def _marginal(self) -> Marginal1D:
        raise NotImplementedError

    def covariance(self):
        return _padding_cov(self._first_var(), self.dimension)

    def cov_opnorm(self):
        v = self._first_var()
        return v if self.dimension == 1 else max(v, 1.0)

    def directional_moment(self, p):
        if p >= self.tail:
            return math.inf
        if self.dimension == 1:
            return self._first_abs_moment(p) ** (1.0 / p)
        return None

    def projection(self, direction):
        v = _unit(direction, self.dimension)
        sign = _is_axis0(v)
        if sign == 0:
            raise SpecError(f"{self.family}: projection law only available along +-e_0")
        return self._marginal() if sign > 0 else self._marginal().negated()

    def shifted(self, delta):
        return replace(self, mean=tuple(np.add(self.mean, delta)))


@dataclass(frozen=True)
class StudentT(_EmbeddedHeavyTail):
    mean: tuple[float, ...]
    df: float
    scale: float = 1.0

    family: ClassVar[str] = "StudentT"
    schema: ClassVar[dict] = {
        "type": "object",
        "required": ["family", "mean", "df"],
        "properties": {"family": {"const": "StudentT"}, "dimension": {"type": "integer"},
                       "mean": _VEC, "df": _NUM, "scale": {"type": "number", "exclusiveMinimum": 0}},
        "additionalProperties": False,
    }

    @property
    def tail(self):
        return self.df

    def __post_init__(self):
        self._check()

    def _first_var(self):
        return self.scale**2 * self.df / (self.df - 2.0)

    def _first_abs_moment(self, p):
        return self.scale**p * abs_student_t_moment(p, self.df)

    def _marginal(self):
        return StudentTMarginal(self.df, self.scale)

    def draw(self, n, rng):
        x = np.array(self.mean) + rng.standard_normal((n, self.dimension))
        z = rng.standard_normal(n)
        chi = np.sqrt(rng.chisquare(self.df, n) / self.df)
        x[:, 0] = self.mean[0] + self.scale * z / chi
        return x

    def to_dict(self):
        return {"family": self.family, "dimension": self.dimension, "mean": list(self.mean),
                "df": self.df, "scale": self.scale}


@dataclass(frozen=True)
class Pareto(_EmbeddedHeavyTail):
    """Symmetrized Pareto on coordinate 0: mean + sign * x_m * U^(-1/tail)."""

    mean: tuple[float, ...]
    tail: float
    x_m: float = 1.0

    family: ClassVar[str] = "Pareto"
    schema: ClassVar[dict] = {
        "type": "object",
        "required": ["family", "mean", "tail"],
        "properties": {"family": {"const": "Pareto"}, "dimension": {"type": "integer"},
                       "mean": _VEC, "tail": _NUM, "x_m": {"type": "number", "exclusiveMinimum": 0}},
        "additionalProperties": False,
    }

    def __post_init__(self):
        self._check()
        if not self.x_m > 0:
            raise SpecError("x_m must be positive")

    def _first_var(self):
        return self.tail * self.x_m**2 / (self.tail - 2.0)

    def _first_abs_moment(self, p):
        return self.tail * self.x_m**p / (self.tail - p)

    def _marginal(self):
        return SymmetricParetoMarginal(self.tail, self.x_m)

    def draw(self, n, rng):
        x = np.array(self.mean) + rng.standard_normal((n, self.dimension))
        u = 1.0 - rng.random(n)
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        x[:, 0] = self.mean[0] + sign * self.x_m * u ** (-1.0 / self.tail)
        return x

    def to_dict(self):
        return {"family": self.family, "dimension": self.dimension, "mean": list(self.mean),
                "tail": self.tail, "x_m": self.x_m}


@dataclass(frozen=True)
class DiscreteAtomic(DistributionSpec):
    """Finitely supported law: ``atoms[i]`` (a point in R^d) with probability ``weights[i]``."""

    atoms: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...]

    family: ClassVar[str] = "DiscreteAtomic"
    schema: ClassVar[dict] = {
        "type": "object",
        "required": ["family", "atoms", "weights"],
        "properties": {"family": {"const": "DiscreteAtomic"}, "dimension": {"type": "integer"},
                       "atoms": {"type": "array", "minItems": 1, "items": _VEC},
                       "weights": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}}},
        "additionalProperties": False,
    }

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        if np.asarray(self.atoms, dtype=float).ndim == 1:
            pts = pts.T
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.size:
            raise SpecError("atoms and weights must have the same length")
        if not np.all(np.isfinite(pts)):
            raise SpecError("atoms must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > _MASS_TOL:
            raise SpecError(f"weights must be nonnegative and sum to 1 (sum={w.sum()!r})")
        object.__setattr__(self, "atoms", tuple(tuple(float(x) for x in row) for row in pts))
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @classmethod
    def point_mass(cls, point) -> "DiscreteAtomic":
        return cls((tuple(np.atleast_1d(point)),), (1.0,))

    @property
    def dimension(self):
        return len(self.atoms[0])

    @property
    def points(self) -> np.ndarray:
        return np.array(self.atoms)

    def true_mean(self):
        return np.asarray(self.weights) @ self.points

    def covariance(self):
        y = self.points - self.true_mean()
        return (y * np.asarray(self.weights)[:, None]).T @ y

    def _principal_axis(self):
        """Unit vector spanning the centered support, or None when it is not a line."""
        y = self.points - self.true_mean()
        _, s, vt = np.linalg.svd(y, full_matrices=False)
        if s[0] <= 1e-300:
            return np.eye(self.dimension)[0]
        if s.size > 1 and s[1] > 1e-12 * s[0]:
            return None
        return vt[0]

    def directional_moment(self, p):
        u = self._principal_axis()
        if u is None:
            return None
        z = (self.points - self.true_mean()) @ u
        return float(np.dot(self.weights, np.abs(z) ** p) ** (1.0 / p))

    def projection(self, direction):
        v = _unit(direction, self.dimension)
        z = (self.points - self.true_mean()) @ v
        return AtomicMarginal(tuple(float(t) for t in z), self.weights)

    def shifted(self, delta):
        return DiscreteAtomic(tuple(map(tuple, self.points + np.asarray(delta))), self.weights)

    def draw(self, n, rng):
        idx = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        return self.points[idx]

    def to_dict(self):
        return {"family": self.family, "dimension": self.dimension,
                "atoms": [list(a) for a in self.atoms], "weights": list(self.weights)}


@dataclass(frozen=True)
class PiecewiseUniform(DistributionSpec):
    """Piecewise-constant density on coordinate 0; N(0, 1) padding elsewhere.

    ``segments`` are sorted, disjoint ``(lo, hi)`` intervals and ``densities``
    the constant density on each; total mass must be 1.
    """

    segments: tuple[tuple[float, float], ...]
    densities: tuple[float, ...]
    dim: int = 1

    family: ClassVar[str] = "PiecewiseUniform"
    schema: ClassVar[dict] = {
        "type": "object",
        "required": ["family", "segments", "densities"],
        "properties": {"family": {"const": "PiecewiseUniform"}, "dimension": {"type": "integer", "minimum": 1},
                       "segments": {"type": "array", "minItems": 1,
                                    "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
                       "densities": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}}},
        "additionalProperties": False,
    }

    def __post_init__(self):
        segs = tuple((float(lo), float(hi)) for lo, hi in self.segments)
        dens = tuple(float(r) for r in self.densities)
        if len(segs) != len(dens):
            raise SpecError("segments and densities must have the same length")
        order = sorted(range(len(segs)), key=lambda i: segs[i][0])
        segs = tuple(segs[i] for i in order)
        dens = tuple(dens[i] for i in order)
        for lo, hi in segs:
            if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                raise SpecError(f"segment ({lo}, {hi}) must be finite and nondegenerate")
        for (_, hi), (lo, _) in zip(segs, segs[1:]):
            if lo < hi:
                raise SpecError("segments overlap")
        if any(r < 0 for r in dens):
            raise SpecError("densities must be nonnegative")
        mass = sum(r * (hi - lo) for (lo, hi), r in zip(segs, dens))
        if abs(mass - 1.0) > _MASS_TOL:
            raise SpecError(f"total mass must be 1 (got {mass!r})")
        if self.dim < 1:
            raise SpecError("dimension must be positive")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "densities", dens)

    @classmethod
    def uniform(cls, lo: float, hi: float, dim: int = 1) -> "PiecewiseUniform":
        return cls(((lo, hi),), (1.0 / (hi - lo),), dim)

    @property
    def dimension(self):
        return self.dim

    def _first_mean(self):
        return sum(r * (hi * hi - lo * lo) / 2.0 for (lo, hi), r in zip(self.segments, self.densities))

    def _first_abs_moment(self, p, center):
        def prim(x):
            y = x - center
            return math.copysign(abs(y) ** (p + 1.0), y) / (p + 1.0)

        return sum(r * (prim(hi) - prim(lo)) for (lo, hi), r in zip(self.segments, self.densities))

    def true_mean(self):
        m = np.zeros(self.dim)
        m[0] = self._first_mean()
        return m

    def covariance(self):
        mu = self._first_mean()
        second = sum(r * (hi**3 - lo**3) / 3.0 for (lo, hi), r in zip(self.segments, self.densities))
        return _padding_cov(second - mu * mu, self.dim)

    def directional_moment(self, p):
        if self.dim != 1:
            return None
        return self._first_abs_moment(p, self._first_mean()) ** (1.0 / p)

    def centered_marginal(self) -> PiecewiseMarginal:
        mu = self._first_mean()
        return PiecewiseMarginal(tuple((lo - mu, hi - mu) for lo, hi in self.segments), self.densities)

    def projection(self, direction):
        v = _unit(direction, self.dim)
        sign = _is_axis0(v)
        if sign == 0:
            raise SpecError("PiecewiseUniform: projection law only available along +-e_0")
        m = self.centered_marginal()
        return m if sign > 0 else m.negated()

    def shifted(self, delta):
        delta = np.asarray(delta, dtype=float).ravel()
        if delta.size != self.dim or np.any(delta[1:] != 0):
            raise SpecError("PiecewiseUniform: only shifts along coordinate 0 are supported")
        s = float(delta[0])
        return replace(self, segments=tuple((lo + s, hi + s) for lo, hi in self.segments))

    def draw(self, n, rng):
        masses = np.array([r * (hi - lo) for (lo, hi), r in zip(self.segments, self.densities)])
        idx = rng.choice(len(masses), size=n, p=masses / masses.sum())
        lo = np.array([s[0] for s in self.segments])[idx]
        hi = np.array([s[1] for s in self.segments])[idx]
        x = rng.standard_normal((n, self.dim))
        x[:, 0] = lo + (hi - lo) * rng.random(n)
        return x

    def to_dict(self):
        return {"family": self.family, "dimension": self.dim,
                "segments": [list(s) for s in self.segments], "densities": list(self.densities)}


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleBatch:
    """n x d matrix of observations plus the seed material that produced it."""

    data: np.ndarray
    seed_trace: Any = None

    def __post_init__(self):
        x = np.asarray(self.data, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError("a sample batch needs at least one row and one column")
        if not np.all(np.isfinite(x)):
            raise ValueError("sample batch contains non-finite entries")
        x.setflags(write=False)
        object.__setattr__(self, "data", x)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def as_array(batch) -> np.ndarray:
    """Accept a SampleBatch or anything array-like and return an (n, d) float array."""
    if isinstance(batch, SampleBatch):
        return batch.data
    x = np.asarray(batch, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _rng_trace(rng: np.random.Generator):
    ss = getattr(rng.bit_generator, "seed_seq", None)
    if ss is None:
        return None
    return (ss.entropy, tuple(ss.spawn_key))


def sample(spec: DistributionSpec, n: int, rng: np.random.Generator) -> SampleBatch:
    """Draw ``n`` i.i.d. rows from ``spec``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return SampleBatch(spec.draw(int(n), rng), _rng_trace(rng))


def true_mean(spec: DistributionSpec) -> np.ndarray:
    return spec.true_mean()


def cov_opnorm(spec: DistributionSpec) -> float:
    return spec.cov_opnorm()


def directional_moment_exact(spec: DistributionSpec, p: float) -> float | None:
    """Worst-case centered p-th moment over unit projections.

    Returns ``math.inf`` when the moment diverges (p at or beyond the tail
    exponent) and ``None`` when no closed form is available.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    return spec.directional_moment(float(p))


def spec_from_dict(obj: dict) -> DistributionSpec:
    """Validate and build a spec from its JSON object form."""
    if not isinstance(obj, dict) or "family" not in obj:
        raise SpecError("distribution object needs a 'family' tag")
    cls = _REGISTRY.get(obj["family"])
    if cls is None:
        raise SpecError(f"unknown family {obj['family']!r}; expected one of {sorted(_REGISTRY)}")
    try:
        jsonschema.validate(obj, cls.schema)
    except jsonschema.ValidationError as exc:
        raise SpecError(f"{cls.family}: {exc.message}") from exc
    kwargs = {k: v for k, v in obj.items() if k not in ("family", "dimension")}
    if cls is PiecewiseUniform:
        kwargs["dim"] = obj.get("dimension", 1)
        kwargs["segments"] = tuple(tuple(s) for s in kwargs["segments"])
    if cls is DiscreteAtomic:
        kwargs["atoms"] = tuple(tuple(a) for a in kwargs["atoms"])
    spec = cls(**kwargs)
    if "dimension" in obj and obj["dimension"] != spec.dimension:
        raise SpecError(f"declared dimension {obj['dimension']} does not match parameters ({spec.dimension})")
    return spec


def spec_from_json(text: str) -> DistributionSpec:
    import json

    return spec_from_dict(json.loads(text))


FAMILIES = tuple(_REGISTRY)
