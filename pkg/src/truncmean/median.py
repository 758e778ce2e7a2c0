"""Directional medians, the Chebyshev-center estimator, and the regularity test.

The estimator picks the point whose projections best match the empirical
directional medians in the worst direction. The sphere is replaced by a finite
net: the signed coordinate axes plus seeded random unit vectors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize, stats

from .distributions import as_array
from .errors import InfeasibleRegimeError, OptimizationError, SpecError
from .ustat import TestVerdict, _verdict


@dataclass(frozen=True)
class DirectionNet:
    directions: np.ndarray
    construction: str = "user-supplied"

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if not np.allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-10, rtol=0):
            raise SpecError("every net direction must have unit norm")
        if self.construction == "axes+random":
            d = v.shape[1]
            if v.shape[0] < 2 * d or not np.array_equal(v[: 2 * d], _signed_axes(d)):
                raise SpecError("an axes+random net must start with the 2d signed axes")
        v.setflags(write=False)
        object.__setattr__(self, "directions", v)

    @property
    def size(self) -> int:
        return self.directions.shape[0]

    @property
    def dimension(self) -> int:
        return self.directions.shape[1]


def _signed_axes(d: int) -> np.ndarray:
    eye = np.eye(d)
    return np.concatenate([eye, -eye])


def direction_net(d: int, size: int | None = None, rng: np.random.Generator | None = None) -> DirectionNet:
    """Signed axes plus ``size - 2d`` uniform random unit vectors (default size max(4d, 64))."""
    if d < 1:
        raise SpecError("dimension must be positive")
    m = max(4 * d, 64) if size is None else int(size)
    if m < 2 * d:
        raise SpecError(f"net size must be at least 2d = {2 * d}")
    extra = m - 2 * d
    parts = [_signed_axes(d)]
    if extra:
        if rng is None:
            rng = np.random.default_rng(0)
        g = rng.standard_normal((extra, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        parts.append(g)
    return DirectionNet(np.concatenate(parts), "axes+random")


def directional_median(batch, v) -> float:
    """Median of <X_i, v>; even n takes the midpoint of the two central order statistics."""
    x = as_array(batch)
    return float(np.median(x @ np.asarray(v, dtype=float)))


def directional_medians(batch, net: DirectionNet) -> np.ndarray:
    x = as_array(batch)
    return np.median(x @ net.directions.T, axis=0)


def center_objective(u, net: DirectionNet, medians: np.ndarray) -> float:
    """max over the net of |<u, v> - m_v|."""
    return float(np.max(np.abs(net.directions @ np.asarray(u, dtype=float) - medians)))


class CenterEstimate(NamedTuple):
    mu_hat: np.ndarray
    objective: float
    medians: np.ndarray


def _solve_lp(net: DirectionNet, medians: np.ndarray, tolerance: float) -> np.ndarray:
    v = net.directions
    m, d = v.shape
    ones = np.ones((m, 1))
    a_ub = np.block([[v, -ones], [-v, -ones]])
    b_ub = np.concatenate([medians, -medians])
    c = np.zeros(d + 1)
    c[-1] = 1.0
    bounds = [(None, None)] * d + [(0, None)]
    tol = min(max(tolerance * 1e-2, 1e-10), 1e-7)
    res = optimize.linprog(
        c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs",
        options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol},
    )
    if res.status != 0 or res.x is None:
        raise OptimizationError(f"linear program failed: {res.message}")
    return res.x[:d]


def _polish(v, medians, u, rounds=500):
    """Refine a near-optimal minimax point by exchange on the active constraints.

    Lawson's reweighted least squares (weights multiplied by |residual|)
    concentrates on the d + 1 constraints that pin the optimum; solving for
    the point where those residuals are equal in size (keeping their signs)
    gives the optimum exactly. Falls back to ``u`` if that does not help.
    """
    d = v.shape[1]
    w = np.full(v.shape[0], 1.0 / v.shape[0])
    for _ in range(rounds):
        sw = np.sqrt(w)
        x = np.linalg.lstsq(sw[:, None] * v, sw * medians, rcond=None)[0]
        w = w * np.abs(v @ x - medians)
        total = w.sum()
        if total == 0:
            break
        w /= total
    best, f = u, float(np.max(np.abs(v @ u - medians)))
    order = np.argsort(-w)
    for size in range(d + 1, min(2 * d + 2, v.shape[0]) + 1):
        idx = order[:size]
        r = v[idx] @ best - medians[idx]
        s = np.where(r < 0, -1.0, 1.0)
        a = np.hstack([s[:, None] * v[idx], -np.ones((size, 1))])
        cand = np.linalg.lstsq(a, s * medians[idx], rcond=None)[0][:d]
        fc = float(np.max(np.abs(v @ cand - medians)))
        if fc < f:
            best, f = cand, fc
    return best


def _solve_subgradient(net, medians, tolerance, max_iter=10_000, epoch=500):
    """Restarted subgradient descent on the max-residual function.

    Within an epoch of ``epoch`` steps the step along the normalised
    subgradient is ``h / sqrt(k)``; each epoch restarts from the best iterate
    with ``h`` halved, starting from the initial objective value. Converged
    once ``h`` drops below ``tolerance``, then polished by an exchange step.
    Raises after ``max_iter`` total steps.
    """
    v = net.directions
    u = np.linalg.lstsq(v, medians, rcond=None)[0]
    r = v @ u - medians
    best_u, best_f = u.copy(), float(np.max(np.abs(r)))
    h = max(best_f, tolerance)
    k = total = 0
    while h >= tolerance:
        if total >= max_iter:
            raise OptimizationError("subgradient descent hit the iteration cap", best=best_u, objective=best_f)
        k += 1
        total += 1
        j = int(np.argmax(np.abs(r)))
        u = u - (h / math.sqrt(k)) * np.sign(r[j]) * v[j]
        r = v @ u - medians
        f = float(np.max(np.abs(r)))
        if f < best_f:
            best_u, best_f = u.copy(), f
        if k == epoch:
            u, k, h = best_u.copy(), 0, h / 2.0
            r = v @ u - medians
    return _polish(v, medians, best_u)


def estimate_center(batch, net: DirectionNet, tolerance: float = 1e-6, method: str = "lp") -> CenterEstimate:
    """argmin_u max_{v in net} |<u, v> - median_v|.

    ``method="lp"`` solves the exact linear program (minimise t subject to
    -t <= <u, v_j> - m_j <= t); ``method="subgradient"`` is the solver-free
    fallback.
    """
    x = as_array(batch)
    if x.shape[1] != net.dimension:
        raise SpecError(f"batch has dimension {x.shape[1]}, net has {net.dimension}")
    med = directional_medians(x, net)
    if method == "lp":
        u = _solve_lp(net, med, tolerance)
    elif method == "subgradient":
        u = _solve_subgradient(net, med, tolerance)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CenterEstimate(u, center_objective(u, net, med), med)


# ---------------------------------------------------------------------------
# regularity profiles and bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegularityProfile:
    """Density floor ``c`` on [-r, r] around every directional median.

    ``flagged`` marks constants that break the one-dimensional identity
    c r <= 1/2 and are carried only for reference.
    """

    c: float
    r: float
    provenance: str = "user-asserted"
    flagged: bool = False

    def __post_init__(self):
        if not (self.c > 0 and self.r > 0):
            raise SpecError("c and r must be positive")
        if self.c * self.r > 0.5 + 1e-12 and not self.flagged:
            raise SpecError(f"c*r = {self.c * self.r} exceeds 1/2; no density can satisfy this")

    @property
    def cr(self) -> float:
        return self.c * self.r


def gaussian_profile() -> RegularityProfile:
    """Constants c = sqrt(e / 2 pi), r = 1 as quoted for the standard normal.

    These violate c r <= 1/2 (and exceed the normal density at 0), so the
    profile comes back flagged; use :func:`conservative_gaussian_profile` for
    a valid one.
    """
    warnings.warn(
        "c = sqrt(e/2pi) with r = 1 gives c*r > 1/2; this profile cannot be a density floor",
        stacklevel=2,
    )
    return RegularityProfile(math.sqrt(math.e / (2.0 * math.pi)), 1.0, "quoted", flagged=True)


def conservative_gaussian_profile(sigma: float = 1.0, r: float = 1.0) -> RegularityProfile:
    """c = phi(r / sigma) / sigma, the exact minimum of the N(0, sigma^2) density on [-r, r]."""
    return RegularityProfile(float(stats.norm.pdf(r / sigma) / sigma), r, "closed-form")


def student_t_profile(df: float, scale: float = 1.0, r: float = 1.0) -> RegularityProfile:
    """Minimum of the scaled Student-t density on [-r, r]."""
    return RegularityProfile(float(stats.t.pdf(r / scale, df) / scale), r, "closed-form")


def uniform_profile(half_width: float) -> RegularityProfile:
    """Uniform[-w, w]: c = 1/(2w), r = w, the equality case c r = 1/2."""
    return RegularityProfile(1.0 / (2.0 * half_width), half_width, "closed-form")


def median_stability_bound(epsilon: float, profile: RegularityProfile) -> float:
    """Worst-case shift eps / c of any directional median; needs eps < c r."""
    if epsilon < 0:
        raise SpecError("epsilon must be nonnegative")
    if epsilon >= profile.cr:
        raise InfeasibleRegimeError(f"epsilon={epsilon} >= c*r={profile.cr}: median stability does not hold")
    return epsilon / profile.c


def recovery_bound(profile: RegularityProfile, epsilon: float, d: int, delta: float, n: int,
                   C: float, C0: float = 1.0) -> float:
    """(2/c) (eps + C sqrt((d + log(1/delta)) / n)).

    Raises when eps >= c r or when n <= C0 (d + log(1/delta)) / (c r - eps)^2.
    """
    if not (0 < delta < 1):
        raise SpecError("delta must lie in (0, 1)")
    if epsilon < 0 or epsilon >= profile.cr:
        raise InfeasibleRegimeError(f"epsilon={epsilon} must lie in [0, c*r={profile.cr})")
    complexity = d + math.log(1.0 / delta)
    if not math.isinf(n) and n <= C0 * complexity / (profile.cr - epsilon) ** 2:
        raise InfeasibleRegimeError(f"n={n} too small for the recovery guarantee")
    stat = 0.0 if math.isinf(n) else C * math.sqrt(complexity / n)
    return 2.0 / profile.c * (epsilon + stat)


def regularity_regime_ok(alpha: float, epsilon: float, profile: RegularityProfile) -> bool:
    """eps < min{c r, alpha / (8 c)}."""
    return epsilon < min(profile.cr, alpha / (8.0 * profile.c))


def required_n_regularity(d: int, alpha: float, delta: float, C: float) -> int:
    """ceil(C (d + log(1/delta)) / alpha^2)."""
    return max(2, math.ceil(C * (d + math.log(1.0 / delta)) / alpha**2))


def regularity_test(batch, alpha: float, net: DirectionNet, tolerance: float = 1e-6,
                    epsilon: float | None = None, profile: RegularityProfile | None = None,
                    method: str = "lp") -> TestVerdict:
    """Reject H0 when the estimated center has norm above alpha / 2."""
    if not alpha > 0:
        raise SpecError("alpha must be positive")
    est = estimate_center(batch, net, tolerance, method)
    meta = {"alpha": alpha, "net_size": net.size, "objective": est.objective}
    if epsilon is not None and profile is not None:
        meta.update(epsilon=epsilon, c=profile.c, r=profile.r,
                    regime_ok=regularity_regime_ok(alpha, epsilon, profile))
    return _verdict(float(np.linalg.norm(est.mu_hat)), alpha / 2.0, as_array(batch).shape[0], meta)
