"""Bias-floor and signal arithmetic for truncated mean testing.

A truncation that hides at most an eps-fraction of mass can move the mean by
at most ``gamma = 2 * nu_p * eps^(1 - 1/p)``, where ``nu_p`` is the worst-case
directional p-th moment. Everything here is closed-form arithmetic on that
quantity; the universal constants of the sample-size results are explicit
arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import InfeasibleRegimeError, SpecError

#: default exponents scanned when minimising the envelope over p
DEFAULT_P_GRID = tuple([round(1.0 + 0.05 * i, 2) for i in range(40)] + [float(p) for p in range(3, 65)])


@dataclass(frozen=True)
class BiasFloor:
    gamma: float
    p_used: float
    nu_used: float
    epsilon: float


@dataclass(frozen=True)
class SignalBudget:
    alpha: float
    beta: float
    gamma: float


def _check_eps(epsilon: float, allow_zero: bool = True) -> None:
    lo_ok = epsilon >= 0 if allow_zero else epsilon > 0
    if not (lo_ok and epsilon <= 0.5):
        raise SpecError(f"epsilon must lie in {'[' if allow_zero else '('}0, 1/2] (got {epsilon})")


def bias_floor(nu: float, epsilon: float, p: float) -> BiasFloor:
    """gamma = 2 nu eps^(1 - 1/p); ``p = math.inf`` gives the linear limit 2 nu eps."""
    if nu < 0:
        raise SpecError("nu must be nonnegative")
    _check_eps(epsilon)
    if p < 1:
        raise SpecError("p must be at least 1")
    if epsilon == 0 or nu == 0:
        return BiasFloor(0.0, p, nu, epsilon)
    expo = 1.0 if math.isinf(p) else 1.0 - 1.0 / p
    return BiasFloor(2.0 * nu * epsilon**expo, p, nu, epsilon)


def subgaussian_floor(sigma: float, epsilon: float) -> BiasFloor:
    """Minimise 2 (sigma sqrt(p)) eps^(1 - 1/p) over integers p in [1, ceil(10 log(1/eps))].

    The moment-growth constant is normalised to 1. The result's ``p_used`` is
    the minimising exponent.
    """
    if sigma < 0:
        raise SpecError("sigma must be nonnegative")
    _check_eps(epsilon, allow_zero=False)
    top = max(1, math.ceil(10.0 * math.log(1.0 / epsilon)))
    best = None
    for p in range(1, top + 1):
        fl = bias_floor(sigma * math.sqrt(p), epsilon, p)
        if best is None or fl.gamma < best.gamma:
            best = fl
    return best


def envelope_floor(nu_of_p, epsilon: float, p_grid: Iterable[float] = DEFAULT_P_GRID) -> BiasFloor:
    """Smallest moment envelope ``2 nu(p) eps^(1-1/p)`` over a grid of exponents.

    ``nu_of_p`` maps p to the directional moment; exponents where it is
    ``None`` or infinite are skipped.
    """
    _check_eps(epsilon)
    best = None
    for p in p_grid:
        nu = nu_of_p(p)
        if nu is None or not math.isfinite(nu):
            continue
        fl = bias_floor(nu, epsilon, p)
        if best is None or fl.gamma < best.gamma:
            best = fl
    if best is None:
        raise SpecError("no exponent on the grid has a finite directional moment")
    return best


def effective_signal(alpha: float, floor) -> SignalBudget:
    """beta = max(0, alpha - gamma). ``floor`` is a BiasFloor or a bare gamma."""
    if not alpha > 0:
        raise SpecError("alpha must be positive")
    gamma = floor.gamma if isinstance(floor, BiasFloor) else float(floor)
    return SignalBudget(alpha, max(0.0, alpha - gamma), gamma)


def is_feasible(alpha: float, gamma: float) -> bool:
    """The moment route only has guarantees for alpha > 2 gamma."""
    return alpha > 2.0 * gamma


def required_n_const(sigma_opnorm: float, d: int, alpha: float, gamma: float, C: float) -> int:
    """ceil(max{2, C ||Sigma|| sqrt(d) / (alpha - 2 gamma)^2})."""
    if C <= 0:
        raise SpecError("C must be positive")
    if not is_feasible(alpha, gamma):
        raise InfeasibleRegimeError(f"alpha={alpha} <= 2*gamma={2 * gamma}: below the detectability floor")
    return math.ceil(max(2.0, C * sigma_opnorm * math.sqrt(d) / (alpha - 2.0 * gamma) ** 2))


def block_count(delta: float) -> int:
    """Smallest odd integer >= 18 ln(1/delta).

    With per-block success 2/3, Hoeffding bounds the majority failure by
    exp(-K/18) <= delta.
    """
    if not (0.0 < delta < 1.0 / 3.0):
        raise SpecError("delta must lie in (0, 1/3)")
    k = math.ceil(18.0 * math.log(1.0 / delta))
    return k if k % 2 == 1 else k + 1


def required_n_amplified(sigma_opnorm: float, d: int, alpha: float, gamma: float, delta: float, C: float) -> int:
    return block_count(delta) * required_n_const(sigma_opnorm, d, alpha, gamma, C)
