"""Second-order U-statistic, its variance bounds, and the resulting mean tests."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import as_array
from .errors import SpecError
from .moments import block_count


class Decision(str, enum.Enum):
    REJECT_NULL = "RejectNull"
    ACCEPT_NULL = "AcceptNull"


@dataclass(frozen=True)
class TestVerdict:
    decision: Decision
    statistic: float
    threshold: float
    n_used: int
    meta: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        expected = Decision.REJECT_NULL if self.statistic > self.threshold else Decision.ACCEPT_NULL
        if self.decision != expected:
            raise ValueError("decision must be RejectNull exactly when statistic > threshold")

    @property
    def rejects(self) -> bool:
        return self.decision is Decision.REJECT_NULL

    def to_dict(self) -> dict:
        return {
            "decision": self.decision.value,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "n_used": self.n_used,
            "meta": self.meta,
        }


def _verdict(statistic: float, threshold: float, n_used: int, meta: dict) -> TestVerdict:
    decision = Decision.REJECT_NULL if statistic > threshold else Decision.ACCEPT_NULL
    return TestVerdict(decision, float(statistic), float(threshold), int(n_used), meta)


def u_statistic(batch) -> float:
    """Average of <X_i, X_j> over unordered pairs, in O(n d).

    Uses (||sum_i X_i||^2 - sum_i ||X_i||^2) / (n (n - 1)).
    """
    x = as_array(batch)
    n = x.shape[0]
    if n < 2:
        raise ValueError("the U-statistic needs at least two rows")
    s = x.sum(axis=0)
    return float((s @ s - np.einsum("ij,ij->", x, x)) / (n * (n - 1)))


def block_u_statistics(x: np.ndarray, blocks: int) -> np.ndarray:
    """U-statistic of each of ``blocks`` contiguous equal blocks (remainder rows dropped)."""
    n, d = x.shape
    m = n // blocks
    if m < 2:
        raise ValueError(f"{n} rows cannot fill {blocks} blocks of size >= 2")
    xb = x[: blocks * m].reshape(blocks, m, d)
    s = xb.sum(axis=1)
    sq = np.einsum("kij,kij->k", xb, xb)
    return (np.einsum("kj,kj->k", s, s) - sq) / (m * (m - 1))


def variance_upper_bound(cov_quadform: float, trace_cov_sq: float, n: int) -> float:
    """(4/n) <mu, Sigma mu> + 4/(n(n-1)) tr(Sigma^2)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if cov_quadform < 0 or trace_cov_sq < 0:
        raise SpecError("quadratic form and trace must be nonnegative")
    return 4.0 / n * cov_quadform + 4.0 / (n * (n - 1)) * trace_cov_sq


def variance_bound_for(mean, cov, n: int) -> float:
    """Convenience wrapper computing the bound's inputs from a mean vector and covariance."""
    mu = np.atleast_1d(np.asarray(mean, dtype=float))
    sigma = np.atleast_2d(np.asarray(cov, dtype=float))
    quad = max(float(mu @ sigma @ mu), 0.0)
    return variance_upper_bound(quad, float(np.sum(sigma * sigma.T)), n)


def relaxed_variance_bound(sigma_opnorm: float, mu_ps_norm: float, d: int, n: int) -> float:
    """16 (||Sigma_P|| ||mu_{P_S}||^2 / n + d ||Sigma_P||^2 / n^2), stated in untruncated terms."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return 16.0 * (sigma_opnorm * mu_ps_norm**2 / n + d * sigma_opnorm**2 / n**2)


def const_error_test(batch, alpha: float) -> TestVerdict:
    """Reject H0 when the U-statistic exceeds alpha^2 / 4."""
    if not alpha > 0:
        raise SpecError("alpha must be positive")
    x = as_array(batch)
    return _verdict(u_statistic(x), alpha * alpha / 4.0, x.shape[0], {"alpha": alpha})


def amplified_test(batch, alpha: float, delta: float) -> TestVerdict:
    """Majority vote of the constant-error test over K(delta) contiguous blocks.

    The statistic is the fraction of blocks that reject; the verdict rejects
    when that share exceeds 1/2.
    """
    if not alpha > 0:
        raise SpecError("alpha must be positive")
    k = block_count(delta)
    x = as_array(batch)
    if x.shape[0] < 2 * k:
        raise ValueError(f"need at least {2 * k} rows for {k} blocks, got {x.shape[0]}")
    stats = block_u_statistics(x, k)
    share = float(np.mean(stats > alpha * alpha / 4.0))
    m = x.shape[0] // k
    return _verdict(share, 0.5, k * m, {"alpha": alpha, "delta": delta, "blocks": k, "block_size": m})


def hoeffding_majority_bound(blocks: int, per_block_success: float = 2.0 / 3.0) -> float:
    """exp(-2 K (p - 1/2)^2), Hoeffding's bound on majority failure."""
    return math.exp(-2.0 * blocks * (per_block_success - 0.5) ** 2)
