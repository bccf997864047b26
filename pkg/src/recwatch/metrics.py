"""Empirical performance measures against ground truth, and aggregation
of multi-replicate experiment results."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundTruth:
    """Who is actually dishonest among the detector's current neighbors."""

    dishonest: frozenset
    honest: frozenset

    def __post_init__(self):
        if self.dishonest & self.honest:
            raise ValueError("a neighbor cannot be both honest and dishonest")

    @property
    def neighbor_count(self) -> int:
        return len(self.dishonest) + len(self.honest)


def empirical_pfn(suspicious, truth: GroundTruth) -> float:
    """Fraction of dishonest neighbors that escaped the suspicious set."""
    if not truth.dishonest:
        raise ValueError("false-negative rate undefined without dishonest neighbors")
    escaped = len(truth.dishonest - set(suspicious))
    return escaped / len(truth.dishonest)


def empirical_pfp(suspicious, truth: GroundTruth) -> float:
    """Fraction of honest neighbors still held in the suspicious set."""
    if not truth.honest:
        raise ValueError("false-positive rate undefined without honest neighbors")
    held = len(truth.honest & set(suspicious))
    return held / len(truth.honest)


def market_share(purchase_log, num_products: int) -> np.ndarray:
    """Fraction of purchases per product (1-based ids -> index 0..M-1)."""
    if num_products < 1:
        raise ValueError("num_products must be >= 1")
    counts = np.zeros(num_products, dtype=np.int64)
    for record in purchase_log:
        counts[record.product - 1] += 1
    total = counts.sum()
    if total == 0:
        raise ValueError("purchase log is empty")
    return counts / total


@dataclass
class ExperimentResult:
    """Per-replicate detection curves plus auxiliary samples."""

    pfp_theoretic: np.ndarray
    pfp_empirical: np.ndarray
    pfn_theoretic: np.ndarray
    pfn_empirical: np.ndarray
    market_shares: np.ndarray | None = None
    r_sample: int | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class AggregateCurves:
    rounds: np.ndarray
    mean: dict
    stderr: dict
    r_pmf: np.ndarray | None = None
    r_values: np.ndarray | None = None
    truncated: bool = False


_CURVES = ("pfp_theoretic", "pfp_empirical", "pfn_theoretic", "pfn_empirical")


def aggregate_replicates(results: list) -> AggregateCurves:
    """Pointwise mean and standard error per round across replicates.

    Mismatched round counts are aligned by truncating to the shortest run
    (flagged). NaN entries (e.g. a false-negative rate while the detector
    momentarily has no dishonest neighbors) are excluded pointwise.
    The empirical pmf of the first-clean-round samples is normalized.
    """
    if len(results) < 2:
        raise ValueError("need at least two replicates to aggregate")
    lengths = {len(r.pfp_theoretic) for r in results}
    truncated = len(lengths) > 1
    t = min(lengths)
    if truncated:
        logger.warning("replicates disagree on round count; truncating to %d rounds", t)

    mean: dict = {}
    stderr: dict = {}
    for name in _CURVES:
        stack = np.stack([np.asarray(getattr(r, name), dtype=float)[:t] for r in results])
        n_eff = np.sum(~np.isnan(stack), axis=0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            mean[name] = np.nanmean(stack, axis=0)
            sd = np.nanstd(stack, axis=0, ddof=1)
        stderr[name] = np.where(n_eff > 1, sd / np.sqrt(np.maximum(n_eff, 1)), 0.0)

    r_values = np.array([r.r_sample for r in results if r.r_sample is not None])
    r_pmf = None
    if len(r_values):
        counts = np.bincount(r_values)
        r_pmf = counts / counts.sum()
    return AggregateCurves(
        rounds=np.arange(1, t + 1),
        mean=mean,
        stderr=stderr,
        r_pmf=r_pmf,
        r_values=r_values if len(r_values) else None,
        truncated=truncated,
    )


def aggregate_market_shares(results: list) -> tuple[np.ndarray, np.ndarray]:
    shares = np.stack([r.market_shares for r in results if r.market_shares is not None])
    if shares.shape[0] < 1:
        raise ValueError("no market shares recorded")
    se = (
        shares.std(axis=0, ddof=1) / np.sqrt(shares.shape[0])
        if shares.shape[0] > 1
        else np.zeros(shares.shape[1])
    )
    return shares.mean(axis=0), se
