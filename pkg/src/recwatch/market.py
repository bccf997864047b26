"""Products, valuations, recommendation semantics, and agent policies.

Everything here is a pure decision function: state comes in as arguments
and randomness through an explicit generator, so parallel replicates can
use independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

POSITIVE = 1
NEGATIVE = -1
SILENT = 0


class Kind(Enum):
    HONEST = "honest"
    DISHONEST = "dishonest"


@dataclass(frozen=True)
class ProductCatalog:
    """M substitutable products; ids 1..promoted are attacker-promoted."""

    num_products: int
    prices: tuple[float, ...] = ()
    promoted: int = 1

    def __post_init__(self):
        if not 1 <= self.promoted < self.num_products:
            raise ValueError(
                f"need 1 <= promoted < num_products, got {self.promoted}/{self.num_products}"
            )
        if self.prices and (len(self.prices) != self.num_products or min(self.prices) <= 0):
            raise ValueError("prices must be positive, one per product")

    def honest_valuation(self) -> np.ndarray:
        """Shared binary types in synthetic mode: promoted products are
        untrustworthy (0) for every honest user, the rest trustworthy (1).
        Products are 1-based externally; index 0 of the array is product 1."""
        v = np.ones(self.num_products, dtype=np.int8)
        v[: self.promoted] = 0
        return v


@dataclass(frozen=True)
class AgentPolicy:
    kind: Kind
    promoted_product: int | None = None  # product id, dishonest only
    delta: float = 0.0

    def __post_init__(self):
        if self.kind is Kind.DISHONEST:
            if self.promoted_product is None:
                raise ValueError("dishonest policy needs a promoted product id")
            if not 0.0 <= self.delta <= 1.0:
                raise ValueError(f"delta must be in [0,1], got {self.delta}")


HONEST = AgentPolicy(kind=Kind.HONEST)


def dishonest_policy(promoted_product: int, delta: float) -> AgentPolicy:
    return AgentPolicy(kind=Kind.DISHONEST, promoted_product=promoted_product, delta=delta)


@dataclass(frozen=True)
class Recommendation:
    product: int
    polarity: int  # POSITIVE or NEGATIVE
    issuer: int
    round_index: int

    def __post_init__(self):
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise ValueError("polarity must be POSITIVE or NEGATIVE")


def classify(detector_type: int, polarity: int) -> bool:
    """True if the recommendation is correct for a detector who values the
    product as `detector_type` (1 trustworthy / 0 untrustworthy)."""
    if polarity == POSITIVE:
        return detector_type == 1
    if polarity == NEGATIVE:
        return detector_type == 0
    raise ValueError("cannot classify a silent neighbor")


def dishonest_recommend(policy: AgentPolicy, product: int, true_type: int, rng) -> int:
    """Polarity emitted by a dishonest user on `product`.

    The promoted product always gets a positive recommendation. Any other
    product gets the correct polarity with probability delta and a negative
    one otherwise (so an untrustworthy product is always bad-mouthed).
    """
    if policy.kind is not Kind.DISHONEST:
        raise ValueError("policy is not dishonest")
    if product == policy.promoted_product:
        return POSITIVE
    if true_type == 0:
        return NEGATIVE
    if policy.delta > 0 and rng.random() < policy.delta:
        return POSITIVE  # correct for a trustworthy product
    return NEGATIVE


def honest_forward_decision(pos_count: int, neg_count: int, degree: int) -> int:
    """Majority rule over ALL neighbors, not just responders: forward a
    polarity only when strictly more than half the neighbors sent it."""
    if pos_count + neg_count > degree:
        raise ValueError("received more recommendations than neighbors")
    if 2 * pos_count > degree:
        return POSITIVE
    if 2 * neg_count > degree:
        return NEGATIVE
    return SILENT


def choose_purchase(effective: np.ndarray, rng) -> int:
    """Pick the 1-based product with the most effective recommendations
    (positive minus negative). Ties break uniformly; a buyer with no
    recommendations at all picks uniformly over every product."""
    effective = np.asarray(effective)
    if np.all(effective == 0):
        return int(rng.integers(len(effective))) + 1
    best = effective.max()
    winners = np.flatnonzero(effective == best)
    return int(winners[rng.integers(len(winners))]) + 1
