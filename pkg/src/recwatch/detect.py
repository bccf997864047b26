"""Suspicious-set shrinkage: per-round detection algorithms and their
closed-form performance estimators.

A detector starts by suspecting every neighbor and, on each detectable
round (own purchase valuated trustworthy, randomization coin with
probability p fires), intersects the suspicious set with the candidate set
of wrong-or-silent neighbors. Cooperative and churn-aware variants layer
on top of the same state.

Note on the candidate set: the per-round listing of the base algorithm is
implemented with the union of wrong and silent neighbors. The two sets are
disjoint, so an intersection would always be empty and would contradict
both the worked numbers and the false-positive recurrence; the union is
the only reading under which those agree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

logger = logging.getLogger(__name__)

ROUND_CAP_DEFAULT = 500


class Variant(Enum):
    BASELINE = "baseline"
    COOPERATIVE = "cooperative"
    CHURN = "churn"


@dataclass(frozen=True)
class RoundObservation:
    """What one detector sees in one round: her valuation of the purchased
    product, plus the partition of her neighbors by recommendation."""

    product_type: int  # 1 trustworthy, 0 untrustworthy
    correct: frozenset
    wrong: frozenset
    silent: frozenset

    def __post_init__(self):
        if self.product_type not in (0, 1):
            raise ValueError("product_type must be 0 or 1")

    def partition_of(self, neighbors) -> bool:
        total = len(self.correct) + len(self.wrong) + len(self.silent)
        union = self.correct | self.wrong | self.silent
        return total == len(union) and union == frozenset(neighbors)


@dataclass(frozen=True)
class NeighborReport:
    """A neighbor's shared view: her own neighbor set and suspicious set."""

    reporter: int
    their_neighbors: frozenset
    their_suspicious: frozenset

    def __post_init__(self):
        if not self.their_suspicious <= self.their_neighbors:
            raise ValueError("reported suspicious set must be within reported neighbors")

    def vouched(self) -> frozenset:
        """Nodes the reporter has cleared: her neighbors outside her
        suspicious set."""
        return self.their_neighbors - self.their_suspicious


@dataclass
class HistoryEntry:
    detectable: bool
    candidates: frozenset  # wrong-or-silent set; copied forward on idle rounds


@dataclass
class DetectorState:
    """Sequential per-detector state; confine one instance to one thread."""

    neighbors: set
    p: float
    suspicious: set = field(default_factory=set)
    history: list = field(default_factory=list)
    pfp_theoretic: float = 1.0
    detectable_count: int = 0
    last_cooperative_removed: frozenset = frozenset()

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0,1], got {self.p}")
        self.neighbors = set(self.neighbors)
        if not self.suspicious:
            self.suspicious = set(self.neighbors)

    @property
    def round_index(self) -> int:
        return len(self.history)

    def previous_candidates(self) -> frozenset:
        if self.history:
            return self.history[-1].candidates
        return frozenset(self.neighbors)


def clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _step_independent(state: DetectorState, obs: RoundObservation, rng) -> float:
    """Shared independent-detection step: maybe shrink, append history.

    Returns the shrink ratio |D(t-1) ∩ D(t)| / |D(t-1)| that every
    false-positive recurrence consumes (1 on non-detectable rounds, because
    the candidate set carries forward unchanged).
    """
    if not obs.partition_of(state.neighbors):
        raise ValueError("observation sets do not partition the neighbor set")
    prev = state.previous_candidates()
    detectable = obs.product_type == 1 and rng.random() < state.p
    if detectable:
        candidates = frozenset(obs.wrong | obs.silent)
        state.suspicious &= candidates
        state.detectable_count += 1
        ratio = (len(prev & candidates) / len(prev)) if prev else 0.0
    else:
        candidates = prev
        ratio = 1.0
    state.history.append(HistoryEntry(detectable=detectable, candidates=candidates))
    state.last_cooperative_removed = frozenset()
    return ratio


def _step_cooperative(state: DetectorState, reports, rng, weights: dict | None) -> int:
    """Apply neighbor reports; returns how many suspects were vouched out.

    Weights are snapshotted before any removal so report order is
    irrelevant. Reports from non-neighbors are ignored with a warning.
    """
    if weights is None:
        weights = trust_weights_default(state)
    seen = set()
    removed: set = set()
    for report in reports:
        if report.reporter in seen:
            raise ValueError(f"duplicate report from neighbor {report.reporter}")
        seen.add(report.reporter)
        if report.reporter not in state.neighbors:
            logger.warning("ignoring report from non-neighbor %s", report.reporter)
            continue
        w = weights.get(report.reporter, 0.0)
        if w <= 0.0:
            continue
        if w < 1.0 and rng.random() >= w:
            continue
        hit = state.suspicious & report.vouched()
        state.suspicious -= hit
        removed |= hit
    state.last_cooperative_removed = frozenset(removed)
    return len(removed)


def detect_round_baseline(state: DetectorState, obs: RoundObservation, rng) -> DetectorState:
    """One round of the randomized shrinkage algorithm."""
    ratio = _step_independent(state, obs, rng)
    state.pfp_theoretic = clamp01(state.pfp_theoretic * ratio)
    return state


def trust_weights_default(state: DetectorState) -> dict:
    """Trust only neighbors currently outside the suspicious set."""
    return {j: (0.0 if j in state.suspicious else 1.0) for j in state.neighbors}


def detect_round_cooperative(
    state: DetectorState,
    obs: RoundObservation,
    reports,
    rng,
    weights: dict | None = None,
) -> DetectorState:
    """Independent step, then removal of suspects vouched for by trusted
    reporters."""
    pfp_before = state.pfp_theoretic
    ratio = _step_independent(state, obs, rng)
    removed = _step_cooperative(state, reports, rng, weights)
    n = max(len(state.neighbors), 1)
    state.pfp_theoretic = pfp_theoretic_cooperative(pfp_before, ratio, removed, n)
    return state


def detect_round_churn(
    state: DetectorState,
    obs: RoundObservation,
    reports,
    new_ids,
    left_ids,
    rng,
    cooperative: bool = False,
    weights: dict | None = None,
) -> DetectorState:
    """Shrink first (baseline or cooperative), then fold in neighbor churn:
    arrivals join both the neighbor set and the suspicious set, departures
    leave both."""
    new_ids = set(new_ids)
    left_ids = set(left_ids)
    if new_ids & state.neighbors:
        raise ValueError("arriving neighbors must be disjoint from current neighbors")
    if not left_ids <= state.neighbors:
        raise ValueError("departing neighbors must be current neighbors")

    if not new_ids and not left_ids:
        # no churn this round: defer to the underlying algorithm outright so
        # the result is bit-identical to it
        if cooperative:
            return detect_round_cooperative(state, obs, reports, rng, weights=weights)
        return detect_round_baseline(state, obs, rng)

    n_prev = len(state.neighbors)
    pfp_before = state.pfp_theoretic
    ratio = _step_independent(state, obs, rng)
    removed = _step_cooperative(state, reports, rng, weights) if cooperative else 0

    left_suspicious = state.suspicious & left_ids
    state.suspicious = (state.suspicious | new_ids) - left_ids
    state.neighbors = (state.neighbors | new_ids) - left_ids
    n_now = len(state.neighbors)
    if n_now == 0:
        state.pfp_theoretic = 0.0
        return state
    state.pfp_theoretic = pfp_theoretic_churn(
        pfp_before, ratio, removed, len(new_ids), len(left_suspicious), n_prev, n_now
    )
    return state


def churn_membership(state: DetectorState, new_ids, left_ids) -> DetectorState:
    """Fold churn into a state without a shrink step: arrivals are
    suspected, departures dropped from both sets, and the false-positive
    estimate rescaled accordingly (shrink ratio 1, nothing vouched)."""
    new_ids = set(new_ids)
    left_ids = set(left_ids)
    if new_ids & state.neighbors:
        raise ValueError("arriving neighbors must be disjoint from current neighbors")
    if not left_ids <= state.neighbors:
        raise ValueError("departing neighbors must be current neighbors")
    n_prev = len(state.neighbors)
    pfp_before = state.pfp_theoretic
    left_suspicious = state.suspicious & left_ids
    state.suspicious = (state.suspicious | new_ids) - left_ids
    state.neighbors = (state.neighbors | new_ids) - left_ids
    n_now = len(state.neighbors)
    state.pfp_theoretic = (
        0.0
        if n_now == 0
        else pfp_theoretic_churn(
            pfp_before, 1.0, 0, len(new_ids), len(left_suspicious), n_prev, n_now
        )
    )
    return state


def pfn_theoretic(delta: float, detectable_count: int) -> float:
    """Probability a dishonest neighbor escaped: 1 - (1-delta)^(number of
    detectable rounds so far)."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must be in [0,1]")
    return 1.0 - (1.0 - delta) ** detectable_count


def pfp_theoretic_baseline(history, initial_neighbors) -> float:
    """Recompute the false-positive estimate from scratch: the product over
    detectable rounds of candidate-set overlap ratios, starting from the
    full initial neighbor set. An empty predecessor set collapses to 0."""
    pfp = 1.0
    prev = frozenset(initial_neighbors)
    for entry in history:
        if entry.detectable:
            if len(prev) == 0:
                return 0.0
            pfp *= len(prev & entry.candidates) / len(prev)
        prev = entry.candidates
    return clamp01(pfp)


def pfp_theoretic_cooperative(prev: float, ratio_term: float, c_size: int, n: int) -> float:
    """One step of the cooperative false-positive recurrence, clamped."""
    if n <= 0:
        raise ValueError("neighbor count must be positive")
    return clamp01((prev * ratio_term * n - c_size) / n)


def pfp_theoretic_churn(
    prev: float,
    ratio_term: float,
    c_size: int,
    nu_size: int,
    ls_size: int,
    n_prev: int,
    n_now: int,
) -> float:
    """One step of the churn-aware false-positive recurrence, clamped."""
    if n_now <= 0:
        raise ValueError("neighbor count after churn must be positive")
    return clamp01((prev * ratio_term * n_prev - c_size + nu_size - ls_size) / n_now)


@dataclass(frozen=True)
class EstimatorInputs:
    """Parameters of the closed-form detection-round distribution."""

    p_hc: float
    p_d: float
    neighbor_count: int
    dishonest_count: int
    delta: float = 0.0

    def __post_init__(self):
        for name in ("p_hc", "p_d", "delta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")
        if not 0 <= self.dishonest_count < self.neighbor_count:
            raise ValueError("need 0 <= dishonest_count < neighbor_count")


def r_distribution(inputs: EstimatorInputs, r_max: int) -> np.ndarray:
    """pmf of the number of rounds until no honest neighbor is suspicious.

    Entry r-1 holds P(R=r): a negative-binomial mixture over how many of
    the first r rounds were detectable, times the probability that the d-th
    detectable round cleared the last honest neighbor.
    """
    if inputs.p_d <= 0.0 or inputs.p_hc <= 0.0:
        raise ValueError("p_d and p_hc must be positive; the round count is infinite otherwise")
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    honest = inputs.neighbor_count - inputs.dishonest_count
    d = np.arange(1, r_max + 1)
    cleared_by = (1.0 - (1.0 - inputs.p_hc) ** d) ** honest
    cleared_before = (1.0 - (1.0 - inputs.p_hc) ** (d - 1)) ** honest
    clear_at = cleared_by - cleared_before  # P(D = d)

    pmf = np.zeros(r_max)
    for r in range(1, r_max + 1):
        dd = np.arange(1, r + 1)
        detectable_mix = stats.nbinom.pmf(r - dd, dd, inputs.p_d)
        pmf[r - 1] = float(np.dot(detectable_mix, clear_at[:r]))
    return pmf


def expected_detection_rounds(inputs: EstimatorInputs, tail_mass: float = 1e-9) -> float:
    """E[R] from the pmf, growing the horizon until the tail is negligible."""
    r_max = 64
    while True:
        pmf = r_distribution(inputs, r_max)
        if pmf.sum() >= 1.0 - tail_mass or r_max >= 65536:
            r = np.arange(1, r_max + 1)
            total = pmf.sum()
            return float(np.dot(r, pmf) / total) if total > 0 else float("inf")
        r_max *= 2


def estimate_phc(correct_round_counts, total_rounds: int) -> float:
    """Average, over honest neighbors, of the fraction of rounds in which
    the neighbor recommended correctly."""
    counts = list(correct_round_counts)
    if total_rounds <= 0:
        raise ValueError("total_rounds must be positive")
    if not counts:
        raise ValueError("need at least one honest neighbor")
    return float(np.mean([c / total_rounds for c in counts]))


def estimate_pd(trustworthy_history, p: float) -> float:
    """p times the observed fraction of rounds with a trustworthy purchase."""
    hist = list(trustworthy_history)
    if not hist:
        raise ValueError("history must be non-empty")
    return p * float(np.mean(hist))


@dataclass(frozen=True)
class RoundInputs:
    """Per-round feed for the complete detection loop."""

    observation: RoundObservation
    reports: tuple = ()
    new_ids: frozenset = frozenset()
    left_ids: frozenset = frozenset()


@dataclass
class TrajectoryRow:
    round_index: int
    detectable: bool
    pfp_theoretic: float
    pfn_theoretic: float
    suspicious_size: int
    removed_cooperative: int
    new_neighbors: int
    left_neighbors: int


@dataclass
class CompleteResult:
    blacklist: set
    trajectory: list
    reached_threshold: bool
    rounds: int


def run_complete(
    state: DetectorState,
    round_source,
    pfp_star: float,
    rng,
    variant: Variant = Variant.BASELINE,
    round_cap: int = ROUND_CAP_DEFAULT,
    churn_cooperative: bool = False,
    attacker_delta: float | None = None,
) -> CompleteResult:
    """Iterate rounds until the theoretic false-positive probability falls
    to pfp_star, then blacklist whatever is left suspicious.

    round_source is an iterable of RoundInputs. Hitting the round cap
    without reaching the threshold is flagged, not silently returned.
    An emptied suspicious set also terminates, with pfp defined as 0.
    """
    if not 0.0 < pfp_star < 1.0:
        raise ValueError("pfp_star must be in (0,1)")
    trajectory: list[TrajectoryRow] = []
    reached = False
    rounds = 0
    for inputs in round_source:
        rounds += 1
        if variant is Variant.BASELINE:
            detect_round_baseline(state, inputs.observation, rng)
        elif variant is Variant.COOPERATIVE:
            detect_round_cooperative(state, inputs.observation, inputs.reports, rng)
        else:
            detect_round_churn(
                state,
                inputs.observation,
                inputs.reports,
                inputs.new_ids,
                inputs.left_ids,
                rng,
                cooperative=churn_cooperative,
            )
        if not state.suspicious:
            state.pfp_theoretic = 0.0
        pfn = (
            pfn_theoretic(attacker_delta, state.detectable_count)
            if attacker_delta is not None
            else float("nan")
        )
        trajectory.append(
            TrajectoryRow(
                round_index=rounds,
                detectable=state.history[-1].detectable,
                pfp_theoretic=state.pfp_theoretic,
                pfn_theoretic=pfn,
                suspicious_size=len(state.suspicious),
                removed_cooperative=len(state.last_cooperative_removed),
                new_neighbors=len(inputs.new_ids),
                left_neighbors=len(inputs.left_ids),
            )
        )
        if state.pfp_theoretic <= pfp_star:
            reached = True
            break
        if rounds >= round_cap:
            break
    if not reached:
        logger.warning(
            "round cap %d reached with pfp=%.4f > pfp_star=%.4f; partial result",
            rounds,
            state.pfp_theoretic,
            pfp_star,
        )
    return CompleteResult(
        blacklist=set(state.suspicious),
        trajectory=trajectory,
        reached_threshold=reached,
        rounds=rounds,
    )
