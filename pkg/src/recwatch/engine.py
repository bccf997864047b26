"""Round-based evolution of the network: recommendation exchange,
purchases with cascades to quiescence, and detector-side churn.

One round is the span between two successive purchases of a registered
detector. Within a round:

  1. counts and emission flags reset (recommendations do not persist
     across rounds);
  2. every dishonest user broadcasts her strategy vector (promoted product
     positive, every other product bad-mouthed except with probability
     delta), and every honest user re-states her valuation of each product
     she has purchased at some point -- this is why the chance of an honest
     neighbor recommending correctly grows as ownership spreads;
  3. the configured number of purchases happen one at a time, each
     followed by its recommendation cascade (majority-rule forwarding run
     to quiescence);
  4. each registered detector makes her own purchase and her neighbors are
     classified correct / wrong / silent against her valuation of the
     product she bought this round.

Recommendation spreading is instantaneous relative to purchases: each
cascade completes before the next purchase. A single run is strictly
sequential and deterministic for a fixed seed; replicates with different
seeds share nothing mutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detect import RoundObservation
from .graph import Graph
from .market import NEGATIVE, POSITIVE, SILENT, choose_purchase

_GROW_CHUNK = 64


@dataclass(frozen=True)
class ChurnModel:
    """Per-round arrival probability and per-neighbor departure probability
    for the detector's ego network."""

    p_new_neighbor: float = 0.0
    p_leave: float = 0.0

    def __post_init__(self):
        for name in ("p_new_neighbor", "p_leave"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")


@dataclass(frozen=True)
class PurchaseRecord:
    round_index: int
    buyer: int
    product: int


class Simulation:
    """Mutable simulation state over an immutable starting graph.

    Churn can attach fresh nodes to a detector, so node arrays grow past
    the original graph size; node ids stay dense.
    """

    def __init__(
        self,
        graph: Graph,
        honest_valuation: np.ndarray,
        dishonest_fraction: float,
        delta: float,
        promoted_types: int = 1,
        initial_owned: int = 0,
        owner_chattiness: float = 1.0,
        seed: int = 0,
        policy_seed: int | None = None,
    ):
        if not 0.0 <= dishonest_fraction < 1.0:
            raise ValueError("dishonest_fraction must be in [0,1)")
        if not 0.0 < owner_chattiness <= 1.0:
            raise ValueError("owner_chattiness must be in (0,1]")
        self.rng = np.random.default_rng(seed)
        policy_rng = self.rng if policy_seed is None else np.random.default_rng(policy_seed)
        self.owner_chattiness = float(owner_chattiness)
        self.num_products = len(honest_valuation)
        self.valuation = np.asarray(honest_valuation, dtype=np.int8)
        self.delta = float(delta)
        self.dishonest_fraction = float(dishonest_fraction)
        self.promoted_types = int(promoted_types)
        self.initial_owned = int(initial_owned)

        n = graph.node_count
        cap = n + _GROW_CHUNK
        self._n = n
        self._cap = cap
        self.adjacency = [a.copy() for a in graph.adjacency]
        self.degrees = np.zeros(cap, dtype=np.int64)
        self.degrees[:n] = graph.degrees()
        self.dishonest = np.zeros(cap, dtype=bool)
        self.promoted_product = np.zeros(cap, dtype=np.int64)
        self.owned = np.zeros((cap, self.num_products), dtype=bool)
        self.counts_pos = np.zeros((cap, self.num_products), dtype=np.int32)
        self.counts_neg = np.zeros((cap, self.num_products), dtype=np.int32)
        self.emitted = np.zeros((cap, self.num_products), dtype=np.int8)

        n_dis = int(round(dishonest_fraction * n))
        dis_ids = policy_rng.choice(n, size=n_dis, replace=False) if n_dis else np.array([], int)
        self.dishonest[dis_ids] = True
        if n_dis:
            self.promoted_product[dis_ids] = policy_rng.integers(1, promoted_types + 1, size=n_dis)
        for node in range(n):
            self._seed_ownership(node)

        self._edge_src, self._edge_dst = self._build_edge_arrays()
        self.detectors: list[int] = []
        self.purchase_log: list[PurchaseRecord] = []
        self.round_index = 0
        self.observation_log: list[tuple] | None = None
        self._honest_pool: np.ndarray | None = None

    # -- construction helpers -------------------------------------------------

    def _seed_ownership(self, node: int) -> None:
        if self.dishonest[node] or self.initial_owned <= 0:
            return
        k = min(self.initial_owned, self.num_products)
        prods = self.rng.choice(self.num_products, size=k, replace=False)
        self.owned[node, prods] = True

    def _build_edge_arrays(self):
        src = np.concatenate(
            [np.full(len(self.adjacency[u]), u, dtype=np.int64) for u in range(self._n)]
            or [np.array([], dtype=np.int64)]
        )
        dst = (
            np.concatenate([self.adjacency[u] for u in range(self._n)])
            if self._n
            else np.array([], dtype=np.int64)
        )
        return src, dst

    def _grow(self) -> None:
        extra = _GROW_CHUNK
        self._cap += extra

        def pad(a, shape2=None):
            pad_shape = (extra,) if shape2 is None else (extra, shape2)
            return np.concatenate([a, np.zeros(pad_shape, dtype=a.dtype)])

        self.degrees = pad(self.degrees)
        self.dishonest = pad(self.dishonest)
        self.promoted_product = pad(self.promoted_product)
        self.owned = pad(self.owned, self.num_products)
        self.counts_pos = pad(self.counts_pos, self.num_products)
        self.counts_neg = pad(self.counts_neg, self.num_products)
        self.emitted = pad(self.emitted, self.num_products)

    @property
    def node_count(self) -> int:
        return self._n

    def honest_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.dishonest[: self._n])

    def register_detector(self, node: int) -> None:
        if self.dishonest[node]:
            raise ValueError("a detector must be an honest user")
        if node not in self.detectors:
            self.detectors.append(int(node))
        self._honest_pool = None

    def enable_observation_log(self) -> None:
        self.observation_log = []

    def neighbor_ids(self, node: int) -> np.ndarray:
        return self.adjacency[node]

    def dishonest_neighbors(self, node: int) -> set:
        nbrs = self.adjacency[node]
        return set(int(x) for x in nbrs[self.dishonest[nbrs]])

    # -- per-round mechanics ---------------------------------------------------

    def _reset_round(self) -> None:
        self.counts_pos[: self._n] = 0
        self.counts_neg[: self._n] = 0
        self.emitted[: self._n] = 0

    def _strategy_polarities(self, dis_ids: np.ndarray) -> np.ndarray:
        """Polarity matrix for the dishonest broadcast. The promoted product
        is always positive; other products are correct with probability
        delta, negative otherwise (untrustworthy ones always negative)."""
        n_dis = len(dis_ids)
        coins = self.rng.random((n_dis, self.num_products))
        pol = np.full((n_dis, self.num_products), NEGATIVE, dtype=np.int8)
        trustworthy = self.valuation == 1
        correct = coins < self.dishonest_delta(dis_ids)[:, None]
        pol[:, trustworthy] = np.where(correct[:, trustworthy], POSITIVE, NEGATIVE)
        pol[np.arange(n_dis), self.promoted_product[dis_ids] - 1] = POSITIVE
        return pol

    def dishonest_delta(self, ids: np.ndarray) -> np.ndarray:
        return np.full(len(ids), self.delta)

    def _scatter_counts(self, product_col: int) -> None:
        """Push this round's not-yet-delivered emissions on one product to
        all receivers. Only used for the whole-column sweep."""
        pol = self.emitted[self._edge_src, product_col]
        recv_pos = self._edge_dst[pol == POSITIVE]
        recv_neg = self._edge_dst[pol == NEGATIVE]
        if len(recv_pos):
            self.counts_pos[:, product_col] += np.bincount(
                recv_pos, minlength=self._cap
            ).astype(np.int32)
        if len(recv_neg):
            self.counts_neg[:, product_col] += np.bincount(
                recv_neg, minlength=self._cap
            ).astype(np.int32)

    def _emit(self, node: int, product_col: int, polarity: int) -> bool:
        """Record one recommendation and deliver it to the node's neighbors.
        At most one emission per node, product, and round."""
        if self.emitted[node, product_col] != 0:
            return False
        self.emitted[node, product_col] = polarity
        nbrs = self.adjacency[node]
        if polarity == POSITIVE:
            self.counts_pos[nbrs, product_col] += 1
        else:
            self.counts_neg[nbrs, product_col] += 1
        return True

    def _forward_fixpoint(self, product_col: int) -> None:
        """Majority-rule forwarding to quiescence on one product: any honest
        node with a strict majority of all neighbors on one polarity, that
        has not yet spoken this round, emits once."""
        n = self._n
        emissions = 0
        while True:
            quiet = self.emitted[:n, product_col] == 0
            eligible = quiet & ~self.dishonest[:n] & (self.degrees[:n] > 0)
            pos_hit = eligible & (2 * self.counts_pos[:n, product_col] > self.degrees[:n])
            neg_hit = eligible & (2 * self.counts_neg[:n, product_col] > self.degrees[:n])
            hits = np.flatnonzero(pos_hit | neg_hit)
            if len(hits) == 0:
                return
            for node in hits:
                polarity = POSITIVE if pos_hit[node] else NEGATIVE
                self._emit(int(node), product_col, polarity)
                emissions += 1
                if emissions > n:
                    raise AssertionError("cascade exceeded one emission per node")

    def propagate_cascade(self, origin: int, polarity: int, product: int) -> None:
        """Seed one recommendation and run its cascade to quiescence."""
        col = product - 1
        if not self._emit(origin, col, polarity):
            raise ValueError("origin already emitted on this product this round")
        self._forward_fixpoint(col)

    def _opening_sweep(self) -> None:
        """Round-opening recommendation exchange: dishonest strategy
        broadcasts plus honest owners re-stating their valuations, then the
        forwarding fixpoint."""
        n = self._n
        dis_ids = np.flatnonzero(self.dishonest[:n])
        if len(dis_ids):
            self.emitted[dis_ids] = self._strategy_polarities(dis_ids)
        honest_owned = self.owned[:n] & ~self.dishonest[:n, None]
        if self.owner_chattiness < 1.0:
            speaks = self.rng.random((n, self.num_products)) < self.owner_chattiness
            honest_owned &= speaks
        polarity_by_type = np.where(self.valuation == 1, POSITIVE, NEGATIVE).astype(np.int8)
        self.emitted[:n] = np.where(
            honest_owned, polarity_by_type[None, :], self.emitted[:n]
        )
        for col in range(self.num_products):
            self._scatter_counts(col)
            self._forward_fixpoint(col)

    def _buyer_pool(self) -> np.ndarray:
        if self._honest_pool is None:
            pool = np.flatnonzero(~self.dishonest[: self._n])
            exclude = set(self.detectors)
            if exclude:
                pool = np.array([x for x in pool if int(x) not in exclude], dtype=np.int64)
            self._honest_pool = pool
        return self._honest_pool

    def _purchase(self, buyer: int) -> int:
        effective = (
            self.counts_pos[buyer].astype(np.int64) - self.counts_neg[buyer].astype(np.int64)
        )
        product = choose_purchase(effective, self.rng)
        self.purchase_log.append(PurchaseRecord(self.round_index, int(buyer), product))
        col = product - 1
        self.owned[buyer, col] = True
        polarity = POSITIVE if self.valuation[col] == 1 else NEGATIVE
        if self._emit(int(buyer), col, polarity):
            # full fixpoint scan only if some receiver actually crossed
            nbrs = self.adjacency[buyer]
            quiet = self.emitted[nbrs, col] == 0
            eligible = quiet & ~self.dishonest[nbrs]
            crossed = eligible & (
                (2 * self.counts_pos[nbrs, col] > self.degrees[nbrs])
                | (2 * self.counts_neg[nbrs, col] > self.degrees[nbrs])
            )
            if crossed.any():
                self._forward_fixpoint(col)
        return product

    def _observe(self, detector: int, product: int) -> RoundObservation:
        col = product - 1
        t = int(self.valuation[col])
        nbrs = self.adjacency[detector]
        em = self.emitted[nbrs, col]
        correct_pol = POSITIVE if t == 1 else NEGATIVE
        correct = frozenset(int(x) for x in nbrs[em == correct_pol])
        wrong = frozenset(int(x) for x in nbrs[(em != correct_pol) & (em != SILENT)])
        silent = frozenset(int(x) for x in nbrs[em == SILENT])
        if self.observation_log is not None:
            for x in sorted(correct):
                self.observation_log.append((self.round_index, detector, x, "correct"))
            for x in sorted(wrong):
                self.observation_log.append((self.round_index, detector, x, "wrong"))
            for x in sorted(silent):
                self.observation_log.append((self.round_index, detector, x, "silent"))
        return RoundObservation(product_type=t, correct=correct, wrong=wrong, silent=silent)

    def run_round(self, purchases_per_round: int) -> dict:
        """Advance one round; returns one observation per registered
        detector, keyed by detector id."""
        if purchases_per_round < 1:
            raise ValueError("purchases_per_round must be >= 1")
        self.round_index += 1
        self._reset_round()
        self._opening_sweep()

        pool = self._buyer_pool()
        if len(pool) == 0:
            raise ValueError("no honest non-detector users left to purchase")
        buyers = pool[self.rng.integers(len(pool), size=purchases_per_round)]
        for buyer in buyers:
            self._purchase(int(buyer))

        observations: dict[int, RoundObservation] = {}
        detector_products: dict[int, int] = {}
        for det in self.detectors:
            detector_products[det] = self._purchase(det)
        for det in self.detectors:
            observations[det] = self._observe(det, detector_products[det])
        return observations

    # -- churn -----------------------------------------------------------------

    def _add_node(self) -> int:
        node = self._n
        if node >= self._cap:
            self._grow()
        self._n += 1
        self.adjacency.append(np.array([], dtype=np.int64))
        self.dishonest[node] = self.rng.random() < self.dishonest_fraction
        if self.dishonest[node]:
            self.promoted_product[node] = int(self.rng.integers(1, self.promoted_types + 1))
        else:
            self._seed_ownership(node)
        self._honest_pool = None
        return node

    def _add_edge(self, u: int, v: int) -> None:
        self.adjacency[u] = np.sort(np.append(self.adjacency[u], v))
        self.adjacency[v] = np.sort(np.append(self.adjacency[v], u))
        self.degrees[u] += 1
        self.degrees[v] += 1
        self._edge_src = np.concatenate([self._edge_src, [u, v]])
        self._edge_dst = np.concatenate([self._edge_dst, [v, u]])

    def _remove_edge(self, u: int, v: int) -> None:
        self.adjacency[u] = self.adjacency[u][self.adjacency[u] != v]
        self.adjacency[v] = self.adjacency[v][self.adjacency[v] != u]
        self.degrees[u] -= 1
        self.degrees[v] -= 1
        keep = ~(
            ((self._edge_src == u) & (self._edge_dst == v))
            | ((self._edge_src == v) & (self._edge_dst == u))
        )
        self._edge_src = self._edge_src[keep]
        self._edge_dst = self._edge_dst[keep]

    def apply_churn(self, detector: int, model: ChurnModel) -> tuple[set, set]:
        """Evolve the detector's ego network: each existing neighbor leaves
        independently with p_leave; with p_new_neighbor one fresh user (a
        brand-new node, honest or dishonest per the configured fraction)
        befriends the detector. Returns (arrived, departed) id sets."""
        nbrs = self.adjacency[detector].copy()
        leave_mask = self.rng.random(len(nbrs)) < model.p_leave
        left = set(int(x) for x in nbrs[leave_mask])
        arrived: set = set()
        if self.rng.random() < model.p_new_neighbor:
            node = self._add_node()
            arrived.add(node)
        for v in left:
            self._remove_edge(detector, v)
        for v in arrived:
            self._add_edge(detector, v)
        return arrived, left


def write_purchase_log(records, path) -> None:
    with open(path, "w") as f:
        f.write("round,buyer,product\n")
        for r in records:
            f.write(f"{r.round_index},{r.buyer},{r.product}\n")


def write_observation_log(rows, path) -> None:
    with open(path, "w") as f:
        f.write("round,detector,neighbor,classification\n")
        for round_index, det, nbr, cls in rows:
            f.write(f"{round_index},{det},{nbr},{cls}\n")
