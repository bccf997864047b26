"""Ingest social-rating data (user,item,rating CSV plus an edge list),
binarize ratings, inject synthetic dishonest behavior, and replay the
detector's rating sequence as detection rounds.

Ids in both files are opaque strings, mapped to dense integers on load;
the mapping can be exported. A neighbor participates in a round when she
rated that round's item anywhere in the dataset, so sparse raters sit in
the suspicious set for a long time.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .detect import DetectorState, RoundObservation, detect_round_baseline, pfn_theoretic
from .graph import Graph, GlpParams, generate_glp, write_edge_list
from .market import POSITIVE, NEGATIVE, dishonest_policy, dishonest_recommend
from .metrics import GroundTruth, empirical_pfn, empirical_pfp

logger = logging.getLogger(__name__)

RATING_MIN = 0.5
RATING_MAX = 5.0
RATING_STEP = 0.5


class IdMap:
    """Opaque string ids -> dense integers, first-seen order."""

    def __init__(self):
        self._to_int: dict[str, int] = {}
        self._to_str: list[str] = []

    def get(self, token: str) -> int:
        if token not in self._to_int:
            self._to_int[token] = len(self._to_str)
            self._to_str.append(token)
        return self._to_int[token]

    def __len__(self) -> int:
        return len(self._to_str)

    def token(self, idx: int) -> str:
        return self._to_str[idx]

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["id", "token"])
            for i, tok in enumerate(self._to_str):
                writer.writerow([i, tok])


@dataclass(frozen=True)
class RatingRecord:
    user: int
    item: int
    rating: float
    order_index: int


@dataclass
class RatingData:
    records: list
    user_map: IdMap
    item_map: IdMap


@dataclass(frozen=True)
class ReplayConfig:
    detector: int
    dishonest_fraction: float
    promoted_item: int
    delta: float = 0.1
    binarize_threshold: float = 2.5
    p: float = 0.8
    min_overlap: int = 2
    min_usable_neighbors: int = 10

    def __post_init__(self):
        if not 0.0 <= self.dishonest_fraction < 1.0:
            raise ValueError("dishonest_fraction must be in [0,1)")
        if not RATING_MIN <= self.binarize_threshold <= RATING_MAX:
            raise ValueError("binarize_threshold must lie within the rating range")


def _on_grid(value: float) -> bool:
    if not (RATING_MIN <= value <= RATING_MAX):
        return False
    steps = (value - RATING_MIN) / RATING_STEP
    return abs(steps - round(steps)) < 1e-9


@dataclass
class LoadedGraph:
    graph: Graph
    id_map: IdMap
    duplicate_edges: int
    self_loops: int


def load_graph(path, id_map: IdMap | None = None) -> LoadedGraph:
    """Read an edge list (`u v` per line, optional `# nodes=.. edges=..`
    header). Duplicates are merged and self-loops dropped, with counts
    reported; malformed lines raise with their line number."""
    id_map = id_map if id_map is not None else IdMap()
    edges: set[tuple[int, int]] = set()
    header_nodes = header_edges = None
    duplicates = self_loops = 0
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for part in line[1:].replace(",", " ").split():
                    if part.startswith("nodes="):
                        header_nodes = int(part.split("=", 1)[1])
                    elif part.startswith("edges="):
                        header_edges = int(part.split("=", 1)[1])
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            u, v = id_map.get(parts[0]), id_map.get(parts[1])
            if u == v:
                self_loops += 1
                continue
            key = (u, v) if u < v else (v, u)
            if key in edges:
                duplicates += 1
                continue
            edges.add(key)
    node_count = len(id_map)
    if header_nodes is not None and header_nodes != node_count:
        logger.warning(
            "%s: header says %d nodes, file names %d", path, header_nodes, node_count
        )
        node_count = max(node_count, header_nodes)
    if header_edges is not None and header_edges != len(edges):
        logger.warning(
            "%s: header says %d edges, deduplicated file has %d", path, header_edges, len(edges)
        )
    return LoadedGraph(
        graph=Graph(node_count, edges),
        id_map=id_map,
        duplicate_edges=duplicates,
        self_loops=self_loops,
    )


def load_ratings(path, user_map: IdMap | None = None, item_map: IdMap | None = None) -> RatingData:
    """Read `user,item,rating[,order]` rows. Ratings must sit on the
    half-point grid; violations raise with the offending line number.
    A missing order column falls back to file order."""
    user_map = user_map if user_map is not None else IdMap()
    item_map = item_map if item_map is not None else IdMap()
    records: list[RatingRecord] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].strip().lower() == "user":
                continue
            if len(row) not in (3, 4):
                raise ValueError(f"{path}:{lineno}: expected 3 or 4 columns, got {len(row)}")
            try:
                rating = float(row[2])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad rating {row[2]!r}") from exc
            if not _on_grid(rating):
                raise ValueError(
                    f"{path}:{lineno}: rating {rating} is off the "
                    f"[{RATING_MIN}, {RATING_MAX}] half-point grid"
                )
            order = int(row[3]) if len(row) == 4 else lineno
            records.append(
                RatingRecord(
                    user=user_map.get(row[0].strip()),
                    item=item_map.get(row[1].strip()),
                    rating=rating,
                    order_index=order,
                )
            )
    return RatingData(records=records, user_map=user_map, item_map=item_map)


def binarize(records, threshold: float = 2.5) -> dict:
    """(user, item) -> 1 for ratings strictly above the threshold, else 0.
    The threshold itself counts as a low rating."""
    out: dict[tuple[int, int], int] = {}
    for idx, rec in enumerate(records):
        if not _on_grid(rec.rating):
            raise ValueError(f"record {idx}: rating {rec.rating} off grid")
        out[(rec.user, rec.item)] = 1 if rec.rating > threshold else 0
    return out


@dataclass
class ConsensusReport:
    per_item_agreement: dict
    fraction_above: float
    threshold: float


def consensus_report(binarized: dict, agreement_threshold: float = 0.75) -> ConsensusReport:
    """Per-item fraction of raters agreeing with the item's majority
    valuation (items with at least two raters), plus the share of items
    whose agreement exceeds the threshold."""
    ones: dict[int, int] = {}
    totals: dict[int, int] = {}
    for (_, item), value in binarized.items():
        totals[item] = totals.get(item, 0) + 1
        ones[item] = ones.get(item, 0) + value
    agreement = {}
    for item, total in totals.items():
        if total < 2:
            continue
        majority = max(ones[item], total - ones[item])
        agreement[item] = majority / total
    if not agreement:
        raise ValueError("no item has at least two raters")
    above = sum(1 for a in agreement.values() if a > agreement_threshold)
    return ConsensusReport(
        per_item_agreement=agreement,
        fraction_above=above / len(agreement),
        threshold=agreement_threshold,
    )


@dataclass
class ReplayResult:
    rounds: np.ndarray
    pfp_empirical: np.ndarray
    pfn_empirical: np.ndarray
    pfp_theoretic: np.ndarray
    pfn_theoretic: np.ndarray
    usable_neighbors: frozenset
    dishonest_neighbors: frozenset
    items_replayed: list


def inject_and_replay(graph: Graph, data: RatingData, config: ReplayConfig, rng) -> ReplayResult:
    """Turn the detector's rating sequence into detection rounds.

    Each detector rating is one purchase, in order_index order (file order
    breaks ties). Neighbors overlapping fewer than min_overlap of her items
    are ignored. A participating neighbor recommends her binary valuation
    of the round's item; flagged dishonest neighbors instead follow the
    probabilistic promotion strategy on their own rating schedule.
    """
    binary = binarize(data.records, config.binarize_threshold)
    det = config.detector
    if not 0 <= det < graph.node_count:
        raise ValueError(f"detector {det} not in graph")

    det_records = sorted(
        (r for r in data.records if r.user == det),
        key=lambda r: (r.order_index, r.item),
    )
    if len(det_records) < 2:
        raise ValueError("detector needs at least two rated items to replay")
    det_items = [r.item for r in det_records]
    det_item_set = set(det_items)

    rated_by: dict[int, set[int]] = {}
    for (user, item) in binary:
        rated_by.setdefault(user, set()).add(item)

    usable = []
    for nbr in graph.neighbors(det):
        nbr = int(nbr)
        overlap = len(rated_by.get(nbr, set()) & det_item_set)
        if overlap >= config.min_overlap:
            usable.append(nbr)
    if len(usable) < config.min_usable_neighbors:
        raise ValueError(
            f"detector has {len(usable)} usable neighbors, "
            f"needs {config.min_usable_neighbors}"
        )

    n_dis = int(round(config.dishonest_fraction * len(usable)))
    flagged = set(
        int(x) for x in rng.choice(usable, size=n_dis, replace=False)
    ) if n_dis else set()
    policy = dishonest_policy(promoted_product=config.promoted_item, delta=config.delta)
    truth = GroundTruth(dishonest=frozenset(flagged), honest=frozenset(set(usable) - flagged))

    state = DetectorState(neighbors=set(usable), p=config.p)
    pfp_emp, pfn_emp, pfp_th, pfn_th = [], [], [], []
    for rec in det_records:
        item = rec.item
        t_i = binary[(det, item)]
        correct_pol = POSITIVE if t_i == 1 else NEGATIVE
        correct, wrong, silent = set(), set(), set()
        for nbr in usable:
            if item not in rated_by.get(nbr, set()):
                silent.add(nbr)
                continue
            if nbr in flagged:
                pol = dishonest_recommend(policy, item, binary[(nbr, item)], rng)
            else:
                pol = POSITIVE if binary[(nbr, item)] == 1 else NEGATIVE
            (correct if pol == correct_pol else wrong).add(nbr)
        obs = RoundObservation(
            product_type=t_i,
            correct=frozenset(correct),
            wrong=frozenset(wrong),
            silent=frozenset(silent),
        )
        detect_round_baseline(state, obs, rng)
        pfp_emp.append(empirical_pfp(state.suspicious, truth))
        pfn_emp.append(empirical_pfn(state.suspicious, truth) if flagged else float("nan"))
        pfp_th.append(state.pfp_theoretic)
        pfn_th.append(pfn_theoretic(config.delta, state.detectable_count))

    return ReplayResult(
        rounds=np.arange(1, len(det_records) + 1),
        pfp_empirical=np.array(pfp_emp),
        pfn_empirical=np.array(pfn_emp),
        pfp_theoretic=np.array(pfp_th),
        pfn_theoretic=np.array(pfn_th),
        usable_neighbors=frozenset(usable),
        dishonest_neighbors=frozenset(flagged),
        items_replayed=det_items,
    )


@dataclass(frozen=True)
class SampleParams:
    """Knobs for the bundled semi-synthetic sample generator."""

    num_users: int = 500
    num_items: int = 120
    high_consensus_fraction: float = 0.9
    agree_high: float = 0.85
    agree_low: float = 0.5
    detector_ratings: int = 60
    neighbor_mean_ratings: float = 8.0
    background_mean_ratings: float = 3.0
    seed: int = 0


def generate_sample(params: SampleParams):
    """Build a small dataset in the real schema: a scale-free friendship
    graph and sparse, heavy-tailed rating schedules with planted per-item
    consensus. The detector is the highest-degree user and rates densely;
    her neighbors rate enough for overlap, everyone else is background.

    Returns (graph, RatingData, detector_id, construction metadata).
    """
    rng = np.random.default_rng(params.seed)
    g = generate_glp(
        GlpParams(
            target_nodes=params.num_users,
            initial_clique=8,
            edges_per_step=5,
            p_add_edges=0.2,
            beta=-3.5,
            seed=params.seed,
        )
    )
    degrees = g.degrees()
    detector = int(np.argmax(degrees))

    quality = (rng.random(params.num_items) < 0.6).astype(np.int8)
    high_consensus = rng.random(params.num_items) < params.high_consensus_fraction
    item_ids = np.arange(params.num_items)
    # popularity-weighted item draws so consensus items get enough raters
    item_weights = rng.pareto(1.5, size=params.num_items) + 1.0
    item_weights /= item_weights.sum()

    neighbor_set = set(int(x) for x in g.neighbors(detector))
    rows: list[tuple[str, str, float, int]] = []

    def rating_value(user_agrees: bool, item: int) -> float:
        good = bool(quality[item]) == user_agrees
        if good:
            return float(rng.choice([3.0, 3.5, 4.0, 4.5, 5.0]))
        return float(rng.choice([0.5, 1.0, 1.5, 2.0, 2.5]))

    def emit_user(user: int, n_ratings: int, forced_items=None) -> None:
        if forced_items is not None:
            items = list(forced_items)
        else:
            n_ratings = max(0, n_ratings)
            if n_ratings == 0:
                return
            items = list(
                rng.choice(item_ids, size=min(n_ratings, params.num_items), replace=False, p=item_weights)
            )
        for item in items:
            agree_p = params.agree_high if high_consensus[item] else params.agree_low
            agrees = rng.random() < agree_p
            rows.append((f"u{user}", f"m{item}", rating_value(agrees, int(item)), 0))

    det_items = rng.choice(
        item_ids, size=min(params.detector_ratings, params.num_items), replace=False, p=item_weights
    )
    emit_user(detector, 0, forced_items=det_items)
    for nbr in sorted(neighbor_set):
        emit_user(nbr, int(rng.poisson(params.neighbor_mean_ratings)))
    for user in range(params.num_users):
        if user == detector or user in neighbor_set:
            continue
        emit_user(user, int(rng.poisson(params.background_mean_ratings)))

    order = rng.permutation(len(rows))
    # user ids in the id map must line up with graph node ids
    user_map, item_map = IdMap(), IdMap()
    for i in range(params.num_users):
        user_map.get(f"u{i}")
    records = [
        RatingRecord(
            user=user_map.get(rows[i][0]),
            item=item_map.get(rows[i][1]),
            rating=rows[i][2],
            order_index=int(order[i]),
        )
        for i in range(len(rows))
    ]
    data = RatingData(records=records, user_map=user_map, item_map=item_map)
    meta = {
        "quality": quality,
        "high_consensus": high_consensus,
        "agree_high": params.agree_high,
        "agree_low": params.agree_low,
        "item_map_token": lambda i: f"m{i}",
    }
    return g, data, detector, meta


def write_sample(params: SampleParams, ratings_path, edges_path):
    """Materialize the sample to disk in the loader's schema. Both files
    use the same user tokens so they can share one id space on load."""
    g, data, detector, _meta = generate_sample(params)
    with open(edges_path, "w") as f:
        f.write(f"# nodes={g.node_count} edges={g.edge_count}\n")
        for u, v in sorted(g.edges):
            f.write(f"{data.user_map.token(u)} {data.user_map.token(v)}\n")
    with open(ratings_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["user", "item", "rating", "order"])
        for rec in data.records:
            writer.writerow(
                [
                    data.user_map.token(rec.user),
                    data.item_map.token(rec.item),
                    f"{rec.rating:.1f}",
                    rec.order_index,
                ]
            )
    return g, data, detector
