"""Scale-free social graph generation and structural measurements.

The generator follows the GLP (generalized linear preference) growth scheme:
starting from a small clique, each step either inserts edges between existing
nodes or attaches a new node, with endpoints drawn proportionally to
degree + beta. The result is a power-law degree distribution with a dense
hub core, which gives the high average local clustering typical of online
social networks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special


@dataclass(frozen=True)
class GlpParams:
    """Parameters for the preferential-attachment growth process."""

    target_nodes: int
    initial_clique: int = 3
    edges_per_step: int = 1
    p_add_edges: float = 0.0
    beta: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.edges_per_step < 1:
            raise ValueError("edges_per_step must be >= 1")
        if not (self.target_nodes > self.initial_clique >= self.edges_per_step):
            raise ValueError(
                "need target_nodes > initial_clique >= edges_per_step, got "
                f"{self.target_nodes} / {self.initial_clique} / {self.edges_per_step}"
            )
        if not 0.0 <= self.p_add_edges <= 1.0:
            raise ValueError(f"p_add_edges must be in [0, 1], got {self.p_add_edges}")
        if self.beta <= -self.edges_per_step:
            raise ValueError(
                f"beta must be > -edges_per_step so attachment weights stay "
                f"positive, got beta={self.beta}"
            )


# Defaults tuned so that ~8,000 nodes come out near 70,000 edges with
# average local clustering around 0.3 and a degree exponent in (2, 3).
PAPER_SCALE_GLP = GlpParams(
    target_nodes=8000,
    initial_clique=10,
    edges_per_step=7,
    p_add_edges=0.2,
    beta=-5.4,
    seed=0,
)


class Graph:
    """Immutable undirected graph over dense integer node ids.

    Adjacency is stored as one sorted numpy array per node. No self-loops,
    no duplicate edges.
    """

    def __init__(self, node_count: int, edges):
        adj: list[set[int]] = [set() for _ in range(node_count)]
        edge_set: set[tuple[int, int]] = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValueError(f"edge ({u},{v}) out of range for {node_count} nodes")
            key = (u, v) if u < v else (v, u)
            if key in edge_set:
                raise ValueError(f"duplicate edge {key}")
            edge_set.add(key)
            adj[u].add(v)
            adj[v].add(u)
        self.node_count = node_count
        self.edges = edge_set
        self.adjacency = [np.array(sorted(s), dtype=np.int64) for s in adj]

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def neighbors(self, node: int) -> np.ndarray:
        return self.adjacency[node]

    def is_connected(self) -> bool:
        if self.node_count == 0:
            return True
        seen = np.zeros(self.node_count, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in self.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        return bool(seen.all())


@dataclass(frozen=True)
class DegreeFit:
    """Discrete power-law fit of a degree sequence."""

    exponent_gamma: float
    xmin: int
    ks_statistic: float

    def __post_init__(self):
        if not np.isfinite(self.exponent_gamma):
            raise ValueError("exponent must be finite")
        if self.xmin < 1:
            raise ValueError("xmin must be >= 1")


def generate_glp(params: GlpParams) -> Graph:
    """Grow a scale-free graph by generalized linear preference.

    Each step: with probability p_add_edges insert edges_per_step edges
    between existing nodes (both ends preferential), otherwise attach a new
    node with edges_per_step preferential links. Endpoint collisions and
    duplicate edges are re-drawn so the edge count is predictable.
    Deterministic for a fixed seed.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)

    n0 = params.initial_clique
    m = params.edges_per_step
    beta = params.beta

    degree = np.zeros(params.target_nodes, dtype=np.int64)
    # endpoint pool: every node id appears once per incident edge, so a
    # uniform draw from the pool is degree-proportional
    pool: list[int] = []
    edge_set: set[tuple[int, int]] = set()

    def add_edge(u: int, v: int) -> bool:
        key = (u, v) if u < v else (v, u)
        if u == v or key in edge_set:
            return False
        edge_set.add(key)
        degree[u] += 1
        degree[v] += 1
        pool.append(u)
        pool.append(v)
        return True

    for u in range(n0):
        for v in range(u + 1, n0):
            add_edge(u, v)

    def draw_node(n_current: int) -> int:
        # sample proportional to degree + beta via rejection on the pool;
        # for negative beta accept a degree-proportional draw with
        # probability (d+beta)/d <= 1, for positive beta mix in a uniform
        # component with the right mass
        if beta >= 0:
            total = 2 * len(edge_set) + beta * n_current
            while True:
                if rng.random() < (beta * n_current) / total:
                    return int(rng.integers(n_current))
                cand = pool[rng.integers(len(pool))]
                if cand < n_current:
                    return int(cand)
        while True:
            cand = pool[rng.integers(len(pool))]
            if cand >= n_current:
                continue
            d = degree[cand]
            if rng.random() < (d + beta) / d:
                return int(cand)

    n_current = n0
    max_attempts = 1000
    while n_current < params.target_nodes:
        if rng.random() < params.p_add_edges:
            for _ in range(m):
                for _ in range(max_attempts):
                    u = draw_node(n_current)
                    v = draw_node(n_current)
                    if add_edge(u, v):
                        break
        else:
            new = n_current
            picked: set[int] = set()
            while len(picked) < min(m, n_current):
                u = draw_node(n_current)
                if u not in picked:
                    picked.add(u)
            n_current += 1
            for u in picked:
                add_edge(new, u)

    return Graph(params.target_nodes, edge_set)


def clustering_coefficient(g: Graph) -> float:
    """Mean local clustering: triangles through a node over deg*(deg-1)/2.

    Nodes of degree < 2 contribute 0; an empty graph returns 0.
    """
    if g.node_count == 0:
        return 0.0
    total = 0.0
    for u in range(g.node_count):
        nbrs = g.adjacency[u]
        d = len(nbrs)
        if d < 2:
            continue
        nbr_set = set(int(x) for x in nbrs)
        links = 0
        for v in nbrs:
            for w in g.adjacency[v]:
                if int(w) in nbr_set:
                    links += 1
        links //= 2  # each neighbor-neighbor edge seen from both ends
        total += links / (d * (d - 1) / 2.0)
    return total / g.node_count


def fit_power_law(g: Graph) -> DegreeFit:
    """Fit p(k) ~ k^-gamma to the degree sequence by discrete MLE.

    xmin is chosen to minimize the KS distance between the empirical tail
    and the fitted model (the standard Clauset-Shalizi-Newman recipe).
    """
    if g.node_count < 100:
        raise ValueError("power-law fit needs at least 100 nodes")
    return fit_power_law_sequence(g.degrees())


def fit_power_law_sequence(degrees: np.ndarray) -> DegreeFit:
    degrees = np.asarray(degrees, dtype=np.int64)
    degrees = degrees[degrees >= 1]
    uniq = np.unique(degrees)
    if len(uniq) < 2:
        raise ValueError("degenerate degree sequence: all degrees equal")

    # cap candidate xmins so that a reasonable tail remains
    candidates = [int(x) for x in uniq[:-1]]
    if len(candidates) > 60:
        idx = np.unique(np.linspace(0, len(candidates) - 1, 60).astype(int))
        candidates = [candidates[i] for i in idx]

    best: tuple[float, float, int] | None = None
    for xmin in candidates:
        tail = degrees[degrees >= xmin]
        if len(tail) < 25:
            continue
        gamma = _mle_exponent(tail, xmin)
        ks = _ks_distance(tail, gamma, xmin)
        if best is None or ks < best[0]:
            best = (ks, gamma, xmin)
    if best is None:
        raise ValueError("no usable tail for power-law fit")
    ks, gamma, xmin = best
    return DegreeFit(exponent_gamma=float(gamma), xmin=int(xmin), ks_statistic=float(ks))


def _mle_exponent(tail: np.ndarray, xmin: int) -> float:
    """Maximize the discrete power-law log-likelihood over gamma."""
    log_sum = float(np.log(tail).sum())
    n = len(tail)

    # golden-section search on a bracket; the likelihood is unimodal in gamma
    def nll(gamma: float) -> float:
        return n * float(np.log(special.zeta(gamma, xmin))) + gamma * log_sum

    lo, hi = 1.01, 6.0
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = nll(c), nll(d)
    for _ in range(80):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = nll(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = nll(d)
    return (a + b) / 2.0


def _ks_distance(tail: np.ndarray, gamma: float, xmin: int) -> float:
    ks_max = int(tail.max())
    ks = np.arange(xmin, ks_max + 1, dtype=np.int64)
    z = special.zeta(gamma, xmin)
    pmf = ks.astype(float) ** (-gamma) / z
    model_cdf = np.cumsum(pmf)
    counts = np.bincount(tail, minlength=ks_max + 1)[xmin:]
    emp_cdf = np.cumsum(counts) / len(tail)
    return float(np.abs(emp_cdf - model_cdf).max())


def loglog_regression_exponent(degrees: np.ndarray, kmin: int = 1) -> float:
    """Cross-check exponent estimate: slope of log CCDF vs log k.

    For p(k) ~ k^-gamma the CCDF scales as k^-(gamma-1), so this returns
    1 + |slope|. Coarser than the MLE but independent of it.
    """
    degrees = np.asarray(degrees, dtype=np.int64)
    degrees = degrees[degrees >= kmin]
    uniq, counts = np.unique(degrees, return_counts=True)
    ccdf = 1.0 - np.cumsum(counts) / len(degrees)
    keep = ccdf > 0
    x = np.log(uniq[keep].astype(float))
    y = np.log(ccdf[keep])
    slope = np.polyfit(x, y, 1)[0]
    return 1.0 + abs(float(slope))


def write_edge_list(g: Graph, path) -> None:
    """Serialize as `u v` lines, 0-based ids, lexicographically sorted."""
    with open(path, "w") as f:
        f.write(f"# nodes={g.node_count} edges={g.edge_count}\n")
        for u, v in sorted(g.edges):
            f.write(f"{u} {v}\n")
