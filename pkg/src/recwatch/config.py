"""Experiment configuration: a sectioned key/value file fully determines
a run (graph, market, detection, engine, replication, output).

Defaults mirror the reference simulation settings: delta=0.1, p=0.8,
5% dishonest users, one promoted product out of five, and one detection
round per 10% |V| purchases.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .detect import Variant
from .graph import GlpParams

EXPERIMENT_KINDS = (
    "market_share",
    "detection",
    "cooperative",
    "churn",
    "rounds_distribution",
    "replay",
)

FIGURE_FILES = {
    "market_share": "fig2_market_share.csv",
    "detection": "fig3_pfp_pfn.csv",
    "cooperative": "fig4_coop_pfp.csv",
    "churn": "fig5_churn_pfp.csv",
    "rounds_distribution": "fig6_r_pmf.csv",
    "replay": "fig7_dataset.csv",
}


@dataclass
class GraphConfig:
    target_nodes: int = 8000
    initial_clique: int = 10
    edges_per_step: int = 7
    p_add_edges: float = 0.2
    beta: float = -5.4
    edges_file: str = ""

    def glp_params(self, seed: int) -> GlpParams:
        return GlpParams(
            target_nodes=self.target_nodes,
            initial_clique=self.initial_clique,
            edges_per_step=self.edges_per_step,
            p_add_edges=self.p_add_edges,
            beta=self.beta,
            seed=seed,
        )


@dataclass
class MarketConfig:
    num_products: int = 5
    promoted_types: int = 1
    dishonest_fraction: float = 0.05
    delta: float = 0.1


@dataclass
class DetectionConfig:
    p: float = 0.8
    pfp_star: float = 0.01
    variant: str = "baseline"
    churn_cooperative: bool = False
    round_cap: int = 500


@dataclass
class EngineConfig:
    purchase_fraction: float = 0.10
    rounds: int = 25
    initial_owned: int = 1
    owner_chattiness: float = 1.0
    p_new_neighbor: float = 0.0
    p_leave: float = 0.0
    detector_min_degree: int = 1
    detector_max_degree: int = 0  # 0 = unbounded
    detector_min_dishonest: int = 1
    total_purchases: int = 0  # market_share runs: stop after this many


@dataclass
class ReplayFileConfig:
    ratings_file: str = ""
    edges_file: str = ""
    dishonest_fraction: float = 0.1
    delta: float = 0.1
    p: float = 0.8
    binarize_threshold: float = 2.5
    min_overlap: int = 2
    min_usable_neighbors: int = 10
    promoted_item: str = ""  # token; empty = most-rated item
    detector: str = ""  # token; empty = best-connected eligible user
    sample_users: int = 500
    sample_items: int = 120
    sample_detector_ratings: int = 60


@dataclass
class ReplicationConfig:
    num_replicates: int = 50
    base_seed: int = 1
    workers: int = 1


@dataclass
class ExperimentConfig:
    kind: str = "detection"
    graph: GraphConfig = field(default_factory=GraphConfig)
    market: MarketConfig = field(default_factory=MarketConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    replay: ReplayFileConfig = field(default_factory=ReplayFileConfig)
    replication: ReplicationConfig = field(default_factory=ReplicationConfig)
    out_dir: str = "out"

    def validate(self) -> list[str]:
        """All violated invariants, one `section.field: why` line each."""
        errors: list[str] = []
        if self.kind not in EXPERIMENT_KINDS:
            errors.append(f"experiment.kind: unknown kind {self.kind!r}")
        g = self.graph
        if not g.edges_file:
            try:
                g.glp_params(seed=0).validate()
            except ValueError as exc:
                errors.append(f"graph: {exc}")
        m = self.market
        if m.num_products < 2:
            errors.append("market.num_products: need at least 2 products")
        if not 1 <= m.promoted_types < m.num_products:
            errors.append("market.promoted_types: need 1 <= promoted < num_products")
        if not 0.0 <= m.dishonest_fraction < 1.0:
            errors.append("market.dishonest_fraction: must be in [0,1)")
        if not 0.0 <= m.delta <= 1.0:
            errors.append("market.delta: must be in [0,1]")
        d = self.detection
        if not 0.0 <= d.p <= 1.0:
            errors.append("detection.p: must be in [0,1]")
        if not 0.0 < d.pfp_star < 1.0:
            errors.append("detection.pfp_star: must be in (0,1)")
        if d.variant not in [v.value for v in Variant]:
            errors.append(f"detection.variant: unknown variant {d.variant!r}")
        if d.round_cap < 1:
            errors.append("detection.round_cap: must be >= 1")
        e = self.engine
        if not 0.0 < e.purchase_fraction <= 1.0:
            errors.append("engine.purchase_fraction: must be in (0,1]")
        if e.rounds < 1:
            errors.append("engine.rounds: must be >= 1")
        if e.initial_owned < 0 or e.initial_owned > m.num_products:
            errors.append("engine.initial_owned: must be in [0, num_products]")
        if not 0.0 < e.owner_chattiness <= 1.0:
            errors.append("engine.owner_chattiness: must be in (0,1]")
        for name in ("p_new_neighbor", "p_leave"):
            if not 0.0 <= getattr(e, name) <= 1.0:
                errors.append(f"engine.{name}: must be in [0,1]")
        r = self.replication
        if r.num_replicates < 1:
            errors.append("replication.num_replicates: must be >= 1")
        if r.workers < 1:
            errors.append("replication.workers: must be >= 1")
        rp = self.replay
        if self.kind == "replay":
            if not 0.0 <= rp.dishonest_fraction < 1.0:
                errors.append("replay.dishonest_fraction: must be in [0,1)")
            if not 0.0 <= rp.delta <= 1.0:
                errors.append("replay.delta: must be in [0,1]")
            if not 0.0 <= rp.p <= 1.0:
                errors.append("replay.p: must be in [0,1]")
            if bool(rp.ratings_file) != bool(rp.edges_file):
                errors.append("replay: ratings_file and edges_file must be given together")
        return errors


_SECTIONS = {
    "graph": GraphConfig,
    "market": MarketConfig,
    "detection": DetectionConfig,
    "engine": EngineConfig,
    "replay": ReplayFileConfig,
    "replication": ReplicationConfig,
}


def _coerce(raw: str, target_type: type):
    if target_type is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return target_type(raw)


def load_config(path) -> ExperimentConfig:
    """Parse a config file. Unknown sections or keys are errors, as is any
    value that does not coerce to the field's type."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    cfg = ExperimentConfig()
    problems: list[str] = []
    for section in parser.sections():
        if section == "experiment":
            for key, raw in parser.items(section):
                if key == "kind":
                    cfg.kind = raw.strip()
                elif key == "out_dir":
                    cfg.out_dir = raw.strip()
                else:
                    problems.append(f"experiment.{key}: unknown key")
            continue
        if section == "output":
            for key, raw in parser.items(section):
                if key == "out_dir":
                    cfg.out_dir = raw.strip()
                else:
                    problems.append(f"output.{key}: unknown key")
            continue
        if section not in _SECTIONS:
            problems.append(f"{section}: unknown section")
            continue
        target = getattr(cfg, section)
        type_map = {f.name: type(getattr(target, f.name)) for f in fields(target)}
        for key, raw in parser.items(section):
            if key not in type_map:
                problems.append(f"{section}.{key}: unknown key")
                continue
            try:
                setattr(target, key, _coerce(raw, type_map[key]))
            except (ValueError, TypeError):
                problems.append(f"{section}.{key}: cannot parse {raw!r}")
    if problems:
        raise ConfigError(problems)
    return cfg


class ConfigError(Exception):
    def __init__(self, problems: list):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def validate_file(path) -> list[str]:
    """Parse + validate; returns the full list of field errors (empty when
    the file is usable)."""
    try:
        cfg = load_config(path)
    except FileNotFoundError as exc:
        return [str(exc)]
    except ConfigError as exc:
        return exc.problems
    return cfg.validate()


def write_default_config(path: Path, kind: str) -> None:
    presets = {
        "market_share": MARKET_SHARE_PRESET,
        "detection": DETECTION_PRESET,
        "cooperative": COOPERATIVE_PRESET,
        "churn": CHURN_PRESET,
        "rounds_distribution": ROUNDS_PRESET,
        "replay": REPLAY_PRESET,
    }
    Path(path).write_text(presets[kind])


MARKET_SHARE_PRESET = """\
[experiment]
kind = market_share

[graph]
target_nodes = 8000
initial_clique = 10
edges_per_step = 7
p_add_edges = 0.2
beta = -5.4

[market]
num_products = 5
promoted_types = 1
dishonest_fraction = 0.05
delta = 0.0

[engine]
purchase_fraction = 0.10
total_purchases = 10000
initial_owned = 0

[replication]
num_replicates = 10
base_seed = 1

[output]
out_dir = out/fig2
"""

DETECTION_PRESET = """\
[experiment]
kind = detection

[graph]
target_nodes = 8000
initial_clique = 10
edges_per_step = 7
p_add_edges = 0.2
beta = -5.4

[market]
num_products = 5
dishonest_fraction = 0.05
delta = 0.1

[detection]
p = 0.8
variant = baseline

[engine]
purchase_fraction = 0.10
rounds = 25
initial_owned = 1
detector_min_degree = 50
detector_min_dishonest = 5

[replication]
num_replicates = 120
base_seed = 1

[output]
out_dir = out/fig3
"""

COOPERATIVE_PRESET = """\
[experiment]
kind = cooperative

[graph]
target_nodes = 2000
initial_clique = 10
edges_per_step = 7
p_add_edges = 0.2
beta = -5.4

[market]
num_products = 5
dishonest_fraction = 0.05
delta = 0.1

[detection]
p = 0.8

[engine]
purchase_fraction = 0.10
rounds = 25
initial_owned = 1
detector_min_degree = 25
detector_min_dishonest = 2

[replication]
num_replicates = 50
base_seed = 1

[output]
out_dir = out/fig4
"""

CHURN_PRESET = """\
[experiment]
kind = churn

[graph]
target_nodes = 2000
initial_clique = 10
edges_per_step = 7
p_add_edges = 0.2
beta = -5.4

[market]
num_products = 5
dishonest_fraction = 0.05
delta = 0.1

[detection]
p = 0.8

[engine]
purchase_fraction = 0.10
rounds = 80
initial_owned = 1
p_new_neighbor = 0.3
p_leave = 0.02
detector_min_degree = 30
detector_min_dishonest = 2

[replication]
num_replicates = 30
base_seed = 1

[output]
out_dir = out/fig5
"""

ROUNDS_PRESET = """\
[experiment]
kind = rounds_distribution

[graph]
target_nodes = 1200
initial_clique = 16
edges_per_step = 15
p_add_edges = 0.2
beta = -5.4

[market]
num_products = 5
dishonest_fraction = 0.05
delta = 0.1

[detection]
p = 0.8

[engine]
purchase_fraction = 0.10
rounds = 200
initial_owned = 5
owner_chattiness = 0.2
detector_min_degree = 16
detector_max_degree = 60
detector_min_dishonest = 1

[replication]
num_replicates = 1000
base_seed = 1

[output]
out_dir = out/fig6
"""

REPLAY_PRESET = """\
[experiment]
kind = replay

[replay]
dishonest_fraction = 0.1
delta = 0.1
p = 0.8
min_overlap = 2
min_usable_neighbors = 10
sample_users = 500
sample_items = 120
sample_detector_ratings = 60

[replication]
num_replicates = 25
base_seed = 1

[output]
out_dir = out/fig7
"""
