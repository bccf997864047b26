"""Experiment drivers: one per reproduced figure, each replicated over
deterministically derived seeds and reduced to CSV artifacts.

Replicate i of a run with base seed s derives all of its randomness from
SeedSequence(s + i) children, so results are identical no matter how many
workers execute the replicates.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import dataset as ds
from .config import FIGURE_FILES, ExperimentConfig
from .detect import (
    DetectorState,
    EstimatorInputs,
    NeighborReport,
    churn_membership,
    detect_round_baseline,
    detect_round_churn,
    detect_round_cooperative,
    estimate_pd,
    estimate_phc,
    expected_detection_rounds,
    pfn_theoretic,
    r_distribution,
)
from .engine import ChurnModel, Simulation
from .graph import Graph, generate_glp
from .market import POSITIVE
from .metrics import (
    ExperimentResult,
    GroundTruth,
    aggregate_market_shares,
    aggregate_replicates,
    empirical_pfn,
    empirical_pfp,
    market_share,
)

logger = logging.getLogger(__name__)


def _seeds(base_seed: int, rep: int, n: int = 6) -> list[int]:
    """n stable 63-bit seeds for one replicate."""
    ss = np.random.SeedSequence(base_seed + rep)
    state = ss.generate_state(n, dtype=np.uint64)
    return [int(x & np.uint64(0x7FFFFFFFFFFFFFFF)) for x in state]


def _build_graph(cfg: ExperimentConfig, seed: int) -> Graph:
    if cfg.graph.edges_file:
        return ds.load_graph(cfg.graph.edges_file).graph
    return generate_glp(cfg.graph.glp_params(seed=seed))


def _build_sim(cfg: ExperimentConfig, graph: Graph, dynamics_seed: int, policy_seed: int) -> Simulation:
    valuation = np.ones(cfg.market.num_products, dtype=np.int8)
    valuation[: cfg.market.promoted_types] = 0
    return Simulation(
        graph,
        valuation,
        dishonest_fraction=cfg.market.dishonest_fraction,
        delta=cfg.market.delta,
        promoted_types=cfg.market.promoted_types,
        initial_owned=cfg.engine.initial_owned,
        owner_chattiness=cfg.engine.owner_chattiness,
        seed=dynamics_seed,
        policy_seed=policy_seed,
    )


def pick_detector(sim: Simulation, rng, min_degree: int, max_degree: int, min_dishonest: int) -> int:
    """Uniform choice of an honest user with enough dishonest neighbors.
    Constraints relax stepwise (with a warning) if no candidate exists."""
    need_k, need_deg = min_dishonest, min_degree
    while True:
        cands = []
        for node in sim.honest_nodes():
            deg = int(sim.degrees[node])
            if deg < need_deg or (max_degree > 0 and deg > max_degree):
                continue
            if len(sim.dishonest_neighbors(int(node))) >= need_k:
                cands.append(int(node))
        if cands:
            return int(cands[rng.integers(len(cands))])
        if need_k > 1:
            need_k -= 1
        elif need_deg > 1:
            need_deg = need_deg // 2
        else:
            raise ValueError("no honest user with a dishonest neighbor exists")
        logger.warning("relaxing detector constraints to k>=%d, deg>=%d", need_k, need_deg)


def _purchases_per_round(cfg: ExperimentConfig, graph: Graph) -> int:
    return max(1, int(round(cfg.engine.purchase_fraction * graph.node_count)))


def _aggregate(results: list):
    """aggregate_replicates, degrading gracefully to a single replicate."""
    if len(results) >= 2:
        return aggregate_replicates(results)
    from .metrics import AggregateCurves

    single = results[0]
    t = len(single.pfp_theoretic)
    names = ("pfp_theoretic", "pfp_empirical", "pfn_theoretic", "pfn_empirical")
    return AggregateCurves(
        rounds=np.arange(1, t + 1),
        mean={n: np.asarray(getattr(single, n), dtype=float) for n in names},
        stderr={n: np.zeros(t) for n in names},
    )


# -- market share (fig 2) ------------------------------------------------------


def _market_share_replicate(cfg: ExperimentConfig, rep: int, dishonest: bool) -> np.ndarray:
    graph_seed, policy_seed, dyn_seed, *_ = _seeds(cfg.replication.base_seed, rep)
    scenario = cfg if dishonest else replace(cfg, market=replace(cfg.market, dishonest_fraction=0.0))
    graph = _build_graph(scenario, graph_seed)
    sim = _build_sim(scenario, graph, dyn_seed, policy_seed)
    per_round = _purchases_per_round(scenario, graph)
    total = scenario.engine.total_purchases or 10000
    done = 0
    while done < total:
        batch = min(per_round, total - done)
        sim.run_round(batch)
        done += batch
    return market_share(sim.purchase_log, scenario.market.num_products)


def run_market_share(cfg: ExperimentConfig) -> dict:
    reps = cfg.replication.num_replicates
    with_attack = _map_replicates(
        _market_share_replicate, [(cfg, i, True) for i in range(reps)], cfg.replication.workers
    )
    without = _map_replicates(
        _market_share_replicate, [(cfg, i, False) for i in range(reps)], cfg.replication.workers
    )
    res_a = [ExperimentResult(*([np.zeros(1)] * 4), market_shares=s) for s in with_attack]
    res_c = [ExperimentResult(*([np.zeros(1)] * 4), market_shares=s) for s in without]
    mean_a, se_a = aggregate_market_shares(res_a)
    mean_c, se_c = aggregate_market_shares(res_c)
    return {
        "kind": "market_share",
        "mean_attack": mean_a,
        "se_attack": se_a,
        "mean_clean": mean_c,
        "se_clean": se_c,
    }


# -- detection curves (figs 3-5) -----------------------------------------------


@dataclass
class DetectionTrace:
    result: ExperimentResult
    detector: int
    neighbor_count: int
    dishonest_count: int


def _detection_replicate(cfg: ExperimentConfig, rep: int, mode: str) -> DetectionTrace:
    """One replicate of the per-round detection experiment.

    mode: 'baseline', 'cooperative', 'churn_baseline' or 'churn_cooperative'.
    Cooperative modes register the detector's honest neighbors too, so they
    purchase, observe, and shrink their own suspicious sets to report from.
    The engine's randomness is untouched by the mode (matched seeds give
    matched purchase streams across modes).
    """
    graph_seed, policy_seed, dyn_seed, pick_seed, det_seed, nbr_seed = _seeds(
        cfg.replication.base_seed, rep
    )
    graph = _build_graph(cfg, graph_seed)
    sim = _build_sim(cfg, graph, dyn_seed, policy_seed)
    per_round = _purchases_per_round(cfg, graph)

    detector = pick_detector(
        sim,
        np.random.default_rng(pick_seed),
        cfg.engine.detector_min_degree,
        cfg.engine.detector_max_degree,
        cfg.engine.detector_min_dishonest,
    )
    sim.register_detector(detector)

    cooperative = mode in ("cooperative", "churn_cooperative")
    churn = mode.startswith("churn")
    churn_model = ChurnModel(cfg.engine.p_new_neighbor, cfg.engine.p_leave) if churn else None

    neighbor_states: dict[int, DetectorState] = {}
    neighbor_rngs: dict[int, np.random.Generator] = {}

    def enroll_reporter(node: int) -> None:
        if sim.dishonest[node] or node in neighbor_states:
            return
        sim.register_detector(node)
        neighbor_states[node] = DetectorState(
            neighbors=set(int(x) for x in sim.neighbor_ids(node)), p=cfg.detection.p
        )
        child = np.random.SeedSequence(entropy=nbr_seed, spawn_key=(node,))
        neighbor_rngs[node] = np.random.default_rng(child)

    # reporters are registered in every mode so the purchase stream is
    # identical whether or not their reports get used
    for nbr in sorted(int(x) for x in sim.neighbor_ids(detector)):
        enroll_reporter(nbr)

    state = DetectorState(
        neighbors=set(int(x) for x in sim.neighbor_ids(detector)), p=cfg.detection.p
    )
    det_rng = np.random.default_rng(det_seed)

    curves = {k: [] for k in ("pfp_th", "pfp_emp", "pfn_th", "pfn_emp")}
    for _ in range(cfg.engine.rounds):
        observations = sim.run_round(per_round)
        obs = observations[detector]

        reports: list[NeighborReport] = []
        if cooperative:
            for j in sorted(state.neighbors):
                if j in neighbor_states:
                    st_j = neighbor_states[j]
                    detect_round_baseline(st_j, observations[j], neighbor_rngs[j])
                    reports.append(
                        NeighborReport(
                            reporter=j,
                            their_neighbors=frozenset(st_j.neighbors),
                            their_suspicious=frozenset(st_j.suspicious),
                        )
                    )
                elif j < sim.node_count and sim.dishonest[j]:
                    nbrs_j = frozenset(int(x) for x in sim.neighbor_ids(j))
                    reports.append(
                        NeighborReport(reporter=j, their_neighbors=nbrs_j, their_suspicious=nbrs_j)
                    )

        if churn:
            arrived, left = sim.apply_churn(detector, churn_model)
            detect_round_churn(
                state, obs, reports, arrived, left, det_rng, cooperative=cooperative
            )
            # departed reporters lose the detector from their own ego view
            for node in sorted(left):
                if node in neighbor_states:
                    churn_membership(neighbor_states[node], (), {detector})
            for node in sorted(arrived):
                enroll_reporter(node)
        elif cooperative:
            detect_round_cooperative(state, obs, reports, det_rng)
        else:
            detect_round_baseline(state, obs, det_rng)

        dis_now = sim.dishonest_neighbors(detector)
        honest_now = set(int(x) for x in sim.neighbor_ids(detector)) - dis_now
        truth = GroundTruth(dishonest=frozenset(dis_now), honest=frozenset(honest_now))
        curves["pfp_th"].append(state.pfp_theoretic)
        curves["pfp_emp"].append(empirical_pfp(state.suspicious, truth) if honest_now else 0.0)
        curves["pfn_th"].append(pfn_theoretic(cfg.market.delta, state.detectable_count))
        curves["pfn_emp"].append(
            empirical_pfn(state.suspicious, truth) if dis_now else float("nan")
        )

    dis0 = sim.dishonest_neighbors(detector)
    result = ExperimentResult(
        pfp_theoretic=np.array(curves["pfp_th"]),
        pfp_empirical=np.array(curves["pfp_emp"]),
        pfn_theoretic=np.array(curves["pfn_th"]),
        pfn_empirical=np.array(curves["pfn_emp"]),
    )
    return DetectionTrace(
        result=result,
        detector=detector,
        neighbor_count=len(sim.neighbor_ids(detector)),
        dishonest_count=len(dis0),
    )


def run_detection(cfg: ExperimentConfig) -> dict:
    reps = cfg.replication.num_replicates
    mode = {"baseline": "baseline", "cooperative": "cooperative", "churn": "churn_baseline"}[
        cfg.detection.variant
    ]
    if cfg.detection.variant == "churn" and cfg.detection.churn_cooperative:
        mode = "churn_cooperative"
    traces = _map_replicates(
        _detection_replicate, [(cfg, i, mode) for i in range(reps)], cfg.replication.workers
    )
    agg = _aggregate([t.result for t in traces])
    return {"kind": "detection", "aggregate": agg, "traces": traces}


def run_matched_pair(cfg: ExperimentConfig, modes: tuple) -> dict:
    """Same replicate seeds under two detection modes (identical engine
    streams), e.g. baseline vs cooperative."""
    reps = cfg.replication.num_replicates
    first = _map_replicates(
        _detection_replicate, [(cfg, i, modes[0]) for i in range(reps)], cfg.replication.workers
    )
    second = _map_replicates(
        _detection_replicate, [(cfg, i, modes[1]) for i in range(reps)], cfg.replication.workers
    )
    return {
        "kind": "matched_pair",
        "modes": modes,
        "first": first,
        "second": second,
        "agg_first": _aggregate([t.result for t in first]),
        "agg_second": _aggregate([t.result for t in second]),
    }


# -- detection-round distribution (fig 6) ---------------------------------------


@dataclass
class RoundsSample:
    r: int
    phc_hat: float
    pd_hat: float
    neighbor_count: int
    dishonest_count: int


def _rounds_replicate(cfg: ExperimentConfig, rep: int, graph_seed: int, policy_seed: int,
                      pick_seed: int) -> RoundsSample:
    """First-clean-round sample on a fixed graph/policy/detector; only the
    dynamics and detection coins vary across replicates."""
    _, _, dyn_seed, _, det_seed, _ = _seeds(cfg.replication.base_seed, rep)
    graph = _build_graph(cfg, graph_seed)
    sim = _build_sim(cfg, graph, dyn_seed, policy_seed)
    per_round = _purchases_per_round(cfg, graph)
    detector = pick_detector(
        sim,
        np.random.default_rng(pick_seed),
        cfg.engine.detector_min_degree,
        cfg.engine.detector_max_degree,
        cfg.engine.detector_min_dishonest,
    )
    sim.register_detector(detector)
    dis = sim.dishonest_neighbors(detector)
    honest = set(int(x) for x in sim.neighbor_ids(detector)) - dis
    state = DetectorState(
        neighbors=set(int(x) for x in sim.neighbor_ids(detector)), p=cfg.detection.p
    )
    det_rng = np.random.default_rng(det_seed)
    correct_counts = {j: 0 for j in honest}
    trustworthy_hist = []
    r_sample = cfg.engine.rounds
    for t in range(1, cfg.engine.rounds + 1):
        obs = sim.run_round(per_round)[detector]
        detect_round_baseline(state, obs, det_rng)
        trustworthy_hist.append(obs.product_type)
        for j in obs.correct:
            if j in correct_counts:
                correct_counts[j] += 1
        if not (state.suspicious & honest):
            r_sample = t
            break
    return RoundsSample(
        r=r_sample,
        phc_hat=estimate_phc(correct_counts.values(), len(trustworthy_hist)),
        pd_hat=estimate_pd(trustworthy_hist, cfg.detection.p),
        neighbor_count=len(honest) + len(dis),
        dishonest_count=len(dis),
    )


def run_rounds_distribution(cfg: ExperimentConfig) -> dict:
    graph_seed, policy_seed, _, pick_seed, *_ = _seeds(cfg.replication.base_seed, 0)
    reps = cfg.replication.num_replicates
    samples = _map_replicates(
        _rounds_replicate,
        [(cfg, i, graph_seed, policy_seed, pick_seed) for i in range(reps)],
        cfg.replication.workers,
    )
    r_values = np.array([s.r for s in samples])
    inputs = EstimatorInputs(
        p_hc=float(np.mean([s.phc_hat for s in samples])),
        p_d=float(np.mean([s.pd_hat for s in samples])),
        neighbor_count=samples[0].neighbor_count,
        dishonest_count=samples[0].dishonest_count,
    )
    r_max = int(r_values.max())
    pmf_closed = r_distribution(inputs, r_max)
    pmf_emp = np.bincount(r_values, minlength=r_max + 1)[1:] / len(r_values)
    return {
        "kind": "rounds_distribution",
        "r_values": r_values,
        "pmf_empirical": pmf_emp,
        "pmf_closed_form": pmf_closed,
        "expected_closed_form": expected_detection_rounds(inputs),
        "empirical_mean": float(r_values.mean()),
        "estimator_inputs": inputs,
    }


# -- dataset replay (fig 7) ------------------------------------------------------


def _replay_replicate(cfg: ExperimentConfig, rep: int, graph, data, detector, promoted) -> ExperimentResult:
    (_, _, _, _, det_seed, _) = _seeds(cfg.replication.base_seed, rep)
    rng = np.random.default_rng(det_seed)
    replay_cfg = ds.ReplayConfig(
        detector=detector,
        dishonest_fraction=cfg.replay.dishonest_fraction,
        promoted_item=promoted,
        delta=cfg.replay.delta,
        binarize_threshold=cfg.replay.binarize_threshold,
        p=cfg.replay.p,
        min_overlap=cfg.replay.min_overlap,
        min_usable_neighbors=cfg.replay.min_usable_neighbors,
    )
    res = ds.inject_and_replay(graph, data, replay_cfg, rng)
    return ExperimentResult(
        pfp_theoretic=res.pfp_theoretic,
        pfp_empirical=res.pfp_empirical,
        pfn_theoretic=res.pfn_theoretic,
        pfn_empirical=res.pfn_empirical,
    )


def _load_or_generate_replay_inputs(cfg: ExperimentConfig):
    if cfg.replay.ratings_file:
        id_map = ds.IdMap()
        loaded = ds.load_graph(cfg.replay.edges_file, id_map)
        data = ds.load_ratings(cfg.replay.ratings_file, user_map=id_map)
        graph = loaded.graph
        detector = (
            data.user_map.get(cfg.replay.detector)
            if cfg.replay.detector
            else _densest_rater(graph, data, cfg)
        )
    else:
        params = ds.SampleParams(
            num_users=cfg.replay.sample_users,
            num_items=cfg.replay.sample_items,
            detector_ratings=cfg.replay.sample_detector_ratings,
            seed=cfg.replication.base_seed,
        )
        graph, data, detector, _ = ds.generate_sample(params)
        if cfg.replay.detector:
            detector = data.user_map.get(cfg.replay.detector)
    if cfg.replay.promoted_item:
        promoted = data.item_map.get(cfg.replay.promoted_item)
    else:
        # promoted products are untrustworthy by premise: prefer the
        # most-rated item whose majority valuation is low
        counts: dict[int, int] = {}
        low_votes: dict[int, int] = {}
        for rec in data.records:
            counts[rec.item] = counts.get(rec.item, 0) + 1
            if rec.rating <= cfg.replay.binarize_threshold:
                low_votes[rec.item] = low_votes.get(rec.item, 0) + 1
        low_majority = [
            i for i in counts if low_votes.get(i, 0) * 2 > counts[i]
        ]
        pool = low_majority or sorted(counts)
        promoted = max(sorted(pool), key=lambda i: counts[i])
    return graph, data, detector, promoted


def _densest_rater(graph, data, cfg: ExperimentConfig) -> int:
    by_user: dict[int, int] = {}
    for rec in data.records:
        by_user[rec.user] = by_user.get(rec.user, 0) + 1
    eligible = [u for u in by_user if u < graph.node_count and by_user[u] >= 2]
    if not eligible:
        raise ValueError("no user with at least two ratings exists in the graph")
    return max(eligible, key=lambda u: (by_user[u], graph.degree(u), -u))


def run_replay(cfg: ExperimentConfig) -> dict:
    graph, data, detector, promoted = _load_or_generate_replay_inputs(cfg)
    reps = cfg.replication.num_replicates
    results = [
        _replay_replicate(cfg, i, graph, data, detector, promoted) for i in range(reps)
    ]
    agg = _aggregate(results)
    return {
        "kind": "replay",
        "aggregate": agg,
        "results": results,
        "detector": detector,
        "promoted_item": promoted,
    }


# -- orchestration ----------------------------------------------------------------


def _call(args):
    fn, rest = args[0], args[1:]
    return fn(*rest)


def _map_replicates(fn, argslist, workers: int):
    if workers <= 1 or len(argslist) <= 1:
        return [fn(*args) for args in argslist]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, [(fn, *args) for args in argslist]))


def _fmt(x: float) -> str:
    if isinstance(x, float) and np.isnan(x):
        return "nan"
    return f"{x:.8f}"


def _write_csv(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) if isinstance(x, float) else x for x in row])


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Dispatch on the configured kind, write the figure CSV, and return
    the in-memory results plus a printable summary."""
    errors = cfg.validate()
    if errors:
        raise ValueError("invalid config: " + "; ".join(errors))
    out_dir = Path(cfg.out_dir)
    out_file = out_dir / FIGURE_FILES[cfg.kind]
    summary: dict = {"kind": cfg.kind, "artifact": str(out_file)}

    if cfg.kind == "market_share":
        res = run_market_share(cfg)
        rows = [
            [p + 1, res["mean_attack"][p], res["se_attack"][p], res["mean_clean"][p], res["se_clean"][p]]
            for p in range(len(res["mean_attack"]))
        ]
        _write_csv(
            out_file,
            ["product", "share_attack_mean", "share_attack_se", "share_clean_mean", "share_clean_se"],
            rows,
        )
        summary["share_attack"] = res["mean_attack"]
        summary["share_clean"] = res["mean_clean"]

    elif cfg.kind == "detection":
        res = run_detection(cfg)
        agg = res["aggregate"]
        rows = [
            [
                int(t),
                agg.mean["pfp_theoretic"][i],
                agg.stderr["pfp_theoretic"][i],
                agg.mean["pfp_empirical"][i],
                agg.stderr["pfp_empirical"][i],
                agg.mean["pfn_theoretic"][i],
                agg.stderr["pfn_theoretic"][i],
                agg.mean["pfn_empirical"][i],
                agg.stderr["pfn_empirical"][i],
            ]
            for i, t in enumerate(agg.rounds)
        ]
        _write_csv(
            out_file,
            [
                "round",
                "pfp_theoretic_mean",
                "pfp_theoretic_se",
                "pfp_empirical_mean",
                "pfp_empirical_se",
                "pfn_theoretic_mean",
                "pfn_theoretic_se",
                "pfn_empirical_mean",
                "pfn_empirical_se",
            ],
            rows,
        )
        summary["final_pfp_theoretic"] = float(agg.mean["pfp_theoretic"][-1])
        summary["final_pfp_empirical"] = float(agg.mean["pfp_empirical"][-1])
        summary["final_pfn_theoretic"] = float(agg.mean["pfn_theoretic"][-1])
        summary["final_pfn_empirical"] = float(agg.mean["pfn_empirical"][-1])

    elif cfg.kind == "cooperative":
        res = run_matched_pair(cfg, ("baseline", "cooperative"))
        a, b = res["agg_first"], res["agg_second"]
        rows = [
            [
                int(t),
                a.mean["pfp_theoretic"][i],
                a.stderr["pfp_theoretic"][i],
                b.mean["pfp_theoretic"][i],
                b.stderr["pfp_theoretic"][i],
                a.mean["pfp_empirical"][i],
                b.mean["pfp_empirical"][i],
            ]
            for i, t in enumerate(a.rounds)
        ]
        _write_csv(
            out_file,
            [
                "round",
                "pfp_baseline_mean",
                "pfp_baseline_se",
                "pfp_cooperative_mean",
                "pfp_cooperative_se",
                "pfp_baseline_empirical_mean",
                "pfp_cooperative_empirical_mean",
            ],
            rows,
        )
        summary["final_pfp_baseline"] = float(a.mean["pfp_theoretic"][-1])
        summary["final_pfp_cooperative"] = float(b.mean["pfp_theoretic"][-1])
        summary["pair_results"] = res

    elif cfg.kind == "churn":
        res = run_matched_pair(cfg, ("churn_baseline", "churn_cooperative"))
        a, b = res["agg_first"], res["agg_second"]
        rows = [
            [
                int(t),
                a.mean["pfp_theoretic"][i],
                a.stderr["pfp_theoretic"][i],
                b.mean["pfp_theoretic"][i],
                b.stderr["pfp_theoretic"][i],
                a.mean["pfp_empirical"][i],
                b.mean["pfp_empirical"][i],
            ]
            for i, t in enumerate(a.rounds)
        ]
        _write_csv(
            out_file,
            [
                "round",
                "pfp_churn_baseline_mean",
                "pfp_churn_baseline_se",
                "pfp_churn_cooperative_mean",
                "pfp_churn_cooperative_se",
                "pfp_churn_baseline_empirical_mean",
                "pfp_churn_cooperative_empirical_mean",
            ],
            rows,
        )
        summary["final_pfp_churn_baseline"] = float(a.mean["pfp_theoretic"][-1])
        summary["final_pfp_churn_cooperative"] = float(b.mean["pfp_theoretic"][-1])
        summary["pair_results"] = res

    elif cfg.kind == "rounds_distribution":
        res = run_rounds_distribution(cfg)
        r_max = len(res["pmf_closed_form"])
        rows = [
            [r + 1, float(res["pmf_empirical"][r]), float(res["pmf_closed_form"][r])]
            for r in range(r_max)
        ]
        _write_csv(out_file, ["r", "pmf_empirical", "pmf_closed_form"], rows)
        summary["expected_rounds_closed_form"] = res["expected_closed_form"]
        summary["expected_rounds_empirical"] = res["empirical_mean"]
        summary["result"] = res

    elif cfg.kind == "replay":
        res = run_replay(cfg)
        agg = res["aggregate"]
        rows = [
            [
                int(t),
                agg.mean["pfp_empirical"][i],
                agg.stderr["pfp_empirical"][i],
                agg.mean["pfn_empirical"][i],
                agg.stderr["pfn_empirical"][i],
                agg.mean["pfp_theoretic"][i],
                agg.stderr["pfp_theoretic"][i],
            ]
            for i, t in enumerate(agg.rounds)
        ]
        _write_csv(
            out_file,
            [
                "round",
                "pfp_empirical_mean",
                "pfp_empirical_se",
                "pfn_empirical_mean",
                "pfn_empirical_se",
                "pfp_theoretic_mean",
                "pfp_theoretic_se",
            ],
            rows,
        )
        summary["final_pfp_empirical"] = float(agg.mean["pfp_empirical"][-1])
        summary["final_pfn_empirical"] = float(agg.mean["pfn_empirical"][-1])
        summary["result"] = res

    else:
        raise ValueError(f"unknown experiment kind {cfg.kind!r}")
    return summary
