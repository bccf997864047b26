import logging
import math

import numpy as np
import pytest

from recwatch.detect import (
    DetectorState,
    EstimatorInputs,
    HistoryEntry,
    NeighborReport,
    RoundInputs,
    RoundObservation,
    Variant,
    churn_membership,
    detect_round_baseline,
    detect_round_churn,
    detect_round_cooperative,
    estimate_pd,
    estimate_phc,
    expected_detection_rounds,
    pfn_theoretic,
    pfp_theoretic_baseline,
    pfp_theoretic_churn,
    pfp_theoretic_cooperative,
    r_distribution,
    run_complete,
    trust_weights_default,
)


class ScriptedRng:
    """Feeds a fixed sequence of uniforms to the detection coin."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def obs_from_correct(neighbors, correct, product_type=1):
    correct = frozenset(correct)
    rest = frozenset(neighbors) - correct
    return RoundObservation(
        product_type=product_type, correct=correct, wrong=frozenset(), silent=rest
    )


@pytest.fixture
def worked_example_state():
    return DetectorState(neighbors=set(range(1, 101)), p=0.8)


def run_worked_example(state):
    """Three rounds: detectable with correct={1,2}, idle, detectable with
    correct={1..4}. Returns per-round theoretic estimates."""
    coins = ScriptedRng([0.5, 0.9, 0.5])  # <p, >=p, <p
    values = []
    for correct in ({1, 2}, set(), {1, 2, 3, 4}):
        detect_round_baseline(state, obs_from_correct(range(1, 101), correct), coins)
        values.append(state.pfp_theoretic)
    return values


def test_worked_example_round_by_round(worked_example_state):
    st = worked_example_state
    values = run_worked_example(st)
    assert values[0] == pytest.approx(0.98)
    assert values[1] == pytest.approx(0.98)
    assert values[2] == pytest.approx(0.96)
    assert st.suspicious == set(range(5, 101))
    assert st.detectable_count == 2


def test_worked_example_first_round_sets():
    st = DetectorState(neighbors=set(range(1, 101)), p=0.8)
    detect_round_baseline(st, obs_from_correct(range(1, 101), {1, 2}), ScriptedRng([0.0]))
    assert st.suspicious == set(range(3, 101))


def test_untrustworthy_round_never_shrinks():
    st = DetectorState(neighbors={1, 2, 3}, p=1.0)
    obs = obs_from_correct({1, 2, 3}, {1, 2}, product_type=0)
    detect_round_baseline(st, obs, ScriptedRng([0.0]))
    assert st.suspicious == {1, 2, 3}
    assert st.pfp_theoretic == 1.0
    assert st.history[-1].detectable is False


def test_p_zero_never_shrinks(rng):
    st = DetectorState(neighbors={1, 2, 3}, p=0.0)
    for _ in range(10):
        detect_round_baseline(st, obs_from_correct({1, 2, 3}, {1}), rng)
    assert st.suspicious == {1, 2, 3}
    assert st.pfp_theoretic == 1.0


def test_malformed_observation_rejected(rng):
    st = DetectorState(neighbors={1, 2, 3}, p=1.0)
    bad = RoundObservation(
        product_type=1, correct=frozenset({1}), wrong=frozenset({1}), silent=frozenset({2, 3})
    )
    with pytest.raises(ValueError, match="partition"):
        detect_round_baseline(st, bad, rng)
    missing = obs_from_correct({1, 2}, {1})
    with pytest.raises(ValueError, match="partition"):
        detect_round_baseline(st, missing, rng)


def test_idle_round_copies_candidates_forward():
    st = DetectorState(neighbors={1, 2, 3, 4}, p=1.0)
    detect_round_baseline(st, obs_from_correct({1, 2, 3, 4}, {1}), ScriptedRng([0.0]))
    d1 = st.history[-1].candidates
    detect_round_baseline(st, obs_from_correct({1, 2, 3, 4}, {2}, product_type=0), ScriptedRng([0.0]))
    assert st.history[-1].detectable is False
    assert st.history[-1].candidates == d1


def test_cooperative_vouching_example():
    # after the independent step the suspicious set is {a, b, c}; a trusted
    # reporter knows c and has cleared it
    a, b, c, d = 1, 2, 3, 4
    st = DetectorState(neighbors={a, b, c, d}, p=1.0)
    st.suspicious = {a, b, c}
    report = NeighborReport(
        reporter=d, their_neighbors=frozenset({c, 99}), their_suspicious=frozenset({99})
    )
    obs = obs_from_correct({a, b, c, d}, set(), product_type=0)  # idle independent step
    detect_round_cooperative(st, obs, [report], ScriptedRng([]), weights={d: 1.0})
    assert st.suspicious == {a, b}
    assert st.last_cooperative_removed == {c}


def test_cooperative_zero_weights_match_baseline(rng):
    st1 = DetectorState(neighbors={1, 2, 3, 4}, p=1.0)
    st2 = DetectorState(neighbors={1, 2, 3, 4}, p=1.0)
    obs = obs_from_correct({1, 2, 3, 4}, {1})
    report = NeighborReport(reporter=1, their_neighbors=frozenset({2}), their_suspicious=frozenset())
    detect_round_baseline(st1, obs, ScriptedRng([0.0]))
    detect_round_cooperative(st2, obs, [report], ScriptedRng([0.0]), weights={1: 0.0})
    assert st1.suspicious == st2.suspicious
    assert st1.pfp_theoretic == pytest.approx(st2.pfp_theoretic)
    assert st2.last_cooperative_removed == frozenset()


def test_cooperative_disjoint_report_no_change():
    st = DetectorState(neighbors={1, 2, 3}, p=1.0)
    obs = obs_from_correct({1, 2, 3}, set(), product_type=0)
    report = NeighborReport(
        reporter=1, their_neighbors=frozenset({50, 51}), their_suspicious=frozenset({50})
    )
    detect_round_cooperative(st, obs, [report], ScriptedRng([]), weights={1: 1.0})
    assert st.suspicious == {1, 2, 3}


def test_cooperative_non_neighbor_report_ignored(caplog):
    st = DetectorState(neighbors={1, 2}, p=1.0)
    obs = obs_from_correct({1, 2}, set(), product_type=0)
    report = NeighborReport(reporter=42, their_neighbors=frozenset({1}), their_suspicious=frozenset())
    with caplog.at_level(logging.WARNING):
        detect_round_cooperative(st, obs, [report], ScriptedRng([]), weights={42: 1.0})
    assert "non-neighbor" in caplog.text
    assert st.suspicious == {1, 2}


def test_cooperative_duplicate_report_rejected():
    st = DetectorState(neighbors={1, 2}, p=1.0)
    obs = obs_from_correct({1, 2}, set(), product_type=0)
    r = NeighborReport(reporter=1, their_neighbors=frozenset({2}), their_suspicious=frozenset())
    with pytest.raises(ValueError, match="duplicate"):
        detect_round_cooperative(st, obs, [r, r], ScriptedRng([]))


def test_cooperative_fractional_weight_uses_coin():
    st = DetectorState(neighbors={1, 2, 3}, p=1.0)
    st.suspicious = {2, 3}
    obs = obs_from_correct({1, 2, 3}, set(), product_type=0)
    report = NeighborReport(reporter=1, their_neighbors=frozenset({2}), their_suspicious=frozenset())
    detect_round_cooperative(st, obs, [report], ScriptedRng([0.9]), weights={1: 0.5})
    assert st.suspicious == {2, 3}  # coin 0.9 >= 0.5, report skipped
    st2 = DetectorState(neighbors={1, 2, 3}, p=1.0)
    st2.suspicious = {2, 3}
    detect_round_cooperative(st2, obs, [report], ScriptedRng([0.1]), weights={1: 0.5})
    assert st2.suspicious == {3}


def test_trust_weights_default_cases():
    st = DetectorState(neighbors={1, 2, 3}, p=0.5)
    assert trust_weights_default(st) == {1: 0.0, 2: 0.0, 3: 0.0}
    st.suspicious = set()
    assert trust_weights_default(st) == {1: 1.0, 2: 1.0, 3: 1.0}
    st.suspicious = {1, 2}
    assert trust_weights_default(st) == {1: 0.0, 2: 0.0, 3: 1.0}


def test_churn_example_swap():
    a, b = 1, 2
    h = 99
    st = DetectorState(neighbors={a, b, 3}, p=1.0)
    st.suspicious = {a, b}
    obs = obs_from_correct({a, b, 3}, set(), product_type=0)  # no shrink this round
    detect_round_churn(st, obs, [], new_ids={h}, left_ids={b}, rng=ScriptedRng([]))
    assert st.suspicious == {a, h}
    assert st.neighbors == {a, 3, h}


def test_churn_empty_sets_bitwise_identical_to_underlying():
    stream = [0.3, 0.9, 0.1, 0.6, 0.2]
    correct_sets = [{1}, {2}, set(), {1, 3}, {2}]
    st1 = DetectorState(neighbors={1, 2, 3, 4}, p=0.8)
    st2 = DetectorState(neighbors={1, 2, 3, 4}, p=0.8)
    for coin, correct in zip(stream, correct_sets):
        obs = obs_from_correct({1, 2, 3, 4} & st1.neighbors, correct & st1.neighbors)
        detect_round_baseline(st1, obs, ScriptedRng([coin]))
        detect_round_churn(st2, obs, [], set(), set(), ScriptedRng([coin]))
    assert st1.suspicious == st2.suspicious
    assert st1.pfp_theoretic == st2.pfp_theoretic  # bitwise, not approx
    assert [h.detectable for h in st1.history] == [h.detectable for h in st2.history]


def test_churn_all_leave():
    st = DetectorState(neighbors={1, 2}, p=1.0)
    obs = obs_from_correct({1, 2}, set(), product_type=0)
    detect_round_churn(st, obs, [], new_ids={7}, left_ids={1, 2}, rng=ScriptedRng([]))
    assert st.suspicious == {7}
    assert st.neighbors == {7}


def test_churn_preconditions():
    st = DetectorState(neighbors={1, 2}, p=1.0)
    obs = obs_from_correct({1, 2}, set(), product_type=0)
    with pytest.raises(ValueError):
        detect_round_churn(st, obs, [], new_ids={1}, left_ids=set(), rng=ScriptedRng([]))
    with pytest.raises(ValueError):
        detect_round_churn(st, obs, [], new_ids=set(), left_ids={9}, rng=ScriptedRng([]))


def test_churn_membership_only():
    st = DetectorState(neighbors={1, 2, 3}, p=1.0)
    st.suspicious = {1, 2}
    st.pfp_theoretic = 0.5
    churn_membership(st, new_ids={9}, left_ids={1})
    assert st.neighbors == {2, 3, 9}
    assert st.suspicious == {2, 9}
    # (0.5*1*3 - 0 + 1 - 1) / 3
    assert st.pfp_theoretic == pytest.approx(0.5)


def test_pfn_theoretic_values():
    assert pfn_theoretic(0.0, 100) == 0.0
    assert pfn_theoretic(1.0, 1) == 1.0
    assert pfn_theoretic(0.1, 10) == pytest.approx(1 - 0.9**10)
    assert pfn_theoretic(0.1, 10) == pytest.approx(0.65132, abs=1e-5)
    with pytest.raises(ValueError):
        pfn_theoretic(1.5, 1)


def test_pfp_baseline_recomputation_matches_incremental(worked_example_state):
    st = worked_example_state
    run_worked_example(st)
    recomputed = pfp_theoretic_baseline(st.history, range(1, 101))
    assert recomputed == pytest.approx(st.pfp_theoretic)
    assert recomputed == pytest.approx(0.96)


def test_pfp_baseline_no_detectable_rounds():
    history = [HistoryEntry(False, frozenset({1, 2})) for _ in range(5)]
    assert pfp_theoretic_baseline(history, {1, 2}) == 1.0


def test_pfp_baseline_empty_predecessor_collapses_to_zero():
    history = [
        HistoryEntry(True, frozenset()),
        HistoryEntry(True, frozenset({1})),
    ]
    assert pfp_theoretic_baseline(history, {1, 2}) == 0.0


def test_pfp_cooperative_step_values():
    assert pfp_theoretic_cooperative(0.96, 1.0, 1, 100) == pytest.approx(0.95)
    # no cooperative removals: exactly the baseline update
    assert pfp_theoretic_cooperative(0.7, 0.5, 0, 40) == pytest.approx(0.35)
    assert pfp_theoretic_cooperative(0.0, 1.0, 0, 10) == 0.0
    # clamped at zero
    assert pfp_theoretic_cooperative(0.01, 1.0, 50, 100) == 0.0
    with pytest.raises(ValueError):
        pfp_theoretic_cooperative(0.5, 1.0, 0, 0)


def test_pfp_churn_step_values():
    # no churn, stable neighborhood: reduces to the cooperative update
    assert pfp_theoretic_churn(0.8, 0.9, 2, 0, 0, 50, 50) == pytest.approx(
        pfp_theoretic_cooperative(0.8, 0.9, 2, 50)
    )
    assert pfp_theoretic_churn(0.5, 1.0, 0, 10, 0, 100, 110) == pytest.approx(60 / 110)
    assert pfp_theoretic_churn(1.0, 1.0, 0, 0, 5, 100, 95) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pfp_theoretic_churn(0.5, 1.0, 0, 0, 0, 10, 0)


def test_r_distribution_degenerate_cases():
    assert r_distribution(EstimatorInputs(1.0, 1.0, 2, 1), 5)[0] == pytest.approx(1.0)
    pmf = r_distribution(EstimatorInputs(1.0, 0.5, 5, 1), 12)
    for r in range(1, 13):
        assert pmf[r - 1] == pytest.approx(0.5**r)
    with pytest.raises(ValueError, match="positive"):
        r_distribution(EstimatorInputs(0.0, 0.5, 5, 1), 5)
    with pytest.raises(ValueError, match="positive"):
        r_distribution(EstimatorInputs(0.5, 0.0, 5, 1), 5)


def test_r_distribution_partial_sums_property():
    pmf = r_distribution(EstimatorInputs(0.3, 0.6, 30, 2), 400)
    assert np.all(pmf >= 0)
    partial = np.cumsum(pmf)
    assert np.all(np.diff(partial) >= -1e-15)
    assert partial[-1] <= 1.0 + 1e-12
    assert partial[-1] >= 0.999


def _simulate_clean_rounds(p_hc, p_d, honest, reps, rng):
    """Direct Monte-Carlo of the abstract removal process: each round is
    detectable w.p. p_d; in a detectable round every remaining honest
    neighbor is cleared independently w.p. p_hc."""
    out = np.empty(reps, dtype=np.int64)
    for i in range(reps):
        remaining = honest
        r = 0
        while remaining > 0:
            r += 1
            if rng.random() < p_d:
                remaining -= rng.binomial(remaining, p_hc)
        out[i] = r
    return out


def test_r_distribution_matches_monte_carlo():
    inputs = EstimatorInputs(p_hc=0.4, p_d=0.8, neighbor_count=21, dishonest_count=1)
    rng = np.random.default_rng(999)
    samples = _simulate_clean_rounds(0.4, 0.8, 20, 100_000, rng)
    r_max = int(samples.max())
    pmf = r_distribution(inputs, r_max)
    emp = np.bincount(samples, minlength=r_max + 1)[1:] / len(samples)
    tv = 0.5 * np.abs(pmf - emp).sum() + 0.5 * max(0.0, 1.0 - pmf.sum())
    assert tv < 0.02


def test_expected_rounds_matches_pmf_mean():
    inputs = EstimatorInputs(p_hc=0.3, p_d=0.7, neighbor_count=25, dishonest_count=2)
    e = expected_detection_rounds(inputs)
    pmf = r_distribution(inputs, 2000)
    assert e == pytest.approx(float(np.dot(np.arange(1, 2001), pmf)), rel=1e-6)


def test_estimate_phc_values():
    assert estimate_phc([3, 5], 10) == pytest.approx(0.4)
    assert estimate_phc([10, 10, 10], 10) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        estimate_phc([1], 0)
    with pytest.raises(ValueError):
        estimate_phc([], 10)


def test_estimate_phc_monte_carlo():
    rng = np.random.default_rng(4)
    rounds = 1000
    counts = rng.binomial(rounds, 0.6, size=40)
    assert estimate_phc(counts, rounds) == pytest.approx(0.6, abs=0.02)


def test_estimate_pd_values():
    assert estimate_pd([1, 1, 1, 1], 0.8) == pytest.approx(0.8)
    assert estimate_pd([1, 0, 1, 0], 0.8) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        estimate_pd([], 0.8)


def test_estimate_pd_monte_carlo():
    rng = np.random.default_rng(21)
    hist = (rng.random(1000) < 0.7).astype(int)
    assert estimate_pd(hist, 0.8) == pytest.approx(0.56, abs=0.02)


class ListSource(list):
    pass


def test_run_complete_terminates_immediately_with_loose_threshold(rng):
    st = DetectorState(neighbors={1, 2, 3}, p=1.0)
    source = [RoundInputs(observation=obs_from_correct({1, 2, 3}, {1}))] * 5
    res = run_complete(st, source, pfp_star=0.99, rng=ScriptedRng([0.0] * 5))
    assert res.reached_threshold
    assert res.rounds == 1
    assert res.blacklist == {2, 3}


def test_run_complete_worked_example_trajectory():
    st = DetectorState(neighbors=set(range(1, 101)), p=0.8)
    source = [
        RoundInputs(observation=obs_from_correct(range(1, 101), {1, 2})),
        RoundInputs(observation=obs_from_correct(range(1, 101), set())),
        RoundInputs(observation=obs_from_correct(range(1, 101), {1, 2, 3, 4})),
        RoundInputs(observation=obs_from_correct(range(1, 101), {1, 2, 3, 4, 5})),
    ]
    res = run_complete(st, source, pfp_star=0.97, rng=ScriptedRng([0.5, 0.9, 0.5, 0.5]))
    assert res.reached_threshold
    assert res.rounds == 3
    assert [row.pfp_theoretic for row in res.trajectory] == pytest.approx([0.98, 0.98, 0.96])
    assert res.trajectory[-1].suspicious_size == 96


def test_run_complete_round_cap_flagged(caplog, rng):
    st = DetectorState(neighbors={1, 2, 3}, p=0.0)  # never detectable
    source = [RoundInputs(observation=obs_from_correct({1, 2, 3}, {1}))] * 50
    with caplog.at_level(logging.WARNING):
        res = run_complete(st, source, pfp_star=0.5, rng=rng, round_cap=10)
    assert not res.reached_threshold
    assert res.rounds == 10
    assert "partial" in caplog.text


def test_run_complete_empty_suspicious_early_stop(rng):
    st = DetectorState(neighbors={1, 2}, p=1.0)
    full = RoundInputs(observation=obs_from_correct({1, 2}, {1, 2}))
    res = run_complete(st, [full] * 5, pfp_star=0.01, rng=ScriptedRng([0.0] * 5))
    assert res.blacklist == set()
    assert res.trajectory[-1].pfp_theoretic == 0.0


def test_run_complete_trajectory_pfn_column():
    st = DetectorState(neighbors={1, 2, 3}, p=1.0)
    source = [RoundInputs(observation=obs_from_correct({1, 2, 3}, {1}))] * 3
    res = run_complete(
        st, source, pfp_star=1e-9, rng=ScriptedRng([0.0] * 3), attacker_delta=0.1
    )
    assert res.trajectory[0].pfn_theoretic == pytest.approx(0.1)
    assert res.trajectory[2].pfn_theoretic == pytest.approx(1 - 0.9**3)


def test_shrinkage_monotone_without_churn():
    rng = np.random.default_rng(31)
    for variant in (Variant.BASELINE, Variant.COOPERATIVE):
        st = DetectorState(neighbors=set(range(30)), p=0.7)
        previous = set(st.suspicious)
        for _ in range(40):
            correct = set(int(x) for x in rng.choice(30, size=rng.integers(0, 6), replace=False))
            obs = obs_from_correct(range(30), correct, product_type=int(rng.random() < 0.8))
            if variant is Variant.BASELINE:
                detect_round_baseline(st, obs, rng)
            else:
                reporter = int(rng.integers(30))
                reports = [
                    NeighborReport(
                        reporter=reporter,
                        their_neighbors=frozenset({int(rng.integers(30))}) - {reporter},
                        their_suspicious=frozenset(),
                    )
                ]
                detect_round_cooperative(st, obs, reports, rng)
            assert st.suspicious <= previous
            previous = set(st.suspicious)


def test_history_convention_idle_rounds_repeat_candidates():
    rng = np.random.default_rng(8)
    st = DetectorState(neighbors=set(range(12)), p=0.5)
    for _ in range(60):
        correct = set(int(x) for x in rng.choice(12, size=2, replace=False))
        obs = obs_from_correct(range(12), correct, product_type=int(rng.random() < 0.7))
        detect_round_baseline(st, obs, rng)
    prev = frozenset(range(12))
    for entry in st.history:
        if not entry.detectable:
            assert entry.candidates == prev
        prev = entry.candidates


def test_perfect_attack_never_escapes():
    # delta = 0 attacker is wrong every detectable round, so she is never
    # removed no matter the observation stream
    rng = np.random.default_rng(6)
    dishonest = 0
    st = DetectorState(neighbors=set(range(10)), p=0.9)
    for _ in range(200):
        correct = set(int(x) for x in rng.choice(np.arange(1, 10), size=3, replace=False))
        obs = RoundObservation(
            product_type=1,
            correct=frozenset(correct),
            wrong=frozenset({dishonest}),
            silent=frozenset(range(10)) - frozenset(correct) - {dishonest},
        )
        detect_round_baseline(st, obs, rng)
    assert dishonest in st.suspicious
    assert pfn_theoretic(0.0, st.detectable_count) == 0.0
