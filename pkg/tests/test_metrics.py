import numpy as np
import pytest

from recwatch.engine import PurchaseRecord
from recwatch.metrics import (
    ExperimentResult,
    GroundTruth,
    aggregate_market_shares,
    aggregate_replicates,
    empirical_pfn,
    empirical_pfp,
    market_share,
)


def make_truth(dishonest, honest):
    return GroundTruth(dishonest=frozenset(dishonest), honest=frozenset(honest))


def test_ground_truth_disjoint():
    with pytest.raises(ValueError):
        make_truth({1}, {1, 2})


def test_empirical_pfn_values():
    truth = make_truth({1, 2}, {3, 4})
    assert empirical_pfn({1, 2, 3}, truth) == 0.0
    assert empirical_pfn({1, 3}, truth) == 0.5
    assert empirical_pfn(set(), truth) == 1.0
    with pytest.raises(ValueError):
        empirical_pfn({1}, make_truth(set(), {3}))


def test_empirical_pfp_values():
    truth = make_truth({99, 100}, set(range(1, 99)))
    # worked three-round shrinkage: 96 of 98 honest remain, then 94 of 98
    s1 = set(range(3, 101))
    assert empirical_pfp(s1, truth) == pytest.approx(96 / 98)
    s3 = set(range(5, 101))
    assert empirical_pfp(s3, truth) == pytest.approx(94 / 98)
    assert empirical_pfp(set(), truth) == 0.0


def test_empirical_pfp_initially_one():
    truth = make_truth({5}, {1, 2, 3, 4})
    neighbors = {1, 2, 3, 4, 5}
    assert empirical_pfp(neighbors, truth) == 1.0


def test_market_share_single_product():
    log = [PurchaseRecord(1, 0, 1)] * 9
    assert market_share(log, 1) == pytest.approx([1.0])


def test_market_share_uniform_monte_carlo():
    rng = np.random.default_rng(3)
    log = [PurchaseRecord(1, 0, int(rng.integers(1, 6))) for _ in range(100_000)]
    shares = market_share(log, 5)
    assert shares.sum() == pytest.approx(1.0)
    for s in shares:
        assert s == pytest.approx(0.2, abs=0.01)


def test_market_share_rejects_empty():
    with pytest.raises(ValueError):
        market_share([], 3)


def _result(pfp_emp, pfn_emp=None):
    n = len(pfp_emp)
    return ExperimentResult(
        pfp_theoretic=np.asarray(pfp_emp, dtype=float),
        pfp_empirical=np.asarray(pfp_emp, dtype=float),
        pfn_theoretic=np.zeros(n),
        pfn_empirical=np.asarray(pfn_emp if pfn_emp is not None else np.zeros(n), dtype=float),
        r_sample=n,
    )


def test_aggregate_identical_replicates_zero_stderr():
    res = [_result([0.9, 0.5, 0.1])] * 4
    agg = aggregate_replicates(res)
    assert agg.mean["pfp_empirical"] == pytest.approx([0.9, 0.5, 0.1])
    assert np.all(agg.stderr["pfp_empirical"] == 0.0)
    assert not agg.truncated


def test_aggregate_two_replicates_mean():
    agg = aggregate_replicates([_result([0.4] * 6), _result([0.6] * 6)])
    assert agg.mean["pfp_empirical"][4] == pytest.approx(0.5)


def test_aggregate_requires_two():
    with pytest.raises(ValueError):
        aggregate_replicates([_result([1.0])])


def test_aggregate_mismatched_lengths_truncates_with_flag(caplog):
    import logging

    with caplog.at_level(logging.WARNING):
        agg = aggregate_replicates([_result([0.5] * 8), _result([0.5] * 5)])
    assert agg.truncated
    assert len(agg.rounds) == 5
    assert "truncating" in caplog.text


def test_aggregate_nan_excluded_pointwise():
    r1 = _result([0.5, 0.5], pfn_emp=[np.nan, 0.2])
    r2 = _result([0.5, 0.5], pfn_emp=[0.4, 0.4])
    agg = aggregate_replicates([r1, r2])
    assert agg.mean["pfn_empirical"][0] == pytest.approx(0.4)
    assert agg.mean["pfn_empirical"][1] == pytest.approx(0.3)


def test_aggregate_r_pmf_normalized():
    res = [_result([0.5] * n) for n in (3, 3, 4, 5, 5, 5)]
    agg = aggregate_replicates(res)
    assert agg.r_pmf is not None
    assert agg.r_pmf.sum() == pytest.approx(1.0)
    assert agg.r_pmf[3] == pytest.approx(2 / 6)  # two runs ended at round 3... index 3 = r=3
    assert agg.r_values is not None and sorted(agg.r_values) == [3, 3, 4, 5, 5, 5]


def test_aggregate_market_shares():
    r1 = ExperimentResult(*([np.zeros(1)] * 4), market_shares=np.array([0.2, 0.8]))
    r2 = ExperimentResult(*([np.zeros(1)] * 4), market_shares=np.array([0.4, 0.6]))
    mean, se = aggregate_market_shares([r1, r2])
    assert mean == pytest.approx([0.3, 0.7])
    assert se[0] == pytest.approx(np.std([0.2, 0.4], ddof=1) / np.sqrt(2))
