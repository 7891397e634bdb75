import numpy as np
import pytest

from apunim.metric import (
    AnalysisConfig,
    NoQualifyingItems,
    analyze_all,
    analyze_dimension,
    apriori_item,
    apunim_value,
    observed_group,
)
from apunim.partition import SeededStream
from apunim.polarization import filter_items
from apunim.reporting import report_to_json
from apunim.synth import SyntheticSpec, generate

from conftest import make_dataset
from oracles import naive_ndfu, straight_line_dimension


def test_apunim_algebra():
    assert apunim_value(0.5, 0.5) == 0.0
    assert apunim_value(1.0, 0.0) == 1.0
    assert apunim_value(0.0, 0.5) == -1.0


def test_apunim_identity_line():
    for p in np.arange(0.0, 1.0, 0.1):
        assert apunim_value(p, p) == 0.0


def test_apunim_monotone_in_p_obs():
    for p_apr in np.arange(0.0, 1.0, 0.1):
        values = [apunim_value(p_obs, p_apr) for p_obs in np.arange(0.0, 1.01, 0.1)]
        assert all(b > a for a, b in zip(values, values[1:]))


def test_apunim_bounds():
    # always <= 1; >= -1 exactly when p_apr <= 1/2 (the ratio is unbounded below
    # for larger baselines, so no clamping can be correct)
    for p_obs in np.arange(0.0, 1.01, 0.1):
        for p_apr in np.arange(0.0, 0.51, 0.1):
            assert -1.0 - 1e-12 <= apunim_value(p_obs, p_apr) <= 1.0 + 1e-12
    assert apunim_value(0.0, 0.8) == pytest.approx(-4.0)


def test_apunim_degenerate_baseline():
    with pytest.raises(ValueError, match="undefined"):
        apunim_value(0.5, 1.0)
    with pytest.raises(ValueError):
        apunim_value(1.5, 0.0)


def bimodal_item_dataset():
    votes = {"c1": {f"a{i}": (0 if i < 3 else 4) for i in range(6)}}
    people = {f"a{i}": {"d": "x" if i % 2 else "y"} for i in range(6)}
    return make_dataset(votes, people)


def test_apriori_identity_partition():
    ds = bimodal_item_dataset()
    config = AnalysisConfig(partitions=1, seed=0)
    assert apriori_item(ds, "c1", [6], config) == 1.0


def test_apriori_unanimous_item():
    votes = {"c1": {f"a{i}": 2 for i in range(8)}}
    people = {f"a{i}": {"d": "x"} for i in range(8)}
    ds = make_dataset(votes, people)
    for sizes in ([8], [4, 4], [2, 3, 3]):
        for t in (1, 7):
            config = AnalysisConfig(partitions=t, seed=1)
            assert apriori_item(ds, "c1", sizes, config) == 0.0


def test_apriori_matches_straight_line_reimplementation():
    """Apriori-baseline dual-implementation check at t=100 and a fixed seed."""
    ds = bimodal_item_dataset()
    config = AnalysisConfig(partitions=100, seed=123)
    value = apriori_item(ds, "c1", [3, 3], config)

    from apunim.partition import seeded_permutation

    state = SeededStream(123, "c1").state
    records = ds.annotations["c1"]
    total = 0.0
    for i in range(100):
        perm = seeded_permutation(state, i, 6)
        scores = []
        for lo, hi in ((0, 3), (3, 6)):
            counts = [0] * 5
            for p in perm[lo:hi]:
                for v in records[p].values:
                    counts[v] += 1
            scores.append(naive_ndfu(counts))
        total += sum(scores) / len(scores)
    assert value == pytest.approx(total / 100, abs=1e-12)


def test_apriori_all_unavailable():
    ds = bimodal_item_dataset()
    config = AnalysisConfig(partitions=3, seed=0)
    with pytest.raises(ValueError, match="no partition"):
        apriori_item(ds, "c1", [1] * 6, config)


def test_observed_group_extremes():
    votes = {
        "unanimous": {"a1": 1, "a2": 1, "b1": 0, "b2": 4},
        "bimodal": {"a3": 0, "a4": 4, "b3": 2, "b4": 2},
    }
    people = {k: {"d": k[0]} for k in ("a1", "a2", "a3", "a4", "b1", "b2", "b3", "b4")}
    ds = make_dataset(votes, people)
    filtered = set(ds.items)
    config = AnalysisConfig()
    p_obs, support, n_items = observed_group(ds, {"unanimous"}, "d", "a", config)
    assert (p_obs, support, n_items) == (0.0, 2, 1)
    p_obs, support, n_items = observed_group(ds, {"bimodal"}, "d", "a", config)
    assert (p_obs, support, n_items) == (1.0, 2, 1)
    p_obs, support, n_items = observed_group(ds, filtered, "d", "a", config)
    assert p_obs == 0.5 and support == 4 and n_items == 2


def test_observed_group_matches_hand_means():
    """10 items with hand-built group histograms: p_obs is their mean nDFU."""
    rng = np.random.default_rng(5)
    votes, people = {}, {}
    expected = []
    for i in range(10):
        item = f"c{i}"
        votes[item] = {}
        counts = [0] * 5
        for j in range(6):
            level = int(rng.integers(0, 5))
            votes[item][f"g{i}_{j}"] = level
            people[f"g{i}_{j}"] = {"d": "target"}
            counts[level] += 1
        expected.append(naive_ndfu(counts))
        votes[item][f"o{i}"] = 2
        people[f"o{i}"] = {"d": "other"}
        votes[item][f"o{i}b"] = 2
        people[f"o{i}b"] = {"d": "other"}
    ds = make_dataset(votes, people)
    config = AnalysisConfig()
    p_obs, support, n_items = observed_group(ds, set(ds.items), "d", "target", config)
    assert p_obs == pytest.approx(float(np.mean(expected)), abs=1e-12)
    assert support == 60 and n_items == 10


def test_observed_group_no_qualifying_items():
    ds = bimodal_item_dataset()
    with pytest.raises(NoQualifyingItems):
        observed_group(ds, set(), "d", "x", AnalysisConfig())


def null_dataset(seed=11, n_items=80):
    return generate(SyntheticSpec(
        n_items=n_items, annotators_per_item=10,
        dimensions=(("d", (("x", 0.5), ("y", 0.5))),),
        noise=0.3, seed=seed,
    ))


def test_analyze_dimension_matches_ops_and_oracle():
    """Engine path == op composition == straight-line formulas, at 1e-12."""
    ds = null_dataset()
    for mode in ("mean", "size_matched"):
        config = AnalysisConfig(partitions=25, seed=7, partition_score_mode=mode)
        results = analyze_dimension(ds, "d", config)
        oracle = straight_line_dimension(ds, "d", config)
        filtered = filter_items(ds, "d", config.alpha)
        assert len(filtered) == len(oracle["filtered"])
        assert len(results) == len(oracle["groups"])
        for res in results:
            exp = oracle["groups"][res.group]
            assert res.p_obs == pytest.approx(exp["p_obs"], abs=1e-12)
            assert res.p_apr == pytest.approx(exp["p_apr"], abs=1e-12)
            assert res.apunim == pytest.approx(exp["apunim"], abs=1e-12)
            assert res.p_raw == pytest.approx(exp["p_raw"], abs=1e-9)
            assert res.support == exp["support"]
            assert res.n_items == exp["n_items"]
            # ops route (engine-independent surface)
            p_obs, support, n_items = observed_group(ds, filtered, "d", res.group, config)
            assert res.p_obs == pytest.approx(p_obs, abs=1e-12)
            assert (res.support, res.n_items) == (support, n_items)


def test_analyze_multilabel_matches_oracle():
    """Multi-label values flow through the engine identically to the formulas."""
    rng = np.random.default_rng(13)
    votes, people = {}, {}
    for i in range(30):
        item = f"c{i}"
        votes[item] = {}
        for j in range(8):
            a = f"a{i}_{j}"
            picks = rng.choice(5, size=int(rng.integers(1, 3)), replace=False)
            votes[item][a] = frozenset(int(v) for v in picks)
            people[a] = {"d": "x" if j % 2 else "y"}
    ds = make_dataset(votes, people)
    config = AnalysisConfig(alpha=0.1, partitions=20, seed=5)
    results = analyze_dimension(ds, "d", config)
    oracle = straight_line_dimension(ds, "d", config)
    assert results, "fixture should produce results"
    for res in results:
        exp = oracle["groups"][res.group]
        assert res.p_obs == pytest.approx(exp["p_obs"], abs=1e-12)
        assert res.p_apr == pytest.approx(exp["p_apr"], abs=1e-12)
        assert res.apunim == pytest.approx(exp["apunim"], abs=1e-12)
        assert res.support == exp["support"]


def test_analyze_with_sentinel_annotators_matches_oracle():
    """Annotators without a membership stay in the item's overall nDFU (the
    filter) but never enter group metrics or partitions."""
    rng = np.random.default_rng(23)
    votes, people = {}, {}
    for i in range(25):
        item = f"c{i}"
        votes[item] = {}
        for j in range(9):
            a = f"a{i}_{j}"
            votes[item][a] = int(rng.integers(0, 5))
            people[a] = {} if j == 0 else {"d": "x" if j % 2 else "y"}
    from apunim.model import Dimension

    ds = make_dataset(votes, people, dimensions=[Dimension("d", ("x", "y"))])
    config = AnalysisConfig(alpha=0.1, partitions=25, seed=3)
    results = analyze_dimension(ds, "d", config)
    oracle = straight_line_dimension(ds, "d", config)
    assert results
    for res in results:
        exp = oracle["groups"][res.group]
        assert res.p_obs == pytest.approx(exp["p_obs"], abs=1e-12)
        assert res.p_apr == pytest.approx(exp["p_apr"], abs=1e-12)
        assert res.p_raw == pytest.approx(exp["p_raw"], abs=1e-9)
        assert res.support == exp["support"]
    # sentinel records count toward the filter's item nDFU: 9 annotations/item
    from apunim.polarization import item_ndfu

    assert item_ndfu(ds, "c0").n_annotations == 9
    # but the groups only ever see the 8 profiled annotators
    assert all(r.support <= 25 * 8 for r in results)


def test_mean_mode_baseline_shared_across_groups():
    ds = null_dataset(seed=51, n_items=60)
    results = analyze_dimension(ds, "d", AnalysisConfig(partitions=20, seed=9))
    assert len(results) == 2
    assert results[0].p_apr == results[1].p_apr


def test_analyze_single_group_dimension_is_empty():
    votes = {"c1": {"a1": 0, "a2": 4}}
    people = {"a1": {"d": "solo"}, "a2": {"d": "solo"}}
    ds = make_dataset(votes, people)
    assert analyze_dimension(ds, "d", AnalysisConfig(partitions=5)) == []


def test_label_swap_symmetry():
    """Swapping two equal-sized groups' labels swaps p_obs/support, keeps p_apr."""
    rng = np.random.default_rng(21)
    votes, people = {}, {}
    for i in range(40):  # exactly 5 x / 5 y annotators per item
        item = f"c{i}"
        votes[item] = {}
        for j in range(10):
            a = f"a{i}_{j}"
            votes[item][a] = int(rng.integers(0, 5))
            people[a] = {"d": "x" if j % 2 else "y"}
    ds = make_dataset(votes, people)
    swapped_profiles = {
        a: type(p)(a, {"d": {"x": "y", "y": "x"}[p.memberships["d"]]})
        for a, p in ds.profiles.items()
    }
    swapped = type(ds)(ds.scale, ds.items, ds.annotations, swapped_profiles, ds.dimensions)
    config = AnalysisConfig(partitions=20, seed=3)
    base = {r.group: r for r in analyze_dimension(ds, "d", config)}
    flip = {r.group: r for r in analyze_dimension(swapped, "d", config)}
    for g, other in (("x", "y"), ("y", "x")):
        assert base[g].p_obs == flip[other].p_obs
        assert base[g].support == flip[other].support
        assert base[g].n_items == flip[other].n_items
        assert base[g].p_apr == pytest.approx(flip[other].p_apr, abs=1e-12)


def test_analyze_all_sections_and_determinism():
    ds = generate(SyntheticSpec(
        n_items=50, annotators_per_item=8,
        dimensions=(("d1", (("x", 0.5), ("y", 0.5))), ("d2", (("u", 0.3), ("v", 0.7)))),
        noise=0.3, seed=2,
    ))
    config = AnalysisConfig(partitions=15, seed=4)
    report = analyze_all(ds, config)
    assert [d.dimension for d in report.dimensions] == ["d1", "d2"]
    again = analyze_all(ds, config)
    assert report_to_json(report) == report_to_json(again)
    only = analyze_all(ds, config, dimensions=["d2"])
    assert [d.dimension for d in only.dimensions] == ["d2"]


def test_seed_stability_on_large_fixture():
    """Different master seeds move apunim by < 0.01 on a 1,000-item fixture."""
    ds = generate(SyntheticSpec(
        n_items=1000, annotators_per_item=10,
        dimensions=(("d", (("x", 0.5), ("y", 0.5))),),
        noise=0.3, seed=31,
    ))
    a = analyze_all(ds, AnalysisConfig(partitions=100, seed=1))
    b = analyze_all(ds, AnalysisConfig(partitions=100, seed=2))
    for ga, gb in zip(a.dimensions[0].groups, b.dimensions[0].groups):
        assert ga.group == gb.group
        assert abs(ga.apunim - gb.apunim) < 0.01


def test_config_validation():
    with pytest.raises(ValueError):
        AnalysisConfig(alpha=1.5)
    with pytest.raises(ValueError):
        AnalysisConfig(partitions=0)
    with pytest.raises(ValueError):
        AnalysisConfig(fwer=0.0)
    with pytest.raises(ValueError):
        AnalysisConfig(min_group=1)
    with pytest.raises(ValueError):
        AnalysisConfig(partition_score_mode="median")
    assert AnalysisConfig().significance_level == pytest.approx(0.05)


def test_report_echoes_config():
    ds = null_dataset(seed=41, n_items=30)
    config = AnalysisConfig(alpha=0.25, partitions=12, fwer=0.9, seed=77)
    report = analyze_all(ds, config)
    assert report.config == config
    text = report_to_json(report)
    assert '"alpha": 0.25' in text
    assert '"partitions": 12' in text
    assert '"fwer": 0.9' in text
    assert '"seed": 77' in text
    assert '"partition_score_mode": "mean"' in text
