import numpy as np
import pytest

from apunim.metric import AnalysisConfig, analyze_dimension
from apunim.model import SENTINEL_GROUP, group_annotations
from apunim.polarization import build_histogram, item_ndfu, ndfu_from_counts
from apunim.synth import (
    PlantedBimodal,
    SensitivityCurve,
    SyntheticSpec,
    cancellation_fixture,
    generate,
    max_feasible_k,
    sensitivity,
)


def null_spec(**overrides):
    base = dict(
        n_items=100, annotators_per_item=10,
        dimensions=(("d", (("x", 0.5), ("y", 0.5))),),
        noise=0.1, seed=5,
    )
    base.update(overrides)
    return SyntheticSpec(**base)


def test_generate_deterministic():
    assert generate(null_spec()) == generate(null_spec())
    assert generate(null_spec()) != generate(null_spec(seed=6))


def test_null_effect_is_mostly_unimodal():
    ds = generate(null_spec(n_items=200))
    mean_ndfu = np.mean([item_ndfu(ds, item).value for item in ds.items])
    assert mean_ndfu < 0.1


def test_planted_bimodal_structure():
    ds = generate(null_spec(
        n_items=60, noise=0.0,
        effect=PlantedBimodal("d", "x", "y", 1.0),
    ))
    for item in ds.items:
        assert item_ndfu(ds, item).value > 0.8
        groups = group_annotations(ds, item, "d")
        for g, records in groups.items():
            if g != SENTINEL_GROUP and len(records) >= 2:
                hist = build_histogram(records, ds.scale)
                assert ndfu_from_counts(hist.counts) < 0.1


def test_planted_strength_fraction():
    ds = generate(null_spec(n_items=200, noise=0.0,
                            effect=PlantedBimodal("d", "x", "y", 0.5)))
    extreme = sum(item_ndfu(ds, item).value > 0.8 for item in ds.items)
    assert extreme == 100


def test_spec_validation():
    with pytest.raises(ValueError, match="sum to"):
        SyntheticSpec(n_items=1, annotators_per_item=1,
                      dimensions=(("d", (("x", 0.4), ("y", 0.4))),))
    with pytest.raises(ValueError, match="not declared"):
        null_spec(effect=PlantedBimodal("other", "x", "y", 1.0))
    with pytest.raises(ValueError, match="not in dimension"):
        null_spec(effect=PlantedBimodal("d", "x", "zebra", 1.0))


def test_cancellation_fixture_shape():
    ds = cancellation_fixture(seed=3)
    assert len(ds.items) == 2
    pooled = {"A": [], "B": []}
    for item in ds.items:
        assert item_ndfu(ds, item).value > 0.8
        groups = group_annotations(ds, item, "camp")
        for g in ("A", "B"):
            hist = build_histogram(groups[g], ds.scale)
            assert ndfu_from_counts(hist.counts) < 0.2
            pooled[g].extend(groups[g])
    # pooled-annotation control: merging the two items makes both groups bimodal
    for g in ("A", "B"):
        hist = build_histogram(pooled[g], ds.scale)
        assert ndfu_from_counts(hist.counts) > 0.8


def test_cancellation_fixture_detected_by_engine():
    ds = cancellation_fixture(seed=3)
    results = analyze_dimension(ds, "camp", AnalysisConfig(partitions=100, seed=1))
    assert len(results) == 2
    for res in results:
        assert res.apunim != 0.0
        assert res.p_corrected < 0.05


def test_sensitivity_basic_properties():
    ds = generate(null_spec(n_items=40, annotators_per_item=12, noise=0.3))
    curve = sensitivity(ds, max_k=8, seed=9)
    assert [e.k for e in curve.entries] == list(range(3, 9))
    assert all(e.n_items_used == 40 for e in curve.entries)
    assert all(e.std >= 0 for e in curve.entries)
    again = sensitivity(ds, max_k=8, seed=9)
    assert curve == again
    assert curve != sensitivity(ds, max_k=8, seed=10)


def test_sensitivity_full_sample_still_positive():
    """Resampling with replacement keeps variance positive even at k = n."""
    ds = generate(null_spec(n_items=40, annotators_per_item=10, noise=0.3,
                            effect=PlantedBimodal("d", "x", "y", 0.5)))
    curve = sensitivity(ds, max_k=10, seed=2)
    assert curve.entries[-1].k == 10
    assert curve.entries[-1].std > 0.0


def test_sensitivity_decreasing_trend():
    ds = generate(null_spec(n_items=120, annotators_per_item=16, noise=0.2,
                            effect=PlantedBimodal("d", "x", "y", 0.6)))
    curve = sensitivity(ds, max_k=16, seed=4)
    stds = curve.stds()
    assert stds[0] > stds[-1]


def test_sensitivity_validation():
    ds = generate(null_spec(n_items=10, annotators_per_item=6))
    with pytest.raises(ValueError, match="at least 3"):
        sensitivity(ds, max_k=2)
    with pytest.raises(ValueError, match="exceeds"):
        sensitivity(ds, max_k=7)
    assert max_feasible_k(ds) == 6


def test_sensitivity_group_restriction():
    ds = generate(null_spec(n_items=30, annotators_per_item=12))
    curve = sensitivity(ds, max_k=3, seed=1, dimension="d", group="x")
    assert isinstance(curve, SensitivityCurve)
    assert curve.entries[0].n_items_used <= 30
    with pytest.raises(ValueError, match="needs its dimension"):
        sensitivity(ds, max_k=3, group="x")
