import dataclasses
import json

import numpy as np
import pytest

from mixlens import (
    ErrorRecord,
    ManifestEntry,
    PredictorError,
    SurrogateConfig,
    compute_errors,
    group_effects_report,
    group_overestimation,
    load_manifest,
    quantile_report,
    run_debug_bundle,
    save_wav,
    source_attribution_report,
)

from conftest import random_clip, small_two_level

FAST = SurrogateConfig(ridge_lambda=0.0)


def _entries_with_errors(tmp_path, handle, wanted):
    """Write one quantized clip per requested signed error; labels solve for it."""
    rng = np.random.default_rng(11)
    entries = []
    for i, (err, tags) in enumerate(wanted):
        clip = random_clip(rng, length=1024, quantize=True)
        path = tmp_path / f"e{i}.wav"
        save_wav(clip, path)
        label = float(handle.predict(clip)["valence"]) - err
        entries.append(
            ManifestEntry(
                id=f"e{i}",
                audio_path=path,
                stems_dir=None,
                tags=frozenset(tags),
                labels={"valence": label},
            )
        )
    return entries


def test_compute_errors_arithmetic(tmp_path):
    handle = small_two_level(seed=5)
    entries = _entries_with_errors(
        tmp_path, handle, [(0.3, ["x"]), (0.0, []), (-0.2, ["x", "y"])]
    )
    run = compute_errors(handle, entries, "valence")
    assert not run.failures
    assert [r.id for r in run.records] == ["e0", "e1", "e2"]
    got = [r.signed_error for r in run.records]
    np.testing.assert_allclose(got, [0.3, 0.0, -0.2], atol=1e-12)
    for record, entry in zip(run.records, entries):
        assert record.signed_error == record.prediction - record.label
        assert record.tags == entry.tags
        assert record.emotion == "valence"


def test_compute_errors_unknown_emotion(tmp_path):
    handle = small_two_level()
    entries = _entries_with_errors(tmp_path, handle, [(0.1, [])])
    with pytest.raises(PredictorError, match="does not declare"):
        compute_errors(handle, entries, "happiness")


def test_compute_errors_collects_failures(tmp_path):
    handle = small_two_level()
    entries = _entries_with_errors(tmp_path, handle, [(0.1, []), (0.2, [])])
    broken = dataclasses.replace(entries[0], audio_path=tmp_path / "gone.wav")
    unlabeled = dataclasses.replace(entries[1], labels={"arousal": 0.0})
    run = compute_errors(handle, [broken, entries[1], unlabeled], "valence")
    assert [r.id for r in run.records] == ["e1"]
    assert len(run.failures) == 2
    assert all(f.stage == "errors" for f in run.failures)
    assert "label" in run.failures[1].message
    with pytest.raises(Exception):
        compute_errors(handle, [broken], "valence", strict=True)


def _records(errors, tags=()):
    tags = list(tags) + [frozenset()] * (len(errors) - len(tags))
    return [
        ErrorRecord(
            id=f"r{i:03d}",
            emotion="valence",
            prediction=e,
            label=0.0,
            signed_error=e,
            tags=frozenset(t),
        )
        for i, (e, t) in enumerate(zip(errors, tags))
    ]


def test_quantile_single_bin_reproduces_totals():
    records = _records([0.4, -0.1, 0.2, 0.0], tags=[["g"], ["g"], [], []])
    report = quantile_report(records, "g", k=1)
    assert report.k == 1 and len(report.bins) == 1
    assert report.bins[0].count == 4
    assert report.bins[0].mean_signed_error == pytest.approx(0.125, abs=1e-15)
    assert report.bins[0].tag_fraction == pytest.approx(0.5)
    assert report.prevalence == pytest.approx(0.5)


def test_quantile_partition_and_ordering():
    errors = [0.1 * i for i in range(10)]
    report = quantile_report(_records(errors), "g", k=3)
    assert [b.count for b in report.bins] == [4, 3, 3]
    assert sum(b.count for b in report.bins) == 10
    means = [b.mean_signed_error for b in report.bins]
    assert means == sorted(means)
    assert report.top_bin is report.bins[-1]
    assert report.top_bin.mean_signed_error == pytest.approx((0.7 + 0.8 + 0.9) / 3)


def test_quantile_ties_break_by_id():
    records = _records([0.0, 0.0], tags=[["g"], []])
    records = [records[1], records[0]]  # r001 (untagged) listed first
    report = quantile_report(records, "g", k=2)
    # equal errors sort by id, so r000 (tagged) lands in the first bin
    assert report.bins[0].tag_fraction == 1.0
    assert report.bins[1].tag_fraction == 0.0


def test_quantile_validation():
    records = _records([0.1, 0.2])
    with pytest.raises(ValueError):
        quantile_report(records, "g", k=0)
    with pytest.raises(ValueError):
        quantile_report(records, "g", k=3)
    with pytest.raises(ValueError):
        quantile_report([], "g", k=1)


def test_quantile_csv_layout():
    report = quantile_report(_records([0.1, 0.2]), "g", k=2)
    lines = report.to_csv().splitlines()
    assert lines[0] == "quantile,count,mean_signed_error,tag_fraction"
    assert len(lines) == 3
    assert lines[1].startswith("0,1,")


@pytest.mark.parametrize("seed", range(5))
def test_quantile_independent_tags_stay_near_prevalence(seed):
    # tags drawn independently of error: top-bin enrichment is pure noise
    rng = np.random.default_rng(seed)
    n, p = 200, 0.3
    errors = rng.normal(0.0, 1.0, n).tolist()
    tags = [["g"] if rng.random() < p else [] for _ in range(n)]
    report = quantile_report(_records(errors, tags), "g", k=10)
    sigma = np.sqrt(report.prevalence * (1 - report.prevalence) / 20)
    assert abs(report.top_bin.tag_fraction - report.prevalence) <= 3 * sigma + 1e-9


def test_group_overestimation_means():
    records = _records([0.5, 0.3, -0.1, 0.1], tags=[["g"], ["g"], [], []])
    result = group_overestimation(records, "g")
    assert result == {
        "tagged": pytest.approx(0.4),
        "untagged": pytest.approx(0.0),
    }
    with pytest.raises(ValueError, match="group"):
        group_overestimation(_records([0.1]), "g")  # nobody tagged


@pytest.fixture(scope="module")
def entries(planted_ds):
    return load_manifest(planted_ds.manifest_path)


@pytest.fixture(scope="module")
def run(planted_ds, entries):
    return compute_errors(planted_ds.predictor(), entries, "valence")


class TestPlantedPipeline:
    """End-to-end checks on the synthetic biased dataset."""

    def test_all_entries_scored(self, run):
        assert len(run.records) == 60
        assert not run.failures

    def test_tagged_group_overestimated(self, planted_ds, run):
        result = group_overestimation(run.records, planted_ds.planted_tag)
        assert result["tagged"] == pytest.approx(planted_ds.overestimation, abs=0.05)
        assert abs(result["untagged"]) < 0.05

    def test_top_error_bin_is_tag_enriched(self, planted_ds, run):
        report = quantile_report(run.records, planted_ds.planted_tag, k=10)
        assert report.top_bin.tag_fraction >= 2 * report.prevalence

    def test_debiased_head_removes_gap(self, planted_ds, entries):
        run = compute_errors(planted_ds.debiased_predictor(), entries, "valence")
        result = group_overestimation(run.records, planted_ds.planted_tag)
        assert abs(result["tagged"]) < 0.1
        assert abs(result["untagged"]) < 0.1

    def test_group_effects_point_at_planted_feature(self, planted_ds, entries):
        report = group_effects_report(
            planted_ds.predictor(), entries, planted_ds.planted_tag, "valence"
        )
        assert report.top_feature("tagged") == planted_ds.planted_feature
        assert report.tagged_count == 20
        assert report.untagged_count == 40
        lines = report.to_csv().splitlines()
        assert lines[0] == (
            "feature,tagged_mean_relative_effect,untagged_mean_relative_effect"
        )
        assert len(lines) == 1 + len(report.feature_names)

    def test_source_attribution_finds_planted_component(self, planted_ds, entries):
        report = source_attribution_report(
            planted_ds.predictor(),
            entries,
            planted_ds.planted_tag,
            planted_ds.planted_feature,
            config=FAST,
        )
        assert report.modal_label("tagged") == planted_ds.planted_component
        assert report.skipped == 0
        assert 0.0 < report.mean_top_share["tagged"] <= 1.0
        tagged_total = sum(report.histograms["tagged"].values())
        assert tagged_total == 20  # the planted songs all explain cleanly
        # deterministic: same call, same bytes
        again = source_attribution_report(
            planted_ds.predictor(),
            entries,
            planted_ds.planted_tag,
            planted_ds.planted_feature,
            config=FAST,
        )
        assert again.to_csv() == report.to_csv()

    def test_missing_stems_are_skipped(self, planted_ds, entries):
        stripped = [dataclasses.replace(e, stems_dir=None) for e in entries[:3]]
        report = source_attribution_report(
            planted_ds.predictor(),
            stripped + list(entries[3:6]),
            planted_ds.planted_tag,
            planted_ds.planted_feature,
            config=FAST,
        )
        assert report.skipped == 3

    def test_debug_bundle_files_and_summary(self, planted_ds, entries, tmp_path):
        out = tmp_path / "bundle"
        summary = run_debug_bundle(
            planted_ds.predictor(),
            entries,
            "valence",
            planted_ds.planted_tag,
            out,
            config=FAST,
        )
        for name in ("errors.csv", "quantiles.csv", "group_effects.csv",
                     "sources.csv", "summary.json"):
            assert (out / name).exists(), name
        on_disk = json.loads((out / "summary.json").read_text())
        assert on_disk == summary
        assert summary["entries"] == 60
        assert summary["group_effects"]["top_feature_tagged"] == (
            planted_ds.planted_feature
        )
        assert summary["sources"]["feature"] == planted_ds.planted_feature
        assert summary["sources"]["modal_label_tagged"] == (
            planted_ds.planted_component
        )
        assert summary["quantiles"]["top_bin"]["tag_fraction"] >= (
            2 * summary["prevalence"]
        )

    def test_debug_bundle_reruns_byte_identical(self, planted_ds, entries, tmp_path):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            run_debug_bundle(
                planted_ds.predictor(),
                entries,
                "valence",
                planted_ds.planted_tag,
                out,
                config=FAST,
            )
        for name in ("errors.csv", "quantiles.csv", "group_effects.csv",
                     "sources.csv", "summary.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
