import json

import pytest

from mixlens import random_baseline
from mixlens.cli import main

from conftest import serving_command


@pytest.fixture(scope="module")
def cmd(planted_ds):
    return serving_command(planted_ds.predictor_config_path)


@pytest.fixture(scope="module")
def song(planted_ds):
    root = planted_ds.root
    return {
        "audio": str(root / "audio" / "song000.wav"),
        "stems": str(root / "stems" / "song000"),
    }


@pytest.fixture(scope="module")
def small_manifest(planted_ds, tmp_path_factory):
    """First dozen songs, rewritten next to the original so paths resolve."""
    lines = planted_ds.manifest_path.read_text().splitlines()[:12]
    path = planted_ds.root / "manifest_small.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_explain_segments_to_stdout(cmd, song, capsys):
    code = main([
        "explain", "--audio", song["audio"], "--segments", "3",
        "--predictor", cmd, "--target", "valence", "--lambda", "0",
    ])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["target"] == "valence"
    assert doc["labels"] == ["segment_0", "segment_1", "segment_2"]
    assert len(doc["attributions"]) == 3
    assert doc["fidelity"] == pytest.approx(1.0, abs=1e-9)


def test_explain_reruns_are_byte_identical(cmd, song, tmp_path):
    args = [
        "explain", "--audio", song["audio"], "--bands", "4",
        "--predictor", cmd, "--target", "rhythmic_stability",
    ]
    outs = [tmp_path / "a.json", tmp_path / "b.json"]
    for out in outs:
        assert main(args + ["--out", str(out)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_effects_csv_and_json(cmd, song, capsys):
    args = ["effects", "--audio", song["audio"], "--predictor", cmd,
            "--emotion", "valence"]
    assert main(args + ["--format", "csv"]) == 0
    csv_out = capsys.readouterr().out
    lines = csv_out.splitlines()
    assert lines[0] == "feature,value,weight,effect,relative_effect"
    assert len(lines) == 8  # header + seven mid-level features

    assert main(args) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["emotion"] == "valence"
    assert len(doc["features"]) == 7
    assert sum(abs(r) for r in doc["relative_effects"]) == pytest.approx(1.0)


def test_chain_reports_selected_feature(cmd, song, capsys):
    code = main([
        "chain", "--audio", song["audio"], "--stems", song["stems"],
        "--predictor", cmd, "--emotion", "valence", "--lambda", "0",
    ])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["emotion"] == "valence"
    assert doc["selected_feature"] in doc["effects"]["features"]
    source = doc["source_explanation"]
    assert source["target"] == doc["selected_feature"]
    assert sorted(source["labels"]) == [
        "bass", "drums", "other", "piano", "vocals",
    ]
    assert "all_explanations" not in doc


def test_chain_all_features(cmd, song, capsys):
    code = main([
        "chain", "--audio", song["audio"], "--stems", song["stems"],
        "--predictor", cmd, "--emotion", "arousal", "--all-features",
    ])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["all_explanations"]) == 7


def test_baseline_matches_library_and_is_deterministic(capsys):
    args = ["baseline", "--d", "5", "--n", "500", "--seed", "3"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == first
    doc = json.loads(first)
    stats = random_baseline(5, n=500, seed=3)
    assert doc["mean"] == stats.mean
    assert doc["std"] == stats.std
    assert doc["d"] == 5


def test_debug_writes_bundle_quietly(cmd, small_manifest, tmp_path, capsys):
    out_dir = tmp_path / "reports"
    code = main([
        "debug", "--manifest", small_manifest, "--predictor", cmd,
        "--emotion", "valence", "--tag", "electronic",
        "--quantiles", "4", "--out-dir", str(out_dir), "--lambda", "0",
    ])
    assert code == 0
    assert capsys.readouterr().out == ""
    for name in ("errors.csv", "quantiles.csv", "group_effects.csv",
                 "sources.csv", "summary.json"):
        assert (out_dir / name).exists(), name
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["entries"] == 12
    assert summary["quantiles"]["k"] == 4


def test_usage_errors_exit_1(cmd, song, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["explain", "--audio", song["audio"]])  # missing required flags
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["explain", "--audio", song["audio"], "--segments", "2",
              "--predictor", cmd, "--target", "valence", "--kernel", "exp:-1"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 1
    capsys.readouterr()


def test_unknown_target_exits_1(cmd, song, capsys):
    code = main([
        "explain", "--audio", song["audio"], "--segments", "2",
        "--predictor", cmd, "--target", "sparkle",
    ])
    assert code == 1
    assert "sparkle" in capsys.readouterr().err


def test_unknown_emotion_exits_1(cmd, song, capsys):
    code = main([
        "effects", "--audio", song["audio"], "--predictor", cmd,
        "--emotion", "melancholy",
    ])
    assert code == 1
    assert "melancholy" in capsys.readouterr().err


def test_missing_audio_exits_3(cmd, capsys):
    code = main([
        "effects", "--audio", "/no/such/file.wav", "--predictor", cmd,
        "--emotion", "valence",
    ])
    assert code == 3
    assert "data error" in capsys.readouterr().err


def test_missing_manifest_exits_3(cmd, tmp_path, capsys):
    code = main([
        "debug", "--manifest", str(tmp_path / "gone.jsonl"),
        "--predictor", cmd, "--emotion", "valence", "--tag", "x",
        "--out-dir", str(tmp_path / "out"),
    ])
    assert code == 3
    capsys.readouterr()


def test_dead_predictor_exits_2(song, capsys):
    import sys
    code = main([
        "effects", "--audio", song["audio"],
        "--predictor", f"{sys.executable} -c \"import sys; sys.exit(4)\"",
        "--emotion", "valence",
    ])
    assert code == 2
    assert "predictor failure" in capsys.readouterr().err
