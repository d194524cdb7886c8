"""Acceptance gate: one test per release criterion.

Run with ``pytest -v tests/test_acceptance.py`` to get a pass/fail line per
criterion. Each test re-derives its expected values from an oracle that does
not share code with the implementation under test.
"""

import json
import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from mixlens import (
    AudioClip,
    BandSplitConfig,
    Mask,
    ProtocolError,
    SurrogateConfig,
    band_decompose,
    band_bin_edges,
    baseline_complexities,
    complexity,
    compute_errors,
    connect_external,
    effects,
    explain,
    group_effects_report,
    load_manifest,
    mix,
    quantile_report,
    random_baseline,
    save_wav,
    source_attribution_report,
    time_decompose,
)
from mixlens.cli import main as cli_main
from mixlens.serving import predictor_config_dict
from mixlens.synth import build_planted_dataset

from conftest import random_clip, serving_command, small_two_level

FAST = SurrogateConfig(ridge_lambda=0.0)


def test_criterion_1_exact_lime_recovery(linear_fixture, linear_oracle):
    start = time.perf_counter()
    decomp, handle = linear_fixture
    result = explain(handle, decomp, "out", SurrogateConfig(ridge_lambda=0.0))
    expected = np.array(linear_oracle["attributions"])
    np.testing.assert_allclose(result.attributions, expected, atol=1e-6, rtol=0)
    assert result.fidelity == pytest.approx(1.0, abs=1e-9)
    assert time.perf_counter() - start < 60.0


def test_criterion_2_complexity_law():
    rng = np.random.default_rng(20240817)
    for i in range(10_000):
        d = 2 + i % 9  # cycles through 2..10
        vec = rng.normal(size=d)
        c = complexity(vec)
        assert 0.0 <= c <= math.log(d)
        # invariances: permutation, sign flips, positive scaling
        perm = rng.permutation(d)
        signs = rng.choice([-1.0, 1.0], size=d)
        scale = float(rng.uniform(0.1, 10.0))
        assert abs(complexity(vec[perm]) - c) <= 1e-12
        assert abs(complexity(vec * signs) - c) <= 1e-12
        assert abs(complexity(vec * scale) - c) <= 1e-12
    for d in range(2, 11):
        one_hot = np.zeros(d)
        one_hot[d // 2] = -3.7
        assert abs(complexity(one_hot)) <= 1e-12
        equal = np.full(d, 0.4) * rng.choice([-1.0, 1.0], size=d)
        assert abs(complexity(equal) - math.log(d)) <= 1e-12


def test_criterion_3_random_baseline_against_monte_carlo():
    stats = random_baseline(5, n=1000, seed=0)
    samples = baseline_complexities(5, 1000, seed=0)
    assert float(np.max(samples)) <= math.log(5)
    # independent oracle: different generator family, inline entropy formula
    oracle_rng = np.random.Generator(np.random.MT19937(123456789))
    draws = oracle_rng.random((1_000_000, 5))
    p = draws / draws.sum(axis=1, keepdims=True)
    mc = -np.sum(p * np.log(p), axis=1)
    se = math.sqrt(stats.std**2 / stats.n + mc.var(ddof=1) / mc.size)
    assert abs(stats.mean - mc.mean()) < 3 * se


def test_criterion_4_reconstruction():
    rng = np.random.default_rng(404)
    config = BandSplitConfig(n_bands=4, window_size=1024, hop=256)
    worst = 0.0
    for _ in range(50):
        clip = random_clip(rng, length=int(rng.integers(1024, 5000)))
        decomp = band_decompose(clip, config)
        remix = mix(decomp, Mask.full(4))
        worst = max(worst, float(np.max(np.abs(remix.samples - clip.samples))))
    assert worst <= 1e-5

    clip = random_clip(rng, length=3000)
    segments = time_decompose(clip, 7)
    remix = mix(segments, Mask.full(7))
    assert np.array_equal(remix.samples, clip.samples)  # exact, not approximate

    rate, length = 22050, 32768
    t = np.arange(length) / rate
    sine = AudioClip(0.4 * np.sin(2 * np.pi * 440.0 * t), rate)
    cfg = BandSplitConfig(n_bands=2, window_size=2048, hop=512)
    bands = band_decompose(sine, cfg)
    # FFT oracle: nearly all spectral energy of a 440 Hz tone sits below the
    # band-0 cutoff frequency, so band 0 must carry at least 99% of the energy
    spectrum = np.abs(np.fft.rfft(sine.samples)) ** 2
    window_bin_cut = band_bin_edges(cfg)[0][1]
    cutoff = window_bin_cut * length // cfg.window_size  # same Hz, full-length grid
    assert spectrum[:cutoff].sum() / spectrum.sum() > 0.999
    energies = [float(np.sum(c.samples**2)) for _, c in bands.components]
    assert energies[0] / sum(energies) >= 0.99


def test_criterion_5_effects_algebra():
    handle = small_two_level(seed=42)
    head = handle.fetch_head()
    rng = np.random.default_rng(5)
    for _ in range(20):
        out = handle.predict(random_clip(rng, length=1024))
        for emotion in head.emotions:
            vec = effects(out, head, emotion)
            total = float(np.sum(vec.effects)) + head.bias_of(emotion)
            assert total == pytest.approx(out[emotion], abs=1e-9)
            assert np.sum(np.abs(vec.relative_effects)) == pytest.approx(
                1.0, abs=1e-9
            )
            for scale in (0.01, 3.0, 1000.0):
                scaled = effects(
                    out,
                    type(head)(
                        head.emotions, head.midlevels,
                        head.weights * scale, head.bias * scale,
                    ),
                    emotion,
                )
                assert scaled.top_feature() == vec.top_feature()


def test_criterion_6_planted_bias_recovered_across_seeds(tmp_path):
    start = time.perf_counter()
    hits = 0
    for seed in range(20):
        root = tmp_path / f"seed{seed}"
        ds = build_planted_dataset(root, seed=seed)
        entries = load_manifest(ds.manifest_path)
        handle = ds.predictor()
        run = compute_errors(handle, entries, "valence")
        quantiles = quantile_report(run.records, ds.planted_tag, k=10)
        effects_rep = group_effects_report(handle, entries, ds.planted_tag, "valence")
        sources = source_attribution_report(
            handle, entries, ds.planted_tag, ds.planted_feature, config=FAST
        )
        ok = (
            quantiles.top_bin.tag_fraction >= 2 * quantiles.prevalence
            and effects_rep.top_feature("tagged") == ds.planted_feature
            and sources.modal_label("tagged") == ds.planted_component
        )
        hits += ok
        shutil.rmtree(root)  # keep the 20 generated datasets from piling up
    assert hits >= 18
    assert time.perf_counter() - start < 300.0


def test_criterion_7_served_predictor_is_bit_identical(tmp_path):
    local = small_two_level(seed=77)
    config_path = tmp_path / "predictor.json"
    config_path.write_text(json.dumps(predictor_config_dict(local)))
    rng = np.random.default_rng(7)
    with connect_external(serving_command(config_path)) as remote:
        assert remote.midlevel_names == local.midlevel_names
        for _ in range(100):
            clip = random_clip(
                rng, length=int(rng.integers(256, 2048)), quantize=True
            )
            a = local.predict(clip)
            b = remote.predict(clip)
            assert a.names == b.names
            assert np.array_equal(a.values, b.values)  # bit identical
        np.testing.assert_array_equal(
            local.fetch_head().weights, remote.fetch_head().weights
        )

    # the handshake check must reject a server whose reported head deviates
    # by more than 1e-5 from its own predictions, and accept one within it
    rogue = tmp_path / "rogue_server.py"
    rogue.write_text(
        "import json, sys\n"
        "import numpy as np\n"
        "from mixlens import LinearHead\n"
        "from mixlens.serving import build_predictor_from_config, serve\n"
        "pred = build_predictor_from_config(json.load(open(sys.argv[1])))\n"
        "real = pred.fetch_head()\n"
        "w = real.weights.copy()\n"
        "w[0, 0] += float(sys.argv[2])\n"
        "fake = LinearHead(real.emotions, real.midlevels, w, real.bias)\n"
        "pred.fetch_head = lambda: fake\n"
        "sys.exit(serve(pred, sys.stdin, sys.stdout))\n"
    )
    with pytest.raises(ProtocolError):
        connect_external(f"{sys.executable} {rogue} {config_path} 0.5")
    with connect_external(f"{sys.executable} {rogue} {config_path} 1e-12") as ok:
        ok.predict(random_clip(rng, length=512, quantize=True))


def test_criterion_8_cli_reruns_byte_identical(planted_ds, tmp_path):
    cmd = serving_command(planted_ds.predictor_config_path)
    audio = str(planted_ds.root / "audio" / "song000.wav")
    stems = str(planted_ds.root / "stems" / "song000")
    lines = planted_ds.manifest_path.read_text().splitlines()[:12]
    manifest = tmp_path / "manifest12.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    shutil.copytree(planted_ds.root / "audio", tmp_path / "audio")
    shutil.copytree(planted_ds.root / "stems", tmp_path / "stems")

    runs = {
        "explain.json": ["explain", "--audio", audio, "--segments", "4",
                         "--predictor", cmd, "--target", "melodiousness"],
        "effects.csv": ["effects", "--audio", audio, "--predictor", cmd,
                        "--emotion", "valence", "--format", "csv"],
        "chain.json": ["chain", "--audio", audio, "--stems", stems,
                       "--predictor", cmd, "--emotion", "valence"],
        "baseline.json": ["baseline", "--d", "7", "--n", "400", "--seed", "1"],
    }
    for name, args in runs.items():
        outs = [tmp_path / f"{i}_{name}" for i in (1, 2)]
        for out in outs:
            assert cli_main(args + ["--out", str(out)]) == 0, name
        assert outs[0].read_bytes() == outs[1].read_bytes(), name

    dirs = [tmp_path / "debug1", tmp_path / "debug2"]
    for out_dir in dirs:
        code = cli_main([
            "debug", "--manifest", str(manifest), "--predictor", cmd,
            "--emotion", "valence", "--tag", planted_ds.planted_tag,
            "--quantiles", "4", "--out-dir", str(out_dir), "--lambda", "0",
        ])
        assert code == 0
    for report in ("errors.csv", "quantiles.csv", "group_effects.csv",
                   "sources.csv", "summary.json"):
        assert (dirs[0] / report).read_bytes() == (dirs[1] / report).read_bytes()
