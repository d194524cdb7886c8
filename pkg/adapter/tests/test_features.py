import numpy as np
import pytest

from mixlens_adapter import get_statistic, statistic_names


@pytest.mark.parametrize("name", statistic_names())
def test_silence_maps_to_zero(name):
    assert get_statistic(name)(np.zeros(2048), 8000) == 0.0


def test_unknown_statistic():
    with pytest.raises(KeyError, match="available"):
        get_statistic("sparkle")


def test_rms_closed_forms():
    rms = get_statistic("rms")
    assert rms(np.full(100, 0.5), 8000) == pytest.approx(0.5, abs=1e-15)
    alternating = 0.25 * (-1.0) ** np.arange(64)
    assert rms(alternating, 8000) == pytest.approx(0.25, abs=1e-15)


def test_zero_crossing_rate():
    zcr = get_statistic("zero_crossing_rate")
    assert zcr(0.5 * (-1.0) ** np.arange(100), 8000) == 1.0
    assert zcr(np.full(100, 0.3), 8000) == 0.0
    assert zcr(np.array([0.7]), 8000) == 0.0


def _tone(bin_index, n=2048):
    return np.cos(2 * np.pi * bin_index * np.arange(n) / n)


def test_centroid_and_rolloff_of_pure_tone():
    # a tone at bin n/4 sits exactly halfway up the rfft bin range
    tone = _tone(512, n=2048)
    assert get_statistic("spectral_centroid")(tone, 8000) == pytest.approx(
        0.5, abs=1e-6
    )
    assert get_statistic("spectral_rolloff")(tone, 8000) == pytest.approx(
        0.5, abs=1e-12
    )


def test_bandwidth_orders_narrow_below_wide():
    bandwidth = get_statistic("spectral_bandwidth")
    narrow = bandwidth(_tone(512), 8000)
    wide = bandwidth(_tone(128) + _tone(896), 8000)
    assert narrow < 1e-3
    assert wide > 10 * max(narrow, 1e-6)


def test_flatness_orders_tone_below_noise():
    flatness = get_statistic("spectral_flatness")
    noise = np.random.default_rng(0).uniform(-1, 1, 2048)
    assert flatness(_tone(512), 8000) < 0.01
    assert flatness(noise, 8000) > 0.3


def test_low_band_ratio_tracks_tone_position():
    ratio = get_statistic("low_band_ratio")
    assert ratio(_tone(64), 8000) > 0.99  # well inside the lowest quarter
    assert ratio(_tone(900), 8000) < 0.01


def test_statistics_are_deterministic():
    samples = np.random.default_rng(3).uniform(-0.8, 0.8, 4096)
    for name in statistic_names():
        fn = get_statistic(name)
        assert fn(samples, 8000) == fn(samples.copy(), 8000)
