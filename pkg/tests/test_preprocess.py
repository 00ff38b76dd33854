import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from subjtransfer.dataio import DEFAULT_CHANNELS, TrialTensor
from subjtransfer.preprocess import (
    PreprocessConfig,
    PreprocessError,
    bandpass_filter,
    preprocess_pipeline,
    select_channels,
    zscore_normalize,
)

from conftest import make_dataset
from helpers import butter_bandpass_gain

FS = 250.0
CFG = PreprocessConfig()


def _tone(f, n=2000, fs=FS, phase=0.3):
    t = np.arange(n) / fs
    return np.sin(2 * np.pi * f * t + phase)


def _rms_ratio(f):
    x = _tone(f)[None, None, :]
    y = bandpass_filter(TrialTensor(x, FS, ("a",)), CFG).data[0, 0]
    mid = slice(500, 1500)  # skip edge transients
    return np.sqrt(np.mean(y[mid] ** 2)) / np.sqrt(np.mean(x[0, 0, mid] ** 2))


@pytest.mark.parametrize("f", [10.0, 12.0, 16.0, 20.0, 25.0, 28.0])
def test_passband_matches_squared_magnitude(f):
    # forward-backward filtering applies |H|^2
    expected = butter_bandpass_gain(f, 8, 30, 5, FS) ** 2
    assert abs(_rms_ratio(f) - expected) <= 0.05 * expected


@pytest.mark.parametrize("f", [1.0, 3.0, 4.0, 45.0, 60.0, 100.0])
def test_stopband_attenuated(f):
    assert _rms_ratio(f) < 0.10
    assert butter_bandpass_gain(f, 8, 30, 5, FS) ** 2 < 0.10


def test_oracle_half_power_at_edges():
    g = butter_bandpass_gain(np.array([8.0, 30.0]), 8, 30, 5, FS)
    np.testing.assert_allclose(g, 1 / np.sqrt(2), rtol=1e-12)


def test_scipy_response_matches_oracle():
    from scipy import signal

    from subjtransfer.preprocess import butter_bandpass_sos

    f = np.linspace(0.5, 120, 200)
    _, h = signal.sosfreqz(butter_bandpass_sos(CFG, FS), worN=f, fs=FS)
    np.testing.assert_allclose(np.abs(h), butter_bandpass_gain(f, 8, 30, 5, FS), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 4, 64), elements=st.floats(-1e3, 1e3)))
def test_zscore_postconditions(x):
    x = x + np.linspace(0, 50, x.shape[-1])  # guarantees nonzero variance per series
    z = zscore_normalize(TrialTensor(x, FS, tuple("abcd"))).data
    np.testing.assert_allclose(z.mean(axis=-1), 0, atol=1e-6)
    np.testing.assert_allclose(z.std(axis=-1), 1, atol=1e-6)


def test_zscore_constant_channel_named():
    x = np.random.default_rng(0).normal(size=(2, 3, 50))
    x[1, 2] = 4.0
    with pytest.raises(PreprocessError, match="trial 1, channel 'c'"):
        zscore_normalize(TrialTensor(x, FS, ("a", "b", "c")))


def test_select_channels_order_and_unknown():
    x = np.arange(2 * 3 * 5, dtype=float).reshape(2, 3, 5)
    t = TrialTensor(x, FS, ("a", "b", "c"))
    out = select_channels(t, ["c", "a"])
    assert out.channel_names == ("c", "a")
    np.testing.assert_array_equal(out.data, x[:, [2, 0]])
    with pytest.raises(PreprocessError, match="unknown channel"):
        select_channels(t, ["z"])


def test_nyquist_and_short_trials_rejected():
    t = TrialTensor(np.random.default_rng(0).normal(size=(1, 1, 200)), 50.0, ("a",))
    with pytest.raises(PreprocessError, match="Nyquist"):
        bandpass_filter(t, CFG)
    short = TrialTensor(np.random.default_rng(0).normal(size=(1, 1, 20)), FS, ("a",))
    with pytest.raises(PreprocessError, match="too short"):
        bandpass_filter(short, CFG)


def test_pipeline_keeps_labels_and_selects_montage_channels():
    rng = np.random.default_rng(3)
    names = tuple(DEFAULT_CHANNELS) + ("O1", "O2")
    ds = make_dataset(rng.normal(size=(4, len(names), 500)), names=names)
    out = preprocess_pipeline(ds, CFG)
    assert out.trials.channel_names == DEFAULT_CHANNELS
    np.testing.assert_array_equal(out.labels, ds.labels)
    np.testing.assert_allclose(out.data.std(axis=-1), 1, atol=1e-9)
    raw = preprocess_pipeline(ds, PreprocessConfig(zscore=False))
    assert not np.allclose(raw.data.std(axis=-1), 1)
