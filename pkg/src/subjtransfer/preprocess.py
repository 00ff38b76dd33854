"""Trial-wise signal chain: Butterworth band-pass, z-score, channel subset."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from .dataio import DEFAULT_CHANNELS, SubjectDataset, TrialTensor


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessConfig:
    band_low: float = 8.0
    band_high: float = 30.0
    filter_order: int = 5
    channels_keep: tuple[str, ...] = DEFAULT_CHANNELS
    # Per trial, per channel, over time. Disabling it keeps cross-channel
    # amplitude structure (used by variance-profile diagnostics).
    zscore: bool = True

    def validate(self, fs: float | None = None) -> None:
        if self.filter_order < 1:
            raise PreprocessError("filter_order must be >= 1")
        if not self.channels_keep:
            raise PreprocessError("channels_keep must be nonempty")
        if len(set(self.channels_keep)) != len(self.channels_keep):
            raise PreprocessError(f"duplicate entries in channels_keep: {self.channels_keep}")
        if not 0 < self.band_low < self.band_high:
            raise PreprocessError(f"need 0 < band_low < band_high, got {self.band_low}, {self.band_high}")
        if fs is not None and self.band_high >= fs / 2:
            raise PreprocessError(f"band edge {self.band_high} Hz >= Nyquist {fs / 2} Hz")


def butter_bandpass_sos(cfg: PreprocessConfig, fs: float) -> np.ndarray:
    cfg.validate(fs)
    return signal.butter(cfg.filter_order, [cfg.band_low, cfg.band_high], btype="bandpass", fs=fs, output="sos")


def bandpass_filter(x: TrialTensor, cfg: PreprocessConfig) -> TrialTensor:
    """Zero-phase (forward-backward) Butterworth band-pass along time."""
    sos = butter_bandpass_sos(cfg, x.fs)
    min_len = 3 * (2 * cfg.filter_order + 1)
    if x.n_samples < min_len:
        raise PreprocessError(f"{x.n_samples} samples too short for filter warm-up (need >= {min_len})")
    padlen = min(3 * (2 * len(sos) + 1), x.n_samples - 1)
    out = signal.sosfiltfilt(sos, x.data, axis=-1, padlen=padlen)
    return x.with_data(out)


def zscore_normalize(x: TrialTensor, eps: float = 1e-12) -> TrialTensor:
    mean = x.data.mean(axis=-1, keepdims=True)
    std = x.data.std(axis=-1, keepdims=True)
    flat = np.argwhere(std[..., 0] <= eps)
    if flat.size:
        trial, ch = flat[0]
        raise PreprocessError(
            f"zero-variance series at trial {trial}, channel {x.channel_names[ch]!r} "
            f"({len(flat)} series affected)"
        )
    return x.with_data((x.data - mean) / std)


def select_channels(x: TrialTensor, names: list[str] | tuple[str, ...]) -> TrialTensor:
    index = {n: i for i, n in enumerate(x.channel_names)}
    missing = [n for n in names if n not in index]
    if missing:
        raise PreprocessError(f"unknown channel(s) {missing}; available {list(x.channel_names)}")
    idx = [index[n] for n in names]
    return x.with_data(x.data[:, idx, :], channel_names=names)


def preprocess_pipeline(ds: SubjectDataset, cfg: PreprocessConfig) -> SubjectDataset:
    """filter -> z-score -> channel selection, labels and ids untouched."""
    x = bandpass_filter(ds.trials, cfg)
    if cfg.zscore:
        try:
            x = zscore_normalize(x)
        except PreprocessError as exc:
            raise PreprocessError(f"subject {ds.subject_id}: {exc}") from None
    x = select_channels(x, list(cfg.channels_keep))
    return replace(ds, trials=x)
