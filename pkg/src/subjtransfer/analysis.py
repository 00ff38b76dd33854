"""Summary statistics and spectral estimates for real vs. generated trials."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import signal

from .dataio import TrialTensor


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class AccuracySummary:
    mean: float
    sd: float
    median: float
    range: float
    max: float
    min: float
    n: int

    def mean_sd(self) -> str:
        return f"{self.mean:.2f} ({self.sd:.2f})"

    def median_str(self) -> str:
        return f"{self.median:.2f}"

    def range_str(self) -> str:
        return f"{self.range:.2f} ({self.max:.2f}-{self.min:.2f})"

    def row(self) -> dict[str, str]:
        return {"Mean (SD)": self.mean_sd(), "Median": self.median_str(), "Range (Max–Min)": self.range_str()}


def summarize_accuracies(values: Sequence[float]) -> AccuracySummary:
    """Mean, sample SD (n - 1; 0 for a single value), median, range."""
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0:
        raise AnalysisError("cannot summarise an empty list")
    v = np.sort(v)  # permutation-invariant summation order
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    hi, lo = float(v[-1]), float(v[0])
    return AccuracySummary(float(v.mean()), sd, float(np.median(v)), hi - lo, hi, lo, int(v.size))


@dataclass
class SpectralResult:
    freqs: np.ndarray
    values: np.ndarray  # psd: [c, n_bins]; csd: [c, c] complex
    kind: str
    channel_names: tuple[str, ...]
    meta: dict[str, Any] = field(default_factory=dict)


def _welch_params(p: int, segment_len: int | None, overlap: float) -> tuple[int, int]:
    nperseg = max(1, p // 4) if segment_len is None else int(segment_len)
    if nperseg > p:
        raise AnalysisError(f"segment length {nperseg} longer than trial ({p} samples)")
    if nperseg < 1:
        raise AnalysisError("segment length must be >= 1")
    if not 0 <= overlap < 1:
        raise AnalysisError("overlap must lie in [0, 1)")
    return nperseg, int(round(overlap * nperseg))


def psd(trials: TrialTensor, segment_len: int | None = None, overlap: float = 0.5) -> SpectralResult:
    """Welch PSD (Hann window, one-sided, density scaling) per channel, averaged over trials."""
    nperseg, noverlap = _welch_params(trials.n_samples, segment_len, overlap)
    freqs, pxx = signal.welch(trials.data, fs=trials.fs, window="hann", nperseg=nperseg, noverlap=noverlap, axis=-1)
    values = np.maximum(pxx.mean(axis=0), 0.0)
    return SpectralResult(freqs, values, "psd", trials.channel_names,
                          {"window": "hann", "segment_len": nperseg, "overlap": noverlap, "fs": trials.fs})


def csd_matrix(
    trials: TrialTensor, band: tuple[float, float] = (8.0, 30.0), segment_len: int | None = None, overlap: float = 0.5
) -> SpectralResult:
    """Channel x channel cross-spectral density averaged over ``band`` and trials.

    Entry [i, j] is the Welch estimate of E[conj(X_i) X_j]; the matrix is
    Hermitian by construction.
    """
    lo, hi = band
    if not 0 < lo < hi < trials.fs / 2:
        raise AnalysisError(f"band {band} must satisfy 0 < low < high < fs/2 = {trials.fs / 2}")
    nperseg, noverlap = _welch_params(trials.n_samples, segment_len, overlap)
    x = trials.data
    freqs, pxy = signal.csd(
        x[:, :, None, :], x[:, None, :, :], fs=trials.fs, window="hann", nperseg=nperseg, noverlap=noverlap, axis=-1
    )
    sel = (freqs >= lo) & (freqs <= hi)
    if not sel.any():
        raise AnalysisError(f"no frequency bins inside band {band} at resolution {freqs[1] - freqs[0]:.3f} Hz")
    m = pxy[..., sel].mean(axis=(0, -1))
    m = 0.5 * (m + m.conj().T)  # remove round-off asymmetry from the averaging order
    return SpectralResult(freqs[sel], m, "csd", trials.channel_names,
                          {"band": [lo, hi], "segment_len": nperseg, "overlap": noverlap, "window": "hann"})


def averaged_trial(trials: TrialTensor, labels: np.ndarray | None = None, label: int | None = None) -> np.ndarray:
    data = trials.data
    if label is not None:
        if labels is None:
            raise AnalysisError("label filter needs labels")
        data = data[np.asarray(labels) == label]
    if len(data) == 0:
        raise AnalysisError("empty trial selection")
    return data.mean(axis=0)
