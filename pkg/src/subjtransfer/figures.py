"""CSV + image output for spectral, waveform and ratio-sweep artifacts.

CSV files are the source of truth; PNGs are rendered from the same arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import SpectralResult
from .protocol import rows_to_csv

log = logging.getLogger(__name__)


@dataclass
class FigureArtifacts:
    psd: dict[str, SpectralResult] = field(default_factory=dict)
    csd: dict[str, SpectralResult] = field(default_factory=dict)
    averaged: dict[str, tuple[np.ndarray, float, tuple[str, ...]]] = field(default_factory=dict)
    # rows of {"method", "ratio", "mean", "sd"}; ratio 0 marks the no-augmentation baseline
    ratio_sweep: list[dict[str, Any]] = field(default_factory=list)

    def empty(self) -> bool:
        return not (self.psd or self.csd or self.averaged or self.ratio_sweep)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def emit_figures(artifacts: FigureArtifacts, out_dir: str | Path) -> list[Path]:
    if artifacts.empty():
        log.info("no artifacts to plot; nothing written")
        return []
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create figure directory {out}: {exc}") from exc
    plt = _pyplot()
    files: list[Path] = []

    for name, res in sorted(artifacts.psd.items()):
        rows = [{"channel": ch, "freq_hz": float(f), "power": float(v)}
                for ch, spec in zip(res.channel_names, res.values) for f, v in zip(res.freqs, spec)]
        files.append(_write(out / f"{name}.csv", rows_to_csv(rows, ["channel", "freq_hz", "power"])))
        fig, ax = plt.subplots(figsize=(6, 4))
        for ch, spec in zip(res.channel_names, res.values):
            ax.semilogy(res.freqs, np.maximum(spec, 1e-300), label=ch, lw=1)
        ax.set_xlabel("Frequency (Hz)")
        ax.set_ylabel("PSD")
        ax.set_title(name)
        ax.legend(fontsize=6, ncol=2)
        files.append(_save(fig, out / f"{name}.png", plt))
        fig, ax = plt.subplots(figsize=(6, 3))
        band = res.values.mean(axis=1)
        ax.bar(range(len(band)), band)
        ax.set_xticks(range(len(band)), res.channel_names)
        ax.set_ylabel("mean PSD")
        ax.set_title(f"{name} per channel")
        files.append(_save(fig, out / f"{name}_channels.png", plt))

    for name, res in sorted(artifacts.csd.items()):
        names = res.channel_names
        rows = [{"row_ch": names[i], "col_ch": names[j], "re": float(res.values[i, j].real), "im": float(res.values[i, j].imag)}
                for i in range(len(names)) for j in range(len(names))]
        files.append(_write(out / f"{name}.csv", rows_to_csv(rows, ["row_ch", "col_ch", "re", "im"])))
        fig, ax = plt.subplots(figsize=(5, 4))
        im = ax.imshow(np.abs(res.values), cmap="viridis")
        ax.set_xticks(range(len(names)), names, rotation=90)
        ax.set_yticks(range(len(names)), names)
        ax.set_title(f"{name} |CSD|")
        fig.colorbar(im, ax=ax)
        files.append(_save(fig, out / f"{name}.png", plt))

    for name, (wave, fs, names) in sorted(artifacts.averaged.items()):
        t = np.arange(wave.shape[1]) / fs
        rows = [{"channel": ch, "time_s": float(ti), "value": float(v)} for ch, w in zip(names, wave) for ti, v in zip(t, w)]
        files.append(_write(out / f"averaged_{name}.csv", rows_to_csv(rows, ["channel", "time_s", "value"])))
        fig, axes = plt.subplots(len(names), 1, figsize=(6, 1 + 0.6 * len(names)), sharex=True, squeeze=False)
        for ax, ch, w in zip(axes[:, 0], names, wave):
            ax.plot(t, w, lw=0.8)
            ax.set_ylabel(ch, fontsize=7)
        axes[-1, 0].set_xlabel("Time (s)")
        axes[0, 0].set_title(f"averaged trial: {name}")
        files.append(_save(fig, out / f"averaged_{name}.png", plt))

    if artifacts.ratio_sweep:
        rows = sorted(artifacts.ratio_sweep, key=lambda r: (r["method"], r["ratio"]))
        files.append(_write(out / "ratio_sweep.csv", rows_to_csv(rows, ["method", "ratio", "mean", "sd"])))
        fig, ax = plt.subplots(figsize=(6, 4))
        baseline = [r for r in rows if r["ratio"] == 0]
        for method in sorted({r["method"] for r in rows if r["ratio"] != 0}):
            pts = [r for r in rows if r["method"] == method and r["ratio"] != 0]
            ax.errorbar([r["ratio"] for r in pts], [r["mean"] for r in pts], yerr=[r["sd"] for r in pts],
                        marker="o", capsize=3, label=method)
        for r in baseline:
            ax.axhline(r["mean"], ls="--", color="gray", label=f"baseline ({r['method']})")
        ax.set_xlabel("augmentation ratio (x N)")
        ax.set_ylabel("accuracy (%)")
        ax.legend()
        files.append(_save(fig, out / "ratio_sweep.png", plt))
    return files


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _save(fig, path: Path, plt) -> Path:
    fig.tight_layout()
    # fixed metadata keeps PNG bytes reproducible
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path
