"""Trial containers, on-disk dataset format, target/source splitting and a
seeded synthetic motor-imagery generator.

Dataset directory layout::

    <root>/<subject_id>/trials.f32       little-endian float32, row-major [t][c][p]
    <root>/<subject_id>/manifest.json    subject_id, fs, channel_names, labels,
                                         shape, class_names (+ optional blocks)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

CLASS_NAMES = ("left", "right")
DEFAULT_CHANNELS = ("F3", "C3", "P3", "Cz", "Pz", "F4", "C4", "P4")

TRIALS_FILE = "trials.f32"
MANIFEST_FILE = "manifest.json"


class DatasetError(ValueError):
    """Invalid, corrupt or inconsistent dataset."""


@dataclass(frozen=True)
class TrialTensor:
    data: np.ndarray  # [t, c, p]
    fs: float
    channel_names: tuple[str, ...]

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise DatasetError(f"trial data must be a nonempty [t, c, p] array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DatasetError("non-finite sample in trial data")
        names = tuple(str(n) for n in self.channel_names)
        if len(names) != data.shape[1]:
            raise DatasetError(f"{len(names)} channel names for {data.shape[1]} channels")
        if len(set(names)) != len(names):
            raise DatasetError(f"duplicate channel names: {names}")
        if not self.fs > 0:
            raise DatasetError(f"sampling rate must be positive, got {self.fs}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "fs", float(self.fs))

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    def with_data(self, data: np.ndarray, channel_names: Sequence[str] | None = None) -> TrialTensor:
        names = self.channel_names if channel_names is None else tuple(channel_names)
        return TrialTensor(data, self.fs, names)


@dataclass(frozen=True)
class SubjectDataset:
    """Trials of one subject (or one synthetic group) with per-trial labels.

    ``labels`` are integer class indices into ``class_names``. ``provenance``
    holds one tag per trial ("real" or "aug:<method>") so evaluation code can
    audit that augmented trials never reach a test fold.
    """

    trials: TrialTensor
    labels: np.ndarray
    subject_id: str
    class_names: tuple[str, ...] = CLASS_NAMES
    provenance: tuple[str, ...] | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != self.trials.n_trials:
            raise DatasetError(f"{labels.shape} labels for {self.trials.n_trials} trials")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            raise DatasetError(f"labels must be integer class indices, got dtype {labels.dtype}")
        labels = labels.astype(np.int64)
        n_classes = len(self.class_names)
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            bad = labels[(labels < 0) | (labels >= n_classes)][0]
            raise DatasetError(f"unknown class label {bad} (classes {self.class_names})")
        prov = self.provenance
        if prov is None:
            prov = ("real",) * labels.shape[0]
        prov = tuple(prov)
        if len(prov) != labels.shape[0]:
            raise DatasetError(f"{len(prov)} provenance tags for {labels.shape[0]} trials")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "provenance", prov)
        object.__setattr__(self, "subject_id", str(self.subject_id))

    def __len__(self) -> int:
        return self.trials.n_trials

    @property
    def data(self) -> np.ndarray:
        return self.trials.data

    def subset(self, indices: Sequence[int] | np.ndarray) -> SubjectDataset:
        idx = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            trials=self.trials.with_data(self.trials.data[idx]),
            labels=self.labels[idx],
            provenance=tuple(self.provenance[i] for i in idx),
        )

    def with_data(self, data: np.ndarray, **changes: Any) -> SubjectDataset:
        return replace(self, trials=self.trials.with_data(data), **changes)


def concat_datasets(parts: Sequence[SubjectDataset], subject_id: str) -> SubjectDataset:
    if not parts:
        raise DatasetError("nothing to concatenate")
    first = parts[0]
    for ds in parts[1:]:
        if ds.trials.data.shape[1:] != first.trials.data.shape[1:]:
            raise DatasetError(f"shape mismatch: {ds.subject_id} vs {first.subject_id}")
        if ds.trials.channel_names != first.trials.channel_names or ds.class_names != first.class_names:
            raise DatasetError(f"channel/class mismatch: {ds.subject_id} vs {first.subject_id}")
    return SubjectDataset(
        trials=TrialTensor(np.concatenate([d.data for d in parts]), first.trials.fs, first.trials.channel_names),
        labels=np.concatenate([d.labels for d in parts]),
        subject_id=subject_id,
        class_names=first.class_names,
        provenance=tuple(t for d in parts for t in d.provenance),
    )


# --------------------------------------------------------------------------- persistence


def save_dataset(ds: SubjectDataset, path: str | Path, extra: dict[str, Any] | None = None) -> Path:
    """Write ``ds`` to ``path`` as ``trials.f32`` plus ``manifest.json``.

    ``extra`` is merged into the manifest (e.g. a ``provenance`` block for
    augmented sets).
    """
    path = Path(path)
    with np.errstate(over="ignore"):
        data32 = ds.data.astype("<f4")
    if not np.all(np.isfinite(data32)):
        raise DatasetError("non-finite sample (after float32 conversion)")
    try:
        path.mkdir(parents=True, exist_ok=True)
        (path / TRIALS_FILE).write_bytes(np.ascontiguousarray(data32).tobytes(order="C"))
        manifest: dict[str, Any] = {
            "subject_id": ds.subject_id,
            "fs": ds.trials.fs,
            "channel_names": list(ds.trials.channel_names),
            "labels": [ds.class_names[i] for i in ds.labels],
            "shape": list(ds.data.shape),
            "class_names": list(ds.class_names),
        }
        if any(tag != "real" for tag in ds.provenance):
            manifest["trial_provenance"] = list(ds.provenance)
        if ds.metadata:
            manifest["metadata"] = ds.metadata
        if extra:
            manifest.update(extra)
        (path / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise DatasetError(f"cannot write dataset to {path}: {exc}") from exc
    return path


def load_dataset(path: str | Path) -> SubjectDataset:
    path = Path(path)
    trials_path, manifest_path = path / TRIALS_FILE, path / MANIFEST_FILE
    for p in (trials_path, manifest_path):
        if not p.is_file():
            raise DatasetError(f"missing file: {p}")
    manifest = json.loads(manifest_path.read_text())
    try:
        shape = tuple(int(n) for n in manifest["shape"])
        class_names = tuple(manifest.get("class_names", CLASS_NAMES))
        raw_labels = manifest["labels"]
        channel_names = manifest["channel_names"]
        fs = manifest["fs"]
        subject_id = manifest["subject_id"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"corrupt manifest {manifest_path}: {exc}") from exc
    if len(shape) != 3:
        raise DatasetError(f"corrupt manifest: shape {shape} is not [t, c, p]")
    raw = trials_path.read_bytes()
    if len(raw) != 4 * int(np.prod(shape)):
        raise DatasetError(
            f"corrupt manifest: shape {list(shape)} needs {4 * int(np.prod(shape))} bytes, "
            f"{trials_path.name} holds {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(shape)
    lookup = {name: i for i, name in enumerate(class_names)}
    try:
        labels = np.array([lookup[lab] for lab in raw_labels], dtype=np.int64)
    except KeyError as exc:
        raise DatasetError(f"unknown class label {exc.args[0]!r} (classes {class_names})") from None
    return SubjectDataset(
        trials=TrialTensor(data, fs, channel_names),
        labels=labels,
        subject_id=subject_id,
        class_names=class_names,
        provenance=manifest.get("trial_provenance"),
        metadata=manifest.get("metadata", {}),
    )


def save_subjects(subjects: Sequence[SubjectDataset], root: str | Path) -> Path:
    root = Path(root)
    for ds in subjects:
        save_dataset(ds, root / ds.subject_id)
    return root


def load_subjects(root: str | Path) -> list[SubjectDataset]:
    root = Path(root)
    dirs = sorted(p for p in root.iterdir() if (p / MANIFEST_FILE).is_file()) if root.is_dir() else []
    if not dirs:
        raise DatasetError(f"no subject directories under {root}")
    return [load_dataset(d) for d in dirs]


# --------------------------------------------------------------------------- splitting


@dataclass(frozen=True)
class SplitSpec:
    target_subject: str
    source_subjects: tuple[str, ...]


def split_target(
    subjects: Sequence[SubjectDataset], k: str
) -> tuple[list[SubjectDataset], SubjectDataset, SplitSpec]:
    """Take subject ``k`` as the target and every other subject as a source."""
    ids = [s.subject_id for s in subjects]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise DatasetError(f"duplicate subject ids: {dupes}")
    if k not in ids:
        raise DatasetError(f"unknown subject {k!r}")
    target = subjects[ids.index(k)]
    source = [s for s in subjects if s.subject_id != k]
    return source, target, SplitSpec(k, tuple(s.subject_id for s in source))


# --------------------------------------------------------------------------- synthetic data


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 6
    trials_per_class: int = 40
    c: int = 8
    p: int = 500
    fs: float = 250.0
    class_freqs: tuple[float, float] = (10.0, 22.0)
    subject_mixing_jitter: float = 0.5
    noise_level: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        for name in ("n_subjects", "trials_per_class", "c", "p"):
            if int(getattr(self, name)) < 1:
                raise DatasetError(f"{name} must be positive")
        if not self.fs > 0:
            raise DatasetError("fs must be positive")
        if len(self.class_freqs) != 2:
            raise DatasetError("class_freqs must hold exactly two frequencies")
        for f in self.class_freqs:
            if not 0 < f < self.fs / 2:
                raise DatasetError(f"class_freqs entry {f} outside (0, fs/2 = {self.fs / 2})")
        if self.subject_mixing_jitter < 0:
            raise DatasetError("subject_mixing_jitter must be nonnegative")
        if self.noise_level < 0:
            raise DatasetError("noise_level must be nonnegative")


def synth_channel_names(c: int) -> tuple[str, ...]:
    if c <= len(DEFAULT_CHANNELS):
        return DEFAULT_CHANNELS[:c]
    return DEFAULT_CHANNELS + tuple(f"X{i}" for i in range(len(DEFAULT_CHANNELS), c))


def synth_generate(cfg: SynthConfig) -> list[SubjectDataset]:
    """Two oscillatory class sources mixed onto ``c`` channels per subject.

    A class-j trial carries a sinusoid at ``class_freqs[j]`` (random phase,
    amplitude in [0.8, 1.2]) on source j only; the 2-source signal is mixed
    through ``base + jitter * N(0, 1)`` (a c x 2 matrix per subject) and white
    Gaussian noise of std ``noise_level`` is added. Trials are stored in
    class-interleaved order. Output is rounded to float32 so that saved and
    in-memory datasets agree exactly.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    base = rng.normal(size=(cfg.c, 2))
    t = np.arange(cfg.p) / cfg.fs
    names = synth_channel_names(cfg.c)
    n = 2 * cfg.trials_per_class
    labels = np.tile(np.array([0, 1]), cfg.trials_per_class)
    width = max(3, len(str(cfg.n_subjects)))
    subjects = []
    for s in range(cfg.n_subjects):
        mixing = base + cfg.subject_mixing_jitter * rng.normal(size=(cfg.c, 2))
        phase = rng.uniform(0.0, 2 * np.pi, size=n)
        amp = rng.uniform(0.8, 1.2, size=n)
        freqs = np.asarray(cfg.class_freqs)[labels]
        wave = amp[:, None] * np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phase[:, None])
        sources = np.zeros((n, 2, cfg.p))
        sources[np.arange(n), labels] = wave
        data = np.einsum("cs,nsp->ncp", mixing, sources)
        data += cfg.noise_level * rng.normal(size=data.shape)
        data = data.astype(np.float32).astype(np.float64)
        subjects.append(
            SubjectDataset(
                trials=TrialTensor(data, cfg.fs, names),
                labels=labels.copy(),
                subject_id=f"s{s + 1:0{width}d}",
            )
        )
    return subjects
