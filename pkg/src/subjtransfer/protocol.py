"""Per-target evaluation protocol and its report.

For each target subject: preprocess everything, split the target's trials
into a stratified train/test fold, optionally augment the training fold
(baseline method or relevance selection + transfer), train the classifier
and score it on the held-out real trials only.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .analysis import SpectralResult, averaged_trial, csd_matrix, psd, summarize_accuracies
from .augmenters import AugmenterConfig, build_augmented_set
from .classifier import ClassifierConfig, build_classifier, evaluate, train_classifier
from .dataio import SubjectDataset, split_target
from .preprocess import PreprocessConfig, preprocess_pipeline
from .relevance import RelevanceConfig, RelevanceSelection, build_transfer_pool
from .transfer import GanTrainConfig, TransferModelBundle, train_transfer

log = logging.getLogger(__name__)

AUG_METHODS = ("none", "noise", "multiple", "flip", "cycle_gan")


class ProtocolError(RuntimeError):
    def __init__(self, stage: str, subject: str | None, message: str):
        where = f"[{stage}]" + (f" subject {subject}" if subject else "")
        super().__init__(f"{where}: {message}")
        self.stage = stage
        self.subject = subject


def derive_seed(*parts: Any) -> int:
    """Stable 31-bit seed from arbitrary parts (sha256 of their repr, joined by '/')."""
    digest = hashlib.sha256("/".join(repr(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:4], "little") & 0x7FFFFFFF


@dataclass(frozen=True)
class ProtocolConfig:
    method: str = "none"
    ratio: int = 10
    gamma: float | None = None
    test_fraction: float = 0.2
    seed: int = 0
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    relevance: RelevanceConfig = field(default_factory=RelevanceConfig)
    gan: GanTrainConfig = field(default_factory=GanTrainConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    spectral: bool = False
    band: tuple[float, float] = (8.0, 30.0)

    def validate(self) -> None:
        if self.method not in AUG_METHODS:
            raise ValueError(f"method must be one of {AUG_METHODS}, got {self.method!r}")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.method != "none":
            AugmenterConfig(self.method, self.gamma, self.ratio).validate()


def stratified_split(labels: np.ndarray, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class split; each class contributes round(test_fraction * n_class) test trials (>= 1)."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < 2:
            raise ValueError(f"class {cls} has {len(idx)} trial(s); cannot place it in both folds")
        idx = rng.permutation(idx)
        n_test = min(len(idx) - 1, max(1, int(round(test_fraction * len(idx)))))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass
class SubjectResult:
    subject: str
    method: str
    ratio: int
    seed: int
    accuracy: float
    n_train_real: int
    n_train_augmented: int
    n_test: int
    test_provenance: tuple[str, ...] = ()
    selection: RelevanceSelection | None = None
    bundle: TransferModelBundle | None = None
    pool: SubjectDataset | None = None
    train_set: SubjectDataset | None = None
    spectra: dict[str, SpectralResult] = field(default_factory=dict)
    averaged: dict[str, np.ndarray] = field(default_factory=dict)
    # wall-clock seconds per stage; the transfer stage is shared by every ratio of a run
    timings: dict[str, float] = field(default_factory=dict)

    def row(self) -> dict[str, Any]:
        return {"subject": self.subject, "method": self.method, "ratio": self.ratio, "seed": self.seed,
                "accuracy": self.accuracy}


@dataclass
class EvalReport:
    results: list[SubjectResult] = field(default_factory=list)

    def extend(self, other: EvalReport) -> None:
        self.results.extend(other.results)

    def cells(self) -> list[tuple[str, int]]:
        return sorted({(r.method, r.ratio) for r in self.results})

    def summary(self) -> list[dict[str, Any]]:
        """One row per (method, ratio): statistics of per-subject accuracies in percent
        (each subject's accuracy first averaged over seeds)."""
        rows = []
        for method, ratio in self.cells():
            per_subject: dict[str, list[float]] = {}
            for r in self.results:
                if (r.method, r.ratio) == (method, ratio):
                    per_subject.setdefault(r.subject, []).append(r.accuracy)
            s = summarize_accuracies([100 * float(np.mean(v)) for v in per_subject.values()])
            rows.append({"method": method, "ratio": ratio, "n_subjects": s.n, "mean": s.mean, "sd": s.sd,
                         "median": s.median, "range": s.range, "max": s.max, "min": s.min, **s.row()})
        return rows

    def accuracy_rows(self) -> list[dict[str, Any]]:
        """(subject, method, ratio) -> accuracy averaged over seeds."""
        acc: dict[tuple[str, str, int], list[float]] = {}
        for r in self.results:
            acc.setdefault((r.subject, r.method, r.ratio), []).append(r.accuracy)
        return [{"subject": s, "method": m, "ratio": k, "accuracy": float(np.mean(v))}
                for (s, m, k), v in sorted(acc.items())]

    def to_json(self) -> dict[str, Any]:
        return {
            "results": [
                {**r.row(), "n_train_real": r.n_train_real, "n_train_augmented": r.n_train_augmented,
                 "n_test": r.n_test,
                 "n_selected_source_trials": None if r.selection is None else r.selection.n_kept}
                for r in self.results
            ],
            "summary": self.summary(),
        }

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = [out / "report.json", out / "accuracy.csv", out / "accuracy_by_seed.csv", out / "summary.csv"]
        files[0].write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        files[1].write_text(rows_to_csv(self.accuracy_rows(), ["subject", "method", "ratio", "accuracy"]))
        files[2].write_text(rows_to_csv([r.row() for r in self.results], ["subject", "method", "ratio", "seed", "accuracy"]))
        files[3].write_text(rows_to_csv(self.summary(), ["method", "ratio", "n_subjects", "mean", "sd", "median", "range",
                                                         "max", "min", "Mean (SD)", "Median", "Range (Max–Min)"]))
        return files


def _fmt(v: Any) -> Any:
    return repr(v) if isinstance(v, float) else v


def rows_to_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def run_target(
    subjects: Sequence[SubjectDataset], target_id: str, cfg: ProtocolConfig, keep_artifacts: bool = False
) -> SubjectResult:
    """One Table-I cell for one target subject. ``subjects`` must already be preprocessed."""
    return run_target_ratios(subjects, target_id, cfg, [cfg.ratio], keep_artifacts)[0]


def run_target_ratios(
    subjects: Sequence[SubjectDataset],
    target_id: str,
    cfg: ProtocolConfig,
    ratios: Sequence[int],
    keep_artifacts: bool = False,
) -> list[SubjectResult]:
    """Evaluate several augmentation ratios for one (target, seed).

    The split, relevance pool and transfer bundle depend only on the seed and
    target, so they are built once and shared by every ratio; the classifier
    seed is shared too, which pairs the ratios (and the no-augmentation run)
    for comparison.
    """
    sources, target, _ = split_target(subjects, target_id)
    try:
        train_idx, test_idx = stratified_split(target.labels, cfg.test_fraction, derive_seed(cfg.seed, target_id, "split"))
    except ValueError as exc:
        raise ProtocolError("split", target_id, str(exc)) from None
    train_real, test = target.subset(train_idx), target.subset(test_idx)

    selection = bundle = pool = None
    t_transfer = 0.0
    if cfg.method == "cycle_gan":
        t0 = time.perf_counter()
        try:
            selection, pool = build_transfer_pool(sources, train_real, cfg.relevance)
        except ValueError as exc:
            raise ProtocolError("relevance", target_id, str(exc)) from None
        gan_cfg = replace(cfg.gan, seed=derive_seed(cfg.seed, target_id, "gan"))
        try:
            bundle = train_transfer(pool, train_real, gan_cfg)
        except (ValueError, RuntimeError) as exc:
            raise ProtocolError("transfer", target_id, str(exc)) from None
        t_transfer = time.perf_counter() - t0

    results = []
    for ratio in ([0] if cfg.method == "none" else ratios):
        train = train_real
        if cfg.method != "none":
            aug_cfg = AugmenterConfig(cfg.method, cfg.gamma, ratio, derive_seed(cfg.seed, target_id, "augment"))
            try:
                train = build_augmented_set(train_real, pool, bundle, aug_cfg)
            except ValueError as exc:
                raise ProtocolError("augment", target_id, str(exc)) from None

        clf_cfg = replace(cfg.classifier, seed=derive_seed(cfg.seed, target_id, "classifier"))
        t0 = time.perf_counter()
        try:
            model = build_classifier(clf_cfg, train.data.shape[1], train.data.shape[2], len(target.class_names),
                                     target.trials.fs)
            fitted = train_classifier(model, train, clf_cfg)
            acc = evaluate(fitted, test)
        except ValueError as exc:
            raise ProtocolError("classifier", target_id, str(exc)) from None

        result = SubjectResult(
            subject=target_id, method=cfg.method, ratio=ratio, seed=cfg.seed, accuracy=acc,
            n_train_real=len(train_real), n_train_augmented=len(train) - len(train_real),
            n_test=len(test), test_provenance=test.provenance, selection=selection,
            timings={"transfer": t_transfer, "classifier": time.perf_counter() - t0},
        )
        if cfg.spectral:
            result.spectra, result.averaged = _spectral_artifacts(train, cfg.band)
        if keep_artifacts:
            result.bundle, result.pool, result.train_set = bundle, pool, train
        results.append(result)
    return results


def _spectral_artifacts(train: SubjectDataset, band: tuple[float, float]):
    prov = np.array(train.provenance)
    groups = {"real": prov == "real", "augmented": prov != "real"}
    spectra, averaged = {}, {}
    for name, mask in groups.items():
        if not mask.any():
            continue
        trials = train.trials.with_data(train.data[mask])
        spectra[f"psd_{name}"] = psd(trials)
        spectra[f"csd_{name}"] = csd_matrix(trials, band)
        for cls in np.unique(train.labels[mask]):
            averaged[f"{name}_{train.class_names[cls]}"] = averaged_trial(trials, train.labels[mask], int(cls))
    return spectra, averaged


def preprocess_all(subjects: Sequence[SubjectDataset], cfg: PreprocessConfig) -> list[SubjectDataset]:
    out = []
    for s in subjects:
        try:
            out.append(preprocess_pipeline(s, cfg))
        except ValueError as exc:
            raise ProtocolError("preprocess", s.subject_id, str(exc)) from None
    return out


def run_protocol(
    subjects: Sequence[SubjectDataset],
    cfg: ProtocolConfig,
    targets: Sequence[str] | None = None,
    keep_artifacts: bool = False,
    preprocessed: bool = False,
) -> EvalReport:
    """Evaluate ``cfg.method`` with every subject (or each of ``targets``) as the target in turn."""
    cfg.validate()
    if len(subjects) < 2:
        raise ProtocolError("setup", None, f"need >= 2 subjects, got {len(subjects)}")
    data = list(subjects) if preprocessed else preprocess_all(subjects, cfg.preprocess)
    ids = [s.subject_id for s in data] if targets is None else list(targets)
    report = EvalReport()
    for tid in ids:
        log.info("target %s method %s ratio %s", tid, cfg.method, cfg.ratio)
        report.results.append(run_target(data, tid, cfg, keep_artifacts))
    return report


def config_to_dict(cfg: ProtocolConfig) -> dict[str, Any]:
    return json.loads(json.dumps(asdict(cfg)))
