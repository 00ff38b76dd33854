"""Compact convolutional EEG classifier (EEGNet layout) with seeded training."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .dataio import SubjectDataset


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierConfig:
    f1: int = 8
    depth_mult: int = 2
    f2: int = 16
    temporal_kernel: int | None = None  # None -> round(fs / 2)
    separable_kernel: int = 16
    dropout: float = 0.5
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0

    def validate(self) -> None:
        for name in ("f1", "depth_mult", "f2", "separable_kernel", "batch_size"):
            if getattr(self, name) < 1:
                raise ClassifierError(f"{name} must be >= 1")
        if self.temporal_kernel is not None and self.temporal_kernel < 1:
            raise ClassifierError("temporal_kernel must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ClassifierError("dropout must lie in [0, 1)")
        if self.epochs < 0 or self.learning_rate < 0:
            raise ClassifierError("epochs and learning_rate must be nonnegative")

    def kernel_for(self, fs: float) -> int:
        return self.temporal_kernel if self.temporal_kernel is not None else max(1, int(round(fs / 2)))


class _SamePad(nn.Module):
    """Zero padding that keeps the time axis length for any kernel width (extra sample on the right)."""

    def __init__(self, kernel: int):
        super().__init__()
        self.pad = ((kernel - 1) // 2, kernel // 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.pad(x, self.pad)


class EEGNet(nn.Module):
    """temporal conv -> depthwise spatial conv -> pool -> separable conv -> pool -> dense.

    Returns logits; softmax is applied in :meth:`FittedClassifier.predict_proba`.
    """

    def __init__(self, n_channels: int, n_samples: int, n_classes: int, f1: int, depth_mult: int, f2: int,
                 kernel: int, separable_kernel: int = 16, dropout: float = 0.5):
        super().__init__()
        if kernel > n_samples:
            raise ClassifierError(f"temporal kernel {kernel} longer than trial ({n_samples} samples)")
        if n_samples // 32 < 1:
            raise ClassifierError(f"{n_samples} samples too short for the two pooling stages (need >= 32)")
        d = f1 * depth_mult
        self.pad_t = _SamePad(kernel)
        self.temporal = nn.Conv2d(1, f1, (1, kernel), bias=False)
        self.bn1 = nn.BatchNorm2d(f1)
        self.spatial = nn.Conv2d(f1, d, (n_channels, 1), groups=f1, bias=False)
        self.bn2 = nn.BatchNorm2d(d)
        self.pool1 = nn.AvgPool2d((1, 4))
        self.pad_s = _SamePad(separable_kernel)
        self.sep_depth = nn.Conv2d(d, d, (1, separable_kernel), groups=d, bias=False)
        self.sep_point = nn.Conv2d(d, f2, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(f2)
        self.pool2 = nn.AvgPool2d((1, 8))
        self.drop = nn.Dropout(dropout)
        self.dense = nn.Linear(f2 * (n_samples // 4 // 8), n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.bn1(self.temporal(self.pad_t(x.unsqueeze(1))))
        z = self.drop(self.pool1(F.elu(self.bn2(self.spatial(z)))))
        z = self.drop(self.pool2(F.elu(self.bn3(self.sep_point(self.sep_depth(self.pad_s(z)))))))
        return self.dense(z.flatten(1))

    def apply_max_norm(self) -> None:
        with torch.no_grad():
            w = self.spatial.weight
            w.copy_(torch.renorm(w, 2, 0, 1.0))
            self.dense.weight.copy_(torch.renorm(self.dense.weight, 2, 0, 0.25))


@dataclass
class FittedClassifier:
    model: EEGNet
    config: ClassifierConfig
    n_channels: int
    n_samples: int
    n_classes: int
    training_curve: list[dict[str, float]] = field(default_factory=list)

    def _check(self, data: np.ndarray) -> None:
        if data.ndim != 3 or data.shape[1:] != (self.n_channels, self.n_samples):
            raise ClassifierError(f"expected trials [n, {self.n_channels}, {self.n_samples}], got {data.shape}")

    def logits(self, data: np.ndarray, chunk: int = 256) -> np.ndarray:
        self._check(data)
        self.model.eval()
        x = torch.from_numpy(np.ascontiguousarray(data, dtype=np.float32))
        with torch.no_grad():
            out = [self.model(x[i : i + chunk]) for i in range(0, len(x), chunk)]
        return torch.cat(out).double().numpy() if out else np.zeros((0, self.n_classes))

    def predict_proba(self, data: np.ndarray) -> np.ndarray:
        z = self.logits(data)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, data: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(data), axis=1)  # first maximum -> lower class index wins ties


def build_classifier(cfg: ClassifierConfig, c: int, p: int, n_classes: int = 2, fs: float = 250.0) -> FittedClassifier:
    cfg.validate()
    if c < 1 or p < 1 or n_classes < 2:
        raise ClassifierError(f"invalid shape c={c}, p={p}, n_classes={n_classes}")
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        model = EEGNet(c, p, n_classes, cfg.f1, cfg.depth_mult, cfg.f2, cfg.kernel_for(fs), cfg.separable_kernel,
                       cfg.dropout)
    model.apply_max_norm()
    model.eval()
    return FittedClassifier(model, cfg, c, p, n_classes)


def train_classifier(model: FittedClassifier, train: SubjectDataset, cfg: ClassifierConfig | None = None) -> FittedClassifier:
    """Cross-entropy training with Adam; returns a new fitted classifier."""
    cfg = model.config if cfg is None else cfg
    cfg.validate()
    if len(np.unique(train.labels)) < 2:
        raise ClassifierError("training data contains a single class")
    model._check(train.data)
    fitted = FittedClassifier(copy.deepcopy(model.model), cfg, model.n_channels, model.n_samples, model.n_classes)
    if cfg.epochs == 0:
        return fitted
    net = fitted.model
    x = torch.from_numpy(np.ascontiguousarray(train.data, dtype=np.float32))
    y = torch.from_numpy(train.labels.astype(np.int64))
    opt = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
    gen = torch.Generator().manual_seed(cfg.seed + 1)
    n = len(x)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed + 2)  # dropout masks
        for epoch in range(cfg.epochs):
            net.train()
            order = torch.randperm(n, generator=gen)
            total, correct = 0.0, 0
            for i in range(0, n, cfg.batch_size):
                idx = order[i : i + cfg.batch_size]
                if len(idx) < 2 and n > 1:
                    continue  # batch norm needs >1 sample
                logits = net(x[idx])
                loss = F.cross_entropy(logits, y[idx])
                if not torch.isfinite(loss):
                    raise ClassifierError(f"non-finite training loss at epoch {epoch}")
                opt.zero_grad(set_to_none=True)
                loss.backward()
                opt.step()
                net.apply_max_norm()
                total += float(loss.detach()) * len(idx)
                correct += int((logits.argmax(1) == y[idx]).sum())
            fitted.training_curve.append({"epoch": epoch, "loss": total / n, "accuracy": correct / n})
    net.eval()
    return fitted


def accuracy_from_scores(scores: np.ndarray, labels: np.ndarray) -> float:
    scores, labels = np.asarray(scores), np.asarray(labels)
    if len(labels) == 0:
        raise ClassifierError("empty evaluation set")
    return float(np.mean(np.argmax(scores, axis=1) == labels))


def evaluate(model: FittedClassifier, test: SubjectDataset, require_real: bool = True) -> float:
    """Fraction of argmax-correct predictions on ``test``.

    With ``require_real`` (the default) any trial whose provenance is not
    "real" is rejected, so augmented data cannot leak into a test fold.
    """
    if len(test) == 0:
        raise ClassifierError("empty evaluation set")
    if require_real:
        leaked = [tag for tag in test.provenance if tag != "real"]
        if leaked:
            raise ClassifierError(f"evaluation set contains {len(leaked)} non-real trials ({leaked[0]})")
    return accuracy_from_scores(model.logits(test.data), test.labels)
