"""Baseline trial augmentations and construction of augmented training sets."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .dataio import SubjectDataset, TrialTensor
from .transfer import TransferModelBundle, bundle_hash, transfer_to_target

METHODS = ("noise", "multiple", "flip", "cycle_gan")
DEFAULT_GAMMA = {"noise": 10.0, "multiple": 0.1}


class AugmentError(ValueError):
    pass


@dataclass(frozen=True)
class AugmenterConfig:
    method: str = "cycle_gan"
    gamma: float | None = None  # None -> per-method default
    ratio: int = 10
    seed: int = 0

    @property
    def effective_gamma(self) -> float | None:
        if self.method in DEFAULT_GAMMA:
            return DEFAULT_GAMMA[self.method] if self.gamma is None else float(self.gamma)
        return None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise AugmentError(f"unknown augmentation method {self.method!r}; expected one of {METHODS}")
        if int(self.ratio) != self.ratio or self.ratio < 1:
            raise AugmentError(f"ratio must be a positive integer, got {self.ratio}")
        g = self.effective_gamma
        if g is not None and not g > 0:
            raise AugmentError(f"gamma must be > 0, got {g}")


def add_uniform_noise(
    d: np.ndarray, gamma: float, seed: int | tuple[int, ...] | None = None, u: np.ndarray | None = None
) -> np.ndarray:
    """d + u * std(d) / gamma with u ~ U(-1, 1) elementwise.

    std is the population standard deviation over every element of the trial.
    ``u`` may be supplied directly; otherwise it is drawn from ``seed``.
    """
    if not gamma > 0:
        raise AugmentError(f"gamma must be > 0, got {gamma}")
    d = np.asarray(d, dtype=np.float64)
    if u is None:
        u = np.random.default_rng(seed).uniform(-1.0, 1.0, size=d.shape)
    u = np.asarray(u, dtype=np.float64)
    if u.shape != d.shape:
        raise AugmentError(f"noise shape {u.shape} != trial shape {d.shape}")
    return d + u * d.std() / gamma


def multiply_scale(d: np.ndarray, gamma: float) -> np.ndarray:
    return (1.0 + gamma) * np.asarray(d, dtype=np.float64)


def flip_signal(d: np.ndarray) -> np.ndarray:
    """-d + min(d), the minimum taken over the whole trial."""
    d = np.asarray(d, dtype=np.float64)
    return -d + d.min()


def _baseline(method: str, trial: np.ndarray, gamma: float | None, seed: tuple[int, int]) -> np.ndarray:
    if method == "noise":
        return add_uniform_noise(trial, gamma, seed=seed)
    if method == "multiple":
        return multiply_scale(trial, gamma)
    return flip_signal(trial)


def resample_indices(n_pool: int, n_needed: int, seed: int) -> np.ndarray:
    """Seeded draw of pool indices: without replacement when the pool is big
    enough, with replacement otherwise."""
    rng = np.random.default_rng(seed)
    if n_pool >= n_needed:
        return np.sort(rng.permutation(n_pool)[:n_needed])
    return rng.integers(0, n_pool, size=n_needed)


def build_augmented_set(
    target: SubjectDataset,
    pool: SubjectDataset | None,
    bundle: TransferModelBundle | None,
    cfg: AugmenterConfig,
) -> SubjectDataset:
    """Real target trials followed by ``ratio * len(target)`` augmented trials."""
    cfg.validate()
    t = len(target)
    if t == 0:
        raise AugmentError("empty target set")
    n_aug = int(cfg.ratio) * t
    tag = f"aug:{cfg.method}"
    composition: dict[str, Any] = {"method": cfg.method, "ratio": int(cfg.ratio), "seed": cfg.seed,
                                   "n_real": t, "n_augmented": n_aug}
    if cfg.method == "cycle_gan":
        if pool is None or bundle is None:
            raise AugmentError("method cycle_gan needs both a source pool and a trained transfer bundle")
        if len(pool) == 0:
            raise AugmentError("empty source pool")
        transferred = transfer_to_target(bundle, pool)
        idx = resample_indices(len(pool), n_aug, cfg.seed)
        aug_data = transferred.data[idx]
        aug_labels = transferred.labels[idx]
        composition.update(pool_size=len(pool), with_replacement=bool(len(pool) < n_aug), bundle_sha256=bundle_hash(bundle))
    else:
        gamma = cfg.effective_gamma
        src = np.arange(n_aug) % t
        aug_data = np.stack([_baseline(cfg.method, target.data[i], gamma, (cfg.seed, k)) for k, i in enumerate(src)])
        aug_labels = target.labels[src]
        composition["gamma"] = gamma
    if not np.all(np.isfinite(aug_data)):
        raise AugmentError("augmentation produced non-finite samples")
    data = np.concatenate([target.data, aug_data])
    return replace(
        target,
        trials=TrialTensor(data, target.trials.fs, target.trials.channel_names),
        labels=np.concatenate([target.labels, aug_labels]),
        provenance=tuple(target.provenance) + (tag,) * n_aug,
        metadata={**target.metadata, "augmentation": composition},
    )


def provenance_block(ds: SubjectDataset) -> dict[str, Any]:
    """Manifest block recorded when an augmented set is saved."""
    return {"provenance": ds.metadata.get("augmentation", {})}
