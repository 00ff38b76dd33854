"""Source-trial selection by PCA + L1 distance to cluster centres.

Each subject's trials are averaged over channels, projected into a shared
PCA basis and pruned twice: first each source subject keeps the fraction
``beta1`` of its trials closest to its own centre, then the pooled survivors
keep the fraction ``beta2`` closest to the target subject's centre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .dataio import SubjectDataset, TrialTensor, concat_datasets


class RelevanceError(ValueError):
    pass


@dataclass(frozen=True)
class RelevanceConfig:
    beta1: float = 0.8
    beta2: float = 0.8
    # int -> explicit number of components; float in (0, 1] -> explained-variance fraction
    pca_dims: int | float = 0.95

    def validate(self) -> None:
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0 < b <= 1:
                raise RelevanceError(f"{name} must lie in (0, 1], got {b}")
        d = self.pca_dims
        if isinstance(d, bool) or not isinstance(d, (int, float)):
            raise RelevanceError(f"pca_dims must be an int or a fraction, got {d!r}")
        if isinstance(d, int) and d < 1:
            raise RelevanceError("pca_dims as a count must be >= 1")
        if isinstance(d, float) and not 0 < d <= 1:
            raise RelevanceError("pca_dims as a fraction must lie in (0, 1]")


@dataclass(frozen=True)
class ReducedFeatures:
    y: np.ndarray  # [n, q]
    projection: np.ndarray  # [p, q], orthonormal columns
    mean_row: np.ndarray  # [p]
    explained_variance: np.ndarray  # [q]

    @property
    def q(self) -> int:
        return self.projection.shape[1]

    def transform(self, rows: np.ndarray) -> np.ndarray:
        return (np.asarray(rows, dtype=np.float64) - self.mean_row) @ self.projection

    def reconstruct(self, y: np.ndarray | None = None) -> np.ndarray:
        y = self.y if y is None else y
        return y @ self.projection.T + self.mean_row


@dataclass
class RelevanceSelection:
    kept: dict[str, list[int]]
    target_center: np.ndarray
    distances: dict[tuple[str, int], float]

    def to_json(self) -> dict[str, Any]:
        return {
            "kept": {sid: list(map(int, idx)) for sid, idx in self.kept.items()},
            "target_center": [float(v) for v in self.target_center],
            "distances": [
                {"subject_id": sid, "trial": int(i), "distance": float(d)}
                for (sid, i), d in sorted(self.distances.items())
            ],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> RelevanceSelection:
        return cls(
            kept={sid: list(idx) for sid, idx in obj["kept"].items()},
            target_center=np.asarray(obj["target_center"], dtype=np.float64),
            distances={(d["subject_id"], d["trial"]): d["distance"] for d in obj["distances"]},
        )

    @property
    def n_kept(self) -> int:
        return sum(len(v) for v in self.kept.values())


def channel_mean(x: TrialTensor | np.ndarray) -> np.ndarray:
    data = x.data if isinstance(x, TrialTensor) else np.asarray(x, dtype=np.float64)
    if data.ndim != 3 or data.shape[1] < 1:
        raise RelevanceError(f"expected [t, c, p] with c >= 1, got {data.shape}")
    return data.mean(axis=1)


def pca_reduce(rows: np.ndarray, dims: int | float) -> ReducedFeatures:
    """Centre ``rows`` and project onto the leading right singular vectors."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise RelevanceError(f"rows must be 2-D, got shape {rows.shape}")
    n, p = rows.shape
    if n < 2:
        raise RelevanceError(f"PCA needs at least 2 rows, got {n}")
    mean_row = rows.mean(axis=0)
    centered = rows - mean_row
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    var = s**2 / n
    if isinstance(dims, float):
        if not 0 < dims <= 1:
            raise RelevanceError("explained-variance fraction must lie in (0, 1]")
        total = var.sum()
        if total <= 0:
            q = 1
        else:
            # rank cut keeps fraction 1.0 from counting round-off directions
            tol = s.max() * max(n, p) * np.finfo(np.float64).eps
            rank = max(1, int(np.sum(s > tol)))
            cum = np.cumsum(var[:rank]) / var[:rank].sum()
            q = min(rank, int(np.searchsorted(cum, dims - 1e-12)) + 1)
    else:
        q = int(dims)
        if q < 1 or q > min(n, p):
            raise RelevanceError(f"q={q} outside [1, min(n, p) = {min(n, p)}]")
    v = vt[:q].T
    # fix sign so results do not depend on LAPACK sign conventions
    signs = np.sign(v[np.argmax(np.abs(v), axis=0), np.arange(q)])
    signs[signs == 0] = 1.0
    v = v * signs
    return ReducedFeatures(y=centered @ v, projection=v, mean_row=mean_row, explained_variance=var[:q])


def subject_center(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] < 1:
        raise RelevanceError("cannot take the centre of an empty trial set")
    return y.mean(axis=0)


def l1_distance(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise RelevanceError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def keep_count(beta: float, n: int) -> int:
    # guard against 0.3 * 10 = 3.0000000000000004 style ceilings
    return min(n, math.ceil(round(beta * n, 9)))


def _l1_rows(y: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(y, dtype=np.float64) - center).sum(axis=1)


def prune_inner(y_subject: np.ndarray, beta1: float) -> list[int]:
    """Indices of the ceil(beta1 * t) trials nearest the subject's own centre."""
    y_subject = np.asarray(y_subject, dtype=np.float64)
    d = _l1_rows(y_subject, subject_center(y_subject))
    order = np.lexsort((np.arange(len(d)), d))
    return sorted(int(i) for i in order[: keep_count(beta1, len(d))])


def prune_target_relevance(
    y_sources: dict[str, np.ndarray] | Sequence[tuple[str, np.ndarray, Sequence[int]]],
    target_center: np.ndarray,
    beta2: float,
) -> RelevanceSelection:
    """Pool surviving source trials; keep the fraction ``beta2`` nearest the target centre.

    ``y_sources`` maps subject id -> features of the surviving trials, or is a
    sequence of ``(subject_id, features, original_indices)`` triples so that the
    selection reports indices into the unpruned subject.
    """
    if isinstance(y_sources, dict):
        items = [(sid, np.asarray(y), list(range(len(y)))) for sid, y in y_sources.items()]
    else:
        items = [(sid, np.asarray(y), list(idx)) for sid, y, idx in y_sources]
    target_center = np.asarray(target_center, dtype=np.float64)
    pool: list[tuple[float, str, int]] = []
    for sid, y, idx in items:
        if len(y) != len(idx):
            raise RelevanceError(f"{sid}: {len(y)} feature rows for {len(idx)} indices")
        if len(y):
            for i, d in zip(idx, _l1_rows(y, target_center)):
                pool.append((float(d), sid, int(i)))
    if not pool:
        raise RelevanceError("empty source pool: no source trials survive to the relevance step")
    n_keep = keep_count(beta2, len(pool))
    chosen = sorted(pool, key=lambda r: (r[0], r[1], r[2]))[:n_keep]
    kept: dict[str, list[int]] = {sid: [] for sid, _, _ in items}
    for _, sid, i in chosen:
        kept[sid].append(i)
    return RelevanceSelection(
        kept={sid: sorted(v) for sid, v in kept.items()},
        target_center=target_center,
        distances={(sid, i): d for d, sid, i in pool},
    )


def build_transfer_pool(
    sources: Sequence[SubjectDataset], target: SubjectDataset, cfg: RelevanceConfig
) -> tuple[RelevanceSelection, SubjectDataset]:
    """Two-step filtering; returns the selection and the surviving raw source trials."""
    cfg.validate()
    if not sources:
        raise RelevanceError("no source subjects: relevance selection needs at least one")
    means = [channel_mean(s.trials) for s in sources]
    target_mean = channel_mean(target.trials)
    reduced = pca_reduce(np.concatenate(means + [target_mean]), cfg.pca_dims)
    bounds = np.cumsum([0] + [len(m) for m in means])
    y_target = reduced.y[bounds[-1] :]
    survivors = []
    for s, lo, hi in zip(sources, bounds[:-1], bounds[1:]):
        y = reduced.y[lo:hi]
        idx = prune_inner(y, cfg.beta1)
        survivors.append((s.subject_id, y[idx], idx))
    selection = prune_target_relevance(survivors, subject_center(y_target), cfg.beta2)
    parts = [s.subset(selection.kept[s.subject_id]) for s in sources if selection.kept[s.subject_id]]
    pooled = concat_datasets(parts, subject_id=f"pool-for-{target.subject_id}")
    return selection, pooled
