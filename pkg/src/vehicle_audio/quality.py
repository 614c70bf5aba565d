"""Recording-quality gate.

Every clip of the target class is summarised by its framed RMS energy curve
(87 values for a 2 s clip at 22 050 Hz). The curves are split into two groups
with k-means; the group with the higher average energy is kept as "good",
the other is rejected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .audio_io import MonoClip
from .dataset import ClassLabel, SampleRecord
from .errors import InvalidArgument

RMSE_FRAME = 2048
RMSE_HOP = 512
DEFAULT_SEED = 0


class QualityLabel(str, enum.Enum):
    GOOD = "good"
    BAD = "bad"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class RmseVector:
    values: np.ndarray
    frame_length: int = RMSE_FRAME
    hop: int = RMSE_HOP

    def __len__(self):
        return len(self.values)


def frame_rmse(clip, frame_length: int = RMSE_FRAME, hop: int = RMSE_HOP) -> RmseVector:
    """Root-mean-square energy per frame.

    The signal is zero-padded by ``frame_length // 2`` on both sides so frame
    ``t`` is centered on sample ``t * hop``; there are ``1 + len // hop`` frames.
    """
    x = clip.samples if isinstance(clip, MonoClip) else np.asarray(clip, dtype=np.float64)
    if x.size == 0:
        raise InvalidArgument("cannot compute RMSE of an empty clip")
    if frame_length <= 0 or hop <= 0:
        raise InvalidArgument("frame_length and hop must be positive")
    pad = frame_length // 2
    padded = np.pad(x, pad)
    n_frames = 1 + len(x) // hop
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame_length)[::hop][:n_frames]
    return RmseVector(np.sqrt(np.mean(frames ** 2, axis=1)), frame_length, hop)


@dataclass(frozen=True, eq=False)
class ClusterModel:
    centroids: np.ndarray  # (k, dim)
    assignments: np.ndarray  # (n,)
    inertia: float
    seed: int | None
    n_iter: int = 0
    inertia_history: tuple = ()
    restart_inertias: tuple = ()

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def _as_matrix(vectors) -> np.ndarray:
    rows = [v.values if isinstance(v, RmseVector) else np.asarray(v, dtype=np.float64) for v in vectors]
    if not rows:
        return np.zeros((0, 0))
    dims = {r.shape for r in rows}
    if len(dims) != 1 or rows[0].ndim != 1:
        raise InvalidArgument(f"all vectors must be 1-D with equal length, got shapes {sorted(dims)}")
    return np.vstack(rows).astype(np.float64)


def _sq_dist(X, C):
    # Direct differences rather than the |x|^2 - 2xc + |c|^2 expansion: exact zeros for duplicates.
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    d2 = _sq_dist(X, X[centers[0]][None])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers.append(idx)
        d2 = np.minimum(d2, _sq_dist(X, X[idx][None])[:, 0])
    return X[centers].copy()


def assign(X, centroids):
    """Nearest centroid per row (ties go to the lower index) and the resulting inertia."""
    d2 = _sq_dist(np.asarray(X, dtype=np.float64), np.asarray(centroids, dtype=np.float64))
    labels = np.argmin(d2, axis=1)
    return labels, float(d2[np.arange(len(labels)), labels].sum())


def _update(X, labels, old, k):
    C = old.copy()
    for j in range(k):
        members = labels == j
        if members.any():
            C[j] = X[members].mean(axis=0)
    empty = [j for j in range(k) if not (labels == j).any()]
    if empty:
        # Re-seed each empty cluster at the point farthest from its current centroid.
        d2 = _sq_dist(X, C)[np.arange(len(labels)), labels]
        for j in empty:
            far = int(np.argmax(d2))
            C[j] = X[far]
            d2[far] = -1.0
    return C, bool(empty)


def _lloyd(X, C, max_iter):
    labels, inertia = assign(X, C)
    history = [inertia]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        C, _ = _update(X, labels, C, C.shape[0])
        new_labels, inertia = assign(X, C)
        history.append(inertia)
        # Also stops when a re-seeded centroid attracts nothing (all points duplicated).
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return C, labels, inertia, n_iter, history


def kmeans(vectors, k: int = 2, seed: int | None = DEFAULT_SEED, max_iter: int = 300,
           n_init: int = 10) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` restarts by inertia."""
    X = _as_matrix(vectors)
    if k < 1:
        raise InvalidArgument(f"k must be >= 1, got {k}")
    if X.shape[0] < k:
        raise InvalidArgument(f"need at least k={k} vectors, got {X.shape[0]}")
    rng = np.random.default_rng(seed)
    best = None
    restart_inertias = []
    for _ in range(max(1, n_init)):
        C0 = _kmeans_pp(X, k, rng)
        C, labels, inertia, n_iter, history = _lloyd(X, C0, max_iter)
        restart_inertias.append(inertia)
        if best is None or inertia < best[2]:
            best = (C, labels, inertia, n_iter, history)
    C, labels, inertia, n_iter, history = best
    return ClusterModel(C, labels, inertia, seed, n_iter, tuple(history), tuple(restart_inertias))


def lloyd_step(model: ClusterModel, vectors) -> ClusterModel:
    """One additional Lloyd iteration (update centroids, then reassign)."""
    X = _as_matrix(vectors)
    C, _ = _update(X, model.assignments, model.centroids, model.k)
    labels, inertia = assign(X, C)
    return ClusterModel(C, labels, inertia, model.seed, model.n_iter + 1)


def label_clusters(model: ClusterModel, vectors) -> dict[int, QualityLabel]:
    """The cluster whose members have the highest grand-mean RMSE is good; the rest are bad.

    Ties go to the cluster with the larger centroid norm, then to the lower index.
    An empty cluster is scored by its centroid.
    """
    X = _as_matrix(vectors)
    scores = []
    for j in range(model.k):
        members = X[model.assignments == j]
        mean = float(members.mean()) if len(members) else float(model.centroids[j].mean())
        scores.append((mean, float(np.linalg.norm(model.centroids[j])), -j))
    good = max(range(model.k), key=lambda j: scores[j])
    return {j: QualityLabel.GOOD if j == good else QualityLabel.BAD for j in range(model.k)}


@dataclass
class QualityResult:
    kept: list
    rejected: list
    model: ClusterModel
    # Per target-class record, in input order: (record, rmse, cluster, label)
    rows: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.kept, self.rejected, self.model))


def filter_by_quality(records, target_class=ClassLabel.TRUCK, seed: int | None = DEFAULT_SEED,
                      loader=None, frame_length: int = RMSE_FRAME, hop: int = RMSE_HOP,
                      n_init: int = 10) -> QualityResult:
    """Split the target class into kept (good) and rejected (bad) records.

    ``kept`` holds every non-target record unchanged and in order, plus the good
    target records at their original positions. ``loader(record) -> MonoClip``
    defaults to ``record.load()``.
    """
    target_class = ClassLabel(target_class)
    loader = loader or SampleRecord.load
    target_idx = [i for i, r in enumerate(records) if r.label == target_class]
    if len(target_idx) < 2:
        raise InvalidArgument(f"need at least 2 {target_class.value} records, got {len(target_idx)}")

    vectors = [frame_rmse(loader(records[i]), frame_length, hop) for i in target_idx]
    model = kmeans(vectors, k=2, seed=seed, n_init=n_init)
    labels = label_clusters(model, vectors)

    verdict = {}
    rows = []
    for i, v, c in zip(target_idx, vectors, model.assignments):
        verdict[i] = labels[int(c)]
        rows.append((records[i], v, int(c), labels[int(c)]))
    kept = [r for i, r in enumerate(records) if verdict.get(i, QualityLabel.GOOD) is QualityLabel.GOOD]
    rejected = [records[i] for i in target_idx if verdict[i] is QualityLabel.BAD]
    return QualityResult(kept, rejected, model, rows)
