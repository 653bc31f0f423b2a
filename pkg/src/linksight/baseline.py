"""Dynamic time warping distance and a k-nearest-neighbour classifier on raw traces."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .traces import CLASS_ORDER, AnomalyKind


class DtwInfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class DtwConfig:
    window: int | None = None  # Sakoe-Chiba radius; None = unbounded

    def __post_init__(self):
        if self.window is not None and self.window < 0:
            raise ValueError("window must be >= 0")


@numba.njit(cache=True)
def _dtw(a, b, window):
    n, m = len(a), len(b)
    prev = np.full(m + 1, np.inf)
    cur = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur[:] = np.inf
        lo, hi = 1, m
        if window >= 0:
            lo = max(1, i - window)
            hi = min(m, i + window)
        for j in range(lo, hi + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = abs(a[i - 1] - b[j - 1]) + best
        prev, cur = cur, prev
    return prev[m]


@numba.njit(cache=True)
def _dtw_matrix(queries, refs, window):
    out = np.empty((queries.shape[0], refs.shape[0]))
    for q in range(queries.shape[0]):
        for r in range(refs.shape[0]):
            out[q, r] = _dtw(queries[q], refs[r], window)
    return out


def _check(a: np.ndarray, b: np.ndarray, cfg: DtwConfig) -> int:
    if len(a) == 0 or len(b) == 0:
        raise ValueError("dtw needs non-empty sequences")
    if cfg.window is None:
        return -1
    if abs(len(a) - len(b)) > cfg.window:
        raise DtwInfeasibleError(
            f"band radius {cfg.window} cannot align lengths {len(a)} and {len(b)}"
        )
    return cfg.window


def dtw(a: Sequence[float], b: Sequence[float], cfg: DtwConfig = DtwConfig()) -> float:
    """DTW distance with ``|a_i - b_j|`` local cost and match/insert/delete steps."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return float(_dtw(a, b, _check(a, b, cfg)))


def dtw_matrix(queries, refs, cfg: DtwConfig = DtwConfig()) -> np.ndarray:
    """Pairwise distances between equal-length query and reference sets."""
    q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    r = np.ascontiguousarray(np.atleast_2d(refs), dtype=np.float64)
    window = _check(q[0], r[0], cfg)
    return _dtw_matrix(q, r, window)


def _vote(dists: np.ndarray, labels: np.ndarray, k: int) -> int:
    # sort key (distance, label) keeps the k-set independent of training order
    order = np.lexsort((labels, dists))[:k]
    nearest, near_d = labels[order], dists[order]
    best = None
    for lab in np.unique(nearest):
        sel = nearest == lab
        key = (-int(sel.sum()), float(near_d[sel].sum()), int(lab))
        if best is None or key < best[0]:
            best = (key, int(lab))
    return best[1]


def knn_predict(train_values, train_labels, queries, k: int = 1,
                cfg: DtwConfig = DtwConfig()) -> np.ndarray:
    """Label indices for each query by majority vote of its k DTW-nearest traces.

    Ties go to the smaller summed distance, then to the earlier class in
    ``CLASS_ORDER``.
    """
    labels = np.asarray(train_labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= len(labels):
        raise ValueError(f"k={k} must lie in [1, {len(labels)}]")
    d = dtw_matrix(queries, train_values, cfg)
    return np.array([_vote(row, labels, k) for row in d], dtype=np.int64)


def knn_classify(train: Sequence[tuple[Sequence[float], AnomalyKind]], query, k: int = 1,
                 cfg: DtwConfig = DtwConfig()) -> AnomalyKind:
    if not train:
        raise ValueError("empty training set")
    labels = np.array([AnomalyKind(lab).index for _, lab in train])
    lengths = {len(v) for v, _ in train} | {len(query)}
    if len(lengths) == 1:
        pred = knn_predict(np.stack([np.asarray(v, float) for v, _ in train]), labels, [query], k, cfg)
        return CLASS_ORDER[int(pred[0])]
    if not 1 <= k <= len(labels):
        raise ValueError(f"k={k} must lie in [1, {len(labels)}]")
    dists = np.array([dtw(v, query, cfg) for v, _ in train])
    return CLASS_ORDER[_vote(dists, labels, k)]
