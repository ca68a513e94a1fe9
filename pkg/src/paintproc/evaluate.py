"""Quantitative evaluation: progression-aligned frame matching, per-video and
cross-video aggregation, and Fréchet distance between embedding populations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .media import EmbeddingSet, Frame, FrameSequence


class EvalError(Exception):
    pass


@dataclass(frozen=True)
class AlignmentResult:
    matches: tuple[tuple[int, int], ...]  # (gen_index, gt_index)
    per_frame_distances: tuple[float, ...]

    @property
    def total_cost(self) -> float:
        return float(sum(self.per_frame_distances))


@dataclass(frozen=True)
class VideoScore:
    metric_id: str
    value: float
    frame_count: int


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    covariance: np.ndarray
    count: int


def distance_table(
    gen: FrameSequence, gt: FrameSequence, d: Callable[[Frame, Frame], float]
) -> np.ndarray:
    table = np.empty((len(gen), len(gt)))
    for i, fg in enumerate(gen):
        for j, ft in enumerate(gt):
            table[i, j] = d(fg, ft)
    return table


def align_table(table: np.ndarray, mode: str = "monotone") -> AlignmentResult:
    """Match each generated frame (row) to a ground-truth frame (column).

    nearest: independent per-row argmin, ties to the lowest column.
    monotone: DP minimizing total distance with non-decreasing columns.
    """
    n_gen, n_gt = table.shape
    if n_gen == 0 or n_gt == 0:
        raise EvalError("empty distance table")
    if mode == "nearest":
        cols = np.argmin(table, axis=1)
    elif mode == "monotone":
        cols = _monotone_assignment(table)
    else:
        raise EvalError(f"unknown alignment mode {mode!r}")
    matches = tuple((i, int(j)) for i, j in enumerate(cols))
    dists = tuple(float(table[i, j]) for i, j in matches)
    return AlignmentResult(matches, dists)


def _monotone_assignment(table: np.ndarray) -> np.ndarray:
    # best[i][j]: min cost of assigning rows 0..i with row i -> column j;
    # prefix minima give the non-decreasing constraint in O(n*m).
    n_gen, n_gt = table.shape
    best = np.empty_like(table)
    choice = np.zeros((n_gen, n_gt), dtype=np.int64)
    best[0] = table[0]
    for i in range(1, n_gen):
        prefix = np.minimum.accumulate(best[i - 1])
        argprefix = np.zeros(n_gt, dtype=np.int64)
        for j in range(1, n_gt):
            argprefix[j] = argprefix[j - 1] if prefix[j - 1] <= best[i - 1, j] else j
        best[i] = table[i] + prefix
        choice[i] = argprefix
    cols = np.empty(n_gen, dtype=np.int64)
    cols[-1] = int(np.argmin(best[-1]))
    for i in range(n_gen - 1, 0, -1):
        cols[i - 1] = choice[i, cols[i]]
    return cols


def align_frames(
    gen: FrameSequence,
    gt: FrameSequence,
    d: Callable[[Frame, Frame], float],
    mode: str = "monotone",
) -> AlignmentResult:
    if len(gen) == 0 or len(gt) == 0:
        raise EvalError("sequences must be nonempty")
    return align_table(distance_table(gen, gt, d), mode)


def score_video(
    gen: FrameSequence,
    gt: FrameSequence,
    d: Callable[[Frame, Frame], float],
    mode: str = "monotone",
    metric_id: str = "distance",
) -> VideoScore:
    """Mean aligned per-frame distance for one video."""
    result = align_frames(gen, gt, d, mode)
    value = float(np.mean(result.per_frame_distances))
    return VideoScore(metric_id, value, len(gen))


def aggregate(scores: list[VideoScore]) -> float:
    """Unweighted mean over videos; frame counts are deliberately ignored."""
    if not scores:
        raise EvalError("no scores to aggregate")
    ids = {s.metric_id for s in scores}
    if len(ids) > 1:
        raise EvalError(f"mixed metric ids: {sorted(ids)}")
    return float(np.mean([s.value for s in scores]))


# ---------------------------------------------------------------------------
# Fréchet distance between Gaussians fitted to embeddings

EIGENVALUE_CLAMP = -1e-6


def gaussian_stats(es: EmbeddingSet) -> GaussianStats:
    if es.count < 2:
        raise EvalError(f"need at least 2 embeddings, got {es.count}")
    mean = es.vectors.mean(axis=0)
    cov = np.cov(es.vectors, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    return GaussianStats(mean, cov, es.count)


def _sym_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    if np.any(vals < EIGENVALUE_CLAMP):
        raise EvalError(f"covariance square root failed: eigenvalue {vals.min():.3e}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared Wasserstein-2 distance between two Gaussians (FID convention)."""
    if a.mean.shape != b.mean.shape:
        raise EvalError(f"dimension mismatch: {a.mean.shape} vs {b.mean.shape}")
    diff = a.mean - b.mean
    sqrt_a = _sym_sqrt(a.covariance)
    inner = sqrt_a @ b.covariance @ sqrt_a
    vals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    if np.any(vals < EIGENVALUE_CLAMP):
        raise EvalError(f"cross-covariance square root failed: eigenvalue {vals.min():.3e}")
    trace_sqrt = float(np.sum(np.sqrt(np.clip(vals, 0.0, None))))
    d2 = float(diff @ diff + np.trace(a.covariance) + np.trace(b.covariance) - 2.0 * trace_sqrt)
    return max(d2, 0.0)


def fid_from_embeddings(gen: EmbeddingSet, gt: EmbeddingSet) -> float:
    return frechet_distance(gaussian_stats(gen), gaussian_stats(gt))
