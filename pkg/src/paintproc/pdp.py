"""Perceptual Distance Profile metric.

A profile is the per-frame distance of a video to a target frame, viewed as
a curve over normalized time t in [0, 1]. Two videos are scored by linearly
resampling both profiles onto a common axis and taking the L2 distance of
the resulting polylines (trapezoidal integration is exact for polylines).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .media import Frame, FrameSequence

DEFAULT_N_POINTS = 200
NORMALIZE_GUARD = 1e-8


class ProfileError(Exception):
    pass


@dataclass(frozen=True)
class DistanceProfile:
    """Distance values over a normalized time axis."""

    values: np.ndarray
    axis: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        axis = np.asarray(self.axis, dtype=np.float64)
        if values.ndim != 1 or axis.shape != values.shape:
            raise ProfileError("values and axis must be 1-D and equal length")
        if values.size == 0:
            raise ProfileError("empty profile")
        if not np.all(np.isfinite(values)):
            raise ProfileError("profile values must be finite")
        if values.size > 1:
            if axis[0] != 0.0 or axis[-1] != 1.0 or np.any(np.diff(axis) <= 0):
                raise ProfileError("axis must increase strictly from 0 to 1")
        for arr in (values, axis):
            arr.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "axis", axis)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class PdpConfig:
    n_points: int = DEFAULT_N_POINTS
    normalize: bool = False
    backend_id: str = "mse"

    def __post_init__(self):
        if self.n_points < 2:
            raise ProfileError("n_points must be >= 2")


@dataclass(frozen=True)
class PdpResult:
    pdp: float
    pdp_norm: float
    final_distance: float
    curve_gt: DistanceProfile
    curve_gen: DistanceProfile


def profile_axis(n: int) -> np.ndarray:
    """Normalized time axis for n samples; a single sample sits at t=0."""
    if n == 1:
        return np.array([0.0])
    return np.linspace(0.0, 1.0, n)


def compute_profile(
    v: FrameSequence, target: Frame, d: Callable[[Frame, Frame], float]
) -> DistanceProfile:
    """Distance of every frame to the target, over the sequence's time axis."""
    if len(v) == 0:
        raise ProfileError("empty sequence")
    values = []
    for i, f in enumerate(v):
        try:
            values.append(float(d(f, target)))
        except Exception as exc:
            raise ProfileError(f"backend failed at frame {i}: {exc}") from exc
    return DistanceProfile(np.array(values), profile_axis(len(values)))


def profile_from_values(values: Sequence[float]) -> DistanceProfile:
    values = np.asarray(list(values), dtype=np.float64)
    return DistanceProfile(values, profile_axis(values.size))


def profile_from_scores(rows: Sequence[tuple[int, float]]) -> DistanceProfile:
    """Build a profile from externally scored (index, distance) rows."""
    ordered = sorted(rows, key=lambda r: r[0])
    return profile_from_values([v for _, v in ordered])


def normalize_profile(p: DistanceProfile) -> DistanceProfile:
    """Linearly remap so the profile runs from 1 at start to 0 at end.

    A near-constant profile (|start - end| below the guard) maps through a
    denominator of 1.0, yielding an all-offsets profile instead of blowing up.
    """
    end = p.values[-1]
    start = p.values[0]
    denominator = start - end
    if abs(denominator) < NORMALIZE_GUARD:
        denominator = 1.0
    return DistanceProfile((p.values - end) / denominator, p.axis)


def resample(p: DistanceProfile, n_points: int) -> DistanceProfile:
    """Piecewise-linear resampling onto linspace(0, 1, n_points)."""
    if n_points < 2:
        raise ProfileError("n_points must be >= 2")
    t = np.linspace(0.0, 1.0, n_points)
    if len(p) == 1:
        return DistanceProfile(np.full(n_points, p.values[0]), t)
    values = np.interp(t, p.axis, p.values)
    values[0] = p.values[0]
    values[-1] = p.values[-1]
    return DistanceProfile(values, t)


def curve_l2(a: DistanceProfile, b: DistanceProfile) -> float:
    """L2 distance of two curves sharing one axis, by trapezoidal rule."""
    if a.axis.shape != b.axis.shape or np.any(a.axis != b.axis):
        raise ProfileError("curves must share a common axis")
    diff_sq = (a.values - b.values) ** 2
    return float(np.sqrt(np.trapezoid(diff_sq, a.axis)))


def pdp_from_profiles(
    p_gt: DistanceProfile,
    p_gen: DistanceProfile,
    cfg: PdpConfig,
    final_distance: float,
) -> PdpResult:
    """Score two raw profiles; both raw and normalized scores are reported."""
    raw_gt = resample(p_gt, cfg.n_points)
    raw_gen = resample(p_gen, cfg.n_points)
    norm_gt = resample(normalize_profile(p_gt), cfg.n_points)
    norm_gen = resample(normalize_profile(p_gen), cfg.n_points)
    pdp = curve_l2(raw_gen, raw_gt)
    pdp_norm = curve_l2(norm_gen, norm_gt)
    if cfg.normalize:
        curve_gt, curve_gen = norm_gt, norm_gen
    else:
        curve_gt, curve_gen = raw_gt, raw_gen
    return PdpResult(pdp, pdp_norm, float(final_distance), curve_gt, curve_gen)


def pdp_score(
    v_gt: FrameSequence,
    v_gen: FrameSequence,
    cfg: PdpConfig,
    d: Callable[[Frame, Frame], float],
) -> PdpResult:
    """Score a generated sequence against ground truth.

    The target is always the final ground-truth frame; final_distance is the
    raw backend distance between the last generated frame and that target.
    """
    if len(v_gt) == 0 or len(v_gen) == 0:
        raise ProfileError("sequences must be nonempty")
    target = v_gt[len(v_gt) - 1]
    p_gt = compute_profile(v_gt, target, d)
    p_gen = compute_profile(v_gen, target, d)
    return pdp_from_profiles(p_gt, p_gen, cfg, d(v_gen[len(v_gen) - 1], target))


def mean_profile(profiles: Sequence[DistanceProfile], n_points: int) -> DistanceProfile:
    if not profiles:
        raise ProfileError("no profiles to average")
    stacked = np.stack([resample(p, n_points).values for p in profiles])
    return DistanceProfile(stacked.mean(axis=0), np.linspace(0.0, 1.0, n_points))


# ---------------------------------------------------------------------------
# CSV serialization


def save_profile_csv(p: DistanceProfile, path) -> None:
    lines = ["t,value"]
    lines += [f"{t:.12g},{v:.12g}" for t, v in zip(p.axis, p.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_profile_csv(path) -> DistanceProfile:
    axis, values = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if lineno == 1 and row[0].strip().lower() == "t":
                continue
            try:
                axis.append(float(row[0]))
                values.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ProfileError(f"{path}: bad profile row {lineno}") from exc
    if not values:
        raise ProfileError(f"{path}: empty profile")
    return DistanceProfile(np.array(values), np.array(axis))
