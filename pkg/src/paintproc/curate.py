"""Dataset curation: trim, localize canvas, partition, masked-median cleanup,
overlay removal, and the temporal reversal transform.

The pipeline turns a raw painting-tutorial video (plus externally produced
detections and occlusion masks) into N clean keyframes, one per 10-second
segment, with persistent occlusions filled from earlier segments and finally
from a blank white canvas.
"""

from __future__ import annotations

import math
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .media import (
    DetectionSet,
    Frame,
    FrameSequence,
    OcclusionMask,
    to_grayscale,
)

WHITE = 255
FILL_TOLERANCE = 0.5  # 8-bit scale, diffusion-fill stop criterion
FILL_MAX_ITERATIONS = 500


class PipelineError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    segment_seconds: Fraction = Fraction(10)
    sample_fps: Fraction = Fraction(3)
    samples_per_segment: int = 30
    trim_label: str = "hand"
    canvas_mode: str = "detector"  # "detector" or "gradient-split"
    detection_threshold: float = 0.35
    search_band: tuple[float, float] = (0.2, 0.8)

    def __post_init__(self):
        if self.segment_seconds <= 0 or self.sample_fps <= 0:
            raise ValueError("segment_seconds and sample_fps must be positive")
        if self.samples_per_segment < 1:
            raise ValueError("samples_per_segment must be >= 1")
        object.__setattr__(self, "segment_seconds", Fraction(self.segment_seconds))
        object.__setattr__(self, "sample_fps", Fraction(self.sample_fps))


@dataclass(frozen=True)
class SegmentMedianState:
    """Running clean-canvas estimate threaded through segments in order."""

    current_median: np.ndarray  # (H, W, C) uint8
    filled_mask: np.ndarray  # (H, W) bool, True where a real sample has landed

    @staticmethod
    def initial(height: int, width: int, channels: int) -> "SegmentMedianState":
        return SegmentMedianState(
            np.full((height, width, channels), WHITE, dtype=np.uint8),
            np.zeros((height, width), dtype=bool),
        )


def trim_temporal(
    v: FrameSequence, det: DetectionSet, label: str, threshold: float
) -> tuple[int, int]:
    """Inclusive frame-index range between first and last qualifying detection."""
    hits = [i for i in det.frames_with(label, threshold) if i < len(v)]
    if not hits:
        raise PipelineError("trim", f"label {label!r} never detected at score >= {threshold}")
    return hits[0], hits[-1]


def locate_canvas_detector(
    det: DetectionSet, threshold: float, label: str = "canvas"
) -> tuple[int, int, int, int] | None:
    """Best canvas box from the temporally median detected frame, or None."""
    hits = det.frames_with(label, threshold)
    if not hits:
        return None
    frame_idx = hits[len(hits) // 2]
    boxes = [
        d for d in det.detections(frame_idx) if d.label == label and d.score >= threshold
    ]
    best = max(boxes, key=lambda d: d.score)
    return best.box


def locate_canvas_gradient(
    v: FrameSequence, band: tuple[float, float] = (0.2, 0.8)
) -> int:
    """Column of maximal summed horizontal intensity gradient within the band.

    The gradient at column x measures |I(x+1) - I(x)|; the canvas is taken to
    be everything right of the returned column. Ties break leftmost.
    """
    if len(v) == 0:
        raise PipelineError("localize", "empty sequence")
    width = v.width
    if width < 4:
        raise PipelineError("localize", f"frame width {width} too small to split")
    idx = np.unique(np.linspace(0, len(v) - 1, min(len(v), 16)).round().astype(int))
    grad = np.zeros(width - 1, dtype=np.float64)
    for i in idx:
        gray = to_grayscale(v[int(i)]).pixels[:, :, 0].astype(np.float64)
        grad += np.abs(np.diff(gray, axis=1)).sum(axis=0)
    lo = int(band[0] * width)
    hi = min(width - 2, int(band[1] * width))
    if lo > hi:
        raise PipelineError("localize", f"search band {band} empty for width {width}")
    return lo + int(np.argmax(grad[lo : hi + 1]))


def partition_segments(v: FrameSequence, cfg: PipelineConfig) -> list[list[int]]:
    """Sampled frame indices per segment; ceil(duration / segment_seconds) segments."""
    if len(v) == 0:
        raise PipelineError("partition", "empty sequence")
    duration = v.duration
    n_segments = max(1, math.ceil(duration / cfg.segment_seconds))
    segments = []
    for k in range(n_segments):
        indices = []
        for j in range(cfg.samples_per_segment):
            t = k * cfg.segment_seconds + Fraction(j) / cfg.sample_fps
            if t >= duration:
                break
            indices.append(min(int(t * v.nominal_fps), len(v) - 1))
        if indices:
            segments.append(indices)
    return segments


def masked_median(
    samples: list[Frame],
    masks: list[OcclusionMask],
    prior: SegmentMedianState,
) -> SegmentMedianState:
    """Per-pixel lower median over unoccluded samples; holes inherit the prior.

    Even sample counts use the lower of the two middle values so outputs stay
    byte-exact order statistics of the inputs.
    """
    if not samples:
        raise PipelineError("median", "empty sample list")
    if len(samples) != len(masks):
        raise PipelineError("median", f"{len(samples)} samples vs {len(masks)} masks")
    h, w, c = samples[0].pixels.shape
    if prior.current_median.shape != (h, w, c):
        raise PipelineError("median", "prior state dimensions do not match samples")
    stack = np.stack([f.pixels for f in samples])  # (M, H, W, C)
    occluded = np.stack([m.bits for m in masks])  # (M, H, W)
    counts = (~occluded).sum(axis=0)  # (H, W)
    # occluded samples sort past every real 8-bit value
    vals = np.where(occluded[:, :, :, None], 256, stack.astype(np.int16))
    vals.sort(axis=0)
    pick = np.maximum(counts - 1, 0) // 2
    pick = np.broadcast_to(pick[None, :, :, None], (1, h, w, c))
    median = np.take_along_axis(vals, pick, axis=0)[0].astype(np.uint8)
    has_data = counts > 0
    out = np.where(has_data[:, :, None], median, prior.current_median)
    return SegmentMedianState(out, has_data | prior.filled_mask)


def remove_overlays(f: Frame, boxes: list[tuple[int, int, int, int]]) -> Frame:
    """Replace pixels inside the boxes by iterative 4-neighbor diffusion fill."""
    if not boxes:
        return f
    h, w = f.height, f.width
    hole = np.zeros((h, w), dtype=bool)
    for x0, y0, x1, y1 in boxes:
        if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
            raise PipelineError("overlay", f"box {(x0, y0, x1, y1)} outside {w}x{h} frame")
        hole[y0:y1, x0:x1] = True
    if hole.all():
        raise PipelineError("overlay", "nothing to fill from: boxes cover the whole frame")
    img = f.pixels.astype(np.float64).copy()
    img[hole] = img[~hole].mean(axis=0)
    for _ in range(FILL_MAX_ITERATIONS):
        nbr_sum = np.zeros_like(img)
        nbr_cnt = np.zeros((h, w))
        nbr_sum[1:] += img[:-1]
        nbr_cnt[1:] += 1
        nbr_sum[:-1] += img[1:]
        nbr_cnt[:-1] += 1
        nbr_sum[:, 1:] += img[:, :-1]
        nbr_cnt[:, 1:] += 1
        nbr_sum[:, :-1] += img[:, 1:]
        nbr_cnt[:, :-1] += 1
        new = nbr_sum[hole] / nbr_cnt[hole][:, None]
        change = np.abs(new - img[hole]).max()
        img[hole] = new
        if change < FILL_TOLERANCE:
            break
    out = f.pixels.copy()
    out[hole] = np.clip(np.rint(img[hole]), 0, 255).astype(np.uint8)
    return Frame(out, f.timestamp)


def remove_overlays_external(
    f: Frame,
    boxes: list[tuple[int, int, int, int]],
    command: list[str],
    workdir: str,
    index: int = 0,
) -> Frame:
    """File-exchange hook for an out-of-process inpainter.

    Writes overlay_in_%06d.png and overlay_mask_%06d.png, runs the command,
    and reads overlay_out_%06d.png back.
    """
    wd = Path(workdir)
    wd.mkdir(parents=True, exist_ok=True)
    px = f.pixels[:, :, 0] if f.channels == 1 else f.pixels
    Image.fromarray(px).save(wd / f"overlay_in_{index:06d}.png")
    mask = np.zeros((f.height, f.width), dtype=np.uint8)
    for x0, y0, x1, y1 in boxes:
        mask[y0:y1, x0:x1] = 255
    Image.fromarray(mask).save(wd / f"overlay_mask_{index:06d}.png")
    subprocess.run(command, cwd=wd, check=True)
    out = np.asarray(Image.open(wd / f"overlay_out_{index:06d}.png").convert("RGB"))
    if f.channels == 1:
        out = out[:, :, :1]
    return Frame(out.astype(np.uint8), f.timestamp)


def reverse_sequence(v: FrameSequence) -> FrameSequence:
    """Frames in reverse order; timestamps keep the original spacing from 0."""
    if len(v) == 0:
        raise PipelineError("reverse", "empty sequence")
    last = v[len(v) - 1].timestamp
    frames = [
        Frame(v[len(v) - 1 - i].pixels, last - v[len(v) - 1 - i].timestamp)
        for i in range(len(v))
    ]
    return FrameSequence(tuple(frames), v.nominal_fps)


def overlay_boxes(
    det: DetectionSet,
    threshold: float,
    labels: tuple[str, ...] = ("logo", "text"),
    crop_box: tuple[int, int, int, int] | None = None,
) -> list[tuple[int, int, int, int]]:
    """Union of overlay boxes across frames, shifted into crop coordinates."""
    boxes = set()
    for idx in det.per_frame:
        for d in det.per_frame[idx]:
            if d.label not in labels or d.score < threshold:
                continue
            x0, y0, x1, y1 = d.box
            if crop_box is not None:
                cx0, cy0, cx1, cy1 = crop_box
                x0, y0 = max(x0, cx0) - cx0, max(y0, cy0) - cy0
                x1, y1 = min(x1, cx1) - cx0, min(y1, cy1) - cy0
            if x0 < x1 and y0 < y1:
                boxes.add((x0, y0, x1, y1))
    return sorted(boxes)


def run_pipeline(
    video: FrameSequence,
    det: DetectionSet,
    masks: list[OcclusionMask],
    cfg: PipelineConfig,
    reverse: bool = False,
) -> tuple[FrameSequence, dict]:
    """Full curation: trim, localize, crop, partition, median, overlays.

    Returns the keyframe sequence (one frame per segment, timestamps at
    segment starts) and a manifest describing every stage decision.
    """
    if len(masks) != len(video):
        raise PipelineError("input", f"{len(masks)} masks for {len(video)} frames")

    start, end = trim_temporal(video, det, cfg.trim_label, cfg.detection_threshold)
    t0 = video[start].timestamp
    trimmed = FrameSequence(
        tuple(
            Frame(video[i].pixels, video[i].timestamp - t0)
            for i in range(start, end + 1)
        ),
        video.nominal_fps,
    )
    trimmed_masks = masks[start : end + 1]

    canvas: dict
    if cfg.canvas_mode == "detector":
        box = locate_canvas_detector(det, cfg.detection_threshold)
        if box is None:
            split = locate_canvas_gradient(trimmed, cfg.search_band)
            box = (split + 1, 0, trimmed.width, trimmed.height)
            canvas = {"mode": "gradient-split-fallback", "split_column": split, "box": list(box)}
        else:
            canvas = {"mode": "detector", "box": list(box)}
    elif cfg.canvas_mode == "gradient-split":
        split = locate_canvas_gradient(trimmed, cfg.search_band)
        box = (split + 1, 0, trimmed.width, trimmed.height)
        canvas = {"mode": "gradient-split", "split_column": split, "box": list(box)}
    else:
        raise PipelineError("localize", f"unknown canvas mode {cfg.canvas_mode!r}")

    x0, y0, x1, y1 = box
    if not (0 <= x0 < x1 <= trimmed.width and 0 <= y0 < y1 <= trimmed.height):
        raise PipelineError("localize", f"canvas box {box} outside frame")
    cropped = [Frame(f.pixels[y0:y1, x0:x1, :], f.timestamp) for f in trimmed]
    cropped_masks = [OcclusionMask(m.bits[y0:y1, x0:x1]) for m in trimmed_masks]

    segments = partition_segments(
        FrameSequence(tuple(cropped), trimmed.nominal_fps), cfg
    )

    state = SegmentMedianState.initial(y1 - y0, x1 - x0, trimmed.channels)
    boxes = overlay_boxes(det, cfg.detection_threshold, crop_box=box)
    keyframes = []
    segment_stats = []
    for k, indices in enumerate(segments):
        samples = [cropped[i] for i in indices]
        sample_masks = [cropped_masks[i] for i in indices]
        prior_filled = state.filled_mask
        state = masked_median(samples, sample_masks, state)
        counts = (~np.stack([m.bits for m in sample_masks])).sum(axis=0)
        holes = counts == 0
        segment_stats.append(
            {
                "index": k,
                "samples": indices,
                "filled_from_prior": int((holes & prior_filled).sum()),
                "white_init_pixels": int((~state.filled_mask).sum()),
            }
        )
        key = Frame(state.current_median, Fraction(k) * cfg.segment_seconds)
        if boxes:
            key = remove_overlays(key, boxes)
        keyframes.append(key)

    result = FrameSequence(tuple(keyframes), Fraction(1) / cfg.segment_seconds)
    if reverse:
        result = reverse_sequence(result)

    manifest = {
        "config": {
            "segment_seconds": str(cfg.segment_seconds),
            "sample_fps": str(cfg.sample_fps),
            "samples_per_segment": cfg.samples_per_segment,
            "trim_label": cfg.trim_label,
            "canvas_mode": cfg.canvas_mode,
            "detection_threshold": cfg.detection_threshold,
            "search_band": list(cfg.search_band),
            "segment_rounding": "ceil",
        },
        "trim": {"start": start, "end": end},
        "canvas": canvas,
        "overlay_boxes": [list(b) for b in boxes],
        "segments": segment_stats,
        "reversed": reverse,
    }
    return result, manifest
