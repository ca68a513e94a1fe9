"""Procedural painting-process fixtures.

Generates deterministic reveal sequences over a white canvas: pixels switch
from white to target values in a seeded order, so the final frame equals the
target byte-exactly and per-pixel error never increases. The coarse-to-fine
mode fades flat regions in before detailed ones, approximating a real
painting workflow (block-in first, details last).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .media import (
    Detection,
    DetectionSet,
    Frame,
    FrameSequence,
    OcclusionMask,
    to_grayscale,
)

WHITE = 255
DEFAULT_OCCLUDER_COLOR = (200, 40, 40)

ORDERS = ("raster", "random-patch", "coarse-to-fine")


class ScriptError(Exception):
    def __init__(self, message: str, field_name: str | None = None):
        super().__init__(message)
        self.field_name = field_name


@dataclass(frozen=True)
class Occluder:
    size: int
    trajectory: tuple[tuple[int, int], ...]
    color: tuple[int, int, int] = DEFAULT_OCCLUDER_COLOR


@dataclass(frozen=True)
class RevealScript:
    target: Frame
    order: str = "raster"
    steps: int = 30
    seed: int = 0
    fps: Fraction = Fraction(3)
    occluder: Occluder | None = None

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ScriptError(f"unknown order {self.order!r}", "order")
        if self.steps < 1:
            raise ScriptError("steps must be >= 1", "steps")
        if self.occluder is not None and len(self.occluder.trajectory) != self.steps:
            raise ScriptError("trajectory length must equal steps", "occluder.trajectory")
        object.__setattr__(self, "fps", Fraction(self.fps))


def _reveal_order(script: RevealScript) -> np.ndarray:
    """Per-pixel reveal step in [0, steps-1], flattened row-major."""
    h, w = script.target.height, script.target.width
    n = h * w
    if script.order == "raster":
        # row-by-row: pixel p revealed at step floor(p * steps / n)
        return (np.arange(n, dtype=np.int64) * script.steps) // n
    rng = np.random.default_rng(script.seed)
    # random-patch: shuffle 8x8 blocks, reveal them in shuffled order
    by, bx = (h + 7) // 8, (w + 7) // 8
    block_ids = np.arange(by * bx)
    rng.shuffle(block_ids)
    rank = np.empty_like(block_ids)
    rank[block_ids] = np.arange(by * bx)
    ys, xs = np.divmod(np.arange(n), w)
    block_rank = rank[(ys // 8) * bx + (xs // 8)]
    return (block_rank * min(script.steps, n)) // (by * bx)


def _detail_score(target: Frame) -> np.ndarray:
    """Normalized local gradient magnitude in [0, 1]; high = fine detail."""
    gray = to_grayscale(target).pixels[:, :, 0].astype(np.float64)
    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    top = mag.max()
    return mag / top if top > 0 else mag


def generate_process(script: RevealScript) -> FrameSequence:
    """Seeded reveal of the target over a white canvas.

    Frame i strictly extends the revealed set of frame i-1 (or, in
    coarse-to-fine mode, moves every pixel monotonically toward its target
    value), and the last frame equals the target exactly.
    """
    h, w, c = script.target.pixels.shape
    target = script.target.pixels.astype(np.float64)
    frames = []
    if script.order == "coarse-to-fine":
        detail = _detail_score(script.target)  # (H, W)
        for i in range(script.steps):
            s = (i + 1) / script.steps
            # flat regions reach full opacity at s=0.5, busiest at s=1
            alpha = np.clip(2.0 * s - detail, 0.0, 1.0)
            if i == script.steps - 1:
                px = script.target.pixels
            else:
                blended = WHITE + alpha[:, :, None] * (target - WHITE)
                px = np.rint(blended).astype(np.uint8)
            frames.append(Frame(px, Fraction(i) / script.fps))
    else:
        reveal_at = _reveal_order(script).reshape(h, w)
        for i in range(script.steps):
            shown = reveal_at <= i
            if i == script.steps - 1:
                px = script.target.pixels
            else:
                px = np.where(shown[:, :, None], script.target.pixels, np.uint8(WHITE))
            frames.append(Frame(px, Fraction(i) / script.fps))
    return FrameSequence(tuple(frames), script.fps)


def overlay_occluder(
    v: FrameSequence, script: RevealScript
) -> tuple[FrameSequence, list[OcclusionMask], DetectionSet]:
    """Stamp a solid square along the trajectory, with exact masks and boxes."""
    occ = script.occluder
    if occ is None:
        empty = [OcclusionMask(np.zeros((v.height, v.width), dtype=bool)) for _ in v]
        return v, empty, DetectionSet({})
    color = np.array(occ.color[: v.channels], dtype=np.uint8)
    frames, masks, per_frame = [], [], {}
    for i, f in enumerate(v):
        x, y = occ.trajectory[i]
        x = max(0, min(int(x), v.width - occ.size))
        y = max(0, min(int(y), v.height - occ.size))
        px = f.pixels.copy()
        px[y : y + occ.size, x : x + occ.size] = color
        bits = np.zeros((v.height, v.width), dtype=bool)
        bits[y : y + occ.size, x : x + occ.size] = True
        frames.append(Frame(px, f.timestamp))
        masks.append(OcclusionMask(bits))
        per_frame[i] = (
            Detection("hand", (x, y, x + occ.size, y + occ.size), 1.0),
        )
    return FrameSequence(tuple(frames), v.nominal_fps), masks, DetectionSet(per_frame)


# ---------------------------------------------------------------------------
# Procedural targets and JSON scripts


def procedural_target(width: int, height: int, seed: int, kind: str = "blobs") -> Frame:
    """Deterministic synthetic artwork used when no target image is given."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.zeros((height, width, 3))
    if kind == "blobs":
        for _ in range(6):
            cx, cy = rng.uniform(0, width), rng.uniform(0, height)
            sigma = rng.uniform(0.1, 0.35) * min(width, height)
            color = rng.uniform(0, 220, size=3)
            weight = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2))
            img += weight[:, :, None] * color[None, None, :]
        img = 255.0 - np.clip(img, 0, 255)
    elif kind == "gradient":
        img[:, :, 0] = 255.0 * xx / max(width - 1, 1)
        img[:, :, 1] = 255.0 * yy / max(height - 1, 1)
        img[:, :, 2] = 128.0
    else:
        raise ScriptError(f"unknown target kind {kind!r}", "target.kind")
    return Frame(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def script_from_json(doc: dict) -> RevealScript:
    """Parse the CLI script schema; unknown or missing fields name themselves."""
    known = {"width", "height", "target", "order", "steps", "seed", "fps", "occluder"}
    for key in doc:
        if key not in known:
            raise ScriptError(f"unknown script field {key!r}", key)
    try:
        width = int(doc.get("width", 64))
        height = int(doc.get("height", 64))
        steps = int(doc.get("steps", 30))
        seed = int(doc.get("seed", 0))
    except (TypeError, ValueError) as exc:
        raise ScriptError(f"bad numeric field: {exc}", "steps") from exc
    tgt = doc.get("target", {})
    if isinstance(tgt, str):
        arr = np.asarray(Image.open(tgt).convert("RGB"))
        target = Frame(arr.astype(np.uint8))
    else:
        target = procedural_target(width, height, seed, tgt.get("kind", "blobs"))
    occluder = None
    if "occluder" in doc and doc["occluder"] is not None:
        o = doc["occluder"]
        if "size" not in o:
            raise ScriptError("occluder.size is required", "occluder.size")
        traj = o.get("trajectory")
        if traj is None:
            rng = np.random.default_rng(seed + 1)
            traj = [
                (int(rng.integers(0, max(1, width - int(o["size"])))),
                 int(rng.integers(0, max(1, height - int(o["size"])))))
                for _ in range(steps)
            ]
        occluder = Occluder(
            int(o["size"]),
            tuple((int(x), int(y)) for x, y in traj),
            tuple(o.get("color", DEFAULT_OCCLUDER_COLOR)),
        )
    fps = doc.get("fps", 3)
    if isinstance(fps, str):
        fps = Fraction(fps)
    return RevealScript(
        target=target,
        order=doc.get("order", "raster"),
        steps=steps,
        seed=seed,
        fps=Fraction(fps),
        occluder=occluder,
    )


def load_script(path) -> RevealScript:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScriptError(f"{path}: invalid JSON: {exc}") from exc
    return script_from_json(doc)
