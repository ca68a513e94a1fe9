"""Frame/sequence/mask data model and file IO.

All pixel data is 8-bit RGB (or single-channel grayscale) stored as numpy
arrays of shape (height, width, channels). Timestamps are exact rationals so
segment boundaries at whole-second multiples never drift.
"""

from __future__ import annotations

import json
import os
import re
import struct
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

RAW_MAGIC = b"PBSEQ1"
RAW_HEADER = struct.Struct("<6sIIBIQQ")

# BT.601 luma weights; applied on the 8-bit scale with rounding.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class MediaError(Exception):
    """Base error for loading/validating media artifacts."""


class LoadError(MediaError):
    """A file could not be read or decoded."""


class StructuralError(MediaError):
    """Loaded data violates a structural invariant (dimensions, ordering)."""


@dataclass(frozen=True)
class Frame:
    """A single image with a timestamp in seconds."""

    pixels: np.ndarray  # (H, W, C) uint8, C in {1, 3}
    timestamp: Fraction = Fraction(0)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise StructuralError(f"bad frame shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise StructuralError("frame must be at least 1x1")
        if px.dtype != np.uint8:
            raise StructuralError(f"frame dtype must be uint8, got {px.dtype}")
        if self.timestamp < 0:
            raise StructuralError("timestamp must be nonnegative")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def with_timestamp(self, ts: Fraction) -> "Frame":
        return Frame(self.pixels, Fraction(ts))


@dataclass(frozen=True)
class FrameSequence:
    """Ordered frames sharing dimensions, with strictly increasing timestamps."""

    frames: tuple[Frame, ...]
    nominal_fps: Fraction = Fraction(30)

    def __post_init__(self):
        frames = tuple(self.frames)
        if self.nominal_fps <= 0:
            raise StructuralError("fps must be positive")
        if frames:
            h, w, c = frames[0].pixels.shape
            for i, f in enumerate(frames):
                if f.pixels.shape != (h, w, c):
                    raise StructuralError(
                        f"frame {i} has shape {f.pixels.shape}, expected {(h, w, c)}"
                    )
            for a, b in zip(frames, frames[1:]):
                if b.timestamp <= a.timestamp:
                    raise StructuralError("timestamps must be strictly increasing")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "nominal_fps", Fraction(self.nominal_fps))

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i: int) -> Frame:
        return self.frames[i]

    def __iter__(self):
        return iter(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def channels(self) -> int:
        return self.frames[0].channels

    @property
    def duration(self) -> Fraction:
        """Nominal duration: frame count over fps."""
        return Fraction(len(self.frames)) / self.nominal_fps


@dataclass(frozen=True)
class OcclusionMask:
    """Per-pixel exclusion map; True marks occluded pixels."""

    bits: np.ndarray  # (H, W) bool

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise StructuralError(f"mask must be 2-D, got shape {bits.shape}")
        bits = bits.astype(bool)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True)
class Detection:
    label: str
    box: tuple[int, int, int, int]  # x0, y0, x1, y1
    score: float

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if not (0 <= x0 < x1 and 0 <= y0 < y1):
            raise StructuralError(f"bad detection box {self.box}")
        if not (0.0 <= self.score <= 1.0):
            raise StructuralError(f"detection score {self.score} outside [0,1]")


@dataclass(frozen=True)
class DetectionSet:
    """Externally produced labeled boxes, keyed by frame index."""

    per_frame: dict[int, tuple[Detection, ...]] = field(default_factory=dict)

    def detections(self, index: int) -> tuple[Detection, ...]:
        return self.per_frame.get(index, ())

    def frames_with(self, label: str, threshold: float) -> list[int]:
        """Sorted frame indices having a detection of `label` at or above threshold."""
        out = []
        for idx in sorted(self.per_frame):
            if any(d.label == label and d.score >= threshold for d in self.per_frame[idx]):
                out.append(idx)
        return out


@dataclass(frozen=True)
class EmbeddingSet:
    """Per-frame feature vectors of a fixed dimension."""

    vectors: np.ndarray  # (count, dim) float64
    model_id: str = "unknown"

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise StructuralError(f"embeddings must be 2-D, got shape {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def vector(self, index: int) -> np.ndarray:
        if not 0 <= index < self.count:
            raise IndexError(f"embedding index {index} out of range [0, {self.count})")
        return self.vectors[index]


# ---------------------------------------------------------------------------
# Image arithmetic


def to_grayscale(f: Frame) -> Frame:
    """BT.601 luma conversion; identity on frames already grayscale."""
    if f.channels == 1:
        return f
    w = np.array(LUMA_WEIGHTS)
    luma = np.rint(f.pixels.astype(np.float64) @ w)
    luma = np.clip(luma, 0, 255).astype(np.uint8)
    return Frame(luma[:, :, None], f.timestamp)


def crop(f: Frame, box: tuple[int, int, int, int]) -> Frame:
    """Copy the pixels inside box = (x0, y0, x1, y1), exclusive upper bounds."""
    x0, y0, x1, y1 = box
    if not (0 <= x0 < x1 <= f.width and 0 <= y0 < y1 <= f.height):
        raise ValueError(f"crop box {box} outside {f.width}x{f.height} frame")
    return Frame(f.pixels[y0:y1, x0:x1, :], f.timestamp)


# ---------------------------------------------------------------------------
# Sequence IO

_IMAGE_EXTS = {".png", ".bmp", ".ppm", ".pgm", ".tif", ".tiff"}


def _frame_files(directory: Path) -> list[Path]:
    files = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in _IMAGE_EXTS and p.is_file()
    )
    return files


def _timestamps_from_fps(n: int, fps: Fraction) -> list[Fraction]:
    return [Fraction(i) / fps for i in range(n)]


def load_sequence(path: str | os.PathLike, fps: Fraction | None = None) -> FrameSequence:
    """Load a frame directory or a raw PBSEQ1 container.

    Directory loads order files lexicographically; timestamps come from `fps`
    (default 30). Container loads take fps from the header unless overridden.
    """
    p = Path(path)
    if p.is_dir():
        files = _frame_files(p)
        if not files:
            raise LoadError(f"no frames in {p}")
        fps = Fraction(fps) if fps is not None else Fraction(30)
        frames = []
        for i, fp in enumerate(files):
            try:
                img = Image.open(fp)
                arr = np.asarray(img.convert("RGB" if img.mode not in ("L", "1") else "L"))
            except Exception as exc:
                raise LoadError(f"frame {i} ({fp.name}): {exc}") from exc
            if arr.ndim == 2:
                arr = arr[:, :, None]
            frames.append(Frame(arr.astype(np.uint8), Fraction(i) / fps))
        seq = _sequence_checked(frames, fps)
        return seq
    if p.is_file():
        return _load_raw(p, fps)
    raise LoadError(f"no such path: {p}")


def _sequence_checked(frames: list[Frame], fps: Fraction) -> FrameSequence:
    shapes = {f.pixels.shape for f in frames}
    if len(shapes) > 1:
        raise StructuralError(f"inconsistent frame dimensions: {sorted(shapes)}")
    return FrameSequence(tuple(frames), fps)


def _load_raw(path: Path, fps: Fraction | None) -> FrameSequence:
    data = path.read_bytes()
    if len(data) < RAW_HEADER.size:
        raise LoadError(f"{path}: truncated header")
    magic, width, height, channels, count, fps_num, fps_den = RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise LoadError(f"{path}: bad magic {magic!r}")
    if channels not in (1, 3):
        raise StructuralError(f"{path}: unsupported channel count {channels}")
    frame_bytes = width * height * channels
    expected = RAW_HEADER.size + frame_bytes * count
    if len(data) != expected:
        raise LoadError(f"{path}: expected {expected} bytes, found {len(data)}")
    fps = Fraction(fps) if fps is not None else Fraction(fps_num, fps_den)
    frames = []
    offset = RAW_HEADER.size
    for i in range(count):
        arr = np.frombuffer(data, np.uint8, frame_bytes, offset).reshape(
            height, width, channels
        )
        frames.append(Frame(arr, Fraction(i) / fps))
        offset += frame_bytes
    if not frames:
        raise LoadError(f"{path}: no frames")
    return FrameSequence(tuple(frames), fps)


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_sequence_raw(seq: FrameSequence, path: str | os.PathLike) -> None:
    """Write the raw container; pixel-exact round trip with load_sequence."""
    p = Path(path)
    fps = seq.nominal_fps
    header = RAW_HEADER.pack(
        RAW_MAGIC,
        seq.width,
        seq.height,
        seq.channels,
        len(seq),
        fps.numerator,
        fps.denominator,
    )
    payload = b"".join(f.pixels.tobytes() for f in seq)
    _atomic_write(p, header + payload)


def save_sequence_dir(seq: FrameSequence, directory: str | os.PathLike) -> list[Path]:
    """Write frames as frame_%06d.png files."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = []
    for i, f in enumerate(seq):
        px = f.pixels[:, :, 0] if f.channels == 1 else f.pixels
        path = d / f"frame_{i:06d}.png"
        Image.fromarray(px).save(path)
        out.append(path)
    return out


# ---------------------------------------------------------------------------
# DetectionSet IO


def load_detections(path: str | os.PathLike) -> DetectionSet:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except FileNotFoundError:
        raise LoadError(f"detections not found: {p}")
    except json.JSONDecodeError as exc:
        raise LoadError(f"{p}: invalid JSON: {exc}") from exc
    per_frame: dict[int, tuple[Detection, ...]] = {}
    for entry in doc.get("frames", []):
        dets = tuple(
            Detection(d["label"], tuple(int(v) for v in d["box"]), float(d["score"]))
            for d in entry.get("detections", [])
        )
        per_frame[int(entry["index"])] = dets
    return DetectionSet(per_frame)


def save_detections(ds: DetectionSet, path: str | os.PathLike) -> None:
    doc = {
        "frames": [
            {
                "index": idx,
                "detections": [
                    {"label": d.label, "box": list(d.box), "score": d.score}
                    for d in ds.per_frame[idx]
                ],
            }
            for idx in sorted(ds.per_frame)
        ]
    }
    _atomic_write(Path(path), json.dumps(doc, indent=2).encode())


# ---------------------------------------------------------------------------
# OcclusionMask IO


def load_mask(path: str | os.PathLike) -> OcclusionMask:
    """1-channel image, values >= 128 mark occluded pixels."""
    try:
        img = Image.open(path).convert("L")
    except FileNotFoundError:
        raise LoadError(f"mask not found: {path}")
    arr = np.asarray(img)
    return OcclusionMask(arr >= 128)


def save_mask(mask: OcclusionMask, path: str | os.PathLike) -> None:
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr).save(path)


def load_mask_dir(directory: str | os.PathLike, count: int) -> list[OcclusionMask]:
    """Load all mask images in a directory; count must match the sequence."""
    d = Path(directory)
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in _IMAGE_EXTS)
    if len(files) != count:
        raise StructuralError(f"{d}: {len(files)} masks for {count} frames")
    return [load_mask(p) for p in files]


# ---------------------------------------------------------------------------
# EmbeddingSet IO

_EMB_HEADER = re.compile(r"^dim=(\d+) count=(\d+) model=(.*)$")


def load_embeddings(path: str | os.PathLike) -> EmbeddingSet:
    p = Path(path)
    try:
        lines = p.read_text().splitlines()
    except FileNotFoundError:
        raise LoadError(f"embeddings not found: {p}")
    if not lines:
        raise LoadError(f"{p}: empty embedding file")
    m = _EMB_HEADER.match(lines[0])
    if not m:
        raise LoadError(f"{p}: bad header line {lines[0]!r}")
    dim, count, model = int(m.group(1)), int(m.group(2)), m.group(3)
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != count:
        raise LoadError(f"{p}: header says {count} vectors, found {len(body)}")
    vectors = np.empty((count, dim), dtype=np.float64)
    for i, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != dim:
            raise LoadError(f"{p}: line {i + 2} has {len(parts)} values, expected {dim}")
        vectors[i] = [float(x) for x in parts]
    return EmbeddingSet(vectors, model)


def save_embeddings(es: EmbeddingSet, path: str | os.PathLike) -> None:
    lines = [f"dim={es.dimension} count={es.count} model={es.model_id}"]
    for row in es.vectors:
        lines.append(" ".join(repr(float(x)) for x in row))
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode())
