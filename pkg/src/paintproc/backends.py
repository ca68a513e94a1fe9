"""Pluggable perceptual-distance functions between frames.

Every backend is a pseudometric on frames: d(x, x) = 0, symmetric,
nonnegative. Pixel backends resize mismatched inputs bilinearly to the
smaller frame's dimensions before comparing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image

from .media import EmbeddingSet, Frame, to_grayscale

SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2
SSIM_WINDOW = 8


class BackendError(Exception):
    pass


def _resize(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    if pixels.shape[1] == width and pixels.shape[0] == height:
        return pixels
    squeeze = pixels.shape[2] == 1
    img = Image.fromarray(pixels[:, :, 0] if squeeze else pixels)
    out = np.asarray(img.resize((width, height), Image.BILINEAR))
    return out[:, :, None] if squeeze else out


def _common_pixels(a: Frame, b: Frame) -> tuple[np.ndarray, np.ndarray]:
    if a.channels != b.channels:
        raise BackendError(f"channel mismatch: {a.channels} vs {b.channels}")
    w = min(a.width, b.width)
    h = min(a.height, b.height)
    return _resize(a.pixels, w, h), _resize(b.pixels, w, h)


def mse_distance(a: Frame, b: Frame) -> float:
    """Mean squared difference on the [0, 1] scale; range [0, 1]."""
    pa, pb = _common_pixels(a, b)
    diff = pa.astype(np.float64) / 255.0 - pb.astype(np.float64) / 255.0
    return float(np.mean(diff * diff))


def _ssim_window_stats(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-window mean and variance for non-overlapping 8x8 tiles."""
    h, w = gray.shape
    ny, nx = h // SSIM_WINDOW, w // SSIM_WINDOW
    tiles = gray[: ny * SSIM_WINDOW, : nx * SSIM_WINDOW].reshape(
        ny, SSIM_WINDOW, nx, SSIM_WINDOW
    )
    flat = tiles.transpose(0, 2, 1, 3).reshape(ny * nx, -1)
    return flat.mean(axis=1), flat.var(axis=1)


def ssim_distance(a: Frame, b: Frame) -> float:
    """1 - SSIM on grayscale, 8x8 non-overlapping windows, 8-bit constants."""
    pa, pb = _common_pixels(a, b)
    ga = to_grayscale(Frame(pa)).pixels[:, :, 0].astype(np.float64)
    gb = to_grayscale(Frame(pb)).pixels[:, :, 0].astype(np.float64)
    h, w = ga.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        # too small for windows: global statistics
        mu_a, var_a = np.array([ga.mean()]), np.array([ga.var()])
        mu_b, var_b = np.array([gb.mean()]), np.array([gb.var()])
        cov = np.array([((ga - ga.mean()) * (gb - gb.mean())).mean()])
    else:
        mu_a, var_a = _ssim_window_stats(ga)
        mu_b, var_b = _ssim_window_stats(gb)
        ny, nx = h // SSIM_WINDOW, w // SSIM_WINDOW
        prod = (ga[: ny * SSIM_WINDOW, : nx * SSIM_WINDOW]
                * gb[: ny * SSIM_WINDOW, : nx * SSIM_WINDOW]).reshape(
            ny, SSIM_WINDOW, nx, SSIM_WINDOW
        )
        mean_prod = prod.transpose(0, 2, 1, 3).reshape(ny * nx, -1).mean(axis=1)
        cov = mean_prod - mu_a * mu_b
    ssim = ((2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)) / (
        (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    )
    return float(np.clip(1.0 - ssim.mean(), 0.0, 1.0))


# forward differences so even 2-periodic textures respond
_GRAM_KERNELS = np.array(
    [
        [[0, 0, 0], [0, -1, 1], [0, 0, 0]],    # horizontal
        [[0, 0, 0], [0, -1, 0], [0, 1, 0]],    # vertical
        [[0, 0, 0], [0, -1, 0], [0, 0, 1]],    # diagonal \
        [[0, 0, 0], [0, -1, 0], [1, 0, 0]],    # diagonal /
    ],
    dtype=np.float64,
)


def _gram_matrix(f: Frame) -> np.ndarray:
    gray = to_grayscale(f).pixels[:, :, 0]
    small = _resize(gray[:, :, None], 64, 64)[:, :, 0].astype(np.float64) / 255.0
    padded = np.pad(small, 1, mode="edge")
    responses = np.empty((4, 64, 64))
    for k, kernel in enumerate(_GRAM_KERNELS):
        acc = np.zeros((64, 64))
        for dy in range(3):
            for dx in range(3):
                wgt = kernel[dy, dx]
                if wgt:
                    acc += wgt * padded[dy : dy + 64, dx : dx + 64]
        responses[k] = acc
    flat = responses.reshape(4, -1)
    return (flat @ flat.T) / flat.shape[1]


def gram_texture_distance(a: Frame, b: Frame) -> float:
    """Frobenius distance of 4x4 gradient Gram matrices, squashed to [0, 1)."""
    x = float(np.linalg.norm(_gram_matrix(a) - _gram_matrix(b)))
    return x / (1.0 + x)


def embedding_distance(e_a: np.ndarray, e_b: np.ndarray, mode: str = "cosine") -> float:
    e_a = np.asarray(e_a, dtype=np.float64)
    e_b = np.asarray(e_b, dtype=np.float64)
    if e_a.shape != e_b.shape:
        raise BackendError(f"dimension mismatch: {e_a.shape} vs {e_b.shape}")
    if mode == "l2":
        return float(np.linalg.norm(e_a - e_b))
    if mode == "cosine":
        na, nb = np.linalg.norm(e_a), np.linalg.norm(e_b)
        if na == 0.0 or nb == 0.0:
            raise BackendError("zero vector in cosine mode")
        cos = float(np.dot(e_a, e_b) / (na * nb))
        cos = max(-1.0, min(1.0, cos))
        return (1.0 - cos) / 2.0
    raise BackendError(f"unknown embedding distance mode {mode!r}")


def sequence_embedding_lookup(es: EmbeddingSet, index: int) -> np.ndarray:
    return es.vector(index)


@dataclass(frozen=True)
class DistanceBackend:
    """A named frame-to-frame distance function."""

    id: str
    kind: str
    fn: Callable[[Frame, Frame], float]
    params: dict = field(default_factory=dict)

    def __call__(self, a: Frame, b: Frame) -> float:
        return self.fn(a, b)


_PIXEL_BACKENDS = {
    "mse": ("pixel-mse", mse_distance),
    "ssim": ("ssim", ssim_distance),
    "gram": ("gram-texture", gram_texture_distance),
}

BACKEND_IDS = tuple(_PIXEL_BACKENDS)


def make_backend(backend_id: str) -> DistanceBackend:
    try:
        kind, fn = _PIXEL_BACKENDS[backend_id]
    except KeyError:
        raise BackendError(
            f"unknown backend {backend_id!r}; choose from {', '.join(BACKEND_IDS)}"
        )
    return DistanceBackend(backend_id, kind, fn)


def embedding_backend(
    es_a: EmbeddingSet, es_b: EmbeddingSet, mode: str = "cosine"
) -> Callable[[int, int], float]:
    """Index-based distance over two precomputed embedding sets."""

    def dist(i: int, j: int) -> float:
        return embedding_distance(es_a.vector(i), es_b.vector(j), mode)

    return dist


def load_score_file(path) -> list[tuple[int, float]]:
    """Per-frame external score CSV: `index,distance` rows."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "index"):
                continue
            try:
                rows.append((int(row[0]), float(row[1])))
            except (ValueError, IndexError) as exc:
                raise BackendError(f"{path}: bad score row {lineno}: {exc}") from exc
    if not rows:
        raise BackendError(f"{path}: no score rows")
    rows.sort(key=lambda r: r[0])
    return rows
