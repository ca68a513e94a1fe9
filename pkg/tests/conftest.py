import warnings
from fractions import Fraction

import numpy as np
import pytest

from paintproc.media import Frame, FrameSequence

warnings.filterwarnings("ignore", message=".*starlette.testclient.*")


def make_frame(arr, ts=0):
    arr = np.asarray(arr, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Frame(arr, Fraction(ts))


def constant_frame(value, width=8, height=8, channels=3, ts=0):
    if np.isscalar(value):
        arr = np.full((height, width, channels), value, dtype=np.uint8)
    else:
        arr = np.tile(np.array(value, dtype=np.uint8), (height, width, 1))
    return Frame(arr, Fraction(ts))


def random_frame(rng, width=8, height=8, channels=3, ts=0):
    return Frame(
        rng.integers(0, 256, size=(height, width, channels), dtype=np.uint8),
        Fraction(ts),
    )


def random_sequence(rng, n_frames, width=8, height=8, channels=3, fps=Fraction(3)):
    frames = [
        Frame(
            rng.integers(0, 256, size=(height, width, channels), dtype=np.uint8),
            Fraction(i) / fps,
        )
        for i in range(n_frames)
    ]
    return FrameSequence(tuple(frames), fps)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
