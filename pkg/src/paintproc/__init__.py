"""Painting-process video curation and perceptual evaluation toolkit."""

from .media import (
    Detection,
    DetectionSet,
    EmbeddingSet,
    Frame,
    FrameSequence,
    OcclusionMask,
)
from .pdp import DistanceProfile, PdpConfig, PdpResult, pdp_score

__all__ = [
    "Detection",
    "DetectionSet",
    "DistanceProfile",
    "EmbeddingSet",
    "Frame",
    "FrameSequence",
    "OcclusionMask",
    "PdpConfig",
    "PdpResult",
    "pdp_score",
]

__version__ = "0.1.0"
