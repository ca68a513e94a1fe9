"""Pydantic request/response models for the service API.

Frame data never travels over the wire; requests reference server-local
paths and responses report what was written where.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SynthRequest(StrictModel):
    script: Optional[dict] = None
    script_path: Optional[str] = None
    out_dir: str


class SynthResponse(StrictModel):
    frames: int
    out_dir: str
    masks_dir: Optional[str] = None
    detections_path: Optional[str] = None


class CurateConfig(StrictModel):
    segment_seconds: str = "10"
    sample_fps: str = "3"
    samples_per_segment: int = 30
    trim_label: str = "hand"
    canvas_mode: str = "detector"
    detection_threshold: float = 0.35
    search_band: tuple[float, float] = (0.2, 0.8)


class CurateRequest(StrictModel):
    frames: str
    fps: Optional[str] = None
    detections: str
    masks: str
    out_dir: str
    reverse: bool = False
    config: CurateConfig = Field(default_factory=CurateConfig)


class CurateResponse(StrictModel):
    keyframes: int
    out_dir: str
    manifest_path: str


class PdpRequest(StrictModel):
    gt: str
    gen: str
    fps: Optional[str] = None
    backend: str = "mse"
    n_points: int = 200
    normalize: bool = False
    out_dir: Optional[str] = None
    plot: bool = False


class PdpResponse(StrictModel):
    pdp: float
    pdp_norm: float
    final_distance: float
    gt_csv: Optional[str] = None
    gen_csv: Optional[str] = None
    svg: Optional[str] = None


class EvalPair(StrictModel):
    id: str
    gen: str
    gt: str


class EvalRequest(StrictModel):
    pairs: list[EvalPair]
    fps: Optional[str] = None
    backend: str = "mse"
    mode: str = "monotone"
    n_points: int = 200
    embeddings_gen: Optional[str] = None
    embeddings_gt: Optional[str] = None
    out_path: Optional[str] = None
    jobs: Optional[int] = None


class VideoMetrics(StrictModel):
    id: str
    metrics: dict[str, float]


class EvalResponse(StrictModel):
    videos: list[VideoMetrics]
    aggregate: dict[str, float]
    fid: Optional[float] = None
    out_path: Optional[str] = None


class PlotRequest(StrictModel):
    profiles: list[str]
    labels: Optional[list[str]] = None
    mean: bool = False
    normalize: bool = False
    width: int = 640
    height: int = 400
    x_label: str = "Time"
    y_label: Optional[str] = None
    out_path: str


class PlotResponse(StrictModel):
    out_path: str
    polylines: int
