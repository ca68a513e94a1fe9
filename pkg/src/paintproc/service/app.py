"""FastAPI service exposing the curation pipeline and evaluation stack.

All endpoints operate on server-local paths: frame data is far too large to
ship through request bodies, so clients point the service at directories and
container files instead.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import curate, evaluate, pdp as pdp_mod, plotting, synth
from ..backends import BackendError, load_score_file, make_backend
from ..media import (
    LoadError,
    MediaError,
    load_detections,
    load_embeddings,
    load_mask_dir,
    load_sequence,
    save_detections,
    save_mask,
    save_sequence_dir,
)
from . import schemas

INPUT_ERRORS = (
    MediaError,
    BackendError,
    curate.PipelineError,
    pdp_mod.ProfileError,
    evaluate.EvalError,
    synth.ScriptError,
    ValueError,
    FileNotFoundError,
)


def _bad_request(exc: Exception) -> HTTPException:
    detail = {"error": str(exc)}
    if isinstance(exc, curate.PipelineError):
        detail["stage"] = exc.stage
    if isinstance(exc, synth.ScriptError) and exc.field_name:
        detail["field"] = exc.field_name
    return HTTPException(status_code=400, detail=detail)


def _fraction(text: str | None, default: Fraction | None = None) -> Fraction | None:
    if text is None:
        return default
    return Fraction(text)


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("PB_JOBS", "1")))
    except ValueError:
        return 1


def _load_profile_input(path: str, fps: str | None):
    """A profile source is either a pre-scored CSV or a frame sequence."""
    if path.endswith(".csv"):
        return "scores", pdp_mod.profile_from_scores(load_score_file(path))
    return "frames", load_sequence(path, _fraction(fps))


def create_app() -> FastAPI:
    app = FastAPI(title="paintproc", version="0.1.0")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth_endpoint(req: schemas.SynthRequest):
        try:
            if req.script is not None:
                script = synth.script_from_json(req.script)
            elif req.script_path is not None:
                script = synth.load_script(req.script_path)
            else:
                raise synth.ScriptError("script or script_path is required", "script")
            seq = synth.generate_process(script)
            out = Path(req.out_dir)
            masks_dir = detections_path = None
            if script.occluder is not None:
                seq, masks, det = synth.overlay_occluder(seq, script)
                masks_dir = out / "masks"
                masks_dir.mkdir(parents=True, exist_ok=True)
                for i, m in enumerate(masks):
                    save_mask(m, masks_dir / f"mask_{i:06d}.png")
                detections_path = out / "detections.json"
                save_detections(det, detections_path)
            frames_dir = out / "frames"
            save_sequence_dir(seq, frames_dir)
            meta = {"fps": str(seq.nominal_fps), "frames": len(seq)}
            (out / "sequence.json").write_text(json.dumps(meta, indent=2))
            return schemas.SynthResponse(
                frames=len(seq),
                out_dir=str(frames_dir),
                masks_dir=str(masks_dir) if masks_dir else None,
                detections_path=str(detections_path) if detections_path else None,
            )
        except INPUT_ERRORS as exc:
            raise _bad_request(exc)

    @app.post("/curate", response_model=schemas.CurateResponse)
    def curate_endpoint(req: schemas.CurateRequest):
        try:
            video = load_sequence(req.frames, _fraction(req.fps))
            det = load_detections(req.detections)
            masks = load_mask_dir(req.masks, len(video))
            cfg = curate.PipelineConfig(
                segment_seconds=Fraction(req.config.segment_seconds),
                sample_fps=Fraction(req.config.sample_fps),
                samples_per_segment=req.config.samples_per_segment,
                trim_label=req.config.trim_label,
                canvas_mode=req.config.canvas_mode,
                detection_threshold=req.config.detection_threshold,
                search_band=tuple(req.config.search_band),
            )
            keyframes, manifest = curate.run_pipeline(
                video, det, masks, cfg, reverse=req.reverse
            )
            out = Path(req.out_dir)
            key_dir = out / "keyframes"
            save_sequence_dir(keyframes, key_dir)
            manifest_path = out / "manifest.json"
            manifest_path.write_text(json.dumps(manifest, indent=2))
            return schemas.CurateResponse(
                keyframes=len(keyframes),
                out_dir=str(key_dir),
                manifest_path=str(manifest_path),
            )
        except INPUT_ERRORS as exc:
            raise _bad_request(exc)

    @app.post("/pdp", response_model=schemas.PdpResponse)
    def pdp_endpoint(req: schemas.PdpRequest):
        try:
            backend = make_backend(req.backend)
            cfg = pdp_mod.PdpConfig(
                n_points=req.n_points, normalize=req.normalize, backend_id=req.backend
            )
            gt_kind, gt_src = _load_profile_input(req.gt, req.fps)
            gen_kind, gen_src = _load_profile_input(req.gen, req.fps)
            if gt_kind == "frames" and gen_kind == "frames":
                target = gt_src[len(gt_src) - 1]
                p_gt = pdp_mod.compute_profile(gt_src, target, backend)
                p_gen = pdp_mod.compute_profile(gen_src, target, backend)
                final = backend(gen_src[len(gen_src) - 1], target)
                result = pdp_mod.pdp_from_profiles(p_gt, p_gen, cfg, final)
            else:
                # pre-scored path: profiles already measure distance to the target
                p_gt = gt_src if gt_kind == "scores" else pdp_mod.compute_profile(
                    gt_src, gt_src[len(gt_src) - 1], backend
                )
                if gen_kind == "scores":
                    p_gen = gen_src
                    final = float(p_gen.values[-1])
                else:
                    if gt_kind == "scores":
                        raise pdp_mod.ProfileError(
                            "generated frames need a ground-truth frame sequence "
                            "(or supply both sides as score CSVs)"
                        )
                result = pdp_mod.pdp_from_profiles(p_gt, p_gen, cfg, final)
            gt_csv = gen_csv = svg = None
            if req.out_dir:
                out = Path(req.out_dir)
                out.mkdir(parents=True, exist_ok=True)
                gt_csv = out / "profile_gt.csv"
                gen_csv = out / "profile_gen.csv"
                pdp_mod.save_profile_csv(p_gt, gt_csv)
                pdp_mod.save_profile_csv(p_gen, gen_csv)
                if req.plot:
                    options = plotting.PlotOptions(
                        y_label=req.backend, y_max=1.0 if req.normalize else None
                    )
                    svg_text = plotting.render_profiles_svg(
                        [("gt", result.curve_gt), ("gen", result.curve_gen)], options
                    )
                    svg = out / "pdp.svg"
                    plotting.save_svg(svg_text, svg)
            return schemas.PdpResponse(
                pdp=result.pdp,
                pdp_norm=result.pdp_norm,
                final_distance=result.final_distance,
                gt_csv=str(gt_csv) if gt_csv else None,
                gen_csv=str(gen_csv) if gen_csv else None,
                svg=str(svg) if svg else None,
            )
        except INPUT_ERRORS as exc:
            raise _bad_request(exc)

    @app.post("/eval", response_model=schemas.EvalResponse)
    def eval_endpoint(req: schemas.EvalRequest):
        try:
            if not req.pairs:
                raise evaluate.EvalError("no video pairs supplied")
            backend = make_backend(req.backend)
            cfg = pdp_mod.PdpConfig(n_points=req.n_points, backend_id=req.backend)
            fps = req.fps

            def score_pair(pair: schemas.EvalPair) -> schemas.VideoMetrics:
                gen = load_sequence(pair.gen, _fraction(fps))
                gt = load_sequence(pair.gt, _fraction(fps))
                video = evaluate.score_video(
                    gen, gt, backend, req.mode, metric_id=req.backend
                )
                result = pdp_mod.pdp_score(gt, gen, cfg, backend)
                return schemas.VideoMetrics(
                    id=pair.id,
                    metrics={
                        req.backend: video.value,
                        "pdp": result.pdp,
                        "pdp_norm": result.pdp_norm,
                        "final_distance": result.final_distance,
                    },
                )
            jobs = req.jobs or _default_jobs()
            if jobs > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    videos = list(pool.map(score_pair, req.pairs))
            else:
                videos = [score_pair(p) for p in req.pairs]
            keys = videos[0].metrics.keys()
            agg = {
                k: float(np.mean([v.metrics[k] for v in videos])) for k in keys
            }
            fid = None
            if req.embeddings_gen and req.embeddings_gt:
                fid = evaluate.fid_from_embeddings(
                    load_embeddings(req.embeddings_gen),
                    load_embeddings(req.embeddings_gt),
                )
            out_path = None
            if req.out_path:
                report = {
                    "videos": [v.model_dump() for v in videos],
                    "aggregate": agg,
                    "fid": fid,
                }
                out_path = Path(req.out_path)
                out_path.parent.mkdir(parents=True, exist_ok=True)
                out_path.write_text(json.dumps(report, indent=2))
            return schemas.EvalResponse(
                videos=videos,
                aggregate=agg,
                fid=fid,
                out_path=str(out_path) if out_path else None,
            )
        except INPUT_ERRORS as exc:
            raise _bad_request(exc)

    @app.post("/plot", response_model=schemas.PlotResponse)
    def plot_endpoint(req: schemas.PlotRequest):
        try:
            if not req.profiles:
                raise pdp_mod.ProfileError("no profile CSVs supplied")
            labels = req.labels or [Path(p).stem for p in req.profiles]
            if len(labels) != len(req.profiles):
                raise ValueError("labels count must match profiles count")
            series = []
            for label, path in zip(labels, req.profiles):
                profile = pdp_mod.load_profile_csv(path)
                if req.normalize:
                    profile = pdp_mod.normalize_profile(profile)
                series.append((label, profile))
            options = plotting.PlotOptions(
                width=req.width,
                height=req.height,
                x_label=req.x_label,
                y_label=req.y_label or "Distance",
                y_max=1.0 if req.normalize else None,
            )
            svg = plotting.render_profiles_svg(series, options, include_mean=req.mean)
            out = Path(req.out_path)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(svg)
            return schemas.PlotResponse(
                out_path=str(out), polylines=len(series) + (1 if req.mean else 0)
            )
        except INPUT_ERRORS as exc:
            raise _bad_request(exc)

    return app


app = create_app()
