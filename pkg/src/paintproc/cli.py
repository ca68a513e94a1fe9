"""Command-line client for the paintproc service.

Every command is a thin wrapper that builds a request and posts it to the
service API. By default the app is run in-process, so the CLI works without
a running server; --server targets a remote instance instead.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx


class ClientError(Exception):
    def __init__(self, message: str, exit_code: int = 2):
        super().__init__(message)
        self.exit_code = exit_code


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app, raise_server_exceptions=False)


def _post(server: str | None, path: str, payload: dict) -> dict:
    try:
        with _client(server) as client:
            resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        raise ClientError(f"service unreachable: {exc}", exit_code=1)
    if resp.status_code == 400:
        detail = resp.json().get("detail", {})
        if isinstance(detail, dict):
            msg = detail.get("error", "bad request")
            if "stage" in detail:
                msg = f"stage {detail['stage']}: {msg}"
            if "field" in detail:
                msg = f"{msg} (field: {detail['field']})"
        else:
            msg = str(detail)
        raise ClientError(msg, exit_code=2)
    if resp.status_code == 422:
        raise ClientError(f"invalid request: {resp.text}", exit_code=2)
    if resp.status_code != 200:
        raise ClientError(f"service error {resp.status_code}: {resp.text}", exit_code=1)
    return resp.json()


def _run(server: str | None, path: str, payload: dict) -> dict:
    try:
        return _post(server, path, payload)
    except ClientError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)


server_option = click.option(
    "--server", default=None, help="Remote service URL; default runs in-process."
)


@click.group()
def main():
    """Painting-process curation and evaluation toolkit."""


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


@main.command()
@click.argument("script", type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@server_option
def synth(script, out_dir, server):
    """Generate a synthetic painting-process fixture from a JSON script."""
    result = _run(server, "/synth", {"script_path": str(script), "out_dir": str(out_dir)})
    click.echo(f"frames: {result['frames']} -> {result['out_dir']}")
    if result.get("masks_dir"):
        click.echo(f"masks: {result['masks_dir']}")
    if result.get("detections_path"):
        click.echo(f"detections: {result['detections_path']}")


@main.command()
@click.argument("frames", type=click.Path())
@click.option("--detections", required=True, type=click.Path())
@click.option("--masks", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--fps", default=None, help="Frame rate as a rational, e.g. 3 or 30000/1001.")
@click.option("--reverse", is_flag=True, help="Emit keyframes finished-artwork-first.")
@click.option("--config", "config_path", default=None, type=click.Path(),
              help="JSON config file; explicit flags win on conflict.")
@click.option("--segment-seconds", default=None)
@click.option("--sample-fps", default=None)
@click.option("--samples-per-segment", default=None, type=int)
@click.option("--trim-label", default=None)
@click.option("--canvas-mode", default=None,
              type=click.Choice(["detector", "gradient-split"]))
@click.option("--detection-threshold", default=None, type=float)
@server_option
def curate(frames, detections, masks, out_dir, fps, reverse, config_path,
           segment_seconds, sample_fps, samples_per_segment, trim_label,
           canvas_mode, detection_threshold, server):
    """Run the curation pipeline on a frame directory or raw container."""
    cfg = {}
    if config_path:
        try:
            cfg = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"error: config file: {exc}", err=True)
            sys.exit(2)
    overrides = {
        "segment_seconds": segment_seconds,
        "sample_fps": sample_fps,
        "samples_per_segment": samples_per_segment,
        "trim_label": trim_label,
        "canvas_mode": canvas_mode,
        "detection_threshold": detection_threshold,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    payload = {
        "frames": str(frames),
        "detections": str(detections),
        "masks": str(masks),
        "out_dir": str(out_dir),
        "reverse": reverse,
        "config": cfg,
    }
    if fps:
        payload["fps"] = fps
    result = _run(server, "/curate", payload)
    click.echo(f"keyframes: {result['keyframes']} -> {result['out_dir']}")
    click.echo(f"manifest: {result['manifest_path']}")


@main.command()
@click.argument("gt", required=False, type=click.Path())
@click.argument("gen", required=False, type=click.Path())
@click.option("--batch", default=None, type=click.Path(),
              help='JSON list of {"id", "gt", "gen"} pairs.')
@click.option("--backend", default="mse", show_default=True)
@click.option("--n-points", default=200, show_default=True, type=int)
@click.option("--normalize", is_flag=True)
@click.option("--fps", default=None)
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--plot", is_flag=True)
@server_option
def pdp(gt, gen, batch, backend, n_points, normalize, fps, out_dir, plot, server):
    """Score sequences (or pre-scored CSV profiles) with the PDP metric."""
    if batch:
        try:
            pairs = json.loads(Path(batch).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"error: batch file: {exc}", err=True)
            sys.exit(2)
        rows = []
        for pair in pairs:
            payload = {
                "gt": pair["gt"], "gen": pair["gen"], "backend": backend,
                "n_points": n_points, "normalize": normalize,
            }
            if fps:
                payload["fps"] = fps
            if out_dir:
                payload["out_dir"] = str(Path(out_dir) / pair["id"])
                payload["plot"] = plot
            result = _run(server, "/pdp", payload)
            rows.append((pair["id"], result))
            click.echo(
                f"{pair['id']}\tpdp={result['pdp']:.6g}\t"
                f"pdp_norm={result['pdp_norm']:.6g}\t"
                f"final_distance={result['final_distance']:.6g}"
            )
        n = len(rows)
        if n:
            mean = {
                k: sum(r[k] for _, r in rows) / n
                for k in ("pdp", "pdp_norm", "final_distance")
            }
            click.echo(
                f"mean\tpdp={mean['pdp']:.6g}\tpdp_norm={mean['pdp_norm']:.6g}\t"
                f"final_distance={mean['final_distance']:.6g}"
            )
        return
    if not gt or not gen:
        click.echo("error: provide GT and GEN paths, or --batch", err=True)
        sys.exit(2)
    payload = {
        "gt": str(gt), "gen": str(gen), "backend": backend,
        "n_points": n_points, "normalize": normalize, "plot": plot,
    }
    if fps:
        payload["fps"] = fps
    if out_dir:
        payload["out_dir"] = str(out_dir)
    result = _run(server, "/pdp", payload)
    click.echo(f"pdp={result['pdp']:.9g}")
    click.echo(f"pdp_norm={result['pdp_norm']:.9g}")
    click.echo(f"final_distance={result['final_distance']:.9g}")
    for key in ("gt_csv", "gen_csv", "svg"):
        if result.get(key):
            click.echo(f"{key}: {result[key]}")


@main.command(name="eval")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(),
              help='JSON list of {"id", "gt", "gen"} pairs.')
@click.option("--backend", default="mse", show_default=True)
@click.option("--mode", default="monotone", show_default=True,
              type=click.Choice(["monotone", "nearest"]))
@click.option("--n-points", default=200, show_default=True, type=int)
@click.option("--fps", default=None)
@click.option("--embeddings-gen", default=None, type=click.Path())
@click.option("--embeddings-gt", default=None, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--jobs", default=None, type=int, help="Parallel videos; default $PB_JOBS.")
@server_option
def eval_cmd(pairs_path, backend, mode, n_points, fps, embeddings_gen,
             embeddings_gt, out_path, jobs, server):
    """Run the quantitative protocol over paired gen/gt videos."""
    try:
        pairs = json.loads(Path(pairs_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: pairs file: {exc}", err=True)
        sys.exit(2)
    orphans = [p.get("id", "?") for p in pairs if not (p.get("gt") and p.get("gen"))]
    if orphans:
        click.echo(f"error: unpaired videos: {', '.join(orphans)}", err=True)
        sys.exit(2)
    payload = {
        "pairs": pairs, "backend": backend, "mode": mode, "n_points": n_points,
    }
    if fps:
        payload["fps"] = fps
    if embeddings_gen:
        payload["embeddings_gen"] = str(embeddings_gen)
    if embeddings_gt:
        payload["embeddings_gt"] = str(embeddings_gt)
    if out_path:
        payload["out_path"] = str(out_path)
    if jobs:
        payload["jobs"] = jobs
    result = _run(server, "/eval", payload)
    for video in result["videos"]:
        metrics = "\t".join(f"{k}={v:.6g}" for k, v in video["metrics"].items())
        click.echo(f"{video['id']}\t{metrics}")
    agg = "\t".join(f"{k}={v:.6g}" for k, v in result["aggregate"].items())
    click.echo(f"aggregate\t{agg}")
    if result.get("fid") is not None:
        click.echo(f"fid={result['fid']:.6g}")
    if result.get("out_path"):
        click.echo(f"report: {result['out_path']}")


@main.command()
@click.argument("profiles", nargs=-1, required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--labels", default=None, help="Comma-separated series labels.")
@click.option("--mean", is_flag=True, help="Overlay the mean curve.")
@click.option("--normalize", is_flag=True, help="Remap each profile to [1, 0].")
@click.option("--width", default=640, type=int)
@click.option("--height", default=400, type=int)
@click.option("--y-label", default=None)
@server_option
def plot(profiles, out_path, labels, mean, normalize, width, height, y_label, server):
    """Render profile CSVs as an SVG polyline chart."""
    payload = {
        "profiles": [str(p) for p in profiles],
        "mean": mean,
        "normalize": normalize,
        "width": width,
        "height": height,
        "out_path": str(out_path),
    }
    if labels:
        payload["labels"] = [s.strip() for s in labels.split(",")]
    if y_label:
        payload["y_label"] = y_label
    result = _run(server, "/plot", payload)
    click.echo(f"svg: {result['out_path']} ({result['polylines']} series)")


if __name__ == "__main__":
    main()
