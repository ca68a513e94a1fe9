import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from paintproc.media import load_sequence
from paintproc.service.app import create_app


@pytest.fixture
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


def synth_fixture(client, tmp_path, name="fix", steps=90, occluder=True, seed=7):
    script = {"width": 32, "height": 32, "steps": steps, "seed": seed,
              "order": "raster", "fps": 3}
    if occluder:
        script["occluder"] = {"size": 6}
    resp = client.post("/synth", json={"script": script, "out_dir": str(tmp_path / name)})
    assert resp.status_code == 200, resp.text
    return resp.json()


class TestHealth:
    def test_ok(self, client):
        assert client.get("/health").json() == {"status": "ok"}


class TestSynthEndpoint:
    def test_writes_all_artifacts(self, client, tmp_path):
        result = synth_fixture(client, tmp_path)
        assert result["frames"] == 90
        seq = load_sequence(result["out_dir"], fps=3)
        assert len(seq) == 90
        assert result["masks_dir"] and result["detections_path"]

    def test_no_occluder_no_masks(self, client, tmp_path):
        result = synth_fixture(client, tmp_path, occluder=False)
        assert result["masks_dir"] is None

    def test_schema_violation_names_field(self, client, tmp_path):
        resp = client.post(
            "/synth",
            json={"script": {"order": "spiral"}, "out_dir": str(tmp_path / "x")},
        )
        assert resp.status_code == 400
        assert resp.json()["detail"]["field"] == "order"

    def test_missing_script(self, client, tmp_path):
        resp = client.post("/synth", json={"out_dir": str(tmp_path / "x")})
        assert resp.status_code == 400


class TestCurateEndpoint:
    def test_full_run(self, client, tmp_path):
        fix = synth_fixture(client, tmp_path)
        resp = client.post(
            "/curate",
            json={
                "frames": fix["out_dir"],
                "fps": "3",
                "detections": fix["detections_path"],
                "masks": fix["masks_dir"],
                "out_dir": str(tmp_path / "cur"),
                "config": {"canvas_mode": "gradient-split"},
            },
        )
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["keyframes"] == 3  # ceil(30 s / 10 s)
        manifest = json.loads(open(body["manifest_path"]).read())
        assert manifest["config"]["segment_rounding"] == "ceil"
        keys = load_sequence(body["out_dir"], fps=1)
        assert len(keys) == 3

    def test_missing_detections(self, client, tmp_path):
        fix = synth_fixture(client, tmp_path)
        resp = client.post(
            "/curate",
            json={
                "frames": fix["out_dir"],
                "detections": str(tmp_path / "nope.json"),
                "masks": fix["masks_dir"],
                "out_dir": str(tmp_path / "cur"),
            },
        )
        assert resp.status_code == 400
        assert "detections not found" in resp.json()["detail"]["error"]

    def test_stage_reported(self, client, tmp_path):
        fix = synth_fixture(client, tmp_path, occluder=True)
        resp = client.post(
            "/curate",
            json={
                "frames": fix["out_dir"],
                "fps": "3",
                "detections": fix["detections_path"],
                "masks": fix["masks_dir"],
                "out_dir": str(tmp_path / "cur"),
                "config": {"trim_label": "unicorn"},
            },
        )
        assert resp.status_code == 400
        assert resp.json()["detail"]["stage"] == "trim"


class TestPdpEndpoint:
    def test_identical_sequences_zero(self, client, tmp_path):
        fix = synth_fixture(client, tmp_path, occluder=False)
        resp = client.post(
            "/pdp",
            json={"gt": fix["out_dir"], "gen": fix["out_dir"], "fps": "3",
                  "out_dir": str(tmp_path / "pdp"), "plot": True},
        )
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["pdp"] == 0.0
        assert body["pdp_norm"] == 0.0
        assert body["final_distance"] == 0.0
        assert body["gt_csv"] and body["gen_csv"] and body["svg"]

    def test_prescored_profiles(self, client, tmp_path):
        gt = tmp_path / "gt.csv"
        gen = tmp_path / "gen.csv"
        gt.write_text("index,distance\n" + "\n".join(
            f"{i},{1 - i / 10}" for i in range(11)))
        gen.write_text("index,distance\n" + "\n".join(
            f"{i},{(1 - i / 10) ** 2}" for i in range(11)))
        resp = client.post("/pdp", json={"gt": str(gt), "gen": str(gen)})
        assert resp.status_code == 200, resp.text
        assert resp.json()["pdp"] == pytest.approx((1 / 30) ** 0.5, abs=2e-3)

    def test_unknown_backend(self, client, tmp_path):
        fix = synth_fixture(client, tmp_path, occluder=False)
        resp = client.post(
            "/pdp",
            json={"gt": fix["out_dir"], "gen": fix["out_dir"], "backend": "lpips"},
        )
        assert resp.status_code == 400


class TestEvalEndpoint:
    def test_report_schema(self, client, tmp_path):
        fix = synth_fixture(client, tmp_path, occluder=False, steps=12)
        # embeddings on both sides
        emb = tmp_path / "emb.txt"
        rows = "\n".join("1.0 0.0" for _ in range(12))
        emb.write_text(f"dim=2 count=12 model=test\n{rows}\n")
        out = tmp_path / "report.json"
        resp = client.post(
            "/eval",
            json={
                "pairs": [{"id": "v0", "gen": fix["out_dir"], "gt": fix["out_dir"]}],
                "fps": "3",
                "embeddings_gen": str(emb),
                "embeddings_gt": str(emb),
                "out_path": str(out),
            },
        )
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["aggregate"]["mse"] == 0.0
        assert body["aggregate"]["pdp"] == 0.0
        assert body["fid"] == pytest.approx(0.0, abs=1e-8)
        report = json.loads(out.read_text())
        assert set(report) == {"videos", "aggregate", "fid"}
        assert set(report["videos"][0]["metrics"]) == {
            "mse", "pdp", "pdp_norm", "final_distance"
        }

    def test_parallel_jobs_match_serial(self, client, tmp_path):
        a = synth_fixture(client, tmp_path, "a", steps=10, occluder=False, seed=1)
        b = synth_fixture(client, tmp_path, "b", steps=14, occluder=False, seed=2)
        pairs = [
            {"id": "x", "gen": a["out_dir"], "gt": b["out_dir"]},
            {"id": "y", "gen": b["out_dir"], "gt": a["out_dir"]},
        ]
        serial = client.post("/eval", json={"pairs": pairs, "fps": "3"}).json()
        parallel = client.post(
            "/eval", json={"pairs": pairs, "fps": "3", "jobs": 2}
        ).json()
        assert serial == parallel

    def test_empty_pairs(self, client):
        resp = client.post("/eval", json={"pairs": []})
        assert resp.status_code == 400


class TestPlotEndpoint:
    def test_polyline_count(self, client, tmp_path):
        for name in ("a", "b", "c"):
            (tmp_path / f"{name}.csv").write_text(
                "t,value\n0,1.0\n0.5,0.4\n1,0.0\n"
            )
        out = tmp_path / "chart.svg"
        resp = client.post(
            "/plot",
            json={
                "profiles": [str(tmp_path / f"{n}.csv") for n in ("a", "b", "c")],
                "mean": True,
                "out_path": str(out),
            },
        )
        assert resp.status_code == 200, resp.text
        assert resp.json()["polylines"] == 4
        svg = out.read_text()
        assert svg.count("<polyline") == 4

    def test_malformed_csv(self, client, tmp_path):
        (tmp_path / "bad.csv").write_text("t,value\n0,1\noops\n")
        resp = client.post(
            "/plot",
            json={"profiles": [str(tmp_path / "bad.csv")],
                  "out_path": str(tmp_path / "o.svg")},
        )
        assert resp.status_code == 400
        assert "row 3" in resp.json()["detail"]["error"]
