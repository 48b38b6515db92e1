import io
import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from biasbench.grid import build_grid, record_grid
from biasbench.scenes import SpinningDotScene
from biasbench.service import create_app, frame_to_png
from biasbench.sim import SimConfig


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("svc_corpus")
    grid = build_grid({
        "diff_on": (0, 40, 2),
        "diff_off": (0, 40, 2),
        "fo": (0, 0, 1),
        "hpf": (0, 0, 1),
        "refr": (0, 0, 1),
    })
    scene = SpinningDotScene.preset(32, 32)
    cfg = SimConfig(width=32, height=32, duration_us=100_000, seed=21)
    record_grid(scene, grid, cfg, out, scene_id="spinning-dot")
    return out


@pytest.fixture()
def client(corpus_dir, tmp_path):
    app = create_app(corpus_dir, demo_log=tmp_path / "demos.jsonl")
    with TestClient(app) as c:
        yield c


def new_session(client, off=0, on=0):
    r = client.post("/api/sessions", json={"scene_id": "spinning-dot", "start": {"diff_off": off, "diff_on": on}})
    assert r.status_code == 200
    return r.json()


class TestSessions:
    def test_scenes_listing_advertises_grid(self, client):
        r = client.get("/api/scenes")
        assert r.status_code == 200
        body = r.json()
        assert body["spinning-dot"]["grid"]["diff_on"] == [0, 40]
        assert body["spinning-dot"]["entries"] == 4

    def test_create_on_grid_start(self, client):
        body = new_session(client, off=40, on=0)
        assert body["biases"]["diff_off"] == 40
        assert body["biases"]["diff_on"] == 0
        assert body["event_rate"] > 0
        assert body["demo_count"] == 0

    def test_create_off_grid_start_snaps(self, client):
        body = new_session(client, off=33, on=9)
        assert body["biases"]["diff_off"] == 40
        assert body["biases"]["diff_on"] == 0

    def test_unknown_scene_404(self, client):
        r = client.post("/api/sessions", json={"scene_id": "warehouse", "start": {}})
        assert r.status_code == 404

    def test_unknown_session_404(self, client):
        assert client.get("/api/sessions/deadbeef/metrics").status_code == 404


class TestAdjust:
    def test_zero_delta_same_biases(self, client):
        sid = new_session(client)["session_id"]
        r = client.post(f"/api/sessions/{sid}/adjust", json={"delta_off": 0, "delta_on": 0})
        assert r.json()["biases"] == {"diff_on": 0, "diff_off": 0, "fo": 0, "hpf": 0, "refr": 0}

    def test_delta_beyond_grid_clamps_to_boundary(self, client):
        sid = new_session(client)["session_id"]
        r = client.post(f"/api/sessions/{sid}/adjust", json={"delta_off": 999, "delta_on": -999})
        body = r.json()
        assert body["biases"]["diff_off"] == 40
        assert body["biases"]["diff_on"] == 0

    def test_concurrent_adjusts_serialize(self, client):
        sid = new_session(client)["session_id"]
        n = 16
        errors = []

        def hit():
            try:
                r = client.post(f"/api/sessions/{sid}/adjust", json={"delta_off": 40, "delta_on": 0})
                assert r.status_code == 200
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=hit) for _ in range(n)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        r = client.get(f"/api/sessions/{sid}/metrics")
        assert r.json()["history_length"] == 1 + n  # create + n adjusts


class TestFrames:
    def test_frame_png_served(self, client):
        sid = new_session(client)["session_id"]
        r = client.get(f"/api/sessions/{sid}/frame.png")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_png_encodes_on_red_off_blue(self):
        from PIL import Image

        from biasbench.core import AccumulatedFrame

        on = np.zeros((4, 4), dtype=np.uint32)
        off = np.zeros((4, 4), dtype=np.uint32)
        on[0, 0] = 5
        off[3, 3] = 7
        png = frame_to_png(AccumulatedFrame(4, 4, 0, 8000, on, off))
        img = np.asarray(Image.open(io.BytesIO(png)))
        assert img[0, 0, 0] == 255 and img[0, 0, 2] == 0
        assert img[3, 3, 2] == 255 and img[3, 3, 0] == 0
        assert img[1, 1].sum() == 0


class TestDemos:
    def test_mark_optimal_stores_zero_action(self, client):
        sid = new_session(client)["session_id"]
        r = client.post(f"/api/sessions/{sid}/demos", json={"mark_optimal": True})
        assert r.json()["demo_count"] == 1
        export = client.get("/api/demos/export").text.strip().splitlines()
        assert json.loads(export[-1])["action"] == [0, 0, 0, 0, 0]

    def test_explicit_action_stored_verbatim(self, client):
        sid = new_session(client)["session_id"]
        client.post(f"/api/sessions/{sid}/demos", json={"action": [25, 75, 0, 0, 0]})
        last = json.loads(client.get("/api/demos/export").text.strip().splitlines()[-1])
        assert last["action"] == [25, 75, 0, 0, 0]
        assert last["scene_id"] == "spinning-dot"
        assert last["annotator"] == "human"

    def test_invalid_action_rejected(self, client):
        sid = new_session(client)["session_id"]
        r = client.post(f"/api/sessions/{sid}/demos", json={"action": [1, 2, 3, 0, 0]})
        assert r.status_code == 422
        r = client.post(f"/api/sessions/{sid}/demos", json={})
        assert r.status_code == 422

    def test_export_matches_record_order(self, client):
        sid = new_session(client)["session_id"]
        payloads = [[25, 75, 0, 0, 0], [0, 0, 0, 0, 0], [-10, 10, 0, 0, 0]]
        for p in payloads:
            client.post(f"/api/sessions/{sid}/demos", json={"action": p})
        lines = client.get("/api/demos/export").text.strip().splitlines()
        assert [json.loads(l)["action"] for l in lines] == payloads
        assert len(lines) == 3
