import numpy as np
import pytest
from fastapi.testclient import TestClient

from retainex.data import GeneratorConfig, VocabularyConfig, build_vocabulary, generate_cohort
from retainex.model import Hyperparams, init_model
from retainex.numerics import make_rng
from retainex.projection import ProjectionConfig
from retainex.server import ServeSettings, create_app, points_in_polygon


def oracle_point_in_polygon(px, py, polygon):
    """Independent scalar ray caster (odd crossings to the right)."""
    inside = False
    k = len(polygon)
    for i in range(k):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % k]
        if (y1 > py) != (y2 > py):
            x_cross = (x2 - x1) * (py - y1) / (y2 - y1) + x1
            if px < x_cross:
                inside = not inside
    return inside


class TestPolygon:
    def test_square(self):
        square = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float)
        pts = np.array([[1, 1], [3, 1], [-0.5, 1], [1, 2.5]])
        np.testing.assert_array_equal(
            points_in_polygon(pts, square), [True, False, False, False]
        )

    def test_agrees_with_oracle_on_random_polygons(self):
        rng = make_rng(0)
        agree = 0
        total = 0
        for _ in range(100):
            k = int(rng.integers(3, 9))
            poly = rng.uniform(-5, 5, size=(k, 2))
            pts = rng.uniform(-6, 6, size=(10, 2))
            got = points_in_polygon(pts, poly)
            for (px, py), g in zip(pts, got):
                assert g == oracle_point_in_polygon(px, py, poly)
                total += 1
        assert total == 1000


@pytest.fixture(scope="module")
def client():
    vocab = build_vocabulary(VocabularyConfig(6, 6, 6))
    ds = generate_cohort(
        GeneratorConfig(n_case_groups=3, max_visits=12, seed=2), vocab
    )
    params = init_model(Hyperparams(m=4, seed=1), n_codes=len(vocab))
    settings = ServeSettings(
        projection=ProjectionConfig(method="pca"), projection_cap=5000
    )
    app = create_app(ds, params, settings)
    return TestClient(app)


class TestEndpoints:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json() == {"status": "ok"}

    def test_overview_shape(self, client):
        r = client.get("/overview")
        assert r.status_code == 200
        body = r.json()
        assert len(body["patients"]) == 33
        assert len(body["projection"]["points"]) == 33
        p = body["patients"][0]
        assert set(p) >= {"id", "age", "gender", "risk", "label"}
        assert 0.0 < p["risk"] < 1.0

    def test_overview_code_axis_columns(self, client):
        r = client.get("/overview", params={"codes": "0,5"})
        assert r.status_code == 200
        for p in r.json()["patients"]:
            assert set(p["code_scores"]) == {"0", "5"}
        r2 = client.get("/overview", params={"codes": "99"})
        assert r2.status_code == 400
        assert r2.json()["error"]["code"] == "validation_error"

    def test_select_all_with_enclosing_polygon(self, client):
        pts = np.array(client.get("/overview").json()["projection"]["points"])
        lo, hi = pts.min() - 1, pts.max() + 1
        poly = [[lo, lo], [hi, lo], [hi, hi], [lo, hi]]
        r = client.post("/select", json={"polygon": poly})
        assert r.status_code == 200
        assert len(r.json()["ids"]) == 33

    def test_select_conjunction(self, client):
        overview = client.get("/overview").json()["patients"]
        target = overview[0]
        r = client.post(
            "/select",
            json={
                "gender": target["gender"],
                "age": [target["age"], target["age"]],
            },
        )
        ids = r.json()["ids"]
        assert target["id"] in ids
        for p in overview:
            if p["id"] in ids:
                assert p["gender"] == target["gender"]
                assert p["age"] == target["age"]

    def test_select_risk_and_code_axis(self, client):
        r = client.post(
            "/select",
            json={"risk": [0.0, 1.0], "codes": [{"code": 0, "range": [-100, 100]}]},
        )
        assert r.status_code == 200
        assert len(r.json()["ids"]) == 33

    def test_select_bad_polygon_rejected(self, client):
        r = client.post("/select", json={"polygon": [[0, 0], [1, 1]]})
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "validation_error"

    def test_summary(self, client):
        ids = [p["id"] for p in client.get("/overview").json()["patients"][:5]]
        r = client.get("/summary", params={"ids": ",".join(ids)})
        assert r.status_code == 200
        body = r.json()
        assert body["table"]["n_patients"] == 5
        assert len(body["top_contributors"]) <= 9
        kinds = [t["kind"] for t in body["top_contributors"]]
        assert kinds == sorted(kinds, key=["diagnosis", "treatment", "prescription"].index)
        assert len(body["temporal"]["support"]) == len(body["temporal"]["offsets"])

    def test_patient_detail_consistency(self, client):
        pid = client.get("/overview").json()["patients"][0]["id"]
        r = client.get(f"/patients/{pid}")
        assert r.status_code == 200
        body = r.json()
        assert body["risk_curve"][-1] == body["risk"]
        total = sum(c["score"] for c in body["contributions"])
        assert sum(body["visit_sums"]) == pytest.approx(total, rel=1e-9)
        for t, visit in enumerate(body["visits"]):
            for code in visit["codes"]:
                assert any(
                    c["visit"] == t and c["code"] == code["code"] and c["score"] == code["score"]
                    for c in body["contributions"]
                )

    def test_unknown_patient_404(self, client):
        r = client.get("/patients/nobody")
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "unknown_patient"

    def test_whatif_empty_script_identity(self, client):
        pid = client.get("/overview").json()["patients"][0]["id"]
        r = client.post(f"/patients/{pid}/whatif", json={"script": []})
        assert r.status_code == 200
        body = r.json()
        assert body["before"] == body["after"]

    def test_whatif_does_not_mutate_model(self, client):
        pid = client.get("/overview").json()["patients"][1]["id"]
        before = client.get(f"/patients/{pid}").json()
        day = before["visits"][0]["day"]
        r = client.post(
            f"/patients/{pid}/whatif",
            json={"script": [{"op": "move_visit", "visit": 0, "day": day + 3}]},
        )
        assert r.status_code == 200
        after = client.get(f"/patients/{pid}").json()
        assert after["risk"] == before["risk"]
        assert after["model_version"] == before["model_version"]

    def test_whatif_edit_error(self, client):
        pid = client.get("/overview").json()["patients"][0]["id"]
        r = client.post(
            f"/patients/{pid}/whatif",
            json={"script": [{"op": "remove_code", "visit": 0, "code": 17}]},
        )
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "edit_error"

    def test_retrain_preview_then_cancel_leaves_model_alone(self, client):
        pid = client.get("/overview").json()["patients"][2]["id"]
        detail = client.get(f"/patients/{pid}")
        body = detail.json()
        c = body["visits"][0]["codes"][0]["code"]
        r = client.post(
            f"/patients/{pid}/retrain/preview",
            json={"selections": [{"visit": 0, "code": c, "direction": "increase"}]},
        )
        assert r.status_code == 200
        rep = r.json()["report"]
        assert rep["s_pos_after"] > rep["s_pos_before"]
        assert len(rep["losses"]) == 20
        # no commit: nothing changed
        again = client.get(f"/patients/{pid}").json()
        assert again == body

    def test_retrain_commit_publishes(self, client):
        pid = client.get("/overview").json()["patients"][3]["id"]
        detail = client.get(f"/patients/{pid}").json()
        c = detail["visits"][0]["codes"][0]["code"]
        version = detail["model_version"]
        r = client.post(
            f"/patients/{pid}/retrain/preview",
            json={"selections": [{"visit": 0, "code": c, "direction": "increase"}]},
        )
        preview_id = r.json()["preview_id"]
        r2 = client.post(
            f"/patients/{pid}/retrain/commit", json={"preview_id": preview_id}
        )
        assert r2.status_code == 200
        assert r2.json()["model_version"] == version + 1
        after = client.get(f"/patients/{pid}").json()
        assert after["model_version"] == version + 1
        assert after["risk"] != detail["risk"]

    def test_stale_preview_conflicts(self, client):
        pid = client.get("/overview").json()["patients"][4]["id"]
        detail = client.get(f"/patients/{pid}").json()
        c = detail["visits"][0]["codes"][0]["code"]
        sel = {"selections": [{"visit": 0, "code": c, "direction": "increase"}]}
        p1 = client.post(f"/patients/{pid}/retrain/preview", json=sel).json()["preview_id"]
        p2 = client.post(f"/patients/{pid}/retrain/preview", json=sel).json()["preview_id"]
        assert client.post(f"/patients/{pid}/retrain/commit", json={"preview_id": p2}).status_code == 200
        r = client.post(f"/patients/{pid}/retrain/commit", json={"preview_id": p1})
        assert r.status_code in (404, 409)  # cleared or conflicting after publish

    def test_aggregates_export(self, client):
        r = client.get("/aggregates")
        assert r.status_code == 200
        body = r.json()
        assert body["n_patients"] == 33
        assert len(body["s1"]) == 18
        assert len(body["labels"]) == 18
        for v, c in zip(body["s2"], body["counts"]):
            if c == 0:
                assert v is None

    def test_retrain_validation_error(self, client):
        pid = client.get("/overview").json()["patients"][0]["id"]
        r = client.post(
            f"/patients/{pid}/retrain/preview",
            json={"selections": [{"visit": 0, "code": 17, "direction": "increase"}]},
        )
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "validation_error"


class TestProjectionCap:
    def test_oversized_cohort_rejected(self):
        vocab = build_vocabulary(VocabularyConfig(4, 4, 4))
        ds = generate_cohort(GeneratorConfig(n_case_groups=2, max_visits=10, seed=0), vocab)
        params = init_model(Hyperparams(m=3, seed=0), n_codes=len(vocab))
        settings = ServeSettings(
            projection=ProjectionConfig(method="pca"), projection_cap=5
        )
        client = TestClient(create_app(ds, params, settings))
        r = client.get("/overview")
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "cap_exceeded"
