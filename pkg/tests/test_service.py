"""HTTP API: ranked queue, policy detail, review capture, stats."""

import json
import os
import shutil
import time

import pytest
from fastapi.testclient import TestClient

from tripsift import synthgen
from tripsift.betamix import HmcConfig
from tripsift.geofeatures import FEATURE_NAMES, extract_features
from tripsift.ingest import read_samples_jsonl, segment_trips, write_trips_jsonl
from tripsift.pipeline import run_weekly_update
from tripsift.service import create_app
from tripsift.store import Store, Verdict
from tripsift.tripclf import FeatureMatrix, train_forest

FAST_FIT = HmcConfig(chains=2, warmup=150, draws_per_chain=150,
                     leapfrog_steps=16, seed=3)


@pytest.fixture(scope="module")
def template_store(tmp_path_factory):
    """A fully populated store: trips, classifier, fit, one snapshot."""
    root = tmp_path_factory.mktemp("svc-template")
    store = Store.create(str(root))
    config = synthgen.FleetConfig(n_policies=18, delivery_fraction=0.25,
                                  trips_per_policy=(3, 6), seed=23)
    paths, truth = synthgen.write_fleet(config, str(root / "raw"))
    by_policy, issues = read_samples_jsonl(paths.samples)
    assert not issues
    trips = [t for samples in by_policy.values()
             for t in segment_trips(samples)]
    write_trips_jsonl(trips, store.trips_path)
    os.replace(paths.pois, store.pois_path)
    os.replace(paths.homes, store.homes_path)
    pois = store.load_pois()
    homes = store.load_homes()
    feats = [(t.trip_id, extract_features(t, pois, homes[t.policy_id]))
             for t in trips]
    matrix = FeatureMatrix.from_features(feats, labels=truth.trip_labels)
    store.save_tripclf(train_forest(matrix, n_trees=40, seed=5), "1")
    now = max(t.end_time for t in trips) + 1.0
    snapshot = run_weekly_update(store, now, fit_config=FAST_FIT)
    assert snapshot.policies
    return str(root), snapshot


@pytest.fixture()
def harness(template_store, tmp_path):
    """Fresh store copy per test so review writes stay isolated."""
    template_root, snapshot = template_store
    root = str(tmp_path / "store")
    shutil.copytree(template_root, root, ignore=shutil.ignore_patterns("raw"))
    client = TestClient(create_app(root))
    return client, Store(root), snapshot


def post_review(client, policy_id, verdict="CONFIRMED_DELIVERY",
                reviewer="ana", **extra):
    return client.post(f"/api/policies/{policy_id}/review",
                       json={"verdict": verdict, "reviewer": reviewer,
                             **extra})


class TestRankings:
    def test_lists_available_dates(self, harness):
        client, _, snapshot = harness
        body = client.get("/api/rankings").json()
        assert body == {"dates": [snapshot.date], "latest": snapshot.date}

    def test_single_page_preserves_snapshot_order(self, harness):
        client, _, snapshot = harness
        resp = client.get(f"/api/rankings/{snapshot.date}",
                          params={"page_size": 500})
        assert resp.status_code == 200
        body = resp.json()
        assert body["total"] == len(snapshot.policies)
        assert [r["policy_id"] for r in body["rows"]] == \
            [p.policy_id for p in snapshot.policies]
        assert [r["score"] for r in body["rows"]] == \
            [p.score for p in snapshot.policies]

    def test_pages_partition_the_ranking(self, harness):
        client, _, snapshot = harness
        seen = []
        page = 1
        while True:
            body = client.get(f"/api/rankings/{snapshot.date}",
                              params={"page": page, "page_size": 5}).json()
            if not body["rows"]:
                break
            seen.extend(r["policy_id"] for r in body["rows"])
            page += 1
        assert seen == [p.policy_id for p in snapshot.policies]

    def test_out_of_range_page_is_empty_not_an_error(self, harness):
        client, _, snapshot = harness
        body = client.get(f"/api/rankings/{snapshot.date}",
                          params={"page": 99}).json()
        assert body["rows"] == []
        assert body["total"] == len(snapshot.policies)

    def test_min_score_filters_before_pagination(self, harness):
        client, _, snapshot = harness
        cut = snapshot.policies[2].score
        body = client.get(f"/api/rankings/{snapshot.date}",
                          params={"min_score": cut, "page_size": 500}).json()
        expected = [p.policy_id for p in snapshot.policies
                    if p.score >= cut]
        assert [r["policy_id"] for r in body["rows"]] == expected
        assert body["total"] == len(expected)

    def test_min_score_above_scale_yields_nothing(self, harness):
        client, _, snapshot = harness
        body = client.get(f"/api/rankings/{snapshot.date}",
                          params={"min_score": 11}).json()
        assert body["rows"] == [] and body["total"] == 0

    def test_unreviewed_only_hides_reviewed_policies(self, harness):
        client, _, snapshot = harness
        top = snapshot.policies[0].policy_id
        assert post_review(client, top).status_code == 201
        body = client.get(f"/api/rankings/{snapshot.date}",
                          params={"unreviewed_only": True,
                                  "page_size": 500}).json()
        ids = [r["policy_id"] for r in body["rows"]]
        assert top not in ids
        assert body["total"] == len(snapshot.policies) - 1

    def test_rows_carry_latest_review(self, harness):
        client, _, snapshot = harness
        top = snapshot.policies[0].policy_id
        before = client.get(f"/api/rankings/{snapshot.date}").json()
        assert before["rows"][0]["last_review"] is None
        post_review(client, top, verdict="NOT_DELIVERY", reviewer="bo")
        after = client.get(f"/api/rankings/{snapshot.date}").json()
        review = after["rows"][0]["last_review"]
        assert review["verdict"] == "NOT_DELIVERY"
        assert review["reviewer"] == "bo"

    def test_unknown_date_is_404(self, harness):
        client, _, _ = harness
        resp = client.get("/api/rankings/1999-01-01")
        assert resp.status_code == 404
        assert resp.json()["code"] == "unknown_snapshot"

    def test_bad_page_size_is_400(self, harness):
        client, _, snapshot = harness
        resp = client.get(f"/api/rankings/{snapshot.date}",
                          params={"page_size": 0})
        assert resp.status_code == 400
        assert resp.json()["code"] == "invalid_request"

    def test_non_numeric_page_is_400(self, harness):
        client, _, snapshot = harness
        resp = client.get(f"/api/rankings/{snapshot.date}",
                          params={"page": "x"})
        assert resp.status_code == 400
        assert resp.json()["code"] == "invalid_request"


class TestPolicyDetail:
    def test_detail_matches_snapshot_row(self, harness):
        client, _, snapshot = harness
        row = snapshot.policies[0]
        body = client.get(f"/api/policies/{row.policy_id}").json()
        assert body["snapshot_date"] == snapshot.date
        assert body["policy"]["x"] == row.x
        assert body["policy"]["y"] == row.y
        assert body["policy"]["score"] == row.score

    def test_trips_are_the_window_predictions(self, harness):
        client, store, snapshot = harness
        row = snapshot.policies[0]
        body = client.get(f"/api/policies/{row.policy_id}").json()
        assert len(body["trips"]) == row.x
        ends = [t["trip_end_time"] for t in body["trips"]]
        assert ends == sorted(ends, reverse=True)
        journal = {r.trip_id: r for r in store.load_predictions()}
        for t in body["trips"]:
            assert t["probability"] == journal[t["trip_id"]].probability
            assert t["label"] == journal[t["trip_id"]].label

    def test_trips_carry_feature_vectors(self, harness):
        client, _, snapshot = harness
        row = snapshot.policies[0]
        body = client.get(f"/api/policies/{row.policy_id}").json()
        for t in body["trips"]:
            assert set(t["features"]) == set(FEATURE_NAMES)
            assert t["features"]["trip_duration_minutes"] > 0

    def test_explicit_date_parameter(self, harness):
        client, _, snapshot = harness
        row = snapshot.policies[-1]
        body = client.get(f"/api/policies/{row.policy_id}",
                          params={"date": snapshot.date}).json()
        assert body["policy"]["policy_id"] == row.policy_id

    def test_unknown_policy_is_404(self, harness):
        client, _, _ = harness
        resp = client.get("/api/policies/nobody")
        assert resp.status_code == 404
        assert resp.json()["code"] == "unknown_policy"


class TestTripDetail:
    def pick(self, store):
        rec = store.load_predictions()[0]
        return rec.policy_id, rec

    def test_polyline_and_prediction(self, harness):
        client, store, _ = harness
        policy_id, rec = self.pick(store)
        body = client.get(
            f"/api/policies/{policy_id}/trips/{rec.trip_id}").json()
        assert body["policy_id"] == policy_id
        assert len(body["polyline"]) >= 2
        times = [p["t"] for p in body["polyline"]]
        assert times == sorted(times)
        for p in body["polyline"]:
            assert -90 <= p["lat"] <= 90 and -180 <= p["lon"] <= 180
        assert body["prediction"]["probability"] == rec.probability
        assert body["home"] is not None

    def test_stationary_points_are_classified(self, harness):
        client, store, _ = harness
        seen = set()
        for rec in store.load_predictions():
            body = client.get(
                f"/api/policies/{rec.policy_id}/trips/{rec.trip_id}").json()
            for p in body["stationary_points"]:
                assert p["duration_s"] > 0
                seen.add(p["classification"])
        assert None not in seen
        assert seen <= {"commercial", "residential", "home"}
        assert "commercial" in seen

    def test_trip_of_other_policy_is_404(self, harness):
        client, store, snapshot = harness
        _, rec = self.pick(store)
        other = next(p.policy_id for p in snapshot.policies
                     if p.policy_id != rec.policy_id)
        resp = client.get(f"/api/policies/{other}/trips/{rec.trip_id}")
        assert resp.status_code == 404
        assert resp.json()["code"] == "unknown_trip"

    def test_unknown_trip_is_404(self, harness):
        client, _, snapshot = harness
        pid = snapshot.policies[0].policy_id
        resp = client.get(f"/api/policies/{pid}/trips/ghost")
        assert resp.status_code == 404


class TestReview:
    def test_read_your_write(self, harness):
        client, store, snapshot = harness
        pid = snapshot.policies[1].policy_id
        resp = post_review(client, pid, note="vans all week")
        assert resp.status_code == 201
        ack = resp.json()
        assert ack["status"] == "recorded"
        assert ack["review"]["note"] == "vans all week"
        body = client.get(f"/api/policies/{pid}").json()
        assert body["policy"]["last_review"]["verdict"] == \
            "CONFIRMED_DELIVERY"
        assert store.latest_reviews()[pid].reviewer == "ana"

    def test_latest_review_wins(self, harness):
        client, _, snapshot = harness
        pid = snapshot.policies[0].policy_id
        post_review(client, pid, verdict="NOT_DELIVERY", timestamp=100.0)
        post_review(client, pid, verdict="CONFIRMED_DELIVERY",
                    timestamp=200.0)
        body = client.get(f"/api/policies/{pid}").json()
        assert body["policy"]["last_review"]["verdict"] == \
            "CONFIRMED_DELIVERY"
        stats = client.get("/api/stats").json()
        assert stats["total_reviews"] == 2
        assert stats["reviewed_policies"] == 1

    def test_default_timestamp_is_now(self, harness):
        client, _, snapshot = harness
        pid = snapshot.policies[0].policy_id
        ack = post_review(client, pid).json()
        assert abs(ack["review"]["timestamp"] - time.time()) < 60

    def test_unknown_policy_rejected(self, harness):
        client, store, _ = harness
        resp = post_review(client, "nobody")
        assert resp.status_code == 404
        assert resp.json()["code"] == "unknown_policy"
        assert store.load_reviews() == []

    def test_invalid_verdict_rejected(self, harness):
        client, store, snapshot = harness
        pid = snapshot.policies[0].policy_id
        resp = post_review(client, pid, verdict="maybe")
        assert resp.status_code == 400
        assert resp.json()["code"] == "invalid_verdict"
        assert store.load_reviews() == []

    def test_blank_reviewer_rejected(self, harness):
        client, _, snapshot = harness
        pid = snapshot.policies[0].policy_id
        resp = post_review(client, pid, reviewer="   ")
        assert resp.status_code == 400

    def test_missing_field_rejected(self, harness):
        client, _, snapshot = harness
        pid = snapshot.policies[0].policy_id
        resp = client.post(f"/api/policies/{pid}/review",
                           json={"verdict": "NOT_DELIVERY"})
        assert resp.status_code == 400
        assert resp.json()["code"] == "invalid_request"


class TestPurity:
    def test_reads_are_stable_between_writes(self, harness):
        client, _, snapshot = harness
        url = f"/api/rankings/{snapshot.date}"
        first = client.get(url).content
        assert client.get(url).content == first

    def test_write_touches_only_review_fields(self, harness):
        client, _, snapshot = harness
        url = f"/api/rankings/{snapshot.date}?page_size=500"
        before = client.get(url).json()
        post_review(client, snapshot.policies[3].policy_id)
        after = client.get(url).json()

        def strip(body):
            return [{k: v for k, v in row.items() if k != "last_review"}
                    for row in body["rows"]]

        assert strip(before) == strip(after)
        changed = [r["policy_id"] for a, r in zip(before["rows"],
                                                  after["rows"])
                   if a["last_review"] != r["last_review"]]
        assert changed == [snapshot.policies[3].policy_id]


class TestStats:
    def test_counts_match_journal_recount(self, harness):
        client, store, snapshot = harness
        ids = [p.policy_id for p in snapshot.policies]
        post_review(client, ids[0], verdict="CONFIRMED_DELIVERY",
                    timestamp=10.0)
        post_review(client, ids[0], verdict="NOT_DELIVERY", timestamp=20.0)
        post_review(client, ids[1], verdict="CONFIRMED_DELIVERY",
                    timestamp=30.0)
        post_review(client, ids[2], verdict="NOT_DELIVERY", timestamp=40.0)
        stats = client.get("/api/stats").json()

        journal = store.load_reviews()
        latest = {}
        for review in journal:
            held = latest.get(review.policy_id)
            if held is None or review.timestamp >= held.timestamp:
                latest[review.policy_id] = review
        confirmed = sum(1 for r in latest.values()
                        if r.verdict is Verdict.CONFIRMED_DELIVERY)
        assert stats["total_reviews"] == len(journal) == 4
        assert stats["reviewed_policies"] == len(latest) == 3
        assert stats["confirmed_policies"] == confirmed == 1
        assert stats["confirmed_rate"] == pytest.approx(confirmed / 3)
        assert stats["latest_snapshot"] == snapshot.date

    def test_no_reviews_yet(self, harness):
        client, _, _ = harness
        stats = client.get("/api/stats").json()
        assert stats["total_reviews"] == 0
        assert stats["confirmed_rate"] is None


class TestScoreTable:
    def test_table_shape_and_anchor(self, harness):
        client, _, snapshot = harness
        body = client.get("/api/score-table").json()
        assert body["version"] == snapshot.date
        assert body["x_max"] >= max(p.x for p in snapshot.policies)
        scores = body["scores"]
        assert len(scores) == body["x_max"] + 1
        assert all(len(row) == body["y_max"] + 1 for row in scores)
        # counts (0, 0) sit exactly at the anchor of the display scale
        assert scores[0][0] == 0.0
        for x, row in enumerate(scores):
            for y, cell in enumerate(row):
                if y > x:
                    assert cell is None
                else:
                    assert 0.0 <= cell <= 10.0

    def test_snapshot_scores_appear_in_table(self, harness):
        client, _, snapshot = harness
        scores = client.get("/api/score-table").json()["scores"]
        for p in snapshot.policies:
            assert scores[p.x][p.y] == pytest.approx(p.score, abs=5e-7)


class TestEmptyStore:
    @pytest.fixture()
    def client(self, tmp_path):
        Store.create(str(tmp_path / "s"))
        return TestClient(create_app(str(tmp_path / "s")))

    def test_rankings_empty(self, client):
        assert client.get("/api/rankings").json() == \
            {"dates": [], "latest": None}

    def test_stats_empty(self, client):
        assert client.get("/api/stats").json()["latest_snapshot"] is None

    def test_snapshot_404(self, client):
        assert client.get("/api/rankings/2026-01-01").status_code == 404

    def test_score_table_404(self, client):
        resp = client.get("/api/score-table")
        assert resp.status_code == 404
        assert resp.json()["code"] == "no_fit"

    def test_review_404(self, client):
        assert post_review(client, "anyone").status_code == 404


class TestStaticMount:
    def test_ui_served_alongside_api(self, template_store, tmp_path):
        template_root, snapshot = template_store
        static = tmp_path / "static"
        static.mkdir()
        (static / "index.html").write_text("<!doctype html><p>queue</p>")
        client = TestClient(create_app(template_root,
                                       static_dir=str(static)))
        page = client.get("/")
        assert page.status_code == 200
        assert "queue" in page.text
        api = client.get("/api/rankings")
        assert api.json()["latest"] == snapshot.date

    def test_missing_static_dir_is_ignored(self, tmp_path):
        Store.create(str(tmp_path / "s"))
        client = TestClient(create_app(str(tmp_path / "s"),
                                       static_dir=str(tmp_path / "nope")))
        assert client.get("/api/rankings").status_code == 200
