"""HTTP API over a store: ranked queue, policy detail, review capture.

Read endpoints are pure functions of the store state; the only write is
the review journal append, serialized behind a process-local lock.
"""

from __future__ import annotations

import csv
import io
import json
import os
import threading
import time

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .geofeatures import (
    FEATURE_NAMES,
    PoiDatabase,
    classify_points,
    detect_stationary_points,
    extract_features,
)
from .ingest import Trip
from .store import (
    PredictionRecord,
    RankedPolicy,
    RankingSnapshot,
    ReviewDecision,
    Store,
    Verdict,
)

DEFAULT_PAGE_SIZE = 50


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class ReviewBody(BaseModel):
    verdict: str
    reviewer: str
    note: str | None = None
    timestamp: float | None = None


class _SnapshotCache:
    """Snapshots are immutable once written; cache by (date, mtime)."""

    def __init__(self, store: Store):
        self.store = store
        self._held: dict[str, tuple[int, RankingSnapshot]] = {}

    def get(self, date: str) -> RankingSnapshot:
        path = self.store.ranking_path(date)
        if not os.path.exists(path):
            raise ApiError(404, "unknown_snapshot",
                           f"no ranking snapshot for {date}")
        mtime = os.stat(path).st_mtime_ns
        held = self._held.get(date)
        if held is None or held[0] != mtime:
            self._held[date] = (mtime, self.store.read_ranking(date))
        return self._held[date][1]

    def latest(self) -> RankingSnapshot:
        dates = self.store.ranking_dates()
        if not dates:
            raise ApiError(404, "no_snapshots",
                           "no ranking snapshot has been published yet")
        return self.get(dates[-1])

    def policy_known(self, policy_id: str) -> bool:
        for date in self.store.ranking_dates():
            snapshot = self.get(date)
            if any(p.policy_id == policy_id for p in snapshot.policies):
                return True
        return False


class _GeoData:
    """Lazily loaded POI index and home table (immutable inputs).

    Stores without geo context still serve raw polylines, so a missing
    file degrades to (None, {}) instead of failing the request.
    """

    def __init__(self, store: Store):
        self.store = store
        self.pois: PoiDatabase | None = None
        self.homes: dict[str, tuple[float, float]] = {}

    def load(self) -> tuple[PoiDatabase | None,
                            dict[str, tuple[float, float]]]:
        if self.pois is None:
            try:
                self.pois = self.store.load_pois()
                self.homes = self.store.load_homes()
            except FileNotFoundError:
                self.pois = None
                self.homes = {}
        return self.pois, self.homes


def _row_json(row: RankedPolicy, review: ReviewDecision | None) -> dict:
    obj = row.to_obj()
    obj["last_review"] = review.to_obj() if review is not None else None
    return obj


def _parse_score_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    scores = [[float(cell) if cell else None for cell in row[1:]]
              for row in body]
    return {
        "x_max": len(body) - 1,
        "y_max": len(header) - 2,
        "scores": scores,
    }


def create_app(store_root: str, static_dir: str | None = None) -> FastAPI:
    store = Store(store_root)
    snapshots = _SnapshotCache(store)
    geo = _GeoData(store)
    trips = store.trip_index()
    review_lock = threading.Lock()

    app = FastAPI(title="tripsift triage", openapi_url=None)

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code,
                                     "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request,
                                exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(p) for p in first.get("loc", ()))
        message = f"{loc}: {first.get('msg', 'invalid request')}"
        return JSONResponse(status_code=400,
                            content={"code": "invalid_request",
                                     "message": message})

    @app.get("/api/rankings")
    def list_rankings():
        dates = store.ranking_dates()
        return {"dates": dates, "latest": dates[-1] if dates else None}

    @app.get("/api/rankings/{date}")
    def get_ranking(date: str, page: int = 1,
                    page_size: int = DEFAULT_PAGE_SIZE,
                    min_score: float | None = None,
                    unreviewed_only: bool = False):
        if not 1 <= page_size <= 1000:
            raise ApiError(400, "invalid_request",
                           "page_size must lie in [1, 1000]")
        snapshot = snapshots.get(date)
        reviews = store.latest_reviews()
        rows = snapshot.policies
        if min_score is not None:
            rows = [r for r in rows if r.score >= min_score]
        if unreviewed_only:
            rows = [r for r in rows if r.policy_id not in reviews]
        total = len(rows)
        if page < 1:
            page_rows: list[RankedPolicy] = []
        else:
            lo = (page - 1) * page_size
            page_rows = rows[lo:lo + page_size]
        return {
            "date": snapshot.date,
            "window_days": snapshot.window_days,
            "total": total,
            "page": page,
            "page_size": page_size,
            "rows": [_row_json(r, reviews.get(r.policy_id))
                     for r in page_rows],
        }

    def _find_policy(policy_id: str,
                     date: str | None) -> tuple[RankingSnapshot,
                                                RankedPolicy]:
        snapshot = snapshots.latest() if date is None else \
            snapshots.get(date)
        for row in snapshot.policies:
            if row.policy_id == policy_id:
                return snapshot, row
        raise ApiError(404, "unknown_policy",
                       f"policy {policy_id} is not in the "
                       f"{snapshot.date} ranking")

    def _window_predictions(policy_id: str,
                            row: RankedPolicy) -> list[PredictionRecord]:
        records = [r for r in store.load_predictions()
                   if r.policy_id == policy_id
                   and row.window_start < r.trip_end_time
                   <= row.window_end]
        records.sort(key=lambda r: (-r.trip_end_time, r.trip_id))
        return records

    @app.get("/api/policies/{policy_id}")
    def get_policy(policy_id: str, date: str | None = None):
        snapshot, row = _find_policy(policy_id, date)
        reviews = store.latest_reviews()
        trip_rows = []
        for rec in _window_predictions(policy_id, row):
            entry = {
                "trip_id": rec.trip_id,
                "trip_end_time": rec.trip_end_time,
                "probability": rec.probability,
                "label": rec.label,
                "features": None,
            }
            try:
                trip = trips.load(rec.trip_id)
            except KeyError:
                trip = None
            if trip is not None:
                entry["start_time"] = trip.start_time
                pois, homes = geo.load()
                home = homes.get(policy_id)
                if pois is not None and home is not None:
                    feats = extract_features(trip, pois, home)
                    entry["features"] = dict(zip(FEATURE_NAMES,
                                                 feats.as_vector()))
            trip_rows.append(entry)
        return {
            "snapshot_date": snapshot.date,
            "policy": _row_json(row, reviews.get(policy_id)),
            "trips": trip_rows,
        }

    @app.get("/api/policies/{policy_id}/trips/{trip_id}")
    def get_trip(policy_id: str, trip_id: str):
        owner = trips.policy_of(trip_id)
        if owner is None or owner != policy_id:
            raise ApiError(404, "unknown_trip",
                           f"no trip {trip_id} for policy {policy_id}")
        trip: Trip = trips.load(trip_id)
        pois, homes = geo.load()
        home = homes.get(policy_id)
        points = detect_stationary_points(trip)
        if pois is not None and home is not None:
            points = classify_points(points, pois, home)
        prediction = next(
            (r for r in store.load_predictions() if r.trip_id == trip_id),
            None)
        return {
            "trip_id": trip_id,
            "policy_id": policy_id,
            "start_time": trip.start_time,
            "end_time": trip.end_time,
            "polyline": [{"lat": s.latitude, "lon": s.longitude,
                          "t": s.timestamp} for s in trip.samples],
            "stationary_points": [{
                "latitude": p.latitude,
                "longitude": p.longitude,
                "start_time": p.start_time,
                "end_time": p.end_time,
                "duration_s": p.duration_s,
                "classification": p.classification.value
                if p.classification else None,
            } for p in points],
            "home": {"lat": home[0], "lon": home[1]} if home else None,
            "prediction": prediction.to_obj() if prediction else None,
        }

    @app.post("/api/policies/{policy_id}/review", status_code=201)
    def post_review(policy_id: str, body: ReviewBody):
        try:
            verdict = Verdict(body.verdict)
        except ValueError:
            allowed = ", ".join(v.value for v in Verdict)
            raise ApiError(400, "invalid_verdict",
                           f"verdict must be one of: {allowed}") from None
        if not body.reviewer.strip():
            raise ApiError(400, "invalid_request",
                           "reviewer must be non-empty")
        if not snapshots.policy_known(policy_id):
            raise ApiError(404, "unknown_policy",
                           f"policy {policy_id} is not in any ranking")
        decision = ReviewDecision(
            policy_id=policy_id, verdict=verdict,
            reviewer=body.reviewer.strip(),
            timestamp=body.timestamp if body.timestamp is not None
            else time.time(),
            note=body.note)
        with review_lock:
            store.append_review(decision)
        return {"status": "recorded", "review": decision.to_obj()}

    @app.get("/api/score-table")
    def get_score_table():
        version = store.latest_betamix_version()
        if version is None:
            raise ApiError(404, "no_fit", "no mixture fit artifact")
        with open(store.betamix_path(version)) as fh:
            doc = json.load(fh)
        csv_text = doc.get("score_table_csv")
        if csv_text is None:
            raise ApiError(404, "no_score_table",
                           f"fit {version} has no embedded score table")
        table = _parse_score_csv(csv_text)
        table["version"] = version
        return table

    @app.get("/api/stats")
    def get_stats():
        all_reviews = store.load_reviews()
        latest = store.latest_reviews()
        confirmed = sum(
            1 for r in latest.values()
            if r.verdict is Verdict.CONFIRMED_DELIVERY)
        dates = store.ranking_dates()
        return {
            "total_reviews": len(all_reviews),
            "reviewed_policies": len(latest),
            "confirmed_policies": confirmed,
            "confirmed_rate": confirmed / len(latest) if latest else None,
            "latest_snapshot": dates[-1] if dates else None,
        }

    if static_dir is not None and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")

    return app


def serve(store_root: str, host: str = "127.0.0.1", port: int = 8000,
          static_dir: str | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(store_root, static_dir=static_dir),
                host=host, port=port)
