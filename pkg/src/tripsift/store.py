"""On-disk state: append-only journals, dated snapshots, model artifacts.

Layout under one root directory:

    predictions.jsonl   per-trip classifier outputs (journal)
    reviews.jsonl       underwriter decisions (journal)
    rankings/<date>.json  frozen weekly ranking snapshots
    models/tripclf-<ver>.json, models/betamix-<ver>.json
    trips.jsonl, pois.csv, homes.csv   classified inputs
    lock                single-writer guard

Journals are only ever appended to; an interrupted append is repaired by
dropping the unterminated trailing line. A corrupt line anywhere else is
a hard error naming the byte offset.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Iterable, Iterator

from . import ingest
from .betamix import fit as betamix_fit
from .geofeatures import PoiDatabase, read_homes_csv
from .tripclf import ForestModel, Standardization
from .tripclf import forest as tripclf_forest

log = logging.getLogger(__name__)

LOCK_NAME = "lock"


class StoreLockedError(RuntimeError):
    pass


class JournalCorruptError(ValueError):
    def __init__(self, path: str, offset: int):
        super().__init__(f"{path}: corrupt journal line at byte {offset}")
        self.path = path
        self.offset = offset


class MissingArtifactError(FileNotFoundError):
    pass


class Verdict(enum.Enum):
    CONFIRMED_DELIVERY = "CONFIRMED_DELIVERY"
    NOT_DELIVERY = "NOT_DELIVERY"


@dataclass(frozen=True)
class ReviewDecision:
    policy_id: str
    verdict: Verdict
    reviewer: str
    timestamp: float
    note: str | None = None

    def __post_init__(self):
        if not isinstance(self.verdict, Verdict):
            raise ValueError(f"invalid verdict {self.verdict!r}")
        if not self.policy_id:
            raise ValueError("policy_id must be non-empty")
        if not math.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")

    def to_obj(self) -> dict:
        obj = {
            "policy_id": self.policy_id,
            "verdict": self.verdict.value,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
        }
        if self.note is not None:
            obj["note"] = self.note
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "ReviewDecision":
        return cls(policy_id=obj["policy_id"],
                   verdict=Verdict(obj["verdict"]),
                   reviewer=obj["reviewer"],
                   timestamp=float(obj["timestamp"]),
                   note=obj.get("note"))


@dataclass(frozen=True)
class PredictionRecord:
    trip_id: str
    policy_id: str
    trip_end_time: float
    label: int
    probability: float

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(
                f"probability must lie in [0, 1], got {self.probability}")
        if not math.isfinite(self.trip_end_time):
            raise ValueError("trip_end_time must be finite")

    def to_obj(self) -> dict:
        return {
            "trip_id": self.trip_id,
            "policy_id": self.policy_id,
            "trip_end_time": self.trip_end_time,
            "label": self.label,
            "probability": self.probability,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "PredictionRecord":
        return cls(trip_id=obj["trip_id"], policy_id=obj["policy_id"],
                   trip_end_time=float(obj["trip_end_time"]),
                   label=int(obj["label"]),
                   probability=float(obj["probability"]))


@dataclass
class RankedPolicy:
    policy_id: str
    x: int
    y: int
    posterior_probability: float
    score: float
    window_start: float
    window_end: float
    last_review: ReviewDecision | None = None

    def __post_init__(self):
        if self.y > self.x or self.y < 0:
            raise ValueError(f"need 0 <= y <= x, got x={self.x} y={self.y}")
        if not 0.0 <= self.score <= 10.0:
            raise ValueError(f"score must lie in [0, 10], got {self.score}")
        if not 0.0 <= self.posterior_probability <= 1.0:
            raise ValueError("posterior_probability must lie in [0, 1]")

    def to_obj(self) -> dict:
        # last_review is deliberately not persisted: snapshots stay a
        # pure function of predictions + model, reviews join at read time
        return {
            "policy_id": self.policy_id,
            "x": self.x,
            "y": self.y,
            "posterior_probability": self.posterior_probability,
            "score": self.score,
            "window_start": self.window_start,
            "window_end": self.window_end,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "RankedPolicy":
        return cls(policy_id=obj["policy_id"], x=int(obj["x"]),
                   y=int(obj["y"]),
                   posterior_probability=float(obj["posterior_probability"]),
                   score=float(obj["score"]),
                   window_start=float(obj["window_start"]),
                   window_end=float(obj["window_end"]))


@dataclass
class RankingSnapshot:
    date: str                   # YYYY-MM-DD of the update's `now`
    window_end: float
    window_days: int
    policies: list[RankedPolicy]
    model_versions: dict[str, str]

    def to_doc(self) -> dict:
        return {
            "date": self.date,
            "window_end": self.window_end,
            "window_days": self.window_days,
            "model_versions": dict(sorted(self.model_versions.items())),
            "policies": [p.to_obj() for p in self.policies],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RankingSnapshot":
        return cls(date=doc["date"], window_end=float(doc["window_end"]),
                   window_days=int(doc["window_days"]),
                   policies=[RankedPolicy.from_obj(o)
                             for o in doc["policies"]],
                   model_versions=dict(doc["model_versions"]))

    def render(self) -> bytes:
        return (json.dumps(self.to_doc(), sort_keys=True,
                           separators=(",", ":")) + "\n").encode()


def read_journal(path: str, repair: bool = True) -> list[dict]:
    """All objects in an append-only JSONL journal.

    An unterminated trailing chunk that fails to parse is the footprint
    of an interrupted append: dropped (and truncated away when repair is
    set). A newline-terminated bad line is real corruption and raises.
    """
    if not os.path.exists(path):
        return []
    with open(path, "rb") as fh:
        data = fh.read()
    records: list[dict] = []
    pos = 0
    while pos < len(data):
        nl = data.find(b"\n", pos)
        end = len(data) if nl == -1 else nl
        chunk = data[pos:end]
        try:
            obj = json.loads(chunk)
            if not isinstance(obj, dict):
                raise ValueError("journal line is not an object")
        except ValueError:
            if nl == -1:
                log.warning("%s: dropping unterminated trailing line "
                            "at byte %d", path, pos)
                if repair:
                    _truncate(path, pos)
                return records
            raise JournalCorruptError(path, pos) from None
        records.append(obj)
        pos = end + 1
    return records


def _truncate(path: str, size: int) -> None:
    with open(path, "r+b") as fh:
        fh.truncate(size)


def append_journal(path: str, objs: Iterable[dict]) -> None:
    """Append one JSON object per line; repairs a torn tail first."""
    payload = b"".join(
        json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
        + b"\n" for obj in objs)
    if not payload:
        return
    if os.path.exists(path) and os.path.getsize(path) > 0:
        with open(path, "rb") as fh:
            fh.seek(-1, os.SEEK_END)
            torn = fh.read(1) != b"\n"
        if torn:
            read_journal(path, repair=True)
    with open(path, "ab") as fh:
        fh.write(payload)


def write_atomic(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


class StoreLock:
    """O_EXCL lock file; a second writer fails fast."""

    def __init__(self, path: str):
        self.path = path
        self._held = False

    def __enter__(self) -> "StoreLock":
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StoreLockedError(
                f"{self.path} exists: another update is running") from None
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        self._held = True
        return self

    def __exit__(self, *exc) -> None:
        if self._held:
            os.unlink(self.path)
            self._held = False


class Store:
    """Paths and typed accessors for one store directory."""

    def __init__(self, root: str):
        self.root = root
        self.predictions_path = os.path.join(root, "predictions.jsonl")
        self.reviews_path = os.path.join(root, "reviews.jsonl")
        self.rankings_dir = os.path.join(root, "rankings")
        self.models_dir = os.path.join(root, "models")
        self.trips_path = os.path.join(root, "trips.jsonl")
        self.pois_path = os.path.join(root, "pois.csv")
        self.homes_path = os.path.join(root, "homes.csv")
        self.lock_path = os.path.join(root, LOCK_NAME)

    @classmethod
    def create(cls, root: str) -> "Store":
        store = cls(root)
        os.makedirs(store.rankings_dir, exist_ok=True)
        os.makedirs(store.models_dir, exist_ok=True)
        return store

    def lock(self) -> StoreLock:
        return StoreLock(self.lock_path)

    # ---- journals ----

    def append_predictions(self,
                           records: Iterable[PredictionRecord]) -> None:
        append_journal(self.predictions_path,
                       (r.to_obj() for r in records))

    def load_predictions(self) -> list[PredictionRecord]:
        return [PredictionRecord.from_obj(o)
                for o in read_journal(self.predictions_path)]

    def predicted_trip_ids(self) -> set[str]:
        return {o["trip_id"] for o in read_journal(self.predictions_path)}

    def append_review(self, review: ReviewDecision) -> None:
        append_journal(self.reviews_path, [review.to_obj()])

    def load_reviews(self) -> list[ReviewDecision]:
        return [ReviewDecision.from_obj(o)
                for o in read_journal(self.reviews_path)]

    def latest_reviews(self) -> dict[str, ReviewDecision]:
        """Newest decision per policy; journal order breaks timestamp ties."""
        latest: dict[str, ReviewDecision] = {}
        for review in self.load_reviews():
            held = latest.get(review.policy_id)
            if held is None or review.timestamp >= held.timestamp:
                latest[review.policy_id] = review
        return latest

    # ---- ranking snapshots ----

    def ranking_path(self, date: str) -> str:
        return os.path.join(self.rankings_dir, f"{date}.json")

    def write_ranking(self, snapshot: RankingSnapshot) -> str:
        path = self.ranking_path(snapshot.date)
        write_atomic(path, snapshot.render())
        return path

    def read_ranking(self, date: str) -> RankingSnapshot:
        path = self.ranking_path(date)
        if not os.path.exists(path):
            raise MissingArtifactError(f"no ranking snapshot for {date}")
        with open(path, "rb") as fh:
            return RankingSnapshot.from_doc(json.loads(fh.read()))

    def ranking_dates(self) -> list[str]:
        if not os.path.isdir(self.rankings_dir):
            return []
        return sorted(name[:-5] for name in os.listdir(self.rankings_dir)
                      if name.endswith(".json"))

    def latest_ranking(self) -> RankingSnapshot:
        dates = self.ranking_dates()
        if not dates:
            raise MissingArtifactError("no ranking snapshots")
        return self.read_ranking(dates[-1])

    # ---- model artifacts ----

    def _versions(self, prefix: str) -> list[str]:
        if not os.path.isdir(self.models_dir):
            return []
        tag = f"{prefix}-"
        names = [n[len(tag):-5] for n in os.listdir(self.models_dir)
                 if n.startswith(tag) and n.endswith(".json")]
        return sorted(names, key=lambda v: (len(v), v))

    def tripclf_path(self, version: str) -> str:
        return os.path.join(self.models_dir, f"tripclf-{version}.json")

    def save_tripclf(self, model: ForestModel, version: str,
                     standardization: Standardization | None = None) -> str:
        path = self.tripclf_path(version)
        tripclf_forest.save_model(model, path,
                                  standardization=standardization)
        return path

    def latest_tripclf(self) -> tuple[ForestModel, Standardization | None]:
        versions = self._versions("tripclf")
        if not versions:
            raise MissingArtifactError("no trip classifier artifact")
        return tripclf_forest.load_model(self.tripclf_path(versions[-1]))

    def latest_tripclf_version(self) -> str | None:
        versions = self._versions("tripclf")
        return versions[-1] if versions else None

    def betamix_path(self, version: str) -> str:
        return os.path.join(self.models_dir, f"betamix-{version}.json")

    def save_betamix(self, samples, version: str,
                     score_table_csv: str | None = None) -> str:
        path = self.betamix_path(version)
        betamix_fit.save_artifact(samples, path,
                                  score_table_csv=score_table_csv)
        return path

    def latest_betamix(self):
        versions = self._versions("betamix")
        if not versions:
            raise MissingArtifactError("no mixture fit artifact")
        return betamix_fit.load_artifact(self.betamix_path(versions[-1]))

    def latest_betamix_version(self) -> str | None:
        versions = self._versions("betamix")
        return versions[-1] if versions else None

    # ---- classified inputs ----

    def iter_trips(self) -> Iterator[ingest.Trip]:
        if not os.path.exists(self.trips_path):
            return iter(())
        return ingest.iter_trips_jsonl(self.trips_path)

    def load_pois(self) -> PoiDatabase:
        if not os.path.exists(self.pois_path):
            raise MissingArtifactError(f"{self.pois_path} missing")
        return PoiDatabase.from_csv(self.pois_path)

    def load_homes(self) -> dict[str, tuple[float, float]]:
        if not os.path.exists(self.homes_path):
            raise MissingArtifactError(f"{self.homes_path} missing")
        return read_homes_csv(self.homes_path)

    def trip_index(self) -> "TripIndex":
        return TripIndex(self.trips_path)


@dataclass(frozen=True)
class _TripSpan:
    policy_id: str
    start: int
    end: int


class TripIndex:
    """Byte-range index over trips.jsonl for random access by trip.

    The file is rescanned only when its (size, mtime) stamp changes, so
    lookups against an immutable store cost one stat call.
    """

    def __init__(self, path: str):
        self.path = path
        self._spans: dict[str, _TripSpan] = {}
        self._by_policy: dict[str, list[str]] = {}
        self._stamp: tuple[int, int] | None = None

    def refresh(self) -> None:
        if not os.path.exists(self.path):
            self._spans, self._by_policy, self._stamp = {}, {}, None
            return
        stat = os.stat(self.path)
        stamp = (stat.st_size, stat.st_mtime_ns)
        if stamp == self._stamp:
            return
        spans: dict[str, _TripSpan] = {}
        by_policy: dict[str, list[str]] = {}
        current: str | None = None
        start = 0
        policy = ""
        pos = 0
        with open(self.path, "rb") as fh:
            for line in fh:
                end = pos + len(line)
                text = line.strip()
                if text:
                    obj = json.loads(text)
                    tid = obj.get("trip_id")
                    if tid is None:
                        raise ValueError(
                            f"{self.path}: sample at byte {pos} "
                            "lacks trip_id")
                    if tid != current:
                        if current is not None:
                            spans[current] = _TripSpan(policy, start,
                                                       pos)
                        if tid in spans:
                            raise ValueError(
                                f"{self.path}: trip {tid} is not "
                                "contiguous")
                        current, start = tid, pos
                        policy = obj["policy_id"]
                        by_policy.setdefault(policy, []).append(tid)
                pos = end
        if current is not None:
            spans[current] = _TripSpan(policy, start, pos)
        self._spans, self._by_policy, self._stamp = spans, by_policy, stamp

    def trip_ids_for(self, policy_id: str) -> list[str]:
        self.refresh()
        return list(self._by_policy.get(policy_id, []))

    def policy_of(self, trip_id: str) -> str | None:
        self.refresh()
        span = self._spans.get(trip_id)
        return span.policy_id if span else None

    def load(self, trip_id: str) -> ingest.Trip:
        self.refresh()
        span = self._spans.get(trip_id)
        if span is None:
            raise KeyError(trip_id)
        with open(self.path, "rb") as fh:
            fh.seek(span.start)
            blob = fh.read(span.end - span.start)
        samples = [ingest.parse_sample_obj(json.loads(line))
                   for line in blob.decode().splitlines() if line.strip()]
        return ingest.trip_from_samples(trip_id, samples)
