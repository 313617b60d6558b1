"""Telematics sample parsing and idle-gap trip segmentation.

Raw samples arrive as JSON lines keyed by policy. Per-policy streams are
cut into trips wherever the gap between consecutive samples exceeds the
idle window; pauses shorter than the window (a courier waiting between
drop-offs) stay inside one trip.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence

IDLE_WINDOW_MINUTES = 90.0
TELEPORT_SPEED_MS = 70.0


class EngineStatus(str, Enum):
    ON = "on"
    OFF = "off"
    RUNNING = "running"


@dataclass(frozen=True)
class GpsSample:
    policy_id: str
    latitude: float
    longitude: float
    timestamp: float               # UTC epoch seconds
    engine_status: EngineStatus = EngineStatus.ON
    accel: tuple[float, float, float] | None = None
    trip_id: str | None = None

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude out of range: {self.longitude}")
        if not math.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")
        if self.accel is not None and len(self.accel) != 3:
            raise ValueError("accel must have three components")


@dataclass(frozen=True)
class Trip:
    trip_id: str
    policy_id: str
    samples: tuple[GpsSample, ...]
    start_time: float
    end_time: float

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("trip must contain at least one sample")
        if self.end_time < self.start_time:
            raise ValueError("end_time precedes start_time")

    @property
    def duration_s(self) -> float:
        return self.end_time - self.start_time


@dataclass(frozen=True)
class ParseIssue:
    line_no: int
    message: str


def make_trip_id(policy_id: str, start_time: float) -> str:
    """Deterministic trip identifier; stable across re-segmentation."""
    return f"{policy_id}-{int(round(start_time))}"


def parse_sample_obj(obj: dict) -> GpsSample:
    """One decoded JSON object to a sample; raises ValueError on bad fields."""
    try:
        policy_id = obj["policy_id"]
        lat = float(obj["lat"])
        lon = float(obj["lon"])
        ts = float(obj["ts"])
        engine = obj.get("engine", "on")
    except KeyError as exc:
        raise ValueError(f"missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError):
        raise ValueError("non-numeric coordinate or timestamp") from None
    if not isinstance(policy_id, str) or not policy_id:
        raise ValueError("policy_id must be a non-empty string")
    try:
        status = EngineStatus(engine)
    except ValueError:
        raise ValueError(f"unknown engine status {engine!r}") from None
    accel = None
    if obj.get("accel") is not None:
        raw = obj["accel"]
        if not isinstance(raw, (list, tuple)) or len(raw) != 3:
            raise ValueError("accel must be a 3-element array")
        accel = (float(raw[0]), float(raw[1]), float(raw[2]))
    return GpsSample(policy_id=policy_id, latitude=lat, longitude=lon,
                     timestamp=ts, engine_status=status, accel=accel,
                     trip_id=obj.get("trip_id"))


def sample_to_obj(sample: GpsSample) -> dict:
    obj = {
        "policy_id": sample.policy_id,
        "lat": sample.latitude,
        "lon": sample.longitude,
        "ts": int(sample.timestamp) if float(sample.timestamp).is_integer()
        else sample.timestamp,
        "engine": sample.engine_status.value,
    }
    if sample.accel is not None:
        obj["accel"] = list(sample.accel)
    if sample.trip_id is not None:
        obj["trip_id"] = sample.trip_id
    return obj


def parse_samples(lines: Iterable[str], strict: bool = False,
                  ) -> tuple[dict[str, list[GpsSample]], list[ParseIssue]]:
    """Parse JSON lines into per-policy, time-sorted sample lists.

    Malformed lines are collected as issues with their line numbers; with
    ``strict`` the first one raises instead. Blank lines are skipped.
    """
    groups: dict[str, list[GpsSample]] = {}
    issues: list[ParseIssue] = []
    for line_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
            sample = parse_sample_obj(obj)
        except ValueError as exc:
            if strict:
                raise ValueError(f"line {line_no}: {exc}") from None
            issues.append(ParseIssue(line_no=line_no, message=str(exc)))
            continue
        groups.setdefault(sample.policy_id, []).append(sample)
    for samples in groups.values():
        samples.sort(key=lambda s: s.timestamp)     # stable: ties keep order
    return groups, issues


def segment_trips(samples: Sequence[GpsSample],
                  idle_window_minutes: float = IDLE_WINDOW_MINUTES,
                  ) -> list[Trip]:
    """Split one policy's time-ordered samples at idle gaps > the window."""
    if idle_window_minutes <= 0:
        raise ValueError("idle window must be positive")
    if not samples:
        return []
    policy_id = samples[0].policy_id
    for s in samples:
        if s.policy_id != policy_id:
            raise ValueError("segment_trips expects a single policy")
    for a, b in zip(samples, samples[1:]):
        if b.timestamp < a.timestamp:
            raise ValueError("samples must be time-ordered")

    window_s = idle_window_minutes * 60.0
    trips: list[Trip] = []
    run: list[GpsSample] = [samples[0]]
    for s in samples[1:]:
        if s.timestamp - run[-1].timestamp > window_s:
            trips.append(_build_trip(policy_id, run))
            run = [s]
        else:
            run.append(s)
    trips.append(_build_trip(policy_id, run))
    return trips


def _build_trip(policy_id: str, run: list[GpsSample]) -> Trip:
    start = run[0].timestamp
    trip_id = make_trip_id(policy_id, start)
    stamped = tuple(dataclasses.replace(s, trip_id=trip_id) for s in run)
    return Trip(trip_id=trip_id, policy_id=policy_id, samples=stamped,
                start_time=start, end_time=run[-1].timestamp)


@dataclass
class TripValidation:
    """Pure audit of one trip; indices refer to the offending sample."""

    trip_id: str
    duplicate_times: list[int]
    non_monotone: list[int]
    teleports: list[int]

    @property
    def clean(self) -> bool:
        return not (self.duplicate_times or self.non_monotone
                    or self.teleports)


def validate_trip(trip: Trip) -> TripValidation:
    """Flag duplicate timestamps, time reversals, and implausible jumps."""
    from .geofeatures import haversine_m   # deferred: avoids import cycle

    report = TripValidation(trip_id=trip.trip_id, duplicate_times=[],
                            non_monotone=[], teleports=[])
    for i in range(1, len(trip.samples)):
        a, b = trip.samples[i - 1], trip.samples[i]
        dt = b.timestamp - a.timestamp
        if dt == 0:
            report.duplicate_times.append(i)
        elif dt < 0:
            report.non_monotone.append(i)
        else:
            dist = haversine_m(a.latitude, a.longitude,
                               b.latitude, b.longitude)
            if dist / dt > TELEPORT_SPEED_MS:
                report.teleports.append(i)
    return report


def read_samples_jsonl(path: str, strict: bool = False,
                       ) -> tuple[dict[str, list[GpsSample]], list[ParseIssue]]:
    with open(path, encoding="utf-8") as fh:
        return parse_samples(fh, strict=strict)


def iter_samples_jsonl(path: str) -> Iterator[tuple[int, GpsSample | ParseIssue]]:
    """Stream (line_no, sample-or-issue) without loading the whole file."""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                yield line_no, parse_sample_obj(obj)
            except ValueError as exc:
                yield line_no, ParseIssue(line_no=line_no, message=str(exc))


def write_trips_jsonl(trips: Iterable[Trip], path: str) -> None:
    """Samples back out as JSON lines, now carrying their trip_id."""
    with open(path, "w", encoding="utf-8") as fh:
        for trip in trips:
            for s in trip.samples:
                fh.write(json.dumps(sample_to_obj(s), sort_keys=True) + "\n")


def trip_from_samples(trip_id: str, run: list[GpsSample]) -> Trip:
    run = sorted(run, key=lambda s: s.timestamp)
    return Trip(trip_id=trip_id, policy_id=run[0].policy_id,
                samples=tuple(run), start_time=run[0].timestamp,
                end_time=run[-1].timestamp)


def iter_trips_jsonl(path: str) -> Iterator[Trip]:
    """Stream trips from a trip-stamped sample file.

    Assumes each trip's samples form one contiguous run of lines (the
    layout write_trips_jsonl produces); a trip_id reappearing after its
    run closed is treated as corruption.
    """
    seen: set[str] = set()
    current_id: str | None = None
    run: list[GpsSample] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            sample = parse_sample_obj(json.loads(text))
            if sample.trip_id is None:
                raise ValueError(f"line {line_no}: sample lacks trip_id")
            if sample.trip_id != current_id:
                if current_id is not None:
                    yield trip_from_samples(current_id, run)
                if sample.trip_id in seen:
                    raise ValueError(
                        f"line {line_no}: trip {sample.trip_id} "
                        "is not contiguous")
                seen.add(sample.trip_id)
                current_id = sample.trip_id
                run = []
            run.append(sample)
    if current_id is not None:
        yield trip_from_samples(current_id, run)


def read_trips_jsonl(path: str) -> list[Trip]:
    """Rebuild trips from a trip-stamped sample file."""
    order: list[str] = []
    by_trip: dict[str, list[GpsSample]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            obj = json.loads(text)
            sample = parse_sample_obj(obj)
            if sample.trip_id is None:
                raise ValueError(f"line {line_no}: sample lacks trip_id")
            if sample.trip_id not in by_trip:
                order.append(sample.trip_id)
                by_trip[sample.trip_id] = []
            by_trip[sample.trip_id].append(sample)
    trips = []
    for tid in order:
        run = sorted(by_trip[tid], key=lambda s: s.timestamp)
        trips.append(Trip(trip_id=tid, policy_id=run[0].policy_id,
                          samples=tuple(run), start_time=run[0].timestamp,
                          end_time=run[-1].timestamp))
    return trips
