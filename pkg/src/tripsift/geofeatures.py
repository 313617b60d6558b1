"""Stationary-point detection, destination classification, trip features.

A trip's stops are maximal runs of samples that barely move; each stop is
classified against a commercial POI database and the policyholder's home,
and the trip collapses to a small feature vector for the classifier.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:
    from .ingest import Trip

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_DEGREE = math.pi / 180.0 * EARTH_RADIUS_M

STATIONARY_EPS_DEG = 1e-5
MIN_STOP_DURATION_S = 90.0
COMMERCIAL_RADIUS_M = 50.0
COMMERCIAL_MIN_POIS = 2
HOME_RADIUS_M = 150.0
SECONDS_PER_DAY = 86_400.0


class Classification(str, Enum):
    COMMERCIAL = "commercial"
    HOME = "home"
    RESIDENTIAL = "residential"


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters on a 6371 km sphere."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = (math.sin(dphi / 2.0) ** 2
         + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class StationaryPoint:
    latitude: float                 # mean of member sample coordinates
    longitude: float
    start_time: float
    end_time: float
    classification: Classification | None = None

    @property
    def duration_s(self) -> float:
        return self.end_time - self.start_time


@dataclass(frozen=True)
class TripFeatures:
    trip_duration_minutes: float
    number_waits_trip: int
    average_trip_wait_minutes: float
    total_commercial_waits: int
    ratio_busy_waits: float
    time_of_day_sin: float
    time_of_day_cos: float

    def as_vector(self) -> tuple[float, ...]:
        return (self.trip_duration_minutes, float(self.number_waits_trip),
                self.average_trip_wait_minutes,
                float(self.total_commercial_waits), self.ratio_busy_waits,
                self.time_of_day_sin, self.time_of_day_cos)


FEATURE_NAMES = ("trip_duration_minutes", "number_waits_trip",
                 "average_trip_wait_minutes", "total_commercial_waits",
                 "ratio_busy_waits", "time_of_day_sin", "time_of_day_cos")


class PoiDatabase:
    """Commercial points of interest with a uniform-grid spatial index.

    The grid only prunes candidates; membership is always decided by the
    exact haversine distance, so results match a linear scan.
    """

    _CELL_DEG = 0.002               # ~220 m of latitude per cell

    def __init__(self, entries: Iterable[tuple[float, float]] = ()):
        self.lats: list[float] = []
        self.lons: list[float] = []
        self._grid: dict[tuple[int, int], list[int]] = {}
        for lat, lon in entries:
            self.add(lat, lon)

    def __len__(self) -> int:
        return len(self.lats)

    def add(self, lat: float, lon: float) -> None:
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise ValueError(f"POI coordinates out of range: {lat}, {lon}")
        idx = len(self.lats)
        self.lats.append(lat)
        self.lons.append(lon)
        self._grid.setdefault(self._cell(lat, lon), []).append(idx)

    def _cell(self, lat: float, lon: float) -> tuple[int, int]:
        return (math.floor(lat / self._CELL_DEG),
                math.floor(lon / self._CELL_DEG))

    def indices_within(self, lat: float, lon: float,
                       radius_m: float) -> list[int]:
        """Sorted entry indices with haversine distance <= radius_m."""
        dlat = radius_m / METERS_PER_DEGREE
        coslat = max(math.cos(math.radians(lat)), 1e-9)
        dlon = dlat / coslat
        i_lo = math.floor((lat - dlat) / self._CELL_DEG)
        i_hi = math.floor((lat + dlat) / self._CELL_DEG)
        j_lo = math.floor((lon - dlon) / self._CELL_DEG)
        j_hi = math.floor((lon + dlon) / self._CELL_DEG)
        hits = []
        for i in range(i_lo, i_hi + 1):
            for j in range(j_lo, j_hi + 1):
                for idx in self._grid.get((i, j), ()):
                    if haversine_m(lat, lon, self.lats[idx],
                                   self.lons[idx]) <= radius_m:
                        hits.append(idx)
        hits.sort()
        return hits

    def count_within(self, lat: float, lon: float, radius_m: float) -> int:
        return len(self.indices_within(lat, lon, radius_m))

    def indices_within_scan(self, lat: float, lon: float,
                            radius_m: float) -> list[int]:
        """Reference linear scan; the index must agree with this exactly."""
        return [i for i in range(len(self.lats))
                if haversine_m(lat, lon, self.lats[i],
                               self.lons[i]) <= radius_m]

    @classmethod
    def from_csv(cls, path: str) -> "PoiDatabase":
        db = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {
                    "lat", "lon"}.issubset(reader.fieldnames):
                raise ValueError(f"{path}: expected header with lat,lon")
            for row in reader:
                db.add(float(row["lat"]), float(row["lon"]))
        return db

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lat", "lon", "kind"])
            for lat, lon in zip(self.lats, self.lons):
                writer.writerow([repr(lat), repr(lon), "commercial"])


def detect_stationary_points(trip: "Trip",
                             eps_deg: float = STATIONARY_EPS_DEG,
                             min_duration_s: float = MIN_STOP_DURATION_S,
                             ) -> list[StationaryPoint]:
    """Maximal low-displacement runs lasting at least min_duration_s.

    Displacement between consecutive samples is the Euclidean norm in raw
    coordinate degrees; runs shorter than the minimum duration (a traffic
    light, a stop sign) are discarded.
    """
    samples = trip.samples
    points: list[StationaryPoint] = []
    start = 0
    for i in range(1, len(samples) + 1):
        if i < len(samples):
            moved = math.hypot(
                samples[i].latitude - samples[i - 1].latitude,
                samples[i].longitude - samples[i - 1].longitude) > eps_deg
        else:
            moved = True
        if not moved:
            continue
        run = samples[start:i]
        duration = run[-1].timestamp - run[0].timestamp
        if duration >= min_duration_s:
            points.append(StationaryPoint(
                latitude=sum(s.latitude for s in run) / len(run),
                longitude=sum(s.longitude for s in run) / len(run),
                start_time=run[0].timestamp,
                end_time=run[-1].timestamp))
        start = i
    return points


def classify_destination(point: StationaryPoint, pois: PoiDatabase,
                         home: tuple[float, float]) -> Classification:
    """Commercial beats home beats residential, checked in that order."""
    if pois.count_within(point.latitude, point.longitude,
                         COMMERCIAL_RADIUS_M) >= COMMERCIAL_MIN_POIS:
        return Classification.COMMERCIAL
    if haversine_m(point.latitude, point.longitude,
                   home[0], home[1]) <= HOME_RADIUS_M:
        return Classification.HOME
    return Classification.RESIDENTIAL


def classify_points(points: Sequence[StationaryPoint], pois: PoiDatabase,
                    home: tuple[float, float]) -> list[StationaryPoint]:
    return [dataclasses.replace(p, classification=classify_destination(
        p, pois, home)) for p in points]


def time_of_day_encoding(start_time: float,
                         utc_offset_s: float = 0.0) -> tuple[float, float]:
    """(sin, cos) of the start time's phase within the local day."""
    seconds = (start_time + utc_offset_s) % SECONDS_PER_DAY
    angle = 2.0 * math.pi * seconds / SECONDS_PER_DAY
    return math.sin(angle), math.cos(angle)


def extract_features(trip: "Trip", pois: PoiDatabase,
                     home: tuple[float, float],
                     utc_offset_s: float = 0.0) -> TripFeatures:
    points = classify_points(detect_stationary_points(trip), pois, home)
    return features_from_points(trip, points, utc_offset_s=utc_offset_s)


def features_from_points(trip: "Trip", points: Sequence[StationaryPoint],
                         utc_offset_s: float = 0.0) -> TripFeatures:
    """Feature vector given already-classified stationary points."""
    n = len(points)
    commercial = sum(1 for p in points
                     if p.classification is Classification.COMMERCIAL)
    residential = sum(1 for p in points
                      if p.classification is Classification.RESIDENTIAL)
    avg_wait = (sum(p.duration_s for p in points) / n / 60.0) if n else 0.0
    tod_sin, tod_cos = time_of_day_encoding(trip.start_time, utc_offset_s)
    return TripFeatures(
        trip_duration_minutes=trip.duration_s / 60.0,
        number_waits_trip=n,
        average_trip_wait_minutes=avg_wait,
        total_commercial_waits=commercial,
        ratio_busy_waits=commercial / max(1, residential),
        time_of_day_sin=tod_sin,
        time_of_day_cos=tod_cos,
    )


def write_features_csv(rows: Iterable[tuple[str, str, TripFeatures]],
                       path: str) -> None:
    """Rows of (trip_id, policy_id, features) to CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trip_id", "policy_id", *FEATURE_NAMES])
        for trip_id, policy_id, f in rows:
            writer.writerow([trip_id, policy_id,
                             *[repr(v) for v in f.as_vector()]])


def read_features_csv(path: str) -> list[tuple[str, str, TripFeatures]]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"trip_id", "policy_id", *FEATURE_NAMES}
        if reader.fieldnames is None or not expected.issubset(
                reader.fieldnames):
            raise ValueError(f"{path}: missing feature columns")
        for row in reader:
            out.append((row["trip_id"], row["policy_id"], TripFeatures(
                trip_duration_minutes=float(row["trip_duration_minutes"]),
                number_waits_trip=int(float(row["number_waits_trip"])),
                average_trip_wait_minutes=float(
                    row["average_trip_wait_minutes"]),
                total_commercial_waits=int(float(
                    row["total_commercial_waits"])),
                ratio_busy_waits=float(row["ratio_busy_waits"]),
                time_of_day_sin=float(row["time_of_day_sin"]),
                time_of_day_cos=float(row["time_of_day_cos"]))))
    return out


def read_homes_csv(path: str) -> dict[str, tuple[float, float]]:
    homes = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {
                "policy_id", "lat", "lon"}.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected header policy_id,lat,lon")
        for row in reader:
            homes[row["policy_id"]] = (float(row["lat"]), float(row["lon"]))
    return homes


def write_homes_csv(homes: dict[str, tuple[float, float]], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy_id", "lat", "lon"])
        for policy_id in sorted(homes):
            lat, lon = homes[policy_id]
            writer.writerow([policy_id, repr(lat), repr(lon)])
