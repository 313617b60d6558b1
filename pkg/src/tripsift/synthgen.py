"""Synthetic fleet generator with ground-truth labels.

Builds POI maps, homes, and GPS traces for delivery-like and personal
driving so the whole pipeline can be exercised and measured without any
proprietary data. Every stream is seeded: the same config reproduces the
same fleet byte for byte.

Trace shapes, dwell times, and stop counts are plausible stand-ins, not
calibrated to any real dataset. A deliberate "confusable" personal
archetype (an errand run touching two shops) gives the trip classifier a
realistic false-positive population instead of random label noise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

from .geofeatures import METERS_PER_DEGREE, PoiDatabase
from .ingest import EngineStatus, GpsSample, Trip, make_trip_id

SECONDS_PER_DAY = 86_400


class TripKind(str, Enum):
    DELIVERY = "delivery"
    PERSONAL = "personal"
    CONFUSABLE = "confusable"      # personal errand that resembles delivery


@dataclass(frozen=True)
class Region:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self) -> None:
        if not (-90 <= self.lat_min < self.lat_max <= 90):
            raise ValueError("invalid latitude span")
        if not (-180 <= self.lon_min < self.lon_max <= 180):
            raise ValueError("invalid longitude span")

    def contains(self, lat: float, lon: float) -> bool:
        return (self.lat_min <= lat <= self.lat_max
                and self.lon_min <= lon <= self.lon_max)

    def clamp(self, lat: float, lon: float,
              margin_deg: float = 0.0) -> tuple[float, float]:
        return (min(max(lat, self.lat_min + margin_deg),
                    self.lat_max - margin_deg),
                min(max(lon, self.lon_min + margin_deg),
                    self.lon_max - margin_deg))

    def random_point(self, rng: np.random.Generator,
                     margin_deg: float = 0.0) -> tuple[float, float]:
        return (float(rng.uniform(self.lat_min + margin_deg,
                                  self.lat_max - margin_deg)),
                float(rng.uniform(self.lon_min + margin_deg,
                                  self.lon_max - margin_deg)))


DEFAULT_REGION = Region(51.46, 51.54, -0.15, -0.03)

# 2026-01-01T00:00:00Z; trips land on days 0..27 so a 30-day window
# anchored a month later covers the whole fleet
DEFAULT_START_EPOCH = 1_767_225_600
DAY_POOL = 28


@dataclass(frozen=True)
class FleetConfig:
    n_policies: int = 100
    delivery_fraction: float = 0.05
    trips_per_policy: tuple[int, int] = (3, 10)
    sample_period_s: float = 15.0
    seed: int = 0
    region: Region = DEFAULT_REGION
    poi_cluster_count: int = 6
    pois_per_cluster: int = 20
    poi_cluster_sigma_m: float = 60.0
    start_epoch: int = DEFAULT_START_EPOCH
    # per-policy mix rates: latent delivery activity for k=1, errand
    # propensity for k=0 (overdispersed, capped to keep impostors rare)
    delivery_mix_beta: tuple[float, float] = (5.0, 2.0)
    confusable_beta: tuple[float, float] = (0.6, 6.0)
    confusable_cap: float = 0.35

    def __post_init__(self) -> None:
        if self.n_policies <= 0:
            raise ValueError("n_policies must be positive")
        if not 0.0 <= self.delivery_fraction <= 1.0:
            raise ValueError("delivery_fraction must lie in [0, 1]")
        lo, hi = self.trips_per_policy
        if lo < 1 or hi < lo:
            raise ValueError("trips_per_policy range is empty")
        if self.sample_period_s <= 0:
            raise ValueError("sample_period_s must be positive")
        if self.poi_cluster_count < 0 or self.pois_per_cluster < 0:
            raise ValueError("POI counts must be non-negative")


@dataclass
class GroundTruth:
    """Labels the generator guarantees; downstream metrics compare to these."""

    policy_k: dict[str, int] = field(default_factory=dict)
    trip_labels: dict[str, int] = field(default_factory=dict)
    trip_kinds: dict[str, str] = field(default_factory=dict)
    trip_policy: dict[str, str] = field(default_factory=dict)

    def verify(self) -> None:
        """k=0 policies carry no delivery trips; k=1 policies carry a mix."""
        per_policy: dict[str, list[int]] = {}
        for trip_id, label in self.trip_labels.items():
            per_policy.setdefault(self.trip_policy[trip_id], []).append(label)
        for policy_id, k in self.policy_k.items():
            labels = per_policy.get(policy_id, [])
            if k == 0 and any(labels):
                raise ValueError(f"{policy_id}: k=0 but has delivery trips")
            if k == 1 and (0 not in labels or 1 not in labels):
                raise ValueError(f"{policy_id}: k=1 requires mixed usage")

    def write_csvs(self, policies_path: str, trips_path: str) -> None:
        with open(policies_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["policy_id", "k"])
            for policy_id in sorted(self.policy_k):
                writer.writerow([policy_id, self.policy_k[policy_id]])
        with open(trips_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trip_id", "label"])
            for trip_id in sorted(self.trip_labels):
                writer.writerow([trip_id, self.trip_labels[trip_id]])

    @classmethod
    def read_csvs(cls, policies_path: str, trips_path: str) -> "GroundTruth":
        truth = cls()
        with open(policies_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                truth.policy_k[row["policy_id"]] = int(row["k"])
        with open(trips_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                truth.trip_labels[row["trip_id"]] = int(row["label"])
        return truth


def _offset_m(lat: float, lon: float, north_m: float,
              east_m: float) -> tuple[float, float]:
    return (lat + north_m / METERS_PER_DEGREE,
            lon + east_m / (METERS_PER_DEGREE
                            * max(math.cos(math.radians(lat)), 1e-9)))


def generate_poi_db(config: FleetConfig) -> PoiDatabase:
    """Gaussian "high street" clusters; every cluster contains one
    guaranteed adjacent pair so a dense commercial site always exists."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(2)[0])
    db = PoiDatabase()
    margin = (3.0 * config.poi_cluster_sigma_m + 100.0) / METERS_PER_DEGREE
    for _ in range(config.poi_cluster_count):
        center = config.region.random_point(rng, margin_deg=margin)
        pair = _offset_m(*center, 0.0, 12.0)
        db.add(*config.region.clamp(*center))
        db.add(*config.region.clamp(*pair))
        for _ in range(max(0, config.pois_per_cluster - 2)):
            lat, lon = _offset_m(*center,
                                 float(rng.normal(0, config.poi_cluster_sigma_m)),
                                 float(rng.normal(0, config.poi_cluster_sigma_m)))
            db.add(*config.region.clamp(lat, lon))
    return db


def dense_poi_sites(pois: PoiDatabase, radius_m: float = 40.0,
                    min_count: int = 2) -> list[int]:
    """POIs with enough close neighbors to classify a stop as commercial."""
    return [i for i in range(len(pois))
            if pois.count_within(pois.lats[i], pois.lons[i],
                                 radius_m) >= min_count]


class _TraceBuilder:
    """Accumulates one trip's samples: motion legs and stationary dwells."""

    def __init__(self, policy_id: str, start_time: float, home: tuple[float, float],
                 period_s: float):
        self.policy_id = policy_id
        self.period = period_s
        self.t = start_time
        self.pos = home
        self.samples = [self._sample(start_time, home, EngineStatus.ON)]

    def _sample(self, ts: float, pos: tuple[float, float],
                status: EngineStatus) -> GpsSample:
        return GpsSample(policy_id=self.policy_id, latitude=pos[0],
                         longitude=pos[1], timestamp=ts,
                         engine_status=status, accel=(0.0, 0.0, 0.0))

    def drive_to(self, dest: tuple[float, float], speed_ms: float) -> None:
        from .geofeatures import haversine_m
        dist = haversine_m(self.pos[0], self.pos[1], dest[0], dest[1])
        steps = max(1, math.ceil(dist / (speed_ms * self.period)))
        lat0, lon0 = self.pos
        for i in range(1, steps + 1):
            frac = i / steps
            self.t += self.period
            pos = (lat0 + (dest[0] - lat0) * frac,
                   lon0 + (dest[1] - lon0) * frac)
            self.samples.append(self._sample(self.t, pos,
                                             EngineStatus.RUNNING))
        self.pos = dest

    def dwell(self, duration_s: float) -> None:
        ticks = max(1, int(duration_s / self.period))
        for _ in range(ticks):
            self.t += self.period
            self.samples.append(self._sample(self.t, self.pos,
                                             EngineStatus.RUNNING))

    def finish(self) -> list[GpsSample]:
        last = self.samples[-1]
        self.samples[-1] = self._sample(last.timestamp,
                                        (last.latitude, last.longitude),
                                        EngineStatus.OFF)
        return self.samples


def _near(point: tuple[float, float], rng: np.random.Generator,
          max_m: float, region: Region) -> tuple[float, float]:
    angle = rng.uniform(0, 2 * math.pi)
    dist = rng.uniform(0, max_m)
    lat, lon = _offset_m(point[0], point[1], dist * math.sin(angle),
                         dist * math.cos(angle))
    return region.clamp(lat, lon, margin_deg=1e-4)


def _residential_site(rng: np.random.Generator, region: Region,
                      pois: PoiDatabase, home: tuple[float, float],
                      anchor: tuple[float, float],
                      spread_m: float) -> tuple[float, float]:
    """A drop-off spot that is neither commercial nor the driver's home."""
    from .geofeatures import haversine_m
    for _ in range(40):
        lat, lon = _near(anchor, rng, spread_m, region)
        if pois.count_within(lat, lon, 50.0) >= 2:
            continue
        if haversine_m(lat, lon, home[0], home[1]) <= 200.0:
            continue
        return lat, lon
    return _near(anchor, rng, spread_m, region)


def _commercial_site(rng: np.random.Generator, region: Region,
                     pois: PoiDatabase, dense: list[int],
                     near_idx: int | None = None) -> tuple[float, float]:
    idx = near_idx if near_idx is not None else int(rng.choice(dense))
    lat, lon = _near((pois.lats[idx], pois.lons[idx]), rng, 8.0, region)
    return lat, lon


def generate_trip_trace(kind: TripKind, home: tuple[float, float],
                        pois: PoiDatabase, rng: np.random.Generator,
                        config: FleetConfig,
                        policy_id: str = "P00000",
                        day_epoch: int | None = None) -> Trip:
    """One trip of the given archetype; deterministic under the rng state."""
    region = config.region
    if day_epoch is None:
        day_epoch = config.start_epoch
    dense = dense_poi_sites(pois)
    if kind is not TripKind.PERSONAL and not dense:
        raise ValueError("POI database has no dense commercial sites")

    if kind is TripKind.DELIVERY:
        hour = float(np.clip(rng.normal(17.5, 1.2), 15.0, 20.5))
        n_stops = int(rng.integers(6, 16))
    elif kind is TripKind.CONFUSABLE:
        hour = float(rng.uniform(9.0, 19.0))
        n_stops = 2 + int(rng.integers(0, 2))
    else:
        hour = float(rng.uniform(8.0, 18.0))
        n_stops = int(rng.choice(4, p=[0.35, 0.35, 0.2, 0.1]))

    start = day_epoch + hour * 3600.0
    builder = _TraceBuilder(policy_id, start, home, config.sample_period_s)

    if kind is TripKind.DELIVERY:
        # work one neighborhood: long shop pickups alternating with short
        # residential drop-offs, then home
        hub = int(rng.choice(dense))
        hub_pos = (pois.lats[hub], pois.lons[hub])
        for i in range(n_stops):
            speed = float(rng.uniform(8.0, 15.0))
            if i % 2 == 0:
                stop = _commercial_site(rng, region, pois, dense,
                                        near_idx=hub)
                wait = float(rng.uniform(5.0, 10.0)) * 60.0
            else:
                stop = _residential_site(rng, region, pois, home, hub_pos,
                                         spread_m=1200.0)
                wait = float(rng.uniform(1.5, 4.0)) * 60.0
            builder.drive_to(stop, speed)
            builder.dwell(wait)
    elif kind is TripKind.CONFUSABLE:
        # an errand run: two genuine shop visits, maybe one drop-in
        for i in range(n_stops):
            speed = float(rng.uniform(8.0, 15.0))
            if i < 2:
                stop = _commercial_site(rng, region, pois, dense)
                wait = float(rng.uniform(5.0, 8.0)) * 60.0
            else:
                stop = _residential_site(rng, region, pois, home, home,
                                         spread_m=2500.0)
                wait = float(rng.uniform(1.5, 4.0)) * 60.0
            builder.drive_to(stop, speed)
            builder.dwell(wait)
    else:
        for _ in range(n_stops):
            speed = float(rng.uniform(8.0, 15.0))
            if rng.random() < 0.4:
                stop = home                       # swing past home
                wait = float(rng.uniform(2.0, 6.0)) * 60.0
            else:
                stop = _residential_site(rng, region, pois, home, home,
                                         spread_m=2500.0)
                wait = float(rng.uniform(1.5, 6.0)) * 60.0
            builder.drive_to(stop, speed)
            builder.dwell(wait)

    builder.drive_to(home, float(rng.uniform(8.0, 15.0)))
    samples = builder.finish()
    trip_id = make_trip_id(policy_id, samples[0].timestamp)
    stamped = tuple(
        GpsSample(policy_id=s.policy_id, latitude=s.latitude,
                  longitude=s.longitude, timestamp=s.timestamp,
                  engine_status=s.engine_status, accel=s.accel,
                  trip_id=trip_id)
        for s in samples)
    return Trip(trip_id=trip_id, policy_id=policy_id, samples=stamped,
                start_time=samples[0].timestamp,
                end_time=samples[-1].timestamp)


@dataclass
class PolicyBundle:
    policy_id: str
    home: tuple[float, float]
    k: int
    trips: list[Trip]
    kinds: list[TripKind]


def _policy_plan(rng: np.random.Generator, k: int,
                 config: FleetConfig) -> list[TripKind]:
    lo, hi = config.trips_per_policy
    n_trips = int(rng.integers(lo, hi + 1))
    if k == 1:
        n_trips = max(n_trips, 2)
        a, b = config.delivery_mix_beta
        q = float(rng.beta(a, b))
        n_delivery = int(np.clip(rng.binomial(n_trips, q), 1, n_trips - 1))
        kinds = ([TripKind.DELIVERY] * n_delivery
                 + [TripKind.PERSONAL] * (n_trips - n_delivery))
        perm = rng.permutation(n_trips)
        return [kinds[i] for i in perm]
    a, b = config.confusable_beta
    c = min(float(rng.beta(a, b)), config.confusable_cap)
    return [TripKind.CONFUSABLE if rng.random() < c else TripKind.PERSONAL
            for _ in range(n_trips)]


def iter_fleet(config: FleetConfig,
               pois: PoiDatabase | None = None) -> Iterator[PolicyBundle]:
    """Per-policy bundles, lazily; each policy has its own child stream."""
    if pois is None:
        pois = generate_poi_db(config)
    root = np.random.SeedSequence(config.seed).spawn(2)[1]
    streams = root.spawn(config.n_policies)
    home_margin = 0.003
    for i in range(config.n_policies):
        rng = np.random.default_rng(streams[i])
        policy_id = f"P{i:05d}"
        home = config.region.random_point(rng, margin_deg=home_margin)
        k = 1 if rng.random() < config.delivery_fraction else 0
        kinds = _policy_plan(rng, k, config)
        day_pool = max(DAY_POOL, len(kinds))
        days = sorted(int(d) for d in rng.choice(day_pool, size=len(kinds),
                                                 replace=False))
        trips = []
        for kind, day in zip(kinds, days):
            trips.append(generate_trip_trace(
                kind, home, pois, rng, config, policy_id=policy_id,
                day_epoch=config.start_epoch + day * SECONDS_PER_DAY))
        yield PolicyBundle(policy_id=policy_id, home=home, k=k, trips=trips,
                           kinds=kinds)


def truth_from_bundles(bundles: Iterable[PolicyBundle]) -> GroundTruth:
    truth = GroundTruth()
    for b in bundles:
        truth.policy_k[b.policy_id] = b.k
        for trip, kind in zip(b.trips, b.kinds):
            truth.trip_labels[trip.trip_id] = (
                1 if kind is TripKind.DELIVERY else 0)
            truth.trip_kinds[trip.trip_id] = kind.value
            truth.trip_policy[trip.trip_id] = b.policy_id
    return truth


def generate_fleet(config: FleetConfig,
                   ) -> tuple[list[GpsSample], GroundTruth]:
    """Materialized fleet for small configs; prefer write_fleet at scale."""
    samples: list[GpsSample] = []
    bundles = []
    for bundle in iter_fleet(config):
        bundles.append(bundle)
        for trip in bundle.trips:
            samples.extend(trip.samples)
    truth = truth_from_bundles(bundles)
    truth.verify()
    return samples, truth


@dataclass(frozen=True)
class FleetPaths:
    samples: str
    pois: str
    homes: str
    truth_policies: str
    truth_trips: str


def write_fleet(config: FleetConfig, out_dir: str) -> tuple[FleetPaths, GroundTruth]:
    """Emit the full on-disk fleet: samples, POIs, homes, ground truth."""
    import json
    import os

    from .ingest import sample_to_obj

    os.makedirs(out_dir, exist_ok=True)
    paths = FleetPaths(
        samples=os.path.join(out_dir, "samples.jsonl"),
        pois=os.path.join(out_dir, "pois.csv"),
        homes=os.path.join(out_dir, "homes.csv"),
        truth_policies=os.path.join(out_dir, "truth_policies.csv"),
        truth_trips=os.path.join(out_dir, "truth_trips.csv"),
    )
    pois = generate_poi_db(config)
    pois.to_csv(paths.pois)

    homes: dict[str, tuple[float, float]] = {}
    truth = GroundTruth()
    with open(paths.samples, "w", encoding="utf-8") as fh:
        for bundle in iter_fleet(config, pois=pois):
            homes[bundle.policy_id] = bundle.home
            truth.policy_k[bundle.policy_id] = bundle.k
            for trip, kind in zip(bundle.trips, bundle.kinds):
                truth.trip_labels[trip.trip_id] = (
                    1 if kind is TripKind.DELIVERY else 0)
                truth.trip_kinds[trip.trip_id] = kind.value
                truth.trip_policy[trip.trip_id] = bundle.policy_id
                for s in trip.samples:
                    fh.write(json.dumps(sample_to_obj(s), sort_keys=True))
                    fh.write("\n")
    truth.verify()

    from .geofeatures import write_homes_csv
    write_homes_csv(homes, paths.homes)
    truth.write_csvs(paths.truth_policies, paths.truth_trips)
    return paths, truth
