"""Weekly cadence: classify new trips, aggregate the rolling window,
score every active policy, and freeze a dated ranking snapshot."""

from __future__ import annotations

from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from .betamix import (
    HmcConfig,
    Hyperpriors,
    PolicyCounts,
    hmc_sample,
    posterior_predictive,
    priority_score,
    render_score_table_csv,
    score_anchor,
    score_table,
)
from .geofeatures import TripFeatures, extract_features
from .store import (
    MissingArtifactError,
    PredictionRecord,
    RankedPolicy,
    RankingSnapshot,
    Store,
)
from .tripclf import ForestModel, Standardization

SECONDS_PER_DAY = 86_400.0
UPDATE_SEED = 7


def update_fit_config() -> HmcConfig:
    """Refit budget for the weekly cadence: enough draws for stable
    posterior-predictive means without dominating the update wall time."""
    return HmcConfig(chains=4, warmup=400, draws_per_chain=600,
                     leapfrog_steps=24, seed=UPDATE_SEED)


def aggregate_counts(predictions: Sequence[PredictionRecord],
                     window_end: float,
                     window_days: float = 30) -> list[PolicyCounts]:
    """Per-policy (x, y) over the half-open window
    (window_end - window_days days, window_end].

    Policies with no trips in the window do not appear.
    """
    lo = window_end - window_days * SECONDS_PER_DAY
    agg: dict[str, list[int]] = {}
    for rec in predictions:
        if lo < rec.trip_end_time <= window_end:
            entry = agg.setdefault(rec.policy_id, [0, 0])
            entry[0] += 1
            entry[1] += rec.label
    return [PolicyCounts(policy_id=pid, x=x, y=y)
            for pid, (x, y) in sorted(agg.items())]


def _predict_row(model: ForestModel, std: Standardization | None,
                 features: TripFeatures) -> tuple[float, int]:
    row = np.asarray(features.as_vector(), dtype=np.float64)[None, :]
    if std is not None:
        row = std.apply(row)
    prob = float(model.predict_proba(row)[0])
    return prob, int(prob >= model.decision_threshold)


def classify_new_trips(store: Store, utc_offset_s: float = 0.0,
                       batch_size: int = 2000) -> int:
    """Append predictions for trips the journal has not seen yet.

    Model and geodata load lazily, so a store with nothing new to do
    needs no artifacts at all.
    """
    done = store.predicted_trip_ids()
    model = std = pois = homes = None
    batch: list[PredictionRecord] = []
    appended = 0
    for trip in store.iter_trips():
        if trip.trip_id in done:
            continue
        if model is None:
            model, std = store.latest_tripclf()
            pois = store.load_pois()
            homes = store.load_homes()
        home = homes.get(trip.policy_id)
        if home is None:
            raise ValueError(f"no home location for {trip.policy_id}")
        features = extract_features(trip, pois, home,
                                    utc_offset_s=utc_offset_s)
        prob, label = _predict_row(model, std, features)
        batch.append(PredictionRecord(
            trip_id=trip.trip_id, policy_id=trip.policy_id,
            trip_end_time=trip.end_time, label=label, probability=prob))
        if len(batch) >= batch_size:
            store.append_predictions(batch)
            appended += len(batch)
            batch = []
    if batch:
        store.append_predictions(batch)
        appended += len(batch)
    return appended


def snapshot_date(now: float) -> str:
    return datetime.fromtimestamp(now, tz=timezone.utc).strftime("%Y-%m-%d")


def run_weekly_update(store: Store, now: float, window_days: int = 30,
                      refit: bool = True,
                      priors: Hyperpriors | None = None,
                      fit_config: HmcConfig | None = None,
                      utc_offset_s: float = 0.0) -> RankingSnapshot:
    """One scoring pass; rerunning with the same `now` and journal
    rewrites byte-identical artifacts."""
    with store.lock():
        classify_new_trips(store, utc_offset_s=utc_offset_s)
        predictions = store.load_predictions()
        counts = aggregate_counts(predictions, now, window_days)
        date = snapshot_date(now)

        if not counts:
            snapshot = RankingSnapshot(date=date, window_end=now,
                                       window_days=window_days,
                                       policies=[], model_versions={})
            store.write_ranking(snapshot)
            return snapshot

        if refit:
            config = fit_config or update_fit_config()
            samples = hmc_sample(counts, priors=priors, config=config)
            x_max = max(c.x for c in counts)
            csv_text = render_score_table_csv(score_table(samples, x_max))
            store.save_betamix(samples, date, score_table_csv=csv_text)
            betamix_version = date
        else:
            betamix_version = store.latest_betamix_version()
            if betamix_version is None:
                raise MissingArtifactError("no mixture fit to freeze")
            samples = store.latest_betamix()

        anchor = score_anchor(samples)
        window_start = now - window_days * SECONDS_PER_DAY
        pp_cache: dict[tuple[int, int], float] = {}
        rows = []
        for c in counts:
            pp = pp_cache.get((c.x, c.y))
            if pp is None:
                pp = posterior_predictive(c.x, c.y, samples)
                pp_cache[(c.x, c.y)] = pp
            rows.append(RankedPolicy(
                policy_id=c.policy_id, x=c.x, y=c.y,
                posterior_probability=pp,
                score=priority_score(pp, anchor),
                window_start=window_start, window_end=now))
        rows.sort(key=lambda r: (-r.score, -r.y, r.policy_id))

        versions = {"betamix": betamix_version}
        clf_version = store.latest_tripclf_version()
        if clf_version is not None:
            versions["tripclf"] = clf_version
        snapshot = RankingSnapshot(date=date, window_end=now,
                                   window_days=window_days,
                                   policies=rows, model_versions=versions)
        store.write_ranking(snapshot)
        return snapshot
