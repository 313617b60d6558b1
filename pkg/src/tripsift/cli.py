"""Command-line entry points for the full pipeline.

Each subcommand is a thin wrapper over one module; files are the only
interchange (samples JSONL, feature CSV, counts CSV, JSON artifacts).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from datetime import datetime, timezone

from . import synthgen
from .betamix import (
    HmcConfig,
    hmc_sample,
    load_artifact,
    posterior_predictive,
    priority_score,
    read_counts_csv,
    render_score_table_csv,
    save_artifact,
    score_anchor,
    score_table,
)
from .geofeatures import (
    extract_features,
    read_features_csv,
    read_homes_csv,
    write_features_csv,
    PoiDatabase,
)
from .ingest import (
    iter_trips_jsonl,
    read_samples_jsonl,
    segment_trips,
    write_trips_jsonl,
)
from .pipeline import run_weekly_update, update_fit_config
from .store import Store
from .tripclf import (
    FeatureMatrix,
    NOISE,
    evaluate_classifier,
    load_model,
    save_model,
    select_delivery_cluster,
    shortlist_clusters,
    standardize,
    train_forest,
)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _read_labels_csv(path: str) -> dict[str, int]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {
                "trip_id", "label"}.issubset(reader.fieldnames):
            raise SystemExit(f"{path}: expected header trip_id,label")
        return {row["trip_id"]: int(row["label"]) for row in reader}


def _load_matrix(features_path: str,
                 labels_path: str | None) -> FeatureMatrix:
    rows = read_features_csv(features_path)
    labels = _read_labels_csv(labels_path) if labels_path else None
    return FeatureMatrix.from_features(
        [(trip_id, feats) for trip_id, _, feats in rows], labels=labels)


def _parse_now(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        pass
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


# ---- synth ----

_SYNTH_FIELDS = {
    "n_policies": int,
    "delivery_fraction": float,
    "sample_period_s": float,
    "seed": int,
    "poi_cluster_count": int,
    "pois_per_cluster": int,
}


def _synth_config(args) -> synthgen.FleetConfig:
    values: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise SystemExit(
                        f"{args.config}:{line_no}: expected key=value")
                key, value = (part.strip() for part in line.split("=", 1))
                if key == "trips_per_policy":
                    lo, hi = value.split(",")
                    values[key] = (int(lo), int(hi))
                elif key in _SYNTH_FIELDS:
                    values[key] = _SYNTH_FIELDS[key](value)
                else:
                    raise SystemExit(
                        f"{args.config}:{line_no}: unknown key {key}")
    for key in _SYNTH_FIELDS:
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    if args.trips_min is not None or args.trips_max is not None:
        if args.trips_min is None or args.trips_max is None:
            raise SystemExit("--trips-min and --trips-max go together")
        values["trips_per_policy"] = (args.trips_min, args.trips_max)
    return synthgen.FleetConfig(**values)


def _cmd_synth(args) -> None:
    paths, truth = synthgen.write_fleet(_synth_config(args), args.out)
    _emit({
        "samples": paths.samples,
        "pois": paths.pois,
        "homes": paths.homes,
        "truth_policies": paths.truth_policies,
        "truth_trips": paths.truth_trips,
        "policies": len(truth.policy_k),
        "trips": len(truth.trip_labels),
    })


# ---- segment / features ----

def _cmd_segment(args) -> None:
    by_policy, issues = read_samples_jsonl(args.samples)
    for issue in issues:
        print(f"line {issue.line_no}: {issue.message}", file=sys.stderr)
    trips = [t for samples in by_policy.values()
             for t in segment_trips(samples,
                                    idle_window_minutes=args.idle_minutes)]
    trips.sort(key=lambda t: (t.policy_id, t.start_time))
    write_trips_jsonl(trips, args.out)
    _emit({"trips": len(trips), "policies": len(by_policy),
           "skipped_lines": len(issues), "out": args.out})


def _cmd_features(args) -> None:
    pois = PoiDatabase.from_csv(args.pois)
    homes = read_homes_csv(args.homes)
    rows = []
    for trip in iter_trips_jsonl(args.trips):
        home = homes.get(trip.policy_id)
        if home is None:
            raise SystemExit(f"no home location for {trip.policy_id}")
        rows.append((trip.trip_id, trip.policy_id,
                     extract_features(trip, pois, home,
                                      utc_offset_s=args.utc_offset_s)))
    write_features_csv(rows, args.out)
    _emit({"trips": len(rows), "out": args.out})


# ---- tripclf ----

def _cmd_tripclf_train(args) -> None:
    matrix = _load_matrix(args.features, args.labels)
    std = None
    if args.standardize:
        matrix, std = standardize(matrix)
    model = train_forest(matrix, n_trees=args.trees,
                         max_depth=args.max_depth, min_leaf=args.min_leaf,
                         seed=args.seed)
    save_model(model, args.out, standardization=std)
    _emit({"out": args.out, "trees": model.n_trees,
           "decision_threshold": model.decision_threshold,
           "digest": model.digest()})


def _cmd_tripclf_predict(args) -> None:
    model, std = load_model(args.model)
    rows = read_features_csv(args.features)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trip_id", "policy_id", "probability", "label"])
        for trip_id, policy_id, feats in rows:
            vector = feats.as_vector()
            if std is not None:
                vector = std.apply(vector)
            prob = float(model.predict_proba([vector])[0])
            label = int(prob >= model.decision_threshold)
            writer.writerow([trip_id, policy_id, repr(prob), label])
    _emit({"trips": len(rows), "out": args.out})


def _cmd_tripclf_eval(args) -> None:
    model, std = load_model(args.model)
    matrix = _load_matrix(args.features, args.labels)
    if std is not None:
        matrix = FeatureMatrix(rows=std.apply(matrix.rows),
                               ids=matrix.ids, labels=matrix.labels)
    _emit(evaluate_classifier(model, matrix).to_dict())


def _cmd_tripclf_cluster(args) -> None:
    matrix = _load_matrix(args.features, None)
    labels = shortlist_clusters(matrix, pca_dims=args.dims,
                                dbscan_eps=args.eps, min_pts=args.min_pts)
    pick = select_delivery_cluster(matrix, labels)
    sizes: dict[str, int] = {}
    for label in labels:
        key = "noise" if label == NOISE else str(int(label))
        sizes[key] = sizes.get(key, 0) + 1
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trip_id", "cluster"])
            for trip_id, label in zip(matrix.ids, labels):
                writer.writerow([trip_id, int(label)])
    _emit({"clusters": len(sizes) - ("noise" in sizes),
           "sizes": sizes, "delivery_cluster": pick,
           **({"out": args.out} if args.out else {})})


# ---- betamix ----

def _cmd_betamix_fit(args) -> None:
    counts = read_counts_csv(args.counts)
    config = HmcConfig(chains=args.chains, warmup=args.warmup,
                       draws_per_chain=args.draws,
                       leapfrog_steps=args.leapfrog, seed=args.seed)
    samples = hmc_sample(counts, config=config)
    table_csv = render_score_table_csv(
        score_table(samples, x_max=args.table_x_max))
    save_artifact(samples, args.out, score_table_csv=table_csv)
    diag = samples.diagnostics
    _emit({"out": args.out, "policies": diag["n_policies"],
           "draws": diag["draws"], "max_rhat": max(diag["rhat"].values()),
           "min_ess": min(diag["ess"].values()),
           "divergences": sum(diag["divergences"]),
           **samples.natural_means()})


def _cmd_betamix_score(args) -> None:
    samples = load_artifact(args.artifact)
    anchor = score_anchor(samples)
    if args.counts is None:
        if args.x is None or args.y is None:
            raise SystemExit("need either --counts or both --x and --y")
        p = posterior_predictive(args.x, args.y, samples)
        _emit({"x": args.x, "y": args.y, "posterior_probability": p,
               "score": priority_score(p, anchor)})
        return
    counts = read_counts_csv(args.counts)
    cache: dict[tuple[int, int], tuple[float, float]] = {}
    rows = [["policy_id", "x", "y", "posterior_probability", "score"]]
    for c in counts:
        if (c.x, c.y) not in cache:
            p = posterior_predictive(c.x, c.y, samples)
            cache[(c.x, c.y)] = (p, priority_score(p, anchor))
        p, s = cache[(c.x, c.y)]
        rows.append([c.policy_id, c.x, c.y, repr(p), repr(s)])
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(rows)
    else:
        csv.writer(sys.stdout).writerows(rows)


def _cmd_betamix_table(args) -> None:
    samples = load_artifact(args.artifact)
    if args.x_max is None:
        with open(args.artifact, encoding="utf-8") as fh:
            embedded = json.load(fh).get("score_table_csv")
        if embedded is not None:
            sys.stdout.write(embedded)
            return
        args.x_max = 50
    sys.stdout.write(render_score_table_csv(
        score_table(samples, x_max=args.x_max)))


def _cmd_betamix_diagnostics(args) -> None:
    _emit(load_artifact(args.artifact).diagnostics)


# ---- update / serve ----

def _cmd_update(args) -> None:
    store = Store.create(args.store)
    overrides = {
        name: value for name, value in (
            ("chains", args.chains), ("warmup", args.warmup),
            ("draws_per_chain", args.draws),
            ("leapfrog_steps", args.leapfrog), ("seed", args.fit_seed),
        ) if value is not None}
    config = dataclasses.replace(update_fit_config(), **overrides) \
        if overrides else None
    snapshot = run_weekly_update(store, _parse_now(args.now),
                                 window_days=args.window_days,
                                 refit=not args.freeze,
                                 fit_config=config,
                                 utc_offset_s=args.utc_offset_s)
    _emit({"date": snapshot.date, "policies": len(snapshot.policies),
           "model_versions": snapshot.model_versions,
           "ranking": store.ranking_path(snapshot.date)})


def _cmd_serve(args) -> None:
    from .service import serve
    serve(args.store, host=args.host, port=args.port,
          static_dir=args.static)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tripsift",
        description="delivery-trip detection and policy triage")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic fleet")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key=value file of fleet settings")
    p.add_argument("--n-policies", dest="n_policies", type=int)
    p.add_argument("--delivery-fraction", dest="delivery_fraction",
                   type=float)
    p.add_argument("--trips-min", type=int)
    p.add_argument("--trips-max", type=int)
    p.add_argument("--sample-period-s", dest="sample_period_s", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--poi-cluster-count", dest="poi_cluster_count",
                   type=int)
    p.add_argument("--pois-per-cluster", dest="pois_per_cluster", type=int)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("segment", help="split samples into trips")
    p.add_argument("--samples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--idle-minutes", type=float, default=5.0)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("features", help="feature vectors for trips")
    p.add_argument("--trips", required=True)
    p.add_argument("--pois", required=True)
    p.add_argument("--homes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--utc-offset-s", type=float, default=0.0)
    p.set_defaults(func=_cmd_features)

    clf = sub.add_parser("tripclf", help="trip classifier").add_subparsers(
        dest="tripclf_command", required=True)

    p = clf.add_parser("train", help="fit the forest on labeled features")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standardize", action="store_true")
    p.set_defaults(func=_cmd_tripclf_train)

    p = clf.add_parser("predict", help="probabilities and labels")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_tripclf_predict)

    p = clf.add_parser("eval", help="accuracy report against labels")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=_cmd_tripclf_eval)

    p = clf.add_parser("cluster", help="unlabeled shortlist via PCA scan")
    p.add_argument("--features", required=True)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--eps", type=float)
    p.add_argument("--min-pts", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_tripclf_cluster)

    mix = sub.add_parser("betamix", help="mixture fit and scoring"
                         ).add_subparsers(dest="betamix_command",
                                          required=True)

    p = mix.add_parser("fit", help="sample the posterior over counts")
    p.add_argument("--counts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--draws", type=int, default=1250)
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--leapfrog", type=int, default=32)
    p.add_argument("--table-x-max", type=int, default=50)
    p.set_defaults(func=_cmd_betamix_fit)

    p = mix.add_parser("score", help="score counts against a fit")
    p.add_argument("--artifact", required=True)
    p.add_argument("--counts")
    p.add_argument("--x", type=int)
    p.add_argument("--y", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_betamix_score)

    p = mix.add_parser("table", help="print the score lookup table")
    p.add_argument("--artifact", required=True)
    p.add_argument("--x-max", type=int)
    p.set_defaults(func=_cmd_betamix_table)

    p = mix.add_parser("diagnostics", help="print fit diagnostics")
    p.add_argument("--artifact", required=True)
    p.set_defaults(func=_cmd_betamix_diagnostics)

    p = sub.add_parser("update", help="classify, refit, publish a ranking")
    p.add_argument("--store", required=True)
    p.add_argument("--now", required=True,
                   help="ISO 8601 timestamp or epoch seconds")
    p.add_argument("--window-days", type=int, default=30)
    p.add_argument("--freeze", action="store_true",
                   help="reuse the latest fit instead of refitting")
    p.add_argument("--utc-offset-s", type=float, default=0.0)
    p.add_argument("--chains", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--leapfrog", type=int)
    p.add_argument("--fit-seed", type=int)
    p.set_defaults(func=_cmd_update)

    p = sub.add_parser("serve", help="run the triage HTTP service")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", help="directory with the UI bundle")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
