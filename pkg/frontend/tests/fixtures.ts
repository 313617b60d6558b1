import type {
  PolicyDetail,
  QueuePage,
  QueueRow,
  Review,
  TripDetail,
  TripSummary,
} from "../src/types.js";

export function makeReview(
  policyId: string,
  verdict: Review["verdict"],
  over: Partial<Review> = {},
): Review {
  return {
    policy_id: policyId,
    verdict,
    reviewer: "alice",
    note: null,
    timestamp: 1_760_000_000,
    ...over,
  };
}

export function makeRow(id: string, over: Partial<QueueRow> = {}): QueueRow {
  return {
    policy_id: id,
    x: 12,
    y: 5,
    posterior_probability: 0.42,
    score: 1.6,
    window_start: 1_758_000_000,
    window_end: 1_760_592_000,
    last_review: null,
    ...over,
  };
}

export function makePage(
  rows: QueueRow[],
  over: Partial<QueuePage> = {},
): QueuePage {
  return {
    date: "2026-03-01",
    window_days: 30,
    page: 1,
    page_size: 50,
    total: rows.length,
    rows,
    ...over,
  };
}

export function makeTripSummary(
  id: string,
  over: Partial<TripSummary> = {},
): TripSummary {
  return {
    trip_id: id,
    trip_end_time: 1_760_100_000,
    probability: 0.25,
    label: 0,
    features: null,
    start_time: 1_760_096_400,
    ...over,
  };
}

export function makePolicyDetail(
  row: QueueRow,
  trips: TripSummary[],
  snapshotDate = "2026-03-01",
): PolicyDetail {
  return { snapshot_date: snapshotDate, policy: row, trips };
}

export function makeTripDetail(over: Partial<TripDetail> = {}): TripDetail {
  return {
    trip_id: "trip-1",
    policy_id: "pol-1",
    start_time: 1_760_096_400,
    end_time: 1_760_100_000,
    polyline: [
      { lat: 51.5, lon: -0.1, t: 1_760_096_400 },
      { lat: 51.505, lon: -0.095, t: 1_760_097_000 },
      { lat: 51.51, lon: -0.09, t: 1_760_097_600 },
      { lat: 51.515, lon: -0.085, t: 1_760_098_200 },
    ],
    stationary_points: [
      {
        latitude: 51.505,
        longitude: -0.095,
        start_time: 1_760_097_000,
        end_time: 1_760_097_600,
        duration_s: 600,
        classification: "commercial",
      },
      {
        latitude: 51.51,
        longitude: -0.09,
        start_time: 1_760_097_700,
        end_time: 1_760_097_820,
        duration_s: 120,
        classification: "residential",
      },
      {
        latitude: 51.515,
        longitude: -0.085,
        start_time: 1_760_098_000,
        end_time: 1_760_098_100,
        duration_s: 100,
        classification: null,
      },
    ],
    home: { lat: 51.5, lon: -0.1 },
    prediction: null,
    ...over,
  };
}
