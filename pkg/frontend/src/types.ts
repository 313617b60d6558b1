// Wire types mirroring the service JSON payloads exactly.  The client
// renders these as-is; scores, counts and classifications are never
// recomputed here.

export interface Review {
  policy_id: string;
  verdict: "CONFIRMED_DELIVERY" | "NOT_DELIVERY";
  reviewer: string;
  note?: string | null;
  timestamp: number;
}

export interface QueueRow {
  policy_id: string;
  x: number;
  y: number;
  posterior_probability: number;
  score: number;
  window_start: number;
  window_end: number;
  last_review: Review | null;
}

export interface RankingsIndex {
  dates: string[];
  latest: string;
}

export interface QueuePage {
  date: string;
  window_days: number;
  page: number;
  page_size: number;
  total: number;
  rows: QueueRow[];
}

export interface TripSummary {
  trip_id: string;
  trip_end_time: number;
  probability: number;
  label: number;
  features: Record<string, number> | null;
  start_time: number;
}

export interface PolicyDetail {
  snapshot_date: string;
  policy: QueueRow;
  trips: TripSummary[];
}

export interface TrackPoint {
  lat: number;
  lon: number;
  t: number;
}

export interface StationaryPoint {
  latitude: number;
  longitude: number;
  start_time: number;
  end_time: number;
  duration_s: number;
  classification: "commercial" | "residential" | "home" | null;
}

export interface Prediction {
  trip_id: string;
  policy_id: string;
  trip_end_time: number;
  label: number;
  probability: number;
}

export interface TripDetail {
  trip_id: string;
  policy_id: string;
  start_time: number;
  end_time: number;
  polyline: TrackPoint[];
  stationary_points: StationaryPoint[];
  home: { lat: number; lon: number } | null;
  prediction: Prediction | null;
}

export interface ReviewBody {
  verdict: string;
  reviewer: string;
  note?: string;
  timestamp?: number;
}

export interface ReviewAck {
  status: string;
  review: Review;
}

export interface Stats {
  total_reviews: number;
  reviewed_policies: number;
  confirmed_policies: number;
  confirmed_rate: number | null;
  latest_snapshot: string | null;
}

export interface ScoreTable {
  version: string;
  x_max: number;
  y_max: number;
  scores: (number | null)[][];
}
