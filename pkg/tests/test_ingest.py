"""Sample parsing, idle-gap segmentation, and trip validation."""

import json

import pytest
from hypothesis import given, strategies as st

from tripsift.ingest import (
    EngineStatus,
    GpsSample,
    Trip,
    make_trip_id,
    parse_samples,
    read_trips_jsonl,
    segment_trips,
    validate_trip,
    write_trips_jsonl,
)


def line(policy="P1", lat=51.5, lon=-0.1, ts=1000, engine="on", **extra):
    obj = {"policy_id": policy, "lat": lat, "lon": lon, "ts": ts,
           "engine": engine, **extra}
    return json.dumps(obj)


def walk(policy="P1", t0=0, gaps_s=(), lat0=51.5, lon0=-0.1, step=1e-4):
    """Samples separated by the given gaps, drifting east each step."""
    ts, lat, lon = t0, lat0, lon0
    out = [GpsSample(policy, lat, lon, ts)]
    for g in gaps_s:
        ts += g
        lon += step
        out.append(GpsSample(policy, lat, lon, ts))
    return out


class TestParseSamples:
    def test_well_formed_line_parses_identically(self):
        groups, issues = parse_samples([line(accel=[0.1, 0.2, 0.3])])
        assert issues == []
        s = groups["P1"][0]
        assert (s.latitude, s.longitude, s.timestamp) == (51.5, -0.1, 1000)
        assert s.engine_status is EngineStatus.ON
        assert s.accel == (0.1, 0.2, 0.3)

    def test_out_of_range_latitude_rejected(self):
        groups, issues = parse_samples([line(lat=91.0)])
        assert groups == {}
        assert len(issues) == 1 and issues[0].line_no == 1
        assert "latitude" in issues[0].message

    def test_interleaved_policies_grouped_and_sorted(self):
        lines = [line("A", ts=30), line("B", ts=10), line("A", ts=10),
                 line("B", ts=20)]
        groups, issues = parse_samples(lines)
        assert issues == []
        assert [s.timestamp for s in groups["A"]] == [10, 30]
        assert [s.timestamp for s in groups["B"]] == [10, 20]

    def test_malformed_lines_collected_with_numbers(self):
        lines = [line(), "not json", line(engine="warp"),
                 json.dumps([1, 2]), line(ts=2000)]
        groups, issues = parse_samples(lines)
        assert [i.line_no for i in issues] == [2, 3, 4]
        assert len(groups["P1"]) == 2

    def test_strict_raises_with_line_number(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_samples([line(), "garbage"], strict=True)

    def test_blank_lines_skipped(self):
        groups, issues = parse_samples(["", line(), "   \n"])
        assert issues == [] and len(groups["P1"]) == 1

    def test_missing_field_reported(self):
        obj = json.loads(line())
        del obj["lat"]
        _, issues = parse_samples([json.dumps(obj)])
        assert "lat" in issues[0].message

    def test_bad_accel_length_rejected(self):
        _, issues = parse_samples([line(accel=[1.0, 2.0])])
        assert len(issues) == 1

    def test_tied_timestamps_keep_input_order(self):
        lines = [line(lon=-0.1, ts=10), line(lon=-0.2, ts=10)]
        groups, _ = parse_samples(lines)
        assert [s.longitude for s in groups["P1"]] == [-0.1, -0.2]


class TestSegmentTrips:
    def test_small_gaps_make_one_trip(self):
        samples = walk(gaps_s=[60 * 90] * 5)      # exactly the window
        trips = segment_trips(samples)
        assert len(trips) == 1
        assert len(trips[0].samples) == 6

    def test_ninety_one_minute_gap_splits(self):
        samples = walk(gaps_s=[60, 91 * 60, 60])
        trips = segment_trips(samples)
        assert len(trips) == 2
        assert len(trips[0].samples) == 2
        assert len(trips[1].samples) == 2

    def test_long_idling_between_stops_does_not_split(self):
        # couriers idle up to 89 minutes between drop-offs in one shift
        samples = walk(gaps_s=[89 * 60] * 199)
        trips = segment_trips(samples)
        assert len(trips) == 1
        assert len(trips[0].samples) == 200

    def test_empty_input_gives_empty_output(self):
        assert segment_trips([]) == []

    def test_samples_are_lossless(self):
        samples = walk(gaps_s=[100, 7000, 50, 9000, 10])
        trips = segment_trips(samples)
        flat = [s for t in trips for s in t.samples]
        assert [(s.timestamp, s.longitude) for s in flat] == [
            (s.timestamp, s.longitude) for s in samples]

    def test_trip_ids_deterministic_and_distinct(self):
        samples = walk(gaps_s=[100, 7000, 50])
        a = segment_trips(samples)
        b = segment_trips(samples)
        assert [t.trip_id for t in a] == [t.trip_id for t in b]
        assert len({t.trip_id for t in a}) == len(a)
        assert a[0].trip_id == make_trip_id("P1", a[0].start_time)

    def test_every_sample_carries_its_trip_id(self):
        trips = segment_trips(walk(gaps_s=[100, 7000]))
        for t in trips:
            assert all(s.trip_id == t.trip_id for s in t.samples)

    def test_rejects_mixed_policies(self):
        samples = [GpsSample("A", 0, 0, 0), GpsSample("B", 0, 0, 1)]
        with pytest.raises(ValueError, match="single policy"):
            segment_trips(samples)

    def test_rejects_unsorted_input(self):
        samples = [GpsSample("A", 0, 0, 10), GpsSample("A", 0, 0, 5)]
        with pytest.raises(ValueError, match="time-ordered"):
            segment_trips(samples)

    def test_rejects_nonpositive_window(self):
        with pytest.raises(ValueError):
            segment_trips(walk(), idle_window_minutes=0)

    @given(st.lists(st.integers(1, 200 * 60), min_size=1, max_size=40),
           st.integers(1, 120))
    def test_gap_partition_invariant(self, gaps, window_min):
        samples = walk(gaps_s=gaps)
        trips = segment_trips(samples, idle_window_minutes=window_min)
        w = window_min * 60
        for t in trips:
            for a, b in zip(t.samples, t.samples[1:]):
                assert b.timestamp - a.timestamp <= w
        for t1, t2 in zip(trips, trips[1:]):
            assert t2.samples[0].timestamp - t1.samples[-1].timestamp > w
        assert sum(len(t.samples) for t in trips) == len(samples)

    @given(st.lists(st.integers(1, 200 * 60), min_size=1, max_size=40))
    def test_resegmentation_is_idempotent(self, gaps):
        samples = walk(gaps_s=gaps)
        first = segment_trips(samples)
        flat = [s for t in first for s in t.samples]
        second = segment_trips(flat)
        assert [t.trip_id for t in first] == [t.trip_id for t in second]
        assert [len(t.samples) for t in first] == [
            len(t.samples) for t in second]


class TestValidateTrip:
    def _trip(self, samples):
        return Trip(trip_id="t", policy_id="P1", samples=tuple(samples),
                    start_time=samples[0].timestamp,
                    end_time=max(s.timestamp for s in samples))

    def test_clean_trip_empty_report(self):
        report = validate_trip(self._trip(walk(gaps_s=[10, 10])))
        assert report.clean

    def test_teleport_flagged(self):
        # ~10 km in one second
        samples = [GpsSample("P1", 51.5, -0.1, 0),
                   GpsSample("P1", 51.59, -0.1, 1)]
        report = validate_trip(self._trip(samples))
        assert report.teleports == [1]
        assert not report.clean

    def test_duplicate_timestamp_flagged(self):
        samples = [GpsSample("P1", 51.5, -0.1, 0),
                   GpsSample("P1", 51.5, -0.1, 0)]
        report = validate_trip(self._trip(samples))
        assert report.duplicate_times == [1]

    def test_time_reversal_flagged(self):
        samples = [GpsSample("P1", 51.5, -0.1, 10),
                   GpsSample("P1", 51.5, -0.1, 5)]
        report = validate_trip(self._trip(samples))
        assert report.non_monotone == [1]

    def test_highway_speed_not_flagged(self):
        # ~30 m/s is ordinary driving
        samples = [GpsSample("P1", 51.5, -0.1, 0),
                   GpsSample("P1", 51.50027, -0.1, 1)]
        assert validate_trip(self._trip(samples)).clean


class TestJsonlRoundTrip:
    def test_write_then_read_reproduces_trips(self, tmp_path):
        trips = segment_trips(walk(gaps_s=[100, 7000, 50, 9000]))
        path = tmp_path / "trips.jsonl"
        write_trips_jsonl(trips, str(path))
        back = read_trips_jsonl(str(path))
        assert [t.trip_id for t in back] == [t.trip_id for t in trips]
        for t1, t2 in zip(trips, back):
            assert [s.timestamp for s in t1.samples] == [
                s.timestamp for s in t2.samples]
            assert t1.start_time == t2.start_time
            assert t1.end_time == t2.end_time

    def test_read_rejects_unstamped_samples(self, tmp_path):
        path = tmp_path / "raw.jsonl"
        path.write_text(line() + "\n")
        with pytest.raises(ValueError, match="trip_id"):
            read_trips_jsonl(str(path))


class TestSampleValidation:
    def test_rejects_bad_latitude(self):
        with pytest.raises(ValueError):
            GpsSample("P", 91.0, 0.0, 0)

    def test_rejects_nan_timestamp(self):
        with pytest.raises(ValueError):
            GpsSample("P", 0.0, 0.0, float("nan"))

    def test_trip_requires_samples(self):
        with pytest.raises(ValueError):
            Trip(trip_id="t", policy_id="P", samples=(), start_time=0,
                 end_time=0)
