"""Stationary points, destination rules, and the trip feature vector."""

import math

import numpy as np
import pytest

from tripsift.geofeatures import (
    EARTH_RADIUS_M,
    METERS_PER_DEGREE,
    Classification,
    PoiDatabase,
    StationaryPoint,
    classify_destination,
    detect_stationary_points,
    extract_features,
    features_from_points,
    haversine_m,
    read_features_csv,
    read_homes_csv,
    time_of_day_encoding,
    write_features_csv,
    write_homes_csv,
)
from tripsift.ingest import GpsSample, Trip


def law_of_cosines_m(lat1, lon1, lat2, lon2):
    """Independent spherical distance for cross-checking."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    c = (math.sin(p1) * math.sin(p2)
         + math.cos(p1) * math.cos(p2) * math.cos(dl))
    return EARTH_RADIUS_M * math.acos(min(1.0, max(-1.0, c)))


def offset_north(lat, lon, meters):
    return lat + meters / METERS_PER_DEGREE, lon


def make_trip(points, policy="P1", trip_id="T1"):
    """points: list of (lat, lon, ts)."""
    samples = tuple(GpsSample(policy, lat, lon, ts, trip_id=trip_id)
                    for lat, lon, ts in points)
    return Trip(trip_id=trip_id, policy_id=policy, samples=samples,
                start_time=points[0][2], end_time=points[-1][2])


def stop_then_move(stop_s, t0=0, lat=51.5, lon=-0.1, cadence=15):
    """A stationary block followed by one clearly-moved sample."""
    pts = [(lat, lon, t0 + i * cadence)
           for i in range(int(stop_s / cadence) + 1)]
    pts.append((lat + 0.01, lon, pts[-1][2] + cadence))
    return pts


class TestHaversine:
    def test_identity_is_zero(self):
        assert haversine_m(51.5, -0.1, 51.5, -0.1) == 0.0

    def test_kilometer_scale_against_independent_formula(self):
        d = haversine_m(51.5, -0.1, 51.509, -0.1)
        assert abs(d - 1001.5) < 1.0
        assert abs(d - law_of_cosines_m(51.5, -0.1, 51.509, -0.1)) < 0.01

    def test_antipodal_is_half_circumference(self):
        d = haversine_m(0.0, 0.0, 0.0, 180.0)
        assert abs(d - math.pi * EARTH_RADIUS_M) < 1.0

    def test_symmetric_and_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = rng.uniform(-85, 85), rng.uniform(-180, 180)
            b = rng.uniform(-85, 85), rng.uniform(-180, 180)
            d1 = haversine_m(a[0], a[1], b[0], b[1])
            d2 = haversine_m(b[0], b[1], a[0], a[1])
            assert d1 >= 0
            np.testing.assert_allclose(d1, d2, rtol=1e-12)

    def test_agrees_with_independent_formula_at_random_points(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            lat1, lon1 = rng.uniform(-80, 80), rng.uniform(-179, 179)
            lat2 = lat1 + rng.uniform(-0.5, 0.5)
            lon2 = lon1 + rng.uniform(-0.5, 0.5)
            ours = haversine_m(lat1, lon1, lat2, lon2)
            ref = law_of_cosines_m(lat1, lon1, lat2, lon2)
            assert abs(ours - ref) < 0.5


class TestPoiDatabase:
    def test_index_matches_linear_scan_on_random_instances(self):
        rng = np.random.default_rng(2)
        trials = 0
        for _ in range(25):
            base_lat = rng.uniform(-60, 60)
            base_lon = rng.uniform(-170, 170)
            pts = [(base_lat + rng.normal(0, 0.01),
                    base_lon + rng.normal(0, 0.01)) for _ in range(150)]
            db = PoiDatabase(pts)
            for _ in range(40):
                qlat = base_lat + rng.normal(0, 0.01)
                qlon = base_lon + rng.normal(0, 0.01)
                radius = rng.uniform(5, 600)
                assert db.indices_within(qlat, qlon, radius) == \
                    db.indices_within_scan(qlat, qlon, radius)
                trials += 1
        assert trials >= 1000

    def test_count_at_exact_radius_is_inclusive(self):
        center = (51.5, -0.1)
        poi = offset_north(*center, 50.0)
        db = PoiDatabase([poi])
        d = haversine_m(*center, *poi)
        assert db.count_within(*center, d) == 1

    def test_csv_round_trip(self, tmp_path):
        db = PoiDatabase([(51.5, -0.1), (51.50123456, -0.09876543)])
        path = tmp_path / "pois.csv"
        db.to_csv(str(path))
        back = PoiDatabase.from_csv(str(path))
        assert back.lats == db.lats
        assert back.lons == db.lons

    def test_from_csv_rejects_missing_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="lat"):
            PoiDatabase.from_csv(str(path))

    def test_rejects_out_of_range_entry(self):
        with pytest.raises(ValueError):
            PoiDatabase([(95.0, 0.0)])


class TestDetectStationaryPoints:
    def test_long_identical_run_is_one_point(self):
        pts = [(51.5, -0.1, i * 10) for i in range(13)]   # 120 s still
        trip = make_trip(pts)
        found = detect_stationary_points(trip)
        assert len(found) == 1
        assert found[0].duration_s == 120
        assert found[0].latitude == 51.5

    def test_short_pause_discarded(self):
        pts = [(51.5, -0.1, i * 10) for i in range(7)]    # 60 s still
        pts.append((51.6, -0.1, 80))
        trip = make_trip(pts)
        assert detect_stationary_points(trip) == []

    def test_exactly_ninety_seconds_kept(self):
        pts = [(51.5, -0.1, i * 15) for i in range(7)]    # 90 s still
        trip = make_trip(pts)
        found = detect_stationary_points(trip)
        assert len(found) == 1 and found[0].duration_s == 90

    def test_two_runs_in_time_order(self):
        pts = ([(51.5, -0.1, i * 15) for i in range(9)]          # 120 s
               + [(51.51, -0.1, 140), (51.52, -0.1, 160)]        # moving
               + [(51.53, -0.2, 200 + i * 15) for i in range(9)])
        trip = make_trip(pts)
        found = detect_stationary_points(trip)
        assert len(found) == 2
        assert found[0].end_time <= found[1].start_time

    def test_displacement_at_eps_does_not_break_run(self):
        eps = 2.0 ** -17            # dyadic: steps represent exactly
        pts = [(51.5 + i * eps, -0.1, i * 15) for i in range(9)]
        trip = make_trip(pts)
        assert len(detect_stationary_points(trip, eps_deg=eps)) == 1

    def test_displacement_above_eps_breaks_run(self):
        eps = 1e-5
        pts, lat = [], 51.5
        for i in range(9):
            pts.append((lat, -0.1, i * 15))
            lat += eps * 1.01
        trip = make_trip(pts)
        assert detect_stationary_points(trip, eps_deg=eps) == []

    def test_center_is_mean_of_members(self):
        pts = [(51.5 + i * 1e-6, -0.1 - i * 1e-6, i * 30) for i in range(5)]
        trip = make_trip(pts)
        found = detect_stationary_points(trip)
        assert len(found) == 1
        np.testing.assert_allclose(found[0].latitude,
                                   np.mean([p[0] for p in pts]))
        np.testing.assert_allclose(found[0].longitude,
                                   np.mean([p[1] for p in pts]))

    def test_points_never_overlap(self):
        rng = np.random.default_rng(3)
        lat, lon, ts = 51.5, -0.1, 0.0
        pts = []
        for _ in range(300):
            if rng.random() < 0.3:
                lat += rng.uniform(2e-5, 1e-3)
            ts += 15
            pts.append((lat, lon, ts))
        found = detect_stationary_points(make_trip(pts))
        for a, b in zip(found, found[1:]):
            assert a.end_time <= b.start_time


class TestClassifyDestination:
    CENTER = (51.5, -0.1)

    def _point(self):
        return StationaryPoint(latitude=self.CENTER[0],
                               longitude=self.CENTER[1],
                               start_time=0, end_time=120)

    def test_two_close_pois_mean_commercial(self):
        db = PoiDatabase([offset_north(*self.CENTER, 10),
                          offset_north(*self.CENTER, 40)])
        far_home = (52.0, -0.1)
        assert classify_destination(self._point(), db,
                                    far_home) is Classification.COMMERCIAL

    def test_one_poi_near_home_means_home(self):
        db = PoiDatabase([offset_north(*self.CENTER, 10)])
        home = offset_north(*self.CENTER, 100)
        assert classify_destination(self._point(), db,
                                    home) is Classification.HOME

    def test_no_pois_far_from_home_means_residential(self):
        db = PoiDatabase([])
        home = offset_north(*self.CENTER, 500)
        assert classify_destination(self._point(), db,
                                    home) is Classification.RESIDENTIAL

    def test_commercial_beats_home_on_conflict(self):
        db = PoiDatabase([offset_north(*self.CENTER, 10),
                          offset_north(*self.CENTER, 20)])
        home = self.CENTER                                # stop is at home
        assert classify_destination(self._point(), db,
                                    home) is Classification.COMMERCIAL

    def test_poi_just_outside_radius_ignored(self):
        db = PoiDatabase([offset_north(*self.CENTER, 10),
                          offset_north(*self.CENTER, 51)])
        far_home = (52.0, -0.1)
        assert classify_destination(self._point(), db,
                                    far_home) is Classification.RESIDENTIAL


class TestTimeOfDay:
    def test_midnight_is_phase_zero(self):
        s, c = time_of_day_encoding(86400 * 7)
        assert abs(s) < 1e-12 and abs(c - 1.0) < 1e-12

    def test_six_am_quarter_phase(self):
        s, c = time_of_day_encoding(86400 * 3 + 21600)
        np.testing.assert_allclose([s, c], [1.0, 0.0], atol=1e-12)

    def test_offset_shifts_local_midnight(self):
        s, c = time_of_day_encoding(86400 - 3600, utc_offset_s=3600)
        assert abs(s) < 1e-12 and abs(c - 1.0) < 1e-12

    def test_unit_circle(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            s, c = time_of_day_encoding(float(rng.uniform(0, 1e9)))
            np.testing.assert_allclose(s * s + c * c, 1.0, atol=1e-12)


class TestExtractFeatures:
    HOME = (51.6, -0.2)

    def test_no_stops_collapses_to_zeros(self):
        pts = [(51.5 + i * 1e-3, -0.1, i * 15) for i in range(40)]
        trip = make_trip(pts)
        f = extract_features(trip, PoiDatabase([]), self.HOME)
        assert f.number_waits_trip == 0
        assert f.average_trip_wait_minutes == 0.0
        assert f.total_commercial_waits == 0
        assert f.ratio_busy_waits == 0.0
        np.testing.assert_allclose(f.trip_duration_minutes, 39 * 15 / 60)

    def test_midnight_start_phase(self):
        pts = [(51.5 + i * 1e-3, -0.1, 86400 * 5 + i * 15) for i in range(10)]
        f = extract_features(make_trip(pts), PoiDatabase([]), self.HOME)
        assert abs(f.time_of_day_sin) < 1e-12
        assert abs(f.time_of_day_cos - 1.0) < 1e-12

    def test_commercial_to_residential_ratio(self):
        # three stops beside POI pairs, two on empty streets
        stops = []
        t = 0
        lat = 51.5
        pois = []
        for i in range(5):
            stops.extend((lat, -0.1, t + j * 15) for j in range(9))  # 120 s
            if i < 3:
                pois.append(offset_north(lat, -0.1, 10))
                pois.append(offset_north(lat, -0.1, 20))
            t += 9 * 15 + 15
            lat += 0.01                                   # clear move
        trip = make_trip(stops)
        f = extract_features(trip, PoiDatabase(pois), self.HOME)
        assert f.number_waits_trip == 5
        assert f.total_commercial_waits == 3
        assert f.ratio_busy_waits == pytest.approx(1.5)

    def test_ratio_clamps_denominator_when_no_residential(self):
        points = [StationaryPoint(51.5, -0.1, 0, 120,
                                  Classification.COMMERCIAL)]
        trip = make_trip([(51.5, -0.1, 0), (51.5, -0.1, 120)])
        f = features_from_points(trip, points)
        assert f.ratio_busy_waits == 1.0

    def test_average_wait_is_mean_duration(self):
        points = [StationaryPoint(51.5, -0.1, 0, 120,
                                  Classification.RESIDENTIAL),
                  StationaryPoint(51.51, -0.1, 300, 540,
                                  Classification.RESIDENTIAL)]
        trip = make_trip([(51.5, -0.1, 0), (51.51, -0.1, 540)])
        f = features_from_points(trip, points)
        np.testing.assert_allclose(f.average_trip_wait_minutes, 3.0)

    def test_counts_partition_across_classes(self):
        rng = np.random.default_rng(5)
        options = list(Classification)
        for _ in range(20):
            n = int(rng.integers(0, 8))
            kinds = [options[i] for i in rng.integers(0, len(options), n)]
            points = [StationaryPoint(51.5, -0.1, i * 200.0,
                                      i * 200.0 + 120.0, k)
                      for i, k in enumerate(kinds)]
            trip = make_trip([(51.5, -0.1, 0), (51.5, -0.1, 2000)])
            f = features_from_points(trip, points)
            commercial = sum(1 for k in kinds
                             if k is Classification.COMMERCIAL)
            home = sum(1 for k in kinds if k is Classification.HOME)
            residential = n - commercial - home
            assert f.number_waits_trip == n
            assert f.total_commercial_waits == commercial
            assert f.ratio_busy_waits == commercial / max(1, residential)

    def test_invariant_to_poi_order(self):
        stops = stop_then_move(120)
        trip = make_trip(stops)
        pois = [offset_north(51.5, -0.1, 10), offset_north(51.5, -0.1, 30),
                (51.7, -0.3), (50.9, -0.4)]
        f1 = extract_features(trip, PoiDatabase(pois), self.HOME)
        f2 = extract_features(trip, PoiDatabase(pois[::-1]), self.HOME)
        assert f1 == f2

    def test_trig_pair_on_unit_circle(self):
        trip = make_trip(stop_then_move(120, t0=51234))
        f = extract_features(trip, PoiDatabase([]), self.HOME)
        np.testing.assert_allclose(
            f.time_of_day_sin ** 2 + f.time_of_day_cos ** 2, 1.0, atol=1e-12)


class TestCsvIo:
    def test_features_round_trip(self, tmp_path):
        trip = make_trip(stop_then_move(120, t0=3600))
        f = extract_features(trip, PoiDatabase([]), (51.6, -0.2))
        path = tmp_path / "features.csv"
        write_features_csv([("T1", "P1", f)], str(path))
        back = read_features_csv(str(path))
        assert back == [("T1", "P1", f)]

    def test_homes_round_trip(self, tmp_path):
        homes = {"P1": (51.5, -0.1), "P2": (51.6123456, -0.2654321)}
        path = tmp_path / "homes.csv"
        write_homes_csv(homes, str(path))
        assert read_homes_csv(str(path)) == homes

    def test_read_features_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError, match="feature columns"):
            read_features_csv(str(path))
