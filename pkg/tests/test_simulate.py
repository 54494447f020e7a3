import math

import pytest

from overflight import adsb, simulate, track


DEVICE = (-34.95, 138.53)


class TestEmit:
    def test_deterministic(self):
        a = simulate.emit(simulate.scripted_approach(DEVICE, 2.0))
        b = simulate.emit(simulate.scripted_approach(DEVICE, 2.0))
        assert a == b

    def test_frame_count(self):
        scenario = simulate.scripted_approach(DEVICE, 2.0)
        lines = simulate.emit(scenario)
        # 1 Hz positions for the full 300 s span, inclusive of both ends
        assert len(lines) == int(scenario.duration_s) + 1

    def test_all_frames_pass_crc(self):
        scenario = simulate.scripted_approach(DEVICE, 2.0)
        for _, line in simulate.emit(scenario):
            frame = adsb.parse_stream_line(line)
            assert adsb.verify_crc(frame)

    def test_time_ordered(self):
        scenario = simulate.scripted_approach(DEVICE, 2.0)
        times = [t for t, _ in simulate.emit(scenario)]
        assert times == sorted(times)

    def test_optional_frames_present(self):
        scenario = simulate.scripted_approach(DEVICE, 2.0)
        flight = scenario.flights[0]
        flight.include_velocity = True
        flight.include_identification = True
        flight.callsign = "QFA123"
        kinds = set()
        for _, line in simulate.emit(scenario):
            payload = adsb.parse_frame(adsb.parse_stream_line(line)).payload
            kinds.add(type(payload).__name__)
        assert kinds == {"AirbornePositionMsg", "VelocityMsg",
                         "IdentificationMsg"}


class TestEndToEndTrack:
    def test_track_reconstruction_accuracy(self):
        scenario = simulate.scripted_approach(DEVICE, 2.0)
        flight = scenario.flights[0]
        table = track.AircraftTable()
        worst_m = 0.0
        for t, line in simulate.emit(scenario):
            frame = adsb.parse_frame(adsb.parse_stream_line(line, t))
            table.ingest(frame, t)
            state = table.get(flight.icao)
            if state.position is not None:
                truth = flight.position_at(t)
                err_m = track.haversine_km(state.position,
                                           truth[:2]) * 1000
                worst_m = max(worst_m, err_m)
                assert state.altitude_ft == 3000
        assert worst_m < 10.0

    def test_closest_approach_distance(self):
        for closest_km in (1.0, 2.9, 5.0):
            scenario = simulate.scripted_approach(DEVICE, closest_km)
            flight = scenario.flights[0]
            mid = scenario.duration_s / 2
            lat, lon, _ = flight.position_at(mid)
            d_km = track.haversine_km((lat, lon), DEVICE)
            assert d_km == pytest.approx(closest_km, abs=0.05)

    def test_approach_monotone_then_recede(self):
        scenario = simulate.scripted_approach(DEVICE, 2.0)
        flight = scenario.flights[0]
        mid = scenario.duration_s / 2
        dists = [track.haversine_km(flight.position_at(t)[:2], DEVICE)
                 for t in range(0, int(scenario.duration_s) + 1, 10)]
        half = len(dists) // 2
        assert all(b < a for a, b in zip(dists[:half], dists[1:half + 1]))
        assert all(b > a for a, b in zip(dists[half:], dists[half + 1:]))


class TestFlightScript:
    def test_waypoint_times_strictly_increasing(self):
        with pytest.raises(ValueError):
            simulate.FlightScript(icao="ABC123",
                                  waypoints=[(0, 0, 0, 100), (0, 1, 1, 100)])

    def test_interpolation_midpoint(self):
        f = simulate.FlightScript(
            icao="ABC123",
            waypoints=[(0.0, 0.0, 0.0, 1000.0), (100.0, 1.0, 2.0, 3000.0)])
        assert f.position_at(50.0) == pytest.approx((0.5, 1.0, 2000.0))
        assert f.position_at(-1.0) is None
        assert f.position_at(101.0) is None

    def test_velocity_finite_difference(self):
        # due north at ~1 deg lat per 100 s
        f = simulate.FlightScript(
            icao="ABC123",
            waypoints=[(0.0, 0.0, 0.0, 1000.0), (100.0, 1.0, 0.0, 1000.0)])
        speed_kt, heading, vr = f.velocity_at(50.0)
        expected_kt = simulate.KM_PER_DEG_LAT / 100.0 * 3600.0 / 1.852
        assert speed_kt == pytest.approx(expected_kt, rel=1e-3)
        assert heading == pytest.approx(0.0, abs=0.1)
        assert vr == 0


class TestScenarioJson:
    def test_round_trip(self):
        scenario = simulate.scripted_approach(DEVICE, 2.0)
        scenario.flights[0].include_velocity = True
        scenario.flights[0].callsign = "QFA123"
        back = simulate.scenario_from_json(simulate.scenario_to_json(scenario))
        assert simulate.emit(back) == simulate.emit(scenario)
        assert back.device == scenario.device

    def test_duration_must_cover_flights(self):
        with pytest.raises(ValueError):
            simulate.Scenario(
                flights=[simulate.FlightScript(
                    icao="ABC123",
                    waypoints=[(0.0, 0, 0, 100.0), (50.0, 1, 1, 100.0)])],
                device=DEVICE, duration_s=40.0)
