import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from overflight import adsb, simulate, track


def make_position_frame(icao, lat, lon, alt, fmt):
    return adsb.parse_frame(simulate.build_position_frame(icao, lat, lon,
                                                          alt, fmt))


class TestHaversine:
    def test_identity(self):
        assert track.haversine_km((10.0, 20.0), (10.0, 20.0)) == 0.0

    def test_one_degree_longitude_at_equator(self):
        expected = track.EARTH_RADIUS_KM * math.pi / 180
        assert track.haversine_km((0, 0), (0, 1)) == pytest.approx(
            expected, abs=1e-3)
        assert expected == pytest.approx(111.195, abs=1e-3)

    def test_spherical_symmetry(self):
        assert track.haversine_km((0, 0), (1, 0)) == pytest.approx(
            track.haversine_km((0, 0), (0, 1)), abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.floats(-89, 89), st.floats(-180, 180)),
                    min_size=3, max_size=3))
    def test_symmetric_and_triangle(self, pts):
        a, b, c = pts
        assert track.haversine_km(a, b) == pytest.approx(
            track.haversine_km(b, a), abs=1e-9)
        assert track.haversine_km(a, c) <= (
            track.haversine_km(a, b) + track.haversine_km(b, c) + 1e-9)


class TestIngest:
    def test_first_contact_identification(self):
        table = track.AircraftTable()
        frame = adsb.parse_frame(
            simulate.build_identification_frame("7C7CD0", "QFA123"))
        report = table.ingest(frame, 5.0)
        assert report.created
        state = table.get("7C7CD0")
        assert state.callsign == "QFA123"
        assert state.position is None

    def test_cpr_pair_yields_position(self):
        table = track.AircraftTable()
        target = (-34.95, 138.53)
        table.ingest(make_position_frame("7C7CD0", *target, 3250, "even"), 0.0)
        assert table.get("7C7CD0").position is None
        report = table.ingest(
            make_position_frame("7C7CD0", *target, 3250, "odd"), 1.0)
        assert report.position_updated
        assert track.haversine_km(table.get("7C7CD0").position,
                                  target) * 1000 < 10

    def test_receiver_reference_allows_single_frame(self):
        table = track.AircraftTable(receiver_position=(-34.95, 138.53))
        table.ingest(make_position_frame("7C7CD0", -34.96, 138.54, 3250,
                                         "even"), 0.0)
        pos = table.get("7C7CD0").position
        assert track.haversine_km(pos, (-34.96, 138.54)) * 1000 < 10

    def test_out_of_order_keeps_max_timestamp(self):
        table = track.AircraftTable()
        frame = adsb.parse_frame(
            simulate.build_identification_frame("7C7CD0", "QFA123"))
        table.ingest(frame, 10.0)
        report = table.ingest(frame, 4.0)
        assert report.out_of_order
        assert table.get("7C7CD0").last_seen == 10.0

    def test_shuffled_replay_monotonic(self):
        scenario = simulate.scripted_approach((-34.95, 138.53), 2.0)
        lines = simulate.emit(scenario)
        random.Random(7).shuffle(lines)
        table = track.AircraftTable()
        high_water = 0.0
        for t, line in lines:
            frame = adsb.parse_frame(adsb.parse_stream_line(line, t))
            table.ingest(frame, t)
            high_water = max(high_water, t)
            assert table.get(frame.icao).last_seen <= high_water
        assert table.get("7C7CD0").last_seen == high_water

    def test_surface_indication_clears_airborne(self):
        table = track.AircraftTable()
        table.ingest(make_position_frame("7C7CD0", -34.95, 138.53, 100,
                                         "even"), 0.0)
        assert table.get("7C7CD0").airborne
        # surface position type codes 5-8 arrive as Opaque
        head = bytes([(17 << 3) | 5]) + bytes.fromhex("7C7CD0")
        me = bytes([5 << 3]) + bytes(6)
        body = head + me
        raw = adsb.RawFrame(bits=body + adsb.crc24(body).to_bytes(3, "big"))
        table.ingest(adsb.parse_frame(raw), 1.0)
        assert not table.get("7C7CD0").airborne

    def test_sbs_bypasses_cpr(self):
        table = track.AircraftTable()
        update = adsb.SbsUpdate(icao="7C7CD0", altitude_ft=3250,
                                lat_deg=-34.95, lon_deg=138.53)
        report = table.ingest_sbs(update, 0.0)
        assert report.position_updated
        assert table.get("7C7CD0").position == (-34.95, 138.53)


class TestPrune:
    def test_empty(self):
        assert track.AircraftTable().prune(100.0) == 0

    def test_silent_beyond_timeout(self):
        table = track.AircraftTable(stale_timeout_s=60.0)
        frame = adsb.parse_frame(
            simulate.build_identification_frame("7C7CD0", "QFA123"))
        table.ingest(frame, 0.0)
        assert table.prune(61.5) == 1
        assert len(table) == 0

    def test_continuous_traffic_never_pruned(self):
        scenario = simulate.scripted_approach((-34.95, 138.53), 2.0)
        table = track.AircraftTable()
        removed = 0
        for t, line in simulate.emit(scenario):
            table.ingest(adsb.parse_frame(adsb.parse_stream_line(line, t)), t)
            removed += table.prune(t)
        assert removed == 0


class TestSnapshot:
    def test_single_entry(self):
        table = track.AircraftTable()
        table.ingest(make_position_frame("7C7CD0", -34.95, 138.53, 3250,
                                         "even"), 0.0)
        snap = table.snapshot(1.0)
        assert len(snap.aircraft) == 1

    def test_immutable_after_mutation(self):
        table = track.AircraftTable()
        table.ingest(make_position_frame("7C7CD0", -34.95, 138.53, 3250,
                                         "even"), 0.0)
        snap = table.snapshot(1.0)
        table.ingest(adsb.parse_frame(
            simulate.build_identification_frame("7C7CD0", "QFA123")), 2.0)
        assert snap.aircraft[0].callsign is None

    def test_census_matches_flight_count(self):
        flights = []
        for i in range(5):
            icao = "%06X" % (0x7C0000 + i)
            flights.append(simulate.FlightScript(
                icao=icao,
                waypoints=[(0.0, -34.9 + i * 0.01, 138.5, 3000.0),
                           (60.0, -34.9 + i * 0.01, 138.6, 3000.0)]))
        scenario = simulate.Scenario(flights=flights, device=(-34.95, 138.53),
                                     duration_s=60.0)
        table = track.AircraftTable()
        last_t = 0.0
        for t, line in simulate.emit(scenario):
            table.ingest(adsb.parse_frame(adsb.parse_stream_line(line, t)), t)
            last_t = t
        assert len(table.snapshot(last_t).aircraft) == 5


class TestNearestAirborne:
    def test_empty(self):
        snap = track.AirspaceSnapshot(taken_at=0.0, aircraft=())
        assert track.nearest_airborne(snap, (0, 0)) is None

    def test_picks_closer(self):
        device = (-34.95, 138.53)
        near = track.AircraftState(icao="AAAAAA",
                                   position=(-34.95, 138.552), airborne=True)
        far = track.AircraftState(icao="BBBBBB",
                                  position=(-34.95, 138.585), airborne=True)
        snap = track.AirspaceSnapshot(taken_at=0.0, aircraft=(far, near))
        found = track.nearest_airborne(snap, device)
        assert found[0] == "AAAAAA"

    def test_matches_brute_force(self):
        rng = random.Random(3)
        device = (-34.95, 138.53)
        aircraft = []
        for i in range(50):
            aircraft.append(track.AircraftState(
                icao="%06X" % i,
                position=(device[0] + rng.uniform(-0.5, 0.5),
                          device[1] + rng.uniform(-0.5, 0.5)),
                airborne=rng.random() > 0.2))
        snap = track.AirspaceSnapshot(taken_at=0.0, aircraft=tuple(aircraft))
        found = track.nearest_airborne(snap, device)
        candidates = [(track.haversine_km(s.position, device), s.icao)
                      for s in aircraft if s.airborne]
        assert (found[1], found[0]) == min(candidates)
        # result distance lower-bounds every airborne candidate
        assert all(found[1] <= d + 1e-12 for d, _ in candidates)

    def test_identity_only_contacts_invisible(self):
        state = track.AircraftState(icao="AAAAAA", position=None,
                                    airborne=True)
        snap = track.AirspaceSnapshot(taken_at=0.0, aircraft=(state,))
        assert track.nearest_airborne(snap, (0, 0)) is None
