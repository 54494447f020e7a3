"""Synthetic flight paths and transponder message streams.

Generates DF17 frames (position/velocity/identification) for scripted
flights so the decoder, tracker and trigger logic can be exercised and
replayed deterministically without any radio hardware. The CPR encoder
here is the round-trip counterpart of the decoder.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from . import adsb
from .adsb import (CPR_SCALE, DLAT_EVEN, DLAT_ODD, CALLSIGN_CHARSET,
                   RawFrame, crc24, encode_altitude, nl)

KM_PER_DEG_LAT = 6371.0088 * math.pi / 180.0


def encode_cpr(lat: float, lon: float, cpr_format: str) -> Tuple[int, int]:
    """Airborne CPR encoding of a position to 17-bit lat/lon indices."""
    i = 0 if cpr_format == "even" else 1
    dlat = DLAT_EVEN if i == 0 else DLAT_ODD
    yz = int(math.floor(CPR_SCALE * ((lat % dlat) / dlat) + 0.5)) % CPR_SCALE
    rlat = dlat * (yz / CPR_SCALE + math.floor(lat / dlat))
    dlon = 360.0 / max(nl(rlat) - i, 1)
    xz = int(math.floor(CPR_SCALE * ((lon % dlon) / dlon) + 0.5)) % CPR_SCALE
    return yz, xz


def _df17_frame(icao: str, me: bytes, received_at: float = 0.0) -> RawFrame:
    head = bytes([(17 << 3) | 5]) + bytes.fromhex(icao)
    body = head + me
    parity = crc24(body)
    return RawFrame(bits=body + parity.to_bytes(3, "big"),
                    received_at=received_at)


def build_position_frame(icao: str, lat: float, lon: float,
                         altitude_ft: int, cpr_format: str,
                         received_at: float = 0.0) -> RawFrame:
    """DF17 airborne position frame (type code 11, Q=1 altitude)."""
    yz, xz = encode_cpr(lat, lon, cpr_format)
    ac12 = encode_altitude(altitude_ft)
    f = 0 if cpr_format == "even" else 1
    me = bytes([
        11 << 3,
        ac12 >> 4,
        ((ac12 & 0x0F) << 4) | (f << 2) | (yz >> 15),
        (yz >> 7) & 0xFF,
        ((yz & 0x7F) << 1) | (xz >> 16),
        (xz >> 8) & 0xFF,
        xz & 0xFF,
    ])
    return _df17_frame(icao, me, received_at)


def build_identification_frame(icao: str, callsign: str,
                               received_at: float = 0.0) -> RawFrame:
    """DF17 identification frame (type code 4)."""
    callsign = callsign.ljust(8)[:8]
    bits = 0
    for ch in callsign:
        bits = (bits << 6) | CALLSIGN_CHARSET.index(ch)
    me = bytes([4 << 3]) + bits.to_bytes(6, "big")
    return _df17_frame(icao, me, received_at)


def build_velocity_frame(icao: str, ground_speed_kt: float,
                         heading_deg: float, vertical_rate_fpm: int,
                         received_at: float = 0.0) -> RawFrame:
    """DF17 velocity frame (type code 19, subtype 1, groundspeed)."""
    vx = ground_speed_kt * math.sin(math.radians(heading_deg))
    vy = ground_speed_kt * math.cos(math.radians(heading_deg))
    dew = 1 if vx < 0 else 0
    dns = 1 if vy < 0 else 0
    vew = min(int(round(abs(vx))) + 1, 1023)
    vns = min(int(round(abs(vy))) + 1, 1023)
    svr = 1 if vertical_rate_fpm < 0 else 0
    vr = min(abs(vertical_rate_fpm) // 64 + 1, 511)
    me_int = ((19 << 51) | (1 << 48) | (dew << 42) | (vew << 32)
              | (dns << 31) | (vns << 21) | (svr << 19) | (vr << 10))
    me = me_int.to_bytes(7, "big")
    return _df17_frame(icao, me, received_at)


@dataclass
class FlightScript:
    """One scripted aircraft: waypoints are (t_s, lat, lon, altitude_ft)."""

    icao: str
    waypoints: List[Tuple[float, float, float, float]]
    message_rate_hz: float = 1.0
    include_velocity: bool = False
    include_identification: bool = False
    callsign: Optional[str] = None

    def __post_init__(self):
        times = [w[0] for w in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        for _, _, _, alt in self.waypoints:
            if not -1000 <= alt <= 50175:
                raise ValueError("altitude outside 25 ft encoding range")

    def position_at(self, t: float) -> Optional[Tuple[float, float, float]]:
        """Linear-interpolated (lat, lon, alt) at time t, None outside span."""
        wps = self.waypoints
        if t < wps[0][0] or t > wps[-1][0]:
            return None
        for (t0, la0, lo0, al0), (t1, la1, lo1, al1) in zip(wps, wps[1:]):
            if t0 <= t <= t1:
                u = (t - t0) / (t1 - t0)
                return (la0 + u * (la1 - la0),
                        lo0 + u * (lo1 - lo0),
                        al0 + u * (al1 - al0))
        return None

    def velocity_at(self, t: float):
        """Finite-difference groundspeed (kt), heading and vertical rate."""
        h = 1.0
        p0 = self.position_at(max(t - h, self.waypoints[0][0]))
        p1 = self.position_at(min(t + h, self.waypoints[-1][0]))
        if p0 is None or p1 is None or p0 == p1:
            return None
        dt = min(t + h, self.waypoints[-1][0]) - max(t - h, self.waypoints[0][0])
        if dt <= 0:
            return None
        dn_km = (p1[0] - p0[0]) * KM_PER_DEG_LAT
        de_km = (p1[1] - p0[1]) * KM_PER_DEG_LAT * math.cos(
            math.radians((p0[0] + p1[0]) / 2))
        speed_kt = math.hypot(dn_km, de_km) / dt * 3600.0 / 1.852
        heading = math.degrees(math.atan2(de_km, dn_km)) % 360.0
        vr_fpm = int(round((p1[2] - p0[2]) / dt * 60.0))
        return speed_kt, heading, vr_fpm


@dataclass
class Scenario:
    flights: List[FlightScript]
    device: Tuple[float, float]
    duration_s: float
    seed: int = 0

    def __post_init__(self):
        for f in self.flights:
            if f.waypoints[-1][0] > self.duration_s:
                raise ValueError("scenario duration does not cover flight %s"
                                 % f.icao)


def emit(scenario: Scenario) -> List[Tuple[float, str]]:
    """Render a scenario to a time-ordered list of (t_s, AVR line).

    Position frames alternate even/odd per flight; optional velocity
    frames every 5th position and an identification frame every 10 s.
    Fully deterministic.
    """
    out = []
    for flight in scenario.flights:
        t0, t_end = flight.waypoints[0][0], flight.waypoints[-1][0]
        period = 1.0 / flight.message_rate_hz
        n = 0
        t = t0
        while t <= t_end + 1e-9 and t <= scenario.duration_s:
            pos = flight.position_at(min(t, t_end))
            if pos is not None:
                lat, lon, alt = pos
                fmt = "even" if n % 2 == 0 else "odd"
                frame = build_position_frame(
                    flight.icao, lat, lon, int(round(alt / 25.0)) * 25,
                    fmt, received_at=t)
                out.append((t, adsb.format_stream_line(frame)))
                if flight.include_velocity and n % 5 == 4:
                    vel = flight.velocity_at(t)
                    if vel is not None:
                        vf = build_velocity_frame(flight.icao, *vel,
                                                  received_at=t)
                        out.append((t, adsb.format_stream_line(vf)))
                if flight.include_identification and flight.callsign \
                        and n % max(int(10 / period), 1) == 0:
                    idf = build_identification_frame(
                        flight.icao, flight.callsign, received_at=t)
                    out.append((t, adsb.format_stream_line(idf)))
            n += 1
            t = t0 + n * period
    out.sort(key=lambda item: (item[0], item[1]))
    return out


def emit_sbs(scenario: Scenario) -> List[Tuple[float, str]]:
    """Render a scenario as pre-decoded SBS/BaseStation CSV rows."""
    out = []
    for flight in scenario.flights:
        t0, t_end = flight.waypoints[0][0], flight.waypoints[-1][0]
        period = 1.0 / flight.message_rate_hz
        n = 0
        t = t0
        while t <= t_end + 1e-9 and t <= scenario.duration_s:
            pos = flight.position_at(min(t, t_end))
            if pos is not None:
                lat, lon, alt = pos
                fields = [""] * 22
                fields[0] = "MSG"
                fields[1] = "3"
                fields[4] = flight.icao
                fields[11] = str(int(round(alt)))
                fields[14] = "%.5f" % lat
                fields[15] = "%.5f" % lon
                out.append((t, ",".join(fields)))
            n += 1
            t = t0 + n * period
    out.sort(key=lambda item: (item[0], item[1]))
    return out


def scripted_approach(device: Tuple[float, float], closest_km: float,
                      icao: str = "7C7CD0", altitude_ft: int = 3000,
                      leg_km: float = 15.0, speed_kmh: float = 360.0,
                      message_rate_hz: float = 1.0) -> Scenario:
    """A straight west-to-east flyby passing ``closest_km`` north of the
    device at its midpoint. Used as the canonical trigger fixture."""
    lat0, lon0 = device
    dlat = closest_km / KM_PER_DEG_LAT
    dlon = leg_km / (KM_PER_DEG_LAT * math.cos(math.radians(lat0)))
    duration = 2 * leg_km / speed_kmh * 3600.0
    flight = FlightScript(
        icao=icao,
        waypoints=[
            (0.0, lat0 + dlat, lon0 - dlon, float(altitude_ft)),
            (duration, lat0 + dlat, lon0 + dlon, float(altitude_ft)),
        ],
        message_rate_hz=message_rate_hz,
    )
    return Scenario(flights=[flight], device=device,
                    duration_s=duration)


def scenario_to_json(scenario: Scenario) -> str:
    doc = {
        "device": list(scenario.device),
        "duration_s": scenario.duration_s,
        "seed": scenario.seed,
        "flights": [
            {
                "icao": f.icao,
                "waypoints": [list(w) for w in f.waypoints],
                "message_rate_hz": f.message_rate_hz,
                "include_velocity": f.include_velocity,
                "include_identification": f.include_identification,
                "callsign": f.callsign,
            }
            for f in scenario.flights
        ],
    }
    return json.dumps(doc, indent=2)


def scenario_from_json(text: str) -> Scenario:
    doc = json.loads(text)
    flights = [
        FlightScript(
            icao=f["icao"],
            waypoints=[tuple(w) for w in f["waypoints"]],
            message_rate_hz=f.get("message_rate_hz", 1.0),
            include_velocity=f.get("include_velocity", False),
            include_identification=f.get("include_identification", False),
            callsign=f.get("callsign"),
        )
        for f in doc["flights"]
    ]
    return Scenario(flights=flights, device=tuple(doc["device"]),
                    duration_s=doc["duration_s"], seed=doc.get("seed", 0))
