"""Live table of nearby aircraft built from decoded downlink frames."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import adsb
from .adsb import (AirbornePositionMsg, IdentificationMsg, ModeSFrame,
                   Opaque, SbsUpdate, VelocityMsg, ZoneMismatch, StalePair)

EARTH_RADIUS_KM = 6371.0088
DEFAULT_STALE_TIMEOUT_S = 60.0
CPR_PAIR_WINDOW_S = 10.0
SURFACE_TYPE_CODES = range(5, 9)


def haversine_km(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    """Great-circle distance in kilometres."""
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    s = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(s))


@dataclass
class AircraftState:
    icao: str
    position: Optional[Tuple[float, float]] = None
    altitude_ft: Optional[int] = None
    airborne: bool = True
    callsign: Optional[str] = None
    ground_speed_kt: Optional[float] = None
    heading_deg: Optional[float] = None
    vertical_rate_fpm: Optional[int] = None
    last_seen: float = 0.0
    cpr_even: Optional[Tuple[AirbornePositionMsg, float]] = None
    cpr_odd: Optional[Tuple[AirbornePositionMsg, float]] = None


@dataclass(frozen=True)
class AirspaceSnapshot:
    taken_at: float
    aircraft: Tuple[AircraftState, ...]


@dataclass
class IngestReport:
    icao: str
    created: bool = False
    position_updated: bool = False
    out_of_order: bool = False


class AircraftTable:
    """Single-writer aircraft tracker.

    One ingestion context feeds frames in; snapshot() hands out immutable
    copies that other contexts may read freely.
    """

    def __init__(self, stale_timeout_s: float = DEFAULT_STALE_TIMEOUT_S,
                 receiver_position: Optional[Tuple[float, float]] = None):
        self.stale_timeout_s = stale_timeout_s
        self.receiver_position = receiver_position
        self._states: Dict[str, AircraftState] = {}

    def __len__(self):
        return len(self._states)

    def get(self, icao: str) -> Optional[AircraftState]:
        return self._states.get(icao)

    def ingest(self, frame: ModeSFrame, now: float) -> IngestReport:
        """Apply one CRC-valid frame to the table."""
        state = self._states.get(frame.icao)
        report = IngestReport(icao=frame.icao)
        if state is None:
            state = AircraftState(icao=frame.icao, last_seen=now)
            self._states[frame.icao] = state
            report.created = True
        if now < state.last_seen:
            report.out_of_order = True
        state.last_seen = max(state.last_seen, now)

        payload = frame.payload
        if isinstance(payload, IdentificationMsg):
            state.callsign = payload.callsign
        elif isinstance(payload, VelocityMsg):
            state.ground_speed_kt = payload.ground_speed_kt
            state.heading_deg = payload.heading_deg
            state.vertical_rate_fpm = payload.vertical_rate_fpm
        elif isinstance(payload, AirbornePositionMsg):
            state.airborne = True
            if payload.altitude_ft is not None:
                state.altitude_ft = payload.altitude_ft
            report.position_updated = self._update_position(state, payload, now)
        elif isinstance(payload, Opaque) and payload.type_code in SURFACE_TYPE_CODES:
            state.airborne = False
        return report

    def _update_position(self, state: AircraftState,
                         msg: AirbornePositionMsg, now: float) -> bool:
        if msg.cpr_format == "even":
            state.cpr_even = (msg, now)
        else:
            state.cpr_odd = (msg, now)

        ref = state.position or self.receiver_position
        if ref is not None:
            state.position = adsb.decode_cpr_local(msg, ref)
            return True
        if state.cpr_even and state.cpr_odd:
            even, t_even = state.cpr_even
            odd, t_odd = state.cpr_odd
            newest = "even" if t_even >= t_odd else "odd"
            try:
                state.position = adsb.decode_cpr_global(
                    even, odd, newest=newest, t_even=t_even, t_odd=t_odd,
                    max_age_s=CPR_PAIR_WINDOW_S)
                return True
            except (ZoneMismatch, StalePair):
                return False
        return False

    def ingest_sbs(self, update: SbsUpdate, now: float) -> IngestReport:
        """Apply a pre-decoded SBS row (bypasses CPR)."""
        state = self._states.get(update.icao)
        report = IngestReport(icao=update.icao)
        if state is None:
            state = AircraftState(icao=update.icao, last_seen=now)
            self._states[update.icao] = state
            report.created = True
        if now < state.last_seen:
            report.out_of_order = True
        state.last_seen = max(state.last_seen, now)
        if update.altitude_ft is not None:
            state.altitude_ft = update.altitude_ft
        if update.lat_deg is not None and update.lon_deg is not None:
            state.position = (update.lat_deg, update.lon_deg)
            state.airborne = True
            report.position_updated = True
        return report

    def prune(self, now: float) -> int:
        """Drop aircraft not heard from within the stale timeout."""
        stale = [icao for icao, s in self._states.items()
                 if now - s.last_seen > self.stale_timeout_s]
        for icao in stale:
            del self._states[icao]
        return len(stale)

    def snapshot(self, now: float) -> AirspaceSnapshot:
        """Point-in-time immutable copy of the table, post-prune."""
        self.prune(now)
        states = tuple(copy.deepcopy(s) for s in
                       sorted(self._states.values(), key=lambda s: s.icao))
        return AirspaceSnapshot(taken_at=now, aircraft=states)


def nearest_airborne(snapshot: AirspaceSnapshot,
                     device: Tuple[float, float]
                     ) -> Optional[Tuple[str, float, Optional[int]]]:
    """Closest airborne aircraft with a known position, or None.

    Distance ties break toward the lexicographically smaller ICAO.
    """
    best = None
    for state in snapshot.aircraft:
        if not state.airborne or state.position is None:
            continue
        dist = haversine_km(state.position, device)
        key = (dist, state.icao)
        if best is None or key < best[0]:
            best = (key, (state.icao, dist, state.altitude_ft))
    return best[1] if best else None
