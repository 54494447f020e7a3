"""Proximity-triggered recording state machine.

Aircraft captures start when an airborne aircraft comes within the
per-location trigger distance; silence captures start only after the
airspace has been confirmed clear for several consecutive snapshots, and
are aborted (file discarded) if an aircraft shows up mid-recording.
"""

from __future__ import annotations

import configparser
import datetime as dt
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

from .track import AirspaceSnapshot, haversine_km, nearest_airborne

SILENCE_HEX = "000000"
AIRCRAFT_DURATION_S = 60.0
SILENCE_DURATION_S = 10.0


class ClockRegression(Exception):
    """Snapshot time went backwards."""


@dataclass(frozen=True)
class TriggerConfig:
    location_id: int
    mic_id: int
    device_position: Tuple[float, float]
    trigger_distance_km: float
    silence_radius_km: float = 10.0
    aircraft_duration_s: float = AIRCRAFT_DURATION_S
    silence_duration_s: float = SILENCE_DURATION_S
    confirmations_required: int = 3
    snapshot_period_s: float = 10.0
    cooldown_s: float = 5.0

    def __post_init__(self):
        if self.silence_radius_km <= self.trigger_distance_km:
            raise ValueError("silence radius must exceed trigger distance")
        if self.aircraft_duration_s <= 0 or self.silence_duration_s <= 0:
            raise ValueError("durations must be positive")


@dataclass(frozen=True)
class RecordingEvent:
    klass: int  # 0 silence, 1 aircraft
    hex_id: str
    altitude_ft: Optional[int]
    started_at: dt.datetime
    location_id: int
    mic_id: int
    duration_s: float

    def __post_init__(self):
        if (self.klass == 0) != (self.hex_id == SILENCE_HEX):
            raise ValueError("class 0 iff hex is %s" % SILENCE_HEX)
        if self.klass == 1 and self.altitude_ft is None:
            raise ValueError("aircraft events need an altitude")


@dataclass(frozen=True)
class StartAircraftRecording:
    event: RecordingEvent


@dataclass(frozen=True)
class StartSilenceRecording:
    event: RecordingEvent


@dataclass(frozen=True)
class StopRecording:
    event: RecordingEvent


@dataclass(frozen=True)
class AbortSilenceRecording:
    event: RecordingEvent


Action = Union[StartAircraftRecording, StartSilenceRecording,
               StopRecording, AbortSilenceRecording]

IDLE = "idle"
RECORDING_AIRCRAFT = "recording_aircraft"
RECORDING_SILENCE = "recording_silence"
COOLDOWN = "cooldown"


@dataclass(frozen=True)
class TriggerState:
    mode: str = IDLE
    recording_ends_at: Optional[float] = None
    cooldown_until: Optional[float] = None
    clear_streak: int = 0
    active_event: Optional[RecordingEvent] = None
    last_now: Optional[float] = None


def _airborne_within(snapshot: AirspaceSnapshot, device, radius_km) -> bool:
    found = nearest_airborne(snapshot, device)
    return found is not None and found[1] <= radius_km


def step(state: TriggerState, snapshot: AirspaceSnapshot,
         cfg: TriggerConfig, now: float,
         wall_time: Optional[dt.datetime] = None
         ) -> Tuple[TriggerState, List[Action]]:
    """Advance the trigger state machine by one snapshot.

    ``wall_time`` stamps any recording event started this step; replay
    callers derive it from stream time so runs are reproducible.
    """
    if state.last_now is not None and now < state.last_now:
        raise ClockRegression("now=%s < last=%s" % (now, state.last_now))
    if wall_time is None:
        wall_time = dt.datetime.fromtimestamp(now, dt.timezone.utc)

    actions: List[Action] = []
    state = replace(state, last_now=now)

    if state.mode == RECORDING_SILENCE and _airborne_within(
            snapshot, cfg.device_position, cfg.silence_radius_km):
        actions.append(AbortSilenceRecording(state.active_event))
        state = replace(state, mode=COOLDOWN, active_event=None,
                        recording_ends_at=None, clear_streak=0,
                        cooldown_until=now + cfg.cooldown_s)
    elif state.mode in (RECORDING_AIRCRAFT, RECORDING_SILENCE) \
            and now >= state.recording_ends_at:
        actions.append(StopRecording(state.active_event))
        state = replace(state, mode=COOLDOWN, active_event=None,
                        recording_ends_at=None,
                        cooldown_until=now + cfg.cooldown_s)

    if state.mode == COOLDOWN and now >= state.cooldown_until:
        state = replace(state, mode=IDLE, cooldown_until=None)

    clear = not _airborne_within(snapshot, cfg.device_position,
                                 cfg.silence_radius_km)
    streak = state.clear_streak + 1 if clear else 0

    if state.mode == IDLE:
        nearest = nearest_airborne(snapshot, cfg.device_position)
        if nearest is not None and nearest[1] <= cfg.trigger_distance_km:
            icao, _, altitude = nearest
            event = RecordingEvent(
                klass=1, hex_id=icao,
                altitude_ft=altitude if altitude is not None else 0,
                started_at=wall_time, location_id=cfg.location_id,
                mic_id=cfg.mic_id, duration_s=cfg.aircraft_duration_s)
            actions.append(StartAircraftRecording(event))
            state = replace(
                state, mode=RECORDING_AIRCRAFT, active_event=event,
                recording_ends_at=now + cfg.aircraft_duration_s,
                clear_streak=0)
        elif clear and streak >= cfg.confirmations_required:
            event = RecordingEvent(
                klass=0, hex_id=SILENCE_HEX, altitude_ft=None,
                started_at=wall_time, location_id=cfg.location_id,
                mic_id=cfg.mic_id, duration_s=cfg.silence_duration_s)
            actions.append(StartSilenceRecording(event))
            state = replace(
                state, mode=RECORDING_SILENCE, active_event=event,
                recording_ends_at=now + cfg.silence_duration_s,
                clear_streak=0)
        else:
            state = replace(state, clear_streak=streak)
    else:
        state = replace(state, clear_streak=streak if clear else 0)

    return state, actions


def make_filename(event: RecordingEvent) -> str:
    """``{hex}_{YYYY-MM-DD}_{HH-MM-SS}_{loc}_{mic}.wav``; altitude goes in
    the sidecar index, never the filename."""
    return "%s_%s_%s_%d_%d.wav" % (
        event.hex_id,
        event.started_at.strftime("%Y-%m-%d"),
        event.started_at.strftime("%H-%M-%S"),
        event.location_id,
        event.mic_id,
    )


def load_configs(path) -> dict:
    """Read per-location trigger configs from an INI file.

    Sections are ``[location.N]`` with keys lat, lon, mic_id,
    trigger_distance_km, silence_radius_km, confirmations_required,
    snapshot_period_s, cooldown_s.
    """
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    configs = {}
    for section in parser.sections():
        if not section.startswith("location."):
            continue
        loc = int(section.split(".", 1)[1])
        sec = parser[section]
        configs[loc] = TriggerConfig(
            location_id=loc,
            mic_id=sec.getint("mic_id", 0),
            device_position=(sec.getfloat("lat"), sec.getfloat("lon")),
            trigger_distance_km=sec.getfloat("trigger_distance_km"),
            silence_radius_km=sec.getfloat("silence_radius_km", 10.0),
            confirmations_required=sec.getint("confirmations_required", 3),
            snapshot_period_s=sec.getfloat("snapshot_period_s", 10.0),
            cooldown_s=sec.getfloat("cooldown_s", 5.0),
        )
    return configs
