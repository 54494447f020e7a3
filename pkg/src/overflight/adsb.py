"""Mode S / ADS-B frame decoding.

Handles 56-bit and 112-bit downlink frames: CRC-24 validation, payload
classification for DF17 extended squitter (identification, airborne
position, velocity), CPR position recovery and 25 ft altitude decoding.
Input framing is AVR text lines (``*<hex>;``) or pre-decoded SBS CSV rows.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional, Union

CRC24_GENERATOR = 0xFFF409

# 6-bit identification charset: index 1-26 = A-Z, 32 = space, 48-57 = 0-9
CALLSIGN_CHARSET = (
    "#ABCDEFGHIJKLMNOPQRSTUVWXYZ#####"
    " ###############0123456789######"
)

NZ = 15  # airborne latitude zones per hemisphere quadrant
CPR_SCALE = 1 << 17
DLAT_EVEN = 360.0 / (4 * NZ)       # 6 degrees
DLAT_ODD = 360.0 / (4 * NZ - 1)    # 360/59 degrees


class AdsbError(Exception):
    """Base class for decoding failures."""


class BadLength(AdsbError):
    """Frame is not 7 or 14 bytes."""


class MalformedLine(AdsbError):
    """Text line does not follow the expected serialization."""


class ZoneMismatch(AdsbError):
    """Even/odd CPR pair straddles a latitude zone boundary."""


class StalePair(AdsbError):
    """Even/odd CPR pair is too far apart in time to decode safely."""


class UndecodableAltitude(AdsbError):
    """Altitude field uses Gillham (Q=0) coding, which is not supported."""


@dataclass(frozen=True)
class RawFrame:
    """An undecoded 56- or 112-bit downlink frame."""

    bits: bytes
    received_at: float = 0.0

    def __post_init__(self):
        if len(self.bits) not in (7, 14):
            raise BadLength(
                "frame must be 7 or 14 bytes, got %d" % len(self.bits))


@dataclass(frozen=True)
class AirbornePositionMsg:
    cpr_format: str  # "even" or "odd"
    cpr_lat: int
    cpr_lon: int
    altitude_ft: Optional[int]
    surface: bool = False

    def __post_init__(self):
        if self.cpr_format not in ("even", "odd"):
            raise ValueError("cpr_format must be 'even' or 'odd'")
        if not (0 <= self.cpr_lat < CPR_SCALE and 0 <= self.cpr_lon < CPR_SCALE):
            raise ValueError("CPR indices must be 17-bit")


@dataclass(frozen=True)
class VelocityMsg:
    ground_speed_kt: float
    heading_deg: float
    vertical_rate_fpm: int


@dataclass(frozen=True)
class IdentificationMsg:
    callsign: str


@dataclass(frozen=True)
class Opaque:
    """Payload type we do not decode (surface, status, non-DF17...)."""

    type_code: Optional[int] = None


Payload = Union[AirbornePositionMsg, VelocityMsg, IdentificationMsg, Opaque]


@dataclass(frozen=True)
class ModeSFrame:
    df: int
    icao: str
    payload: Payload
    crc_ok: bool
    received_at: float = 0.0


def crc24(data: bytes) -> int:
    """Remainder of ``data`` under the Mode S generator polynomial."""
    rem = 0
    for byte in data:
        rem ^= byte << 16
        for _ in range(8):
            rem <<= 1
            if rem & 0x1000000:
                rem ^= CRC24_GENERATOR
        rem &= 0xFFFFFF
    return rem


def verify_crc(raw: RawFrame) -> bool:
    """True iff the frame's trailing 24-bit parity matches its contents."""
    return crc24(raw.bits[:-3]) == int.from_bytes(raw.bits[-3:], "big")


# NL(lat) transition latitudes for NZ = 15, precomputed from
# NL = floor(2*pi / acos(1 - (1-cos(pi/(2*NZ))) / cos(pi/180*lat)^2))
_NL_BOUNDS = []
_NL_VALUES = []
for _nl in range(59, 2, -1):
    _lat = (180.0 / math.pi) * math.acos(math.sqrt(
        (1 - math.cos(math.pi / (2 * NZ))) /
        (1 - math.cos(2 * math.pi / _nl))))
    _NL_BOUNDS.append(_lat)
    _NL_VALUES.append(_nl)
_NL_BOUNDS.append(87.0)
_NL_VALUES.append(2)


def nl(lat_deg: float) -> int:
    """Number of longitude zones at the given latitude."""
    abs_lat = abs(lat_deg)
    if abs_lat >= 87.0:
        return 1
    idx = bisect.bisect_right(_NL_BOUNDS, abs_lat)
    if idx >= len(_NL_VALUES):
        return 1
    return _NL_VALUES[idx]


def decode_altitude(ac12: int) -> int:
    """Decode the 12-bit altitude field of an airborne position message.

    Only the Q=1 (25 ft increment) coding is supported; Gillham-coded
    values raise UndecodableAltitude.
    """
    if not ac12 & 0x010:
        raise UndecodableAltitude("Q=0 Gillham coding not supported")
    n = ((ac12 & 0xFE0) >> 1) | (ac12 & 0x00F)
    return 25 * n - 1000


def encode_altitude(altitude_ft: int) -> int:
    """Inverse of decode_altitude for the Q=1 coding."""
    n = (altitude_ft + 1000) // 25
    if not 0 <= n < 2048:
        raise ValueError("altitude out of 25 ft encoding range")
    return ((n & 0x7F0) << 1) | 0x010 | (n & 0x00F)


def _decode_position_me(me: bytes) -> AirbornePositionMsg:
    ac12 = ((me[1] & 0xFF) << 4) | (me[2] >> 4)
    try:
        altitude = decode_altitude(ac12) if ac12 else None
    except UndecodableAltitude:
        altitude = None
    odd = bool(me[2] & 0x04)
    cpr_lat = ((me[2] & 0x03) << 15) | (me[3] << 7) | (me[4] >> 1)
    cpr_lon = ((me[4] & 0x01) << 16) | (me[5] << 8) | me[6]
    return AirbornePositionMsg(
        cpr_format="odd" if odd else "even",
        cpr_lat=cpr_lat,
        cpr_lon=cpr_lon,
        altitude_ft=altitude,
    )


def _decode_identification_me(me: bytes) -> IdentificationMsg:
    bits = int.from_bytes(me[1:7], "big")
    chars = []
    for shift in range(42, -1, -6):
        chars.append(CALLSIGN_CHARSET[(bits >> shift) & 0x3F])
    return IdentificationMsg(callsign="".join(chars).rstrip())


def _decode_velocity_me(me: bytes) -> Payload:
    subtype = me[0] & 0x07
    if subtype not in (1, 2):  # only groundspeed subtypes
        return Opaque(type_code=19)
    dir_ew = (me[1] >> 2) & 0x01
    v_ew = ((me[1] & 0x03) << 8) | me[2]
    dir_ns = (me[3] >> 7) & 0x01
    v_ns = ((me[3] & 0x7F) << 3) | (me[4] >> 5)
    if v_ew == 0 or v_ns == 0:
        return Opaque(type_code=19)
    vx = (v_ew - 1) * (-1 if dir_ew else 1)
    vy = (v_ns - 1) * (-1 if dir_ns else 1)
    speed = math.hypot(vx, vy)
    heading = math.degrees(math.atan2(vx, vy)) % 360.0
    sign_vr = (me[4] >> 3) & 0x01
    vr_raw = ((me[4] & 0x07) << 6) | (me[5] >> 2)
    vert_rate = 0 if vr_raw == 0 else (vr_raw - 1) * 64 * (-1 if sign_vr else 1)
    return VelocityMsg(
        ground_speed_kt=speed,
        heading_deg=heading,
        vertical_rate_fpm=vert_rate,
    )


def parse_frame(raw: RawFrame) -> ModeSFrame:
    """Classify a raw downlink frame into a typed ModeSFrame."""
    df = raw.bits[0] >> 3
    icao = raw.bits[1:4].hex().upper()
    crc_ok = verify_crc(raw)
    payload: Payload = Opaque()
    if df == 17 and len(raw.bits) == 14:
        me = raw.bits[4:11]
        tc = me[0] >> 3
        if 1 <= tc <= 4:
            payload = _decode_identification_me(me)
        elif 9 <= tc <= 18:
            payload = _decode_position_me(me)
        elif tc == 19:
            payload = _decode_velocity_me(me)
        else:
            payload = Opaque(type_code=tc)
    return ModeSFrame(
        df=df, icao=icao, payload=payload, crc_ok=crc_ok,
        received_at=raw.received_at)


def decode_cpr_global(even: AirbornePositionMsg, odd: AirbornePositionMsg,
                      newest: str = "even", t_even: Optional[float] = None,
                      t_odd: Optional[float] = None,
                      max_age_s: float = 10.0) -> tuple:
    """Globally unambiguous position from an even/odd CPR frame pair.

    Raises ZoneMismatch when the two frames fall in different longitude
    zone counts (the pair straddles a latitude zone boundary) and
    StalePair when timestamps are supplied and too far apart.
    """
    if even.cpr_format != "even" or odd.cpr_format != "odd":
        raise ValueError("arguments must be an even and an odd frame")
    if t_even is not None and t_odd is not None:
        if abs(t_even - t_odd) > max_age_s:
            raise StalePair("pair gap %.1f s exceeds %.1f s"
                            % (abs(t_even - t_odd), max_age_s))

    lat_e = even.cpr_lat / CPR_SCALE
    lat_o = odd.cpr_lat / CPR_SCALE

    j = math.floor(59 * lat_e - 60 * lat_o + 0.5)
    rlat_e = DLAT_EVEN * ((j % 60) + lat_e)
    rlat_o = DLAT_ODD * ((j % 59) + lat_o)
    if rlat_e >= 270:
        rlat_e -= 360
    if rlat_o >= 270:
        rlat_o -= 360

    if nl(rlat_e) != nl(rlat_o):
        raise ZoneMismatch("even/odd frames are in different latitude zones")

    if newest == "even":
        rlat, lon_cpr, fmt = rlat_e, even.cpr_lon / CPR_SCALE, 0
    else:
        rlat, lon_cpr, fmt = rlat_o, odd.cpr_lon / CPR_SCALE, 1

    nl_val = nl(rlat)
    m = math.floor((even.cpr_lon / CPR_SCALE) * (nl_val - 1)
                   - (odd.cpr_lon / CPR_SCALE) * nl_val + 0.5)
    ni = max(nl_val - fmt, 1)
    dlon = 360.0 / ni
    lon = dlon * ((m % ni) + lon_cpr)
    if lon >= 180:
        lon -= 360
    return rlat, lon


def decode_cpr_local(msg: AirbornePositionMsg, ref: tuple) -> tuple:
    """Single-frame CPR decode relative to a known nearby position.

    Returns the ambiguity-set candidate nearest ``ref``; only valid when
    the true position is within roughly 180 NM of the reference.
    """
    ref_lat, ref_lon = ref
    fmt = 0 if msg.cpr_format == "even" else 1
    dlat = DLAT_EVEN if fmt == 0 else DLAT_ODD
    lat_cpr = msg.cpr_lat / CPR_SCALE
    lon_cpr = msg.cpr_lon / CPR_SCALE

    j = math.floor(ref_lat / dlat) + math.floor(
        0.5 + (ref_lat % dlat) / dlat - lat_cpr)
    lat = dlat * (j + lat_cpr)

    dlon = 360.0 / max(nl(lat) - fmt, 1)
    m = math.floor(ref_lon / dlon) + math.floor(
        0.5 + (ref_lon % dlon) / dlon - lon_cpr)
    lon = dlon * (m + lon_cpr)
    return lat, lon


def parse_stream_line(line: str, received_at: float = 0.0) -> RawFrame:
    """Parse one AVR text line (``*<hex>;``) into a RawFrame."""
    line = line.strip()
    if not line.startswith("*") or not line.endswith(";"):
        raise MalformedLine("missing AVR sentinels: %r" % line[:40])
    hexpart = line[1:-1]
    if len(hexpart) % 2 or len(hexpart) not in (14, 28):
        raise MalformedLine("AVR payload must be 14 or 28 hex digits")
    try:
        data = bytes.fromhex(hexpart)
    except ValueError as exc:
        raise MalformedLine("invalid hex in AVR line") from exc
    return RawFrame(bits=data, received_at=received_at)


def format_stream_line(raw: RawFrame) -> str:
    """Serialize a RawFrame back to its AVR text form."""
    return "*%s;" % raw.bits.hex().upper()


@dataclass(frozen=True)
class SbsUpdate:
    """One pre-decoded SBS/BaseStation CSV row (position subset)."""

    icao: str
    altitude_ft: Optional[int]
    lat_deg: Optional[float]
    lon_deg: Optional[float]


def parse_sbs_line(line: str) -> SbsUpdate:
    """Parse an SBS CSV row: field 5 = ICAO, 12 = altitude, 15/16 = lat/lon."""
    fields = line.strip().split(",")
    if len(fields) < 16:
        raise MalformedLine("SBS row needs at least 16 fields")
    icao = fields[4].strip().upper()
    if len(icao) != 6 or any(c not in "0123456789ABCDEF" for c in icao):
        raise MalformedLine("bad ICAO field: %r" % fields[4])

    def _opt(text, conv):
        text = text.strip()
        return conv(text) if text else None

    try:
        return SbsUpdate(
            icao=icao,
            altitude_ft=_opt(fields[11], lambda s: int(float(s))),
            lat_deg=_opt(fields[14], float),
            lon_deg=_opt(fields[15], float),
        )
    except ValueError as exc:
        raise MalformedLine("bad numeric field in SBS row") from exc
