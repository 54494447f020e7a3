"""Dataset curation: session grouping, leakage-free 6-fold splitting,
5 second segmentation, environmental annotation quantization, the index
CSV and airframe registry lookups with majority consensus."""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .capture import AudioClip, SAMPLE_RATE

SEGMENT_S = 5.0
SEGMENT_SAMPLES = int(SEGMENT_S * SAMPLE_RATE)
SESSION_GAP_S = 2 * 3600
TEST_FOLD = 6
IGNORE = "ignore"

INDEX_COLUMNS = [
    "filename", "class", "fold", "hex_id", "date", "time", "location_id",
    "mic_id", "session_id", "altitude_ft", "event_start_s", "event_end_s",
    "airframe", "engtype", "engnum", "shortdesc", "typedesig", "manu",
    "model", "engmanu", "engmodel", "engfamily", "fueltype", "propmanu",
    "propmodel", "mtow_kg",
]

AIRFRAME_FIELDS = ["airframe", "engtype", "engnum", "shortdesc", "typedesig",
                   "manu", "model", "engmanu", "engmodel", "engfamily",
                   "fueltype", "propmanu", "propmodel", "mtow_kg"]


class DatasetError(Exception):
    pass


class InfeasibleSplit(DatasetError):
    pass


class OverlappingEvents(DatasetError):
    pass


class NoConsensus(DatasetError):
    pass


class UnknownHex(DatasetError):
    pass


def derive_engfamily(engmodel: str) -> str:
    """Engine family from the model string: the alphanumeric prefix up to
    the first separator, with 3+ digit runs rounded down to hundreds
    (PW127 -> PW100, V2527 -> V2500, CFM-56 -> CFM56, PT6A -> PT6)."""
    letters, digits = "", ""
    for ch in engmodel.upper():
        if ch.isalpha() and not digits:
            letters += ch
        elif ch.isdigit():
            digits += ch
        elif ch in "- ":
            if digits:
                break
            continue
        else:
            break
    if not digits:
        return letters
    if len(digits) >= 3:
        digits = str(int(digits) // 100 * 100)
    return letters + digits


@dataclass(frozen=True)
class AirframeMeta:
    registration: str
    airframe: str
    engtype: str
    engnum: int
    shortdesc: str
    typedesig: str
    manu: str
    model: str
    engmanu: str
    engmodel: str
    fueltype: str
    propmanu: str
    propmodel: str
    mtow_kg: float
    engfamily: str = ""

    def __post_init__(self):
        if self.mtow_kg <= 0:
            raise DatasetError("MTOW must be positive")
        if not self.engfamily:
            object.__setattr__(self, "engfamily",
                               derive_engfamily(self.engmodel))


@dataclass(frozen=True)
class SampleRecord:
    filename: str
    klass: int  # 0 silence, 1 aircraft
    hex_id: str
    date: str  # YYYY-MM-DD
    time: str  # HH:MM:SS
    location_id: int
    mic_id: int
    altitude_ft: Optional[int] = None
    session_id: Optional[int] = None
    fold: Optional[int] = None
    event_start_s: Optional[float] = None
    event_end_s: Optional[float] = None
    airframe: Optional[AirframeMeta] = None

    def started_at(self) -> dt.datetime:
        return dt.datetime.strptime(self.date + " " + self.time,
                                    "%Y-%m-%d %H:%M:%S")

    def trimmed_duration_s(self) -> Optional[float]:
        if self.event_start_s is None or self.event_end_s is None:
            return None
        return self.event_end_s - self.event_start_s


@dataclass(frozen=True)
class SegmentLabel:
    source: str  # recording filename or env hour id
    index: int
    label: object  # 0, 1 or "ignore"

    @property
    def t_start_s(self) -> float:
        return self.index * SEGMENT_S


def assign_sessions(records: Sequence[SampleRecord],
                    gap_threshold_s: float = SESSION_GAP_S
                    ) -> List[SampleRecord]:
    """Group records into recording sessions.

    A session is a run of recordings at one (location, mic) with gaps
    below the threshold; session ids are numbered chronologically by
    session start across the whole collection.
    """
    ordered = sorted(records, key=lambda r: (r.started_at(), r.filename))
    groups: Dict[Tuple[int, int], List[List[SampleRecord]]] = {}
    for rec in ordered:
        key = (rec.location_id, rec.mic_id)
        runs = groups.setdefault(key, [])
        if runs and (rec.started_at() - runs[-1][-1].started_at()
                     ).total_seconds() < gap_threshold_s:
            runs[-1].append(rec)
        else:
            runs.append([rec])
    all_runs = [run for runs in groups.values() for run in runs]
    all_runs.sort(key=lambda run: run[0].started_at())
    out = []
    for sid, run in enumerate(all_runs):
        out.extend(replace(r, session_id=sid) for r in run)
    out.sort(key=lambda r: (r.started_at(), r.filename))
    return out


def split_folds(records: Sequence[SampleRecord], n_folds: int = 6,
                tolerance: float = 0.15) -> List[SampleRecord]:
    """Assign whole sessions to folds 1..n_folds (the last is the test
    fold).

    Per location, every test session starts after every training session;
    the remaining sessions are packed greedily (largest first) into the
    training folds. Fold sizes must land within +-tolerance of equal.
    """
    if any(r.session_id is None for r in records):
        raise DatasetError("assign sessions before splitting folds")
    sessions: Dict[int, List[SampleRecord]] = {}
    for rec in records:
        sessions.setdefault(rec.session_id, []).append(rec)
    target = len(records) / n_folds

    # test fold: chronologically last sessions per location
    by_location: Dict[int, List[int]] = {}
    for sid, recs in sessions.items():
        by_location.setdefault(recs[0].location_id, []).append(sid)
    for sids in by_location.values():
        sids.sort(key=lambda sid: min(r.started_at() for r in sessions[sid]))

    test_sessions: List[int] = []
    test_count = 0
    # draw from the tail of the location with the most remaining sessions
    # until the test fold reaches its share
    while test_count < target:
        candidates = [sids for sids in by_location.values() if sids]
        if not candidates:
            break
        sids = max(candidates, key=len)
        sid = sids.pop()
        test_sessions.append(sid)
        test_count += len(sessions[sid])

    train_sids = [sid for sid in sessions if sid not in test_sessions]
    train_sids.sort(key=lambda sid: (-len(sessions[sid]), sid))
    fold_sizes = {f: 0 for f in range(1, n_folds)}
    assignment: Dict[int, int] = {sid: TEST_FOLD for sid in test_sessions}
    for sid in train_sids:
        fold = min(fold_sizes, key=lambda f: (fold_sizes[f], f))
        assignment[sid] = fold
        fold_sizes[fold] += len(sessions[sid])

    sizes = list(fold_sizes.values()) + [test_count]
    hi, lo = (1 + tolerance) * target, (1 - tolerance) * target
    if any(s > hi or s < lo for s in sizes):
        raise InfeasibleSplit("fold sizes %s not within %.0f%% of %.1f"
                              % (sizes, tolerance * 100, target))

    out = [replace(r, fold=assignment[r.session_id]) for r in records]

    # temporal leakage audit, per location
    for loc in by_location:
        train_starts = [r.started_at() for r in out
                        if r.location_id == loc and r.fold != TEST_FOLD]
        test_starts = [r.started_at() for r in out
                       if r.location_id == loc and r.fold == TEST_FOLD]
        if train_starts and test_starts \
                and max(train_starts) >= min(test_starts):
            raise InfeasibleSplit("test sessions not after training "
                                  "sessions at location %d" % loc)
    return out


def segment(record: SampleRecord, clip: AudioClip
            ) -> List[Tuple[np.ndarray, SegmentLabel]]:
    """Cut a (pre-trimmed) clip into consecutive 5 s windows; the final
    partial window is zero-padded to exactly 110,250 samples."""
    samples = clip.samples
    if record.klass == 1 and record.event_start_s is not None:
        i0 = int(round(record.event_start_s * SAMPLE_RATE))
        i1 = int(round(record.event_end_s * SAMPLE_RATE))
        samples = samples[i0:i1]
    n_segments = -(-len(samples) // SEGMENT_SAMPLES)  # ceil
    out = []
    for i in range(n_segments):
        window = samples[i * SEGMENT_SAMPLES:(i + 1) * SEGMENT_SAMPLES]
        if len(window) < SEGMENT_SAMPLES:
            window = np.concatenate([
                window,
                np.zeros(SEGMENT_SAMPLES - len(window), dtype=np.int16)])
        label = SegmentLabel(source=record.filename, index=i,
                             label=record.klass)
        out.append((window, label))
    return out


def quantize_env_annotations(events: Sequence[Tuple[float, float]],
                             hour_len_s: float = 3600.0,
                             segment_s: float = SEGMENT_S,
                             hour_id: str = "") -> List[SegmentLabel]:
    """Quantize aircraft (onset, offset) annotations to 5 s bins.

    Bins fully inside an event are 1, fully outside 0; a bin containing
    an onset or offset strictly in its interior is tagged ignore.
    """
    events = sorted(events)
    for (s0, e0), (s1, e1) in zip(events, events[1:]):
        if s1 < e0:
            raise OverlappingEvents("events overlap at %.1f s" % s1)
    for s, e in events:
        if not 0 <= s < e <= hour_len_s:
            raise DatasetError("event (%s, %s) outside hour" % (s, e))
    n_bins = int(round(hour_len_s / segment_s))
    labels = []
    for i in range(n_bins):
        b0, b1 = i * segment_s, (i + 1) * segment_s
        label = 0
        for onset, offset in events:
            if onset <= b0 and b1 <= offset:
                label = 1
                break
            if b0 < onset < b1 or b0 < offset < b1:
                label = IGNORE
                break
        labels.append(SegmentLabel(source=hour_id, index=i, label=label))
    return labels


MAX_ALTITUDE_FT = 10000


def build_index(records: Sequence[SampleRecord],
                drop_high_altitude: bool = True) -> str:
    """Render records to the index CSV (stable column order).

    Aircraft records above 10,000 ft are excluded.
    """
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(INDEX_COLUMNS)
    for rec in records:
        if drop_high_altitude and rec.altitude_ft is not None \
                and rec.altitude_ft > MAX_ALTITUDE_FT:
            continue
        meta = rec.airframe
        row = [
            rec.filename, rec.klass, rec.fold, rec.hex_id, rec.date,
            rec.time, rec.location_id, rec.mic_id, rec.session_id,
            "" if rec.altitude_ft is None else rec.altitude_ft,
            "" if rec.event_start_s is None else "%g" % rec.event_start_s,
            "" if rec.event_end_s is None else "%g" % rec.event_end_s,
        ]
        if meta is None:
            row += [""] * len(AIRFRAME_FIELDS)
        else:
            row += [getattr(meta, f) for f in AIRFRAME_FIELDS]
        writer.writerow(row)
    return buf.getvalue()


def parse_index(text: str) -> List[SampleRecord]:
    reader = csv.DictReader(io.StringIO(text))
    records = []
    for row in reader:
        meta = None
        if row.get("engmodel"):
            meta = AirframeMeta(
                registration="",
                airframe=row["airframe"], engtype=row["engtype"],
                engnum=int(row["engnum"]), shortdesc=row["shortdesc"],
                typedesig=row["typedesig"], manu=row["manu"],
                model=row["model"], engmanu=row["engmanu"],
                engmodel=row["engmodel"], engfamily=row["engfamily"],
                fueltype=row["fueltype"], propmanu=row["propmanu"],
                propmodel=row["propmodel"], mtow_kg=float(row["mtow_kg"]),
            )
        records.append(SampleRecord(
            filename=row["filename"], klass=int(row["class"]),
            hex_id=row["hex_id"], date=row["date"], time=row["time"],
            location_id=int(row["location_id"]), mic_id=int(row["mic_id"]),
            session_id=int(row["session_id"]) if row["session_id"] else None,
            fold=int(row["fold"]) if row["fold"] else None,
            altitude_ft=int(row["altitude_ft"]) if row["altitude_ft"] else None,
            event_start_s=float(row["event_start_s"]) if row["event_start_s"] else None,
            event_end_s=float(row["event_end_s"]) if row["event_end_s"] else None,
            airframe=meta,
        ))
    return records


def summarize(records: Sequence[SampleRecord]) -> str:
    """Class/location/mic percentage breakdown per fold plus train/test
    totals (the published summary-table layout)."""
    folds = sorted({r.fold for r in records if r.fold is not None})
    groups = {"fold %d" % f: [r for r in records if r.fold == f]
              for f in folds if f != TEST_FOLD}
    groups["train"] = [r for r in records if r.fold != TEST_FOLD]
    groups["test"] = [r for r in records if r.fold == TEST_FOLD]

    def pct(recs, pred):
        if not recs:
            return 0.0
        return 100.0 * sum(1 for r in recs if pred(r)) / len(recs)

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["group"] + list(groups))
    writer.writerow(["n"] + [len(g) for g in groups.values()])
    writer.writerow(["class_0_pct"] + ["%.2f" % pct(g, lambda r: r.klass == 0)
                                       for g in groups.values()])
    writer.writerow(["class_1_pct"] + ["%.2f" % pct(g, lambda r: r.klass == 1)
                                       for g in groups.values()])
    for loc in sorted({r.location_id for r in records}):
        writer.writerow(["location_%d_pct" % loc]
                        + ["%.2f" % pct(g, lambda r, l=loc: r.location_id == l)
                           for g in groups.values()])
    for mic in sorted({r.mic_id for r in records}):
        writer.writerow(["mic_%d_pct" % mic]
                        + ["%.2f" % pct(g, lambda r, m=mic: r.mic_id == m)
                           for g in groups.values()])
    return buf.getvalue()


# ------------------------------------------------------------- registry

class RegistrySource:
    """Adapter answering hex -> registration; file-backed by default,
    network adapters share the same interface."""

    def registration(self, hex_id: str) -> Optional[str]:
        raise NotImplementedError


class FileRegistry(RegistrySource):
    """CSV registry keyed by hex with the airframe feature columns.

    Expected columns: hex_id, registration, military (0/1) and the
    airframe feature fields (engfamily derived, not stored).
    """

    def __init__(self, path):
        self._rows: Dict[str, dict] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                self._rows[row["hex_id"].upper()] = row

    def registration(self, hex_id: str) -> Optional[str]:
        row = self._rows.get(hex_id.upper())
        return row["registration"] if row else None

    def is_military(self, hex_id: str) -> bool:
        row = self._rows.get(hex_id.upper())
        return bool(row) and row.get("military", "0").strip() in ("1", "true")

    def features(self, hex_id: str) -> AirframeMeta:
        row = self._rows.get(hex_id.upper())
        if row is None:
            raise UnknownHex(hex_id)
        return AirframeMeta(
            registration=row["registration"],
            airframe=row["airframe"], engtype=row["engtype"],
            engnum=int(row["engnum"]), shortdesc=row["shortdesc"],
            typedesig=row["typedesig"], manu=row["manu"],
            model=row["model"], engmanu=row["engmanu"],
            engmodel=row["engmodel"], fueltype=row["fueltype"],
            propmanu=row["propmanu"], propmodel=row["propmodel"],
            mtow_kg=float(row["mtow_kg"]),
        )


class StaticRegistry(RegistrySource):
    """In-memory hex -> registration mapping (tests, mock sources)."""

    def __init__(self, mapping: Dict[str, Optional[str]]):
        self._mapping = {k.upper(): v for k, v in mapping.items()}

    def registration(self, hex_id: str) -> Optional[str]:
        return self._mapping.get(hex_id.upper())


def consensus_lookup(hex_id: str, sources: Sequence[RegistrySource],
                     primary: Optional[FileRegistry] = None) -> AirframeMeta:
    """Cross-reference registry sources and accept the registration only
    on strict majority of responders; features come from the primary
    registry (default: the first FileRegistry in sources)."""
    if len(sources) < 2:
        raise DatasetError("need at least two registry sources")
    votes: Dict[str, int] = {}
    responders = 0
    for source in sources:
        reg = source.registration(hex_id)
        if reg:
            responders += 1
            votes[reg] = votes.get(reg, 0) + 1
    if not votes:
        raise UnknownHex(hex_id)
    best_reg, best_votes = max(votes.items(), key=lambda kv: kv[1])
    if best_votes * 2 <= responders:
        raise NoConsensus("no strict majority for %s: %s" % (hex_id, votes))
    if primary is None:
        primary = next((s for s in sources if isinstance(s, FileRegistry)),
                       None)
    if primary is None:
        raise DatasetError("no primary registry with feature data")
    meta = primary.features(hex_id)
    if meta.registration != best_reg:
        meta = replace(meta, registration=best_reg)
    return meta
