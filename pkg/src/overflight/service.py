"""Review service backing the verification/trimming UI.

Serves pending recordings for human review, persists verdicts to an
append-only journal (last verdict per file wins) and, on commit, builds
the curated dataset: accepted clips copied, trimmed clips cut, discards
dropped, index finalized. Commit is idempotent.
"""

from __future__ import annotations

import csv
import json
import shutil
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from pydantic import BaseModel

from . import capture, dataset

JOURNAL_NAME = "verdicts.jsonl"
CURATED_DIR = "curated"
DISCARD_REASONS = {"bad_quality", "over_10000ft", "speech_privacy",
                   "mislabeled"}
VERDICT_STATUSES = {"accepted", "trimmed", "discarded"}
WAVEFORM_BINS_PER_S = 100


class Verdict(BaseModel):
    filename: str
    status: str
    trim_start_s: Optional[float] = None
    trim_end_s: Optional[float] = None
    reason: Optional[str] = None


def load_recordings(data_dir: Path):
    """Rows of the capture sidecar, keyed by filename."""
    sidecar = data_dir / capture.SIDECAR_NAME
    rows = {}
    if sidecar.exists():
        with open(sidecar, newline="") as fh:
            for row in csv.DictReader(fh):
                rows[row["filename"]] = row
    return rows


def load_journal(data_dir: Path):
    """Latest verdict per filename from the append-only journal."""
    journal = data_dir / JOURNAL_NAME
    verdicts = {}
    if journal.exists():
        with open(journal) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    doc = json.loads(line)
                    verdicts[doc["filename"]] = doc
    return verdicts


def append_journal(data_dir: Path, verdict: dict) -> None:
    with open(data_dir / JOURNAL_NAME, "a") as fh:
        fh.write(json.dumps(verdict) + "\n")


def task_view(row: dict, verdict: Optional[dict]) -> dict:
    status = verdict["status"] if verdict else "pending"
    return {
        "filename": row["filename"],
        "class": int(row["class"]),
        "hex_id": row["hex_id"],
        "altitude_ft": int(row["altitude_ft"]) if row["altitude_ft"] else None,
        "date": row["date"],
        "time": row["time"],
        "location_id": int(row["location_id"]),
        "mic_id": int(row["mic_id"]),
        "duration_s": float(row["duration_s"]),
        "status": status,
        "trim_start_s": verdict.get("trim_start_s") if verdict else None,
        "trim_end_s": verdict.get("trim_end_s") if verdict else None,
        "reason": verdict.get("reason") if verdict else None,
        "audio_url": "/audio/" + row["filename"],
    }


def commit_verdicts(data_dir: Path) -> dict:
    """Apply journaled verdicts: curated audio plus a finalized index.

    Deterministic from (recordings, journal), so re-running changes
    nothing.
    """
    rows = load_recordings(data_dir)
    verdicts = load_journal(data_dir)
    out_dir = data_dir / CURATED_DIR
    out_dir.mkdir(exist_ok=True)

    records = []
    kept = 0
    discarded = 0
    for filename, row in sorted(rows.items()):
        verdict = verdicts.get(filename)
        if verdict is None:
            continue  # unreviewed recordings stay out of the index
        if verdict["status"] == "discarded":
            discarded += 1
            continue
        src = data_dir / filename
        clip = capture.read_wav(src)
        if verdict["status"] == "trimmed":
            clip = capture.trim(clip, verdict["trim_start_s"],
                                verdict["trim_end_s"])
        dst = out_dir / filename
        existing = dst.exists() and capture.read_wav(dst)
        if not existing or len(existing.samples) != len(clip.samples) \
                or not np.array_equal(existing.samples, clip.samples):
            capture.write_wav(dst, clip)
        kept += 1
        klass = int(row["class"])
        records.append(dataset.SampleRecord(
            filename=filename, klass=klass, hex_id=row["hex_id"],
            date=row["date"], time=row["time"],
            location_id=int(row["location_id"]), mic_id=int(row["mic_id"]),
            altitude_ft=int(row["altitude_ft"]) if row["altitude_ft"] else None,
            event_start_s=0.0 if klass == 1 else None,
            event_end_s=clip.duration_s if klass == 1 else None,
        ))

    records = dataset.assign_sessions(records)
    try:
        records = dataset.split_folds(records)
    except dataset.InfeasibleSplit:
        pass  # small review batches keep fold column empty
    index_text = dataset.build_index(records)
    index_path = out_dir / "index.csv"
    index_bytes = index_text.encode()
    if not index_path.exists() or index_path.read_bytes() != index_bytes:
        index_path.write_bytes(index_bytes)
    return {"committed": kept, "discarded": discarded,
            "index": str(index_path)}


def create_app(data_dir) -> FastAPI:
    data_dir = Path(data_dir)
    app = FastAPI(title="overflight review service")

    @app.get("/tasks")
    def tasks():
        rows = load_recordings(data_dir)
        verdicts = load_journal(data_dir)
        pending = [task_view(row, None)
                   for name, row in sorted(rows.items())
                   if name not in verdicts]
        return {"tasks": pending}

    @app.get("/audio/{filename}")
    def audio(filename: str, request: Request):
        rows = load_recordings(data_dir)
        if filename not in rows:
            raise HTTPException(status_code=404, detail="unknown file")
        data = (data_dir / filename).read_bytes()
        range_header = request.headers.get("range")
        if range_header and range_header.startswith("bytes="):
            spec = range_header[len("bytes="):].split("-")
            start = int(spec[0]) if spec[0] else 0
            end = int(spec[1]) if len(spec) > 1 and spec[1] else len(data) - 1
            end = min(end, len(data) - 1)
            if start > end:
                raise HTTPException(status_code=416, detail="bad range")
            chunk = data[start:end + 1]
            return Response(
                content=chunk, status_code=206, media_type="audio/wav",
                headers={
                    "Content-Range": "bytes %d-%d/%d" % (start, end, len(data)),
                    "Accept-Ranges": "bytes",
                })
        return Response(content=data, media_type="audio/wav",
                        headers={"Accept-Ranges": "bytes"})

    @app.get("/waveform/{filename}")
    def waveform(filename: str):
        rows = load_recordings(data_dir)
        if filename not in rows:
            raise HTTPException(status_code=404, detail="unknown file")
        clip = capture.read_wav(data_dir / filename)
        n = len(clip.samples)
        n_bins = -(-n * WAVEFORM_BINS_PER_S // capture.SAMPLE_RATE)
        # fractional bin edges so the count is exact even though the
        # sample rate is not a multiple of the bin rate
        edges = np.round(np.arange(n_bins + 1)
                         * capture.SAMPLE_RATE / WAVEFORM_BINS_PER_S
                         ).astype(np.int64)
        edges = np.minimum(edges, n)
        mags = np.abs(clip.samples.astype(np.float64)) / 32768.0
        envelope = [float(mags[a:b].max()) if b > a else 0.0
                    for a, b in zip(edges, edges[1:])]
        return {"bins_per_second": WAVEFORM_BINS_PER_S,
                "bins": [round(v, 4) for v in envelope]}

    @app.post("/verdict")
    def verdict(v: Verdict):
        rows = load_recordings(data_dir)
        if v.filename not in rows:
            raise HTTPException(status_code=404, detail="unknown file")
        if v.status not in VERDICT_STATUSES:
            raise HTTPException(status_code=422, detail="bad status")
        if v.status == "trimmed":
            duration = float(rows[v.filename]["duration_s"])
            if v.trim_start_s is None or v.trim_end_s is None \
                    or not 0 <= v.trim_start_s < v.trim_end_s <= duration:
                raise HTTPException(status_code=422,
                                    detail="invalid trim range")
        if v.status == "discarded" and v.reason not in DISCARD_REASONS:
            raise HTTPException(status_code=422,
                                detail="discard needs a valid reason")
        append_journal(data_dir, v.model_dump(exclude_none=True))
        return {"ok": True}

    @app.post("/commit")
    def commit():
        return commit_verdicts(data_dir)

    return app
