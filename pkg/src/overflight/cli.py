"""Command-line pipeline driver.

Subcommands cover the whole chain: decode a message stream, run the
trigger/capture monitor (live or replay), synthesize scenarios, build the
dataset index, extract features, train the baselines, evaluate, and run
the review service.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import sys
import zlib
from pathlib import Path

import numpy as np

from . import (adsb, capture, dataset, evaluate, features, models, simulate,
               track, trigger)

DEFAULT_BASE_TIME = "2023-05-09T12:00:00"


class CliError(Exception):
    """Domain error: reported and exits with status 1."""


def _read_stream(path):
    """Replay stream lines: ``<t_s>\\t<payload>`` (or bare payload at 1 Hz)."""
    fh = sys.stdin if path == "-" else open(path)
    try:
        t_auto = 0.0
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" in line:
                t_str, payload = line.split("\t", 1)
                yield float(t_str), payload
            else:
                yield t_auto, line
                t_auto += 1.0
    finally:
        if fh is not sys.stdin:
            fh.close()


class EventAudioFactory:
    """Deterministic per-event synthetic audio: aircraft events carry a
    band-limited tone over noise, silence events carry noise only."""

    def source_for(self, event) -> capture.AudioSource:
        seed = zlib.crc32(trigger.make_filename(event).encode())
        if event.klass == 1:
            return capture.SineSource(880.0, amplitude=0.4,
                                      noise_amplitude=0.05, seed=seed)
        return capture.NoiseSource(amplitude=0.1, seed=seed)


def run_monitor(cfg: trigger.TriggerConfig, stream, out_dir,
                base_time: dt.datetime, stream_format: str = "avr",
                audio_factory=None) -> list:
    """Replay a message stream through tracker + trigger + capture.

    Returns the list of filenames written. Fully deterministic for a
    fixed stream, config and base time.
    """
    audio_factory = audio_factory or EventAudioFactory()
    table = track.AircraftTable(receiver_position=cfg.device_position)
    state = trigger.TriggerState()
    written = []
    pending = None  # active recording event awaiting stop/abort
    next_snap = 0.0

    def handle(actions):
        nonlocal pending
        for action in actions:
            if isinstance(action, (trigger.StartAircraftRecording,
                                   trigger.StartSilenceRecording)):
                pending = action.event
            elif isinstance(action, trigger.StopRecording):
                source = audio_factory.source_for(action.event)
                written.append(capture.record(
                    source, action.event.duration_s, action.event, out_dir))
                pending = None
            elif isinstance(action, trigger.AbortSilenceRecording):
                pending = None  # contaminated; nothing was written

    def do_snapshot(t):
        nonlocal state
        snap = table.snapshot(t)
        wall = base_time + dt.timedelta(seconds=t)
        state, actions = trigger.step(state, snap, cfg, t, wall_time=wall)
        handle(actions)

    last_t = 0.0
    for t, payload in stream:
        while next_snap <= t:
            do_snapshot(next_snap)
            next_snap += cfg.snapshot_period_s
        try:
            if stream_format == "sbs":
                table.ingest_sbs(adsb.parse_sbs_line(payload), t)
            else:
                frame = adsb.parse_frame(adsb.parse_stream_line(payload, t))
                if frame.crc_ok:
                    table.ingest(frame, t)
        except adsb.MalformedLine:
            continue
        last_t = max(last_t, t)

    # flush: let any active recording run to completion
    t = next_snap
    while True:
        do_snapshot(t)
        if state.mode not in (trigger.RECORDING_AIRCRAFT,
                              trigger.RECORDING_SILENCE):
            break
        t += cfg.snapshot_period_s
    return written


# ------------------------------------------------------------ subcommands

def cmd_decode(args) -> int:
    table = track.AircraftTable()
    writer = csv.writer(sys.stdout)
    writer.writerow(["t_s", "icao", "df", "payload", "crc_ok", "lat", "lon",
                     "altitude_ft", "callsign", "ground_speed_kt"])
    for t, payload in _read_stream(args.stream):
        try:
            frame = adsb.parse_frame(adsb.parse_stream_line(payload, t))
        except adsb.MalformedLine:
            continue
        if frame.crc_ok:
            table.ingest(frame, t)
        state = table.get(frame.icao)
        lat, lon = (state.position if state and state.position
                    else (None, None))
        writer.writerow([
            "%g" % t, frame.icao, frame.df, type(frame.payload).__name__,
            int(frame.crc_ok),
            "" if lat is None else "%.5f" % lat,
            "" if lon is None else "%.5f" % lon,
            "" if not state or state.altitude_ft is None else state.altitude_ft,
            state.callsign if state and state.callsign else "",
            "" if not state or state.ground_speed_kt is None
            else "%.1f" % state.ground_speed_kt,
        ])
    return 0


def cmd_simulate(args) -> int:
    if args.scenario:
        scenario = simulate.scenario_from_json(Path(args.scenario).read_text())
    else:
        scenario = simulate.scripted_approach(
            (args.lat, args.lon), args.closest_km)
    lines = (simulate.emit_sbs(scenario) if args.sbs
             else simulate.emit(scenario))
    out = sys.stdout if args.out == "-" else open(args.out, "w")
    try:
        for t, line in lines:
            out.write("%g\t%s\n" % (t, line))
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_monitor(args) -> int:
    configs = trigger.load_configs(args.config)
    if args.location not in configs:
        raise CliError("no config for location %d" % args.location)
    cfg = configs[args.location]
    base_time = dt.datetime.fromisoformat(args.base_time)
    written = run_monitor(cfg, _read_stream(args.replay), args.out,
                          base_time, stream_format=args.format)
    for name in written:
        print(name)
    return 0


def _records_from_sidecar(rec_dir: Path):
    sidecar = rec_dir / capture.SIDECAR_NAME
    if not sidecar.exists():
        raise CliError("no %s in %s" % (capture.SIDECAR_NAME, rec_dir))
    records = []
    with open(sidecar, newline="") as fh:
        for row in csv.DictReader(fh):
            klass = int(row["class"])
            duration = float(row["duration_s"])
            records.append(dataset.SampleRecord(
                filename=row["filename"], klass=klass, hex_id=row["hex_id"],
                date=row["date"], time=row["time"],
                location_id=int(row["location_id"]),
                mic_id=int(row["mic_id"]),
                altitude_ft=int(row["altitude_ft"]) if row["altitude_ft"]
                else None,
                event_start_s=0.0 if klass == 1 else None,
                event_end_s=duration if klass == 1 else None,
            ))
    return records


def cmd_build_dataset(args) -> int:
    rec_dir = Path(args.recordings)
    records = _records_from_sidecar(rec_dir)
    records = dataset.assign_sessions(records)
    if not args.no_folds:
        records = dataset.split_folds(records)
    index_text = dataset.build_index(records)
    out = Path(args.out or rec_dir / "index.csv")
    out.write_text(index_text)
    summary = dataset.summarize(dataset.parse_index(index_text))
    out.with_name("summary.csv").write_text(summary)
    print("wrote %s (%d records)" % (out, len(index_text.splitlines()) - 1))
    return 0


def cmd_features(args) -> int:
    index_text = Path(args.index).read_text()
    records = dataset.parse_index(index_text)
    audio_dir = Path(args.audio_dir)
    entries = []
    labels = []
    for rec in records:
        clip = capture.read_wav(audio_dir / rec.filename)
        for window, seg_label in dataset.segment(rec, clip):
            seg_id = "%s#%d" % (rec.filename, seg_label.index)
            fm = features.mfcc(window, source=seg_id)
            entries.append((seg_id, fm.coeffs))
            labels.append((seg_id, seg_label.label, rec.fold))
    features.write_feature_cache(args.out, entries)
    with open(args.out + ".labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_id", "label", "fold"])
        writer.writerows(labels)
    print("cached %d segments to %s" % (len(entries), args.out))
    return 0


def _load_fold_data(cache_path):
    entries = dict(features.read_feature_cache(cache_path))
    folds = {}
    with open(cache_path + ".labels.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            fold = int(row["fold"]) if row["fold"] else 0
            x, y = folds.setdefault(fold, ([], []))
            x.append(entries[row["segment_id"]])
            y.append(int(row["label"]))
    return {f: (np.array(x), np.array(y, dtype=float))
            for f, (x, y) in folds.items()}


def cmd_train(args) -> int:
    folds = _load_fold_data(args.features)
    cv_folds = {f: d for f, d in folds.items() if f != dataset.TEST_FOLD}
    spec = models.ModelSpec(kind=args.model, seed=args.seed)
    cfg = models.TrainConfig(epochs=args.epochs)
    report = evaluate.cross_validate(spec, cv_folds, cfg)
    print("model=%s cv_map=%.4f cv_std=%.4f folds=%s"
          % (report.model_kind, report.mean, report.std,
             ["%.4f" % a for a in report.fold_ap]))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for fold in sorted(cv_folds):
            train_x = np.concatenate([cv_folds[f][0] for f in cv_folds
                                      if f != fold])
            train_y = np.concatenate([cv_folds[f][1] for f in cv_folds
                                      if f != fold])
            model = evaluate.train_model(
                models.ModelSpec(kind=args.model, seed=args.seed + fold),
                train_x, train_y, cfg)
            models.save_checkpoint(out_dir / ("%s_%d.ckpt"
                                              % (args.model, fold)), model)
        print("checkpoints in %s" % out_dir)
    return 0


def _train_cv_models(folds, kind, seed, epochs):
    cv_folds = {f: d for f, d in folds.items() if f != dataset.TEST_FOLD}
    cfg = models.TrainConfig(epochs=epochs)
    trained = []
    for fold in sorted(cv_folds):
        train_x = np.concatenate([cv_folds[f][0] for f in cv_folds
                                  if f != fold])
        train_y = np.concatenate([cv_folds[f][1] for f in cv_folds
                                  if f != fold])
        trained.append(evaluate.train_model(
            models.ModelSpec(kind=kind, seed=seed + fold),
            train_x, train_y, cfg))
    return trained


def cmd_eval(args) -> int:
    folds = _load_fold_data(args.features)
    trained = _train_cv_models(folds, args.model, args.seed, args.epochs)
    if args.test:
        if dataset.TEST_FOLD not in folds:
            raise CliError("no test fold in features file")
        test_x, test_y = folds[dataset.TEST_FOLD]
        aps = [evaluate.average_precision(m.predict_proba(test_x), test_y)
               for m in trained]
        print("model=%s test_ap=%.4f test_std=%.4f"
              % (args.model, float(np.mean(aps)), float(np.std(aps))))
    if args.env:
        hours = load_env_hours(Path(args.env))
        report = evaluate.evaluate_env(trained, hours)
        for hour_id, row in report.per_hour.items():
            print("hour=%s " % hour_id + " ".join(
                "-" if ap is None else "%.4f" % ap for ap in row))
        print("model=%s env_map_per_hour=%s env_map_pooled=%.4f±%.4f"
              % (args.model,
                 "None" if report.model_means[0] is None else
                 "%.4f" % float(np.mean([m for m in report.model_means
                                         if m is not None])),
                 report.pooled_mean, report.pooled_std))
    return 0


def load_env_hours(env_dir: Path):
    """hour_<id>.wav plus hour_<id>.csv (onset_s,offset_s rows)."""
    hours = []
    for wav_path in sorted(env_dir.glob("hour_*.wav")):
        hour_id = wav_path.stem.split("_", 1)[1]
        clip = capture.read_wav(wav_path)
        events = []
        csv_path = wav_path.with_suffix(".csv")
        if csv_path.exists():
            with open(csv_path, newline="") as fh:
                for row in csv.DictReader(fh):
                    events.append((float(row["onset_s"]),
                                   float(row["offset_s"])))
        hour_len = clip.duration_s
        bins = dataset.quantize_env_annotations(events, hour_len_s=hour_len,
                                                hour_id=hour_id)
        feats = []
        for i in range(len(bins)):
            window = clip.samples[i * dataset.SEGMENT_SAMPLES:
                                  (i + 1) * dataset.SEGMENT_SAMPLES]
            if len(window) < dataset.SEGMENT_SAMPLES:
                window = np.concatenate([
                    window, np.zeros(dataset.SEGMENT_SAMPLES - len(window),
                                     dtype=np.int16)])
            feats.append(features.mfcc(window).coeffs)
        hours.append(evaluate.EnvHour(
            hour_id=hour_id, features=np.array(feats),
            labels=[b.label for b in bins]))
    if not hours:
        raise CliError("no hour_*.wav files in %s" % env_dir)
    return hours


def cmd_serve(args) -> int:
    import uvicorn
    from .service import create_app
    uvicorn.run(create_app(args.data), host="127.0.0.1", port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overflight",
        description="aircraft audio capture and classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode a message stream to CSV")
    p.add_argument("--stream", default="-", help="AVR replay file or -")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("simulate", help="synthesize a message stream")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--closest-km", type=float, default=2.9, dest="closest_km")
    p.add_argument("--lat", type=float, default=-34.95)
    p.add_argument("--lon", type=float, default=138.53)
    p.add_argument("--sbs", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("monitor", help="replay/live trigger + capture loop")
    p.add_argument("--config", required=True, help="INI trigger config")
    p.add_argument("--location", type=int, default=0)
    p.add_argument("--replay", required=True, help="stream file or -")
    p.add_argument("--format", choices=["avr", "sbs"], default="avr")
    p.add_argument("--out", required=True, help="recording output dir")
    p.add_argument("--base-time", default=DEFAULT_BASE_TIME,
                   help="wall-clock time of stream t=0 (ISO-8601)")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("build-dataset", help="sidecar rows -> index CSV")
    p.add_argument("--recordings", required=True)
    p.add_argument("--out")
    p.add_argument("--no-folds", action="store_true")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("features", help="index + audio -> MFCC cache")
    p.add_argument("--index", required=True)
    p.add_argument("--audio-dir", required=True, dest="audio_dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="cross-validate a baseline model")
    p.add_argument("--features", required=True, help="feature cache path")
    p.add_argument("--model", choices=["logreg", "mlp", "cnn"],
                   required=True)
    p.add_argument("--fold-cv", action="store_true", dest="fold_cv",
                   help="5-fold CV report (default behaviour)")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="checkpoint output dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="test-set or environment evaluation")
    p.add_argument("--features", required=True)
    p.add_argument("--model", choices=["logreg", "mlp", "cnn"],
                   required=True)
    p.add_argument("--test", action="store_true")
    p.add_argument("--env", help="directory of hour_*.wav + hour_*.csv")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--data", required=True, help="recordings directory")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, adsb.AdsbError, capture.CaptureError,
            dataset.DatasetError, models.ModelError,
            evaluate.EvalError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
