"""Recording output: mono 16-bit 22,050 Hz PCM WAV files plus a sidecar
metadata index, and the AudioSource abstraction that feeds them."""

from __future__ import annotations

import csv
import os
import struct
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .trigger import RecordingEvent, make_filename

SAMPLE_RATE = 22050
SIDECAR_NAME = "recordings.csv"
SIDECAR_FIELDS = ["filename", "class", "hex_id", "altitude_ft",
                  "date", "time", "location_id", "mic_id", "duration_s"]


class CaptureError(Exception):
    pass


class SourceUnderrun(CaptureError):
    """The audio source ended before the requested duration."""


class IoFailure(CaptureError):
    pass


class NotRiff(CaptureError):
    """File is not a RIFF/WAVE container."""


class UnsupportedFormat(CaptureError):
    """WAV exists but violates the 22,050 Hz / mono / 16-bit contract."""


class BadRange(CaptureError):
    pass


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray  # int16
    sample_rate_hz: int = SAMPLE_RATE
    channels: int = 1

    def __post_init__(self):
        if self.sample_rate_hz != SAMPLE_RATE or self.channels != 1:
            raise UnsupportedFormat("clips are mono 22,050 Hz only")
        if self.samples.dtype != np.int16:
            raise UnsupportedFormat("clips are 16-bit PCM only")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


class AudioSource:
    """Pull-based sample provider. pull(n) returns up to n int16 samples;
    returning fewer than requested signals end-of-stream."""

    def pull(self, n_samples: int) -> np.ndarray:
        raise NotImplementedError


class SineSource(AudioSource):
    """Endless sine tone, optionally mixed with seeded white noise."""

    def __init__(self, freq_hz: float, amplitude: float = 0.5,
                 noise_amplitude: float = 0.0, seed: int = 0):
        self.freq_hz = freq_hz
        self.amplitude = amplitude
        self.noise_amplitude = noise_amplitude
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._pos = 0

    def pull(self, n_samples: int) -> np.ndarray:
        t = (np.arange(self._pos, self._pos + n_samples)
             / float(SAMPLE_RATE))
        self._pos += n_samples
        wave_f = self.amplitude * np.sin(2 * np.pi * self.freq_hz * t)
        if self.noise_amplitude:
            wave_f = wave_f + self.noise_amplitude * self._rng.standard_normal(
                n_samples)
        return (np.clip(wave_f, -1.0, 1.0) * 32767).astype(np.int16)


class NoiseSource(AudioSource):
    """Endless seeded white noise."""

    def __init__(self, amplitude: float = 0.1, seed: int = 0):
        self.amplitude = amplitude
        self._rng = np.random.Generator(np.random.PCG64(seed))

    def pull(self, n_samples: int) -> np.ndarray:
        wave_f = self.amplitude * self._rng.standard_normal(n_samples)
        return (np.clip(wave_f, -1.0, 1.0) * 32767).astype(np.int16)


class ArraySource(AudioSource):
    """Finite source backed by an in-memory array (for underrun tests)."""

    def __init__(self, samples: np.ndarray):
        self._samples = samples.astype(np.int16)
        self._pos = 0

    def pull(self, n_samples: int) -> np.ndarray:
        out = self._samples[self._pos:self._pos + n_samples]
        self._pos += len(out)
        return out


def write_wav(path, clip: AudioClip) -> None:
    try:
        with wave.open(str(path), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(SAMPLE_RATE)
            wf.writeframes(clip.samples.astype("<i2").tobytes())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_wav(path) -> AudioClip:
    try:
        with open(path, "rb") as fh:
            head = fh.read(12)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
        raise NotRiff("%s is not a RIFF/WAVE file" % path)
    try:
        with wave.open(str(path), "rb") as wf:
            rate = wf.getframerate()
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            if rate != SAMPLE_RATE or channels != 1 or width != 2:
                raise UnsupportedFormat(
                    "expected mono 16-bit %d Hz, got %d ch %d-bit %d Hz"
                    % (SAMPLE_RATE, channels, width * 8, rate))
            data = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise NotRiff(str(exc)) from exc
    samples = np.frombuffer(data, dtype="<i2").astype(np.int16)
    return AudioClip(samples=samples)


def trim(clip: AudioClip, start_s: float, end_s: float) -> AudioClip:
    """Samples in [round(start*rate), round(end*rate))."""
    if not 0 <= start_s < end_s or end_s > clip.duration_s + 1e-9:
        raise BadRange("bad trim range (%s, %s) for %.2f s clip"
                       % (start_s, end_s, clip.duration_s))
    i0 = int(round(start_s * clip.sample_rate_hz))
    i1 = int(round(end_s * clip.sample_rate_hz))
    return AudioClip(samples=clip.samples[i0:i1].copy())


def append_sidecar_row(out_dir, event: RecordingEvent, filename: str) -> None:
    sidecar = Path(out_dir) / SIDECAR_NAME
    new = not sidecar.exists()
    with open(sidecar, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(SIDECAR_FIELDS)
        writer.writerow([
            filename, event.klass, event.hex_id,
            "" if event.altitude_ft is None else event.altitude_ft,
            event.started_at.strftime("%Y-%m-%d"),
            event.started_at.strftime("%H:%M:%S"),
            event.location_id, event.mic_id, event.duration_s,
        ])


def record(source: AudioSource, duration_s: float, event: RecordingEvent,
           out_dir, block_samples: int = 4096) -> str:
    """Capture duration_s of audio to a named WAV plus a sidecar row.

    Underruns discard the recording (no partial files on disk).
    Returns the filename written.
    """
    total = int(round(duration_s * SAMPLE_RATE))
    blocks = []
    got = 0
    while got < total:
        want = min(block_samples, total - got)
        block = source.pull(want)
        if len(block) == 0:
            raise SourceUnderrun("source ended at %d/%d samples" % (got, total))
        blocks.append(block)
        got += len(block)
    samples = np.concatenate(blocks)[:total]
    clip = AudioClip(samples=samples.astype(np.int16))
    filename = make_filename(event)
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    write_wav(out_dir / filename, clip)
    append_sidecar_row(out_dir, event, filename)
    return filename
