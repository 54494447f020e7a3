"""MFCC front end: 13 coefficients per frame, 2048-sample Hann windows
with hop 512, giving a 13x216 matrix per 5 second segment."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Tuple

import numpy as np

SAMPLE_RATE = 22050
SEGMENT_SAMPLES = 5 * SAMPLE_RATE  # 110,250
N_FFT = 2048
HOP = 512
N_MELS = 128
N_MFCC = 13
LOG_FLOOR = 1e-10

CACHE_MAGIC = b"OFLF"
CACHE_VERSION = 1


class FeatureError(Exception):
    pass


class EmptyInput(FeatureError):
    pass


class BadBand(FeatureError):
    pass


@dataclass(frozen=True)
class FeatureMatrix:
    coeffs: np.ndarray  # (13, n_frames), 216 frames for a 5 s segment
    source: str = ""

    def __post_init__(self):
        if self.coeffs.shape[0] != N_MFCC:
            raise FeatureError("expected %d coefficient rows" % N_MFCC)
        if not np.all(np.isfinite(self.coeffs)):
            raise FeatureError("non-finite coefficients")


def stft_power(samples: np.ndarray, n_fft: int = N_FFT,
               hop: int = HOP) -> np.ndarray:
    """Power spectrogram, shape (1 + N//hop, n_fft//2 + 1).

    Frames are centered: the signal is reflection-padded by n_fft//2 on
    both ends, windowed with a periodic Hann window.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise EmptyInput("no samples")
    n_frames = 1 + samples.size // hop
    pad = n_fft // 2
    padded = np.pad(samples, pad, mode="reflect")
    window = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n_fft) / n_fft))
    idx = (np.arange(n_frames)[:, None] * hop) + np.arange(n_fft)[None, :]
    frames = padded[idx] * window
    spectrum = np.fft.rfft(frames, axis=1)
    return np.abs(spectrum) ** 2


def _hz_to_mel(freq):
    """Slaney mel scale: linear below 1 kHz, log above."""
    freq = np.asarray(freq, dtype=np.float64)
    f_sp = 200.0 / 3
    mel = freq / f_sp
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    above = freq >= min_log_hz
    mel = np.where(above, min_log_mel + np.log(np.maximum(freq, 1e-12)
                                               / min_log_hz) / logstep, mel)
    return mel


def _mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    f_sp = 200.0 / 3
    freq = mel * f_sp
    min_log_mel = 1000.0 / f_sp
    logstep = np.log(6.4) / 27.0
    above = mel >= min_log_mel
    return np.where(above, 1000.0 * np.exp(logstep * (mel - min_log_mel)),
                    freq)


def mel_filterbank(n_mels: int = N_MELS, f_min: float = 0.0,
                   f_max: float = SAMPLE_RATE / 2,
                   n_fft_bins: int = N_FFT // 2 + 1,
                   sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular, area-normalized mel filters: (n_mels, n_fft_bins)."""
    if not f_min < f_max <= sample_rate / 2:
        raise BadBand("need f_min < f_max <= Nyquist")
    mel_pts = np.linspace(_hz_to_mel(f_min), _hz_to_mel(f_max), n_mels + 2)
    hz_pts = _mel_to_hz(mel_pts)
    fft_freqs = np.linspace(0, sample_rate / 2, n_fft_bins)

    bank = np.zeros((n_mels, n_fft_bins))
    for m in range(n_mels):
        lower, center, upper = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (fft_freqs - lower) / max(center - lower, 1e-12)
        down = (upper - fft_freqs) / max(upper - center, 1e-12)
        bank[m] = np.maximum(0.0, np.minimum(up, down))
        bank[m] *= 2.0 / (upper - lower)  # equal-area normalization
    return bank


@lru_cache(maxsize=8)
def _dct2_matrix(n: int) -> np.ndarray:
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    mat = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * m + 1) * k / (2 * n))
    mat[0] /= np.sqrt(2.0)
    return mat


def dct2_ortho(v: np.ndarray) -> np.ndarray:
    """Orthonormal type-2 DCT along the last axis (an isometry)."""
    v = np.asarray(v, dtype=np.float64)
    return v @ _dct2_matrix(v.shape[-1]).T


def mfcc(segment: np.ndarray, source: str = "") -> FeatureMatrix:
    """13 MFCCs per frame for one 5 s segment (110,250 samples)."""
    segment = np.asarray(segment, dtype=np.float64)
    if segment.size != SEGMENT_SAMPLES:
        raise FeatureError("segment must be exactly %d samples, got %d"
                           % (SEGMENT_SAMPLES, segment.size))
    power = stft_power(segment)
    mel = power @ mel_filterbank().T
    log_mel = 10.0 * np.log10(np.maximum(mel, LOG_FLOOR))
    coeffs = dct2_ortho(log_mel)[:, :N_MFCC]
    return FeatureMatrix(coeffs=coeffs.T.copy(), source=source)


def write_feature_cache(path, entries: List[Tuple[str, np.ndarray]]) -> None:
    """Binary feature cache: magic, version, count, then per segment the
    id (length-prefixed utf-8) and the 13xF little-endian float64 block."""
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<II", CACHE_VERSION, len(entries)))
        for seg_id, coeffs in entries:
            raw_id = seg_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw_id)))
            fh.write(raw_id)
            fh.write(struct.pack("<II", *coeffs.shape))
            fh.write(np.ascontiguousarray(coeffs, dtype="<f8").tobytes())


def read_feature_cache(path) -> List[Tuple[str, np.ndarray]]:
    with open(path, "rb") as fh:
        if fh.read(4) != CACHE_MAGIC:
            raise FeatureError("bad cache magic")
        version, count = struct.unpack("<II", fh.read(8))
        if version != CACHE_VERSION:
            raise FeatureError("unsupported cache version %d" % version)
        entries = []
        for _ in range(count):
            (id_len,) = struct.unpack("<I", fh.read(4))
            seg_id = fh.read(id_len).decode("utf-8")
            rows, cols = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
            entries.append((seg_id, data.reshape(rows, cols).copy()))
    return entries
