import { Waveform } from "./types";

/** Bins the service emits for a clip: ceil(duration x bin rate). */
export function expectedBinCount(
  durationS: number,
  binsPerSecond: number
): number {
  return Math.ceil(durationS * binsPerSecond);
}

/**
 * Peak-preserving downsample of the envelope to a pixel width. Each
 * column takes the max of its bin span, so short transients stay
 * visible no matter how narrow the viewport.
 */
export function resampleEnvelope(bins: number[], width: number): number[] {
  if (width <= 0) {
    throw new Error("width must be positive");
  }
  if (bins.length === 0) {
    return new Array(width).fill(0);
  }
  const out: number[] = [];
  for (let x = 0; x < width; x++) {
    const lo = Math.floor((x * bins.length) / width);
    const hi = Math.max(Math.ceil(((x + 1) * bins.length) / width), lo + 1);
    let peak = 0;
    for (let i = lo; i < Math.min(hi, bins.length); i++) {
      peak = Math.max(peak, bins[i] ?? 0);
    }
    out.push(peak);
  }
  return out;
}

/** Map a clip time to a pixel column for a given viewport width. */
export function timeToX(
  tS: number,
  durationS: number,
  width: number
): number {
  const clamped = Math.min(Math.max(tS, 0), durationS);
  return (clamped / durationS) * width;
}

/** Inverse of timeToX. */
export function xToTime(x: number, durationS: number, width: number): number {
  const clamped = Math.min(Math.max(x, 0), width);
  return (clamped / width) * durationS;
}

/** Duration implied by a waveform payload, in seconds. */
export function waveformDuration(waveform: Waveform): number {
  return waveform.bins.length / waveform.bins_per_second;
}
