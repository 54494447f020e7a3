/** Monotonic time source in seconds; injectable so tests drive it. */
export interface Clock {
  now(): number;
}

export interface LoopRegion {
  startS: number;
  endS: number;
}

/**
 * Playhead and loop-selection logic, decoupled from any real audio
 * output. The controller tracks position against an injected clock;
 * `pump()` hands out the next buffer's time span so an audio sink (or a
 * test) can observe exactly which part of the clip is being played.
 */
export class PlaybackController {
  private playing = false;
  private anchorClock = 0;
  private anchorPos = 0;
  private loop: LoopRegion | null = null;

  constructor(
    private clock: Clock,
    private durationS: number,
    private bufferS = 0.05
  ) {}

  isPlaying(): boolean {
    return this.playing;
  }

  play(): void {
    if (this.playing) {
      return;
    }
    this.playing = true;
    this.anchorClock = this.clock.now();
  }

  /** Idempotent: pausing a paused controller changes nothing. */
  pause(): void {
    if (!this.playing) {
      return;
    }
    this.anchorPos = this.playhead();
    this.playing = false;
  }

  seek(tS: number): void {
    this.anchorPos = Math.min(Math.max(tS, 0), this.durationS);
    this.anchorClock = this.clock.now();
  }

  /** Restrict playback to [startS, endS]; null clears the loop. */
  setLoop(loop: LoopRegion | null): void {
    if (loop && !(loop.startS >= 0 && loop.startS < loop.endS)) {
      throw new Error("loop region must be ordered");
    }
    const pos = this.playhead();
    this.loop = loop;
    if (loop && (pos < loop.startS || pos >= loop.endS)) {
      this.seek(loop.startS);
    }
  }

  /** Current position in seconds, wrapped into the loop if one is set. */
  playhead(): number {
    let pos = this.anchorPos;
    if (this.playing) {
      pos += this.clock.now() - this.anchorClock;
    }
    if (this.loop) {
      const span = this.loop.endS - this.loop.startS;
      if (pos >= this.loop.endS) {
        pos = this.loop.startS + ((pos - this.loop.startS) % span);
      }
    } else if (pos >= this.durationS) {
      pos = this.durationS;
      if (this.playing) {
        this.anchorPos = pos;
        this.anchorClock = this.clock.now();
        this.playing = false;
      }
    }
    return pos;
  }

  /**
   * Advance by one buffer and return the [from, to) span the sink
   * should emit, or null when paused / at the end of the clip. Spans
   * never cross a loop boundary; the wrap lands on the next pump.
   */
  pump(): [number, number] | null {
    if (!this.playing) {
      return null;
    }
    const from = this.playhead();
    let to = from + this.bufferS;
    if (this.loop) {
      to = Math.min(to, this.loop.endS);
    } else if (to >= this.durationS) {
      to = this.durationS;
    }
    this.anchorPos = to >= (this.loop ? this.loop.endS : this.durationS)
      ? this.loop
        ? this.loop.startS
        : to
      : to;
    this.anchorClock = this.clock.now();
    if (!this.loop && to >= this.durationS) {
      this.playing = false;
    }
    return from < to ? [from, to] : null;
  }
}
