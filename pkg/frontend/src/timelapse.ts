/** Webcam time-lapse playback over the frames of one day. */

import type { WebcamFrame } from "./types.js";

/** Timestamp order, missing timestamps first (as the epoch), ids break ties. */
export function sortFrames(frames: WebcamFrame[]): WebcamFrame[] {
  const key = (f: WebcamFrame): [number, string] => [
    f.taken_at === null ? 0 : Date.parse(f.taken_at),
    f.id,
  ];
  return [...frames].sort((a, b) => {
    const [ta, ia] = key(a);
    const [tb, ib] = key(b);
    if (ta !== tb) return ta - tb;
    return ia < ib ? -1 : ia > ib ? 1 : 0;
  });
}

type Scheduler = {
  set: (fn: () => void, ms: number) => number;
  clear: (handle: number) => void;
};

const realScheduler: Scheduler = {
  set: (fn, ms) => setInterval(fn, ms) as unknown as number,
  clear: (handle) => clearInterval(handle as unknown as ReturnType<typeof setInterval>),
};

export class Timelapse {
  private readonly ordered: WebcamFrame[];
  private index = 0;
  private handle: number | null = null;

  /** called whenever the visible frame changes */
  onFrame: (frame: WebcamFrame, index: number) => void = () => {};

  constructor(
    frames: WebcamFrame[],
    private intervalMs = 800,
    private readonly scheduler: Scheduler = realScheduler,
  ) {
    this.ordered = sortFrames(frames);
  }

  get frames(): WebcamFrame[] {
    return this.ordered;
  }

  get position(): number {
    return this.index;
  }

  get current(): WebcamFrame | null {
    return this.ordered[this.index] ?? null;
  }

  get playing(): boolean {
    return this.handle !== null;
  }

  /** Advance one frame, wrapping at the end. */
  advance(): void {
    if (this.ordered.length === 0) return;
    this.index = (this.index + 1) % this.ordered.length;
    const frame = this.ordered[this.index]!;
    this.onFrame(frame, this.index);
  }

  seek(index: number): void {
    if (index < 0 || index >= this.ordered.length) throw new Error("frame index out of range");
    this.index = index;
    this.onFrame(this.ordered[index]!, index);
  }

  play(): void {
    if (this.handle !== null || this.ordered.length === 0) return;
    this.handle = this.scheduler.set(() => this.advance(), this.intervalMs);
  }

  /** Stop the clock; position is kept so play() resumes where it paused. */
  pause(): void {
    if (this.handle === null) return;
    this.scheduler.clear(this.handle);
    this.handle = null;
  }

  setRate(intervalMs: number): void {
    if (!(intervalMs > 0)) throw new Error("interval must be positive");
    this.intervalMs = intervalMs;
    if (this.handle !== null) {
      this.pause();
      this.play();
    }
  }
}
