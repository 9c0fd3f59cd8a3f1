// Replay viewer: steps a recorded session's frame stream with pause/step/speed.
// Frame streams come either from a live session capture or from re-running a
// stored action log server-side; the viewer only plays back what it is given.

import { FrameMsg } from "./protocol.js";

export class ReplayPlayer {
  cursor = -1;
  playing = false;
  speed = 1.0;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    public frames: FrameMsg[],
    private baseTickRate: number,
    private onFrame: (f: FrameMsg, index: number) => void,
  ) {}

  current(): FrameMsg | null {
    return this.cursor >= 0 && this.cursor < this.frames.length
      ? this.frames[this.cursor]
      : null;
  }

  step(delta = 1): void {
    const next = Math.min(Math.max(this.cursor + delta, 0), this.frames.length - 1);
    if (next !== this.cursor) {
      this.cursor = next;
      this.onFrame(this.frames[this.cursor], this.cursor);
    }
  }

  play(): void {
    if (this.playing || this.frames.length === 0) return;
    this.playing = true;
    const period = 1000 / (this.baseTickRate * this.speed);
    this.timer = setInterval(() => {
      if (this.cursor >= this.frames.length - 1) {
        this.pause();
        return;
      }
      this.step(1);
    }, period);
  }

  pause(): void {
    this.playing = false;
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  setSpeed(speed: number): void {
    this.speed = speed;
    if (this.playing) {
      this.pause();
      this.play();
    }
  }
}
