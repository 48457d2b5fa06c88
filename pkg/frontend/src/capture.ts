/**
 * Stroke capture for drawn-character login.
 *
 * The recorder is a plain state machine fed normalized pointer events, so
 * the capture path is identical whether events come from a live canvas or
 * a scripted replay, and whether ink is rendered or hidden. Rendering is
 * a side channel: an optional InkSink receives begin/extend/end calls,
 * and invisible mode simply withholds them. Nothing about the recorded
 * points depends on drawing.
 */

/** One pointer sample in device pixels, milliseconds. */
export interface CapturePoint {
  x: number;
  y: number;
  t: number;
}

export type CaptureEventKind = "down" | "move" | "up" | "cancel";

export interface CaptureEvent extends CapturePoint {
  kind: CaptureEventKind;
}

/** A finished drawing with the context needed to normalize it. */
export interface CapturedStrokes {
  /** Strokes as recorded, device pixels. */
  strokes: CapturePoint[][];
  devicePixelRatio: number;
  canvasWidth: number;
  canvasHeight: number;
}

/** Receives ink updates; the on-screen canvas in practice. */
export interface InkSink {
  begin(x: number, y: number): void;
  extend(x: number, y: number): void;
  end(): void;
  clear(): void;
}

export interface RecorderOptions {
  canvasWidth: number;
  canvasHeight: number;
  devicePixelRatio?: number;
  invisible?: boolean;
  ink?: InkSink;
}

/**
 * Accumulates strokes from pointer events.
 *
 * Invariants enforced here rather than trusted from the event source:
 * timestamps within a drawing are strictly increasing (late or repeated
 * samples are dropped), and coordinates are clamped to the canvas.
 */
export class StrokeRecorder {
  private readonly width: number;
  private readonly height: number;
  private readonly dpr: number;
  private readonly ink: InkSink | null;
  private strokes: CapturePoint[][] = [];
  private current: CapturePoint[] | null = null;
  private lastT = -Infinity;
  invisible: boolean;

  constructor(opts: RecorderOptions) {
    if (opts.canvasWidth <= 0 || opts.canvasHeight <= 0) {
      throw new Error("canvas dimensions must be positive");
    }
    this.width = opts.canvasWidth;
    this.height = opts.canvasHeight;
    this.dpr = opts.devicePixelRatio ?? 1;
    if (this.dpr <= 0) throw new Error("devicePixelRatio must be positive");
    this.invisible = opts.invisible ?? false;
    this.ink = opts.ink ?? null;
  }

  handle(ev: CaptureEvent): void {
    switch (ev.kind) {
      case "down": {
        if (this.current) this.finishStroke();
        const p = this.admit(ev);
        this.current = [];
        if (p) {
          this.current.push(p);
          if (!this.invisible) this.ink?.begin(p.x, p.y);
        }
        break;
      }
      case "move": {
        if (!this.current) return; // hover, not drawing
        const p = this.admit(ev);
        if (!p) return;
        const starting = this.current.length === 0;
        this.current.push(p);
        if (!this.invisible) {
          if (starting) this.ink?.begin(p.x, p.y);
          else this.ink?.extend(p.x, p.y);
        }
        break;
      }
      case "up":
        this.finishStroke();
        break;
      case "cancel":
        this.reset();
        break;
    }
  }

  /** Clamp to canvas, reject non-advancing timestamps. */
  private admit(ev: CapturePoint): CapturePoint | null {
    if (!Number.isFinite(ev.x) || !Number.isFinite(ev.y) || !Number.isFinite(ev.t)) {
      return null;
    }
    if (ev.t <= this.lastT) return null;
    this.lastT = ev.t;
    return {
      x: Math.min(Math.max(ev.x, 0), this.width),
      y: Math.min(Math.max(ev.y, 0), this.height),
      t: ev.t,
    };
  }

  private finishStroke(): void {
    if (this.current && this.current.length > 0) {
      this.strokes.push(this.current);
      if (!this.invisible) this.ink?.end();
    }
    this.current = null;
  }

  /** Discard everything, e.g. on Cancel; ink is cleared either way. */
  reset(): void {
    this.strokes = [];
    this.current = null;
    this.lastT = -Infinity;
    this.ink?.clear();
  }

  get isEmpty(): boolean {
    return this.strokes.length === 0 && (this.current?.length ?? 0) === 0;
  }

  /** Snapshot of the finished drawing (an unfinished stroke is included). */
  captured(): CapturedStrokes {
    const strokes = this.strokes.map((s) => s.slice());
    if (this.current && this.current.length > 0) strokes.push(this.current.slice());
    return {
      strokes,
      devicePixelRatio: this.dpr,
      canvasWidth: this.width,
      canvasHeight: this.height,
    };
  }
}

/**
 * Convert a capture to the wire format: [[x, y, t], ...] per stroke with
 * coordinates divided by devicePixelRatio, so a drawing uploads the same
 * regardless of screen density. Timestamps are rebased to the first
 * sample, making replays of the same script byte-identical across runs.
 */
export function toRequestStrokes(captured: CapturedStrokes): number[][][] {
  const t0 = captured.strokes[0]?.[0]?.t ?? 0;
  const dpr = captured.devicePixelRatio;
  return captured.strokes.map((stroke) =>
    stroke.map((p) => [p.x / dpr, p.y / dpr, p.t - t0]),
  );
}
