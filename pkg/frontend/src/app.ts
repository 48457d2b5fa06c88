/**
 * Single-page enroll/verify demo. One capture pad, reused for each
 * character of the password in turn; one API call in flight at a time.
 */

import {
  CaptureEvent,
  CapturedStrokes,
  InkSink,
  StrokeRecorder,
  toRequestStrokes,
} from "./capture.js";
import { CharacterScore, localDecision, ServiceClient } from "./api.js";

const client = new ServiceClient();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class CanvasInk implements InkSink {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d context unavailable");
    this.ctx = ctx;
    this.ctx.lineWidth = 3 * (window.devicePixelRatio || 1);
    this.ctx.lineCap = "round";
    this.ctx.lineJoin = "round";
    this.ctx.strokeStyle = "#1a1a2e";
  }

  begin(x: number, y: number): void {
    this.ctx.beginPath();
    this.ctx.moveTo(x, y);
  }

  extend(x: number, y: number): void {
    this.ctx.lineTo(x, y);
    this.ctx.stroke();
    this.ctx.beginPath();
    this.ctx.moveTo(x, y);
  }

  end(): void {
    this.ctx.beginPath();
  }

  clear(): void {
    this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
  }
}

/** Map pointer events into recorder events in device pixels. */
function attachPointerCapture(
  canvas: HTMLCanvasElement,
  recorder: () => StrokeRecorder | null,
): void {
  const dpr = window.devicePixelRatio || 1;
  const toEvent = (kind: CaptureEvent["kind"], ev: PointerEvent): CaptureEvent => ({
    kind,
    x: ev.offsetX * dpr,
    y: ev.offsetY * dpr,
    t: ev.timeStamp,
  });
  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    recorder()?.handle(toEvent("down", ev));
    ev.preventDefault();
  });
  canvas.addEventListener("pointermove", (ev) => {
    recorder()?.handle(toEvent("move", ev));
  });
  canvas.addEventListener("pointerup", (ev) => {
    recorder()?.handle(toEvent("up", ev));
  });
  canvas.addEventListener("pointercancel", (ev) => {
    recorder()?.handle(toEvent("cancel", ev));
  });
}

type CaptureResult = CapturedStrokes | null; // null = cancelled

class CapturePad {
  private recorder: StrokeRecorder | null = null;
  private pending: ((r: CaptureResult) => void) | null = null;
  private readonly ink: CanvasInk;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly prompt: HTMLElement,
    okButton: HTMLButtonElement,
    cancelButton: HTMLButtonElement,
    private readonly invisibleToggle: HTMLInputElement,
  ) {
    const dpr = window.devicePixelRatio || 1;
    canvas.width = canvas.clientWidth * dpr;
    canvas.height = canvas.clientHeight * dpr;
    this.ink = new CanvasInk(canvas);
    attachPointerCapture(canvas, () => this.recorder);
    okButton.addEventListener("click", () => this.finish(false));
    cancelButton.addEventListener("click", () => this.finish(true));
    invisibleToggle.addEventListener("change", () => {
      if (this.recorder) this.recorder.invisible = invisibleToggle.checked;
    });
  }

  /** Show the label and resolve once the user hits OK (or Cancel). */
  capture(label: string): Promise<CaptureResult> {
    this.prompt.textContent = `Draw “${label}”`;
    this.ink.clear();
    this.recorder = new StrokeRecorder({
      canvasWidth: this.canvas.width,
      canvasHeight: this.canvas.height,
      devicePixelRatio: window.devicePixelRatio || 1,
      invisible: this.invisibleToggle.checked,
      ink: this.ink,
    });
    return new Promise((resolve) => {
      this.pending = resolve;
    });
  }

  private finish(cancelled: boolean): void {
    if (!this.recorder || !this.pending) return;
    if (!cancelled && this.recorder.isEmpty) return; // nothing drawn yet
    const result = cancelled ? null : this.recorder.captured();
    this.recorder.reset();
    this.recorder = null;
    const resolve = this.pending;
    this.pending = null;
    this.prompt.textContent = "";
    resolve(result);
  }
}

function setStatus(text: string, kind: "info" | "error" | "ok" = "info"): void {
  const node = el<HTMLElement>("status");
  node.textContent = text;
  node.dataset.kind = kind;
}

function passwordFrom(input: string): string[] {
  return input
    .split("")
    .map((c) => c.trim())
    .filter((c) => c.length > 0);
}

async function enrollFlow(pad: CapturePad): Promise<void> {
  const userId = el<HTMLInputElement>("user-id").value.trim();
  const password = passwordFrom(el<HTMLInputElement>("password").value);
  const repeats = Number(el<HTMLInputElement>("enroll-count").value) || 1;
  if (!userId || password.length === 0) {
    setStatus("user id and password required", "error");
    return;
  }
  try {
    await client.createUser(userId, password);
  } catch (err) {
    // 409 means the user exists already; keep enrolling missing templates
    if (!isApiError(err) || err.status !== 409) {
      setStatus(`create failed: ${String((err as Error).message)}`, "error");
      return;
    }
  }
  for (const label of password) {
    for (let i = 0; i < repeats; i += 1) {
      setStatus(`enrolling “${label}” (${i + 1}/${repeats})`);
      let captured: CaptureResult = null;
      while (captured === null) {
        captured = await pad.capture(label);
        if (captured === null) setStatus(`“${label}” discarded, draw it again`);
      }
      const resp = await client.enroll(userId, label, toRequestStrokes(captured));
      setStatus(
        resp.remaining === 0
          ? `“${label}” enrolled`
          : `“${label}”: ${resp.remaining} drawing(s) still needed`,
      );
    }
  }
  setStatus("enrollment finished — ready to verify", "ok");
}

// instanceof across module boundaries can betray us after bundling; a
// structural check is enough to spot the API error shape.
function isApiError(err: unknown): err is { status: number; message: string } {
  return typeof err === "object" && err !== null && "status" in err;
}

let lastScores: CharacterScore[] = [];
let serverThreshold = 0;

function renderVerdict(fused: number, threshold: number, decision: string): void {
  el<HTMLElement>("fused").textContent = fused.toFixed(3);
  el<HTMLElement>("decision").textContent = decision;
  el<HTMLElement>("decision").dataset.kind = decision;
  el<HTMLElement>("threshold-value").textContent = threshold.toFixed(3);
}

async function verifyFlow(pad: CapturePad): Promise<void> {
  const userId = el<HTMLInputElement>("user-id").value.trim();
  const password = passwordFrom(el<HTMLInputElement>("password").value);
  if (!userId || password.length === 0) {
    setStatus("user id and password required", "error");
    return;
  }
  const attempts: { label: string; strokes: number[][][] }[] = [];
  for (const label of password) {
    setStatus(`draw “${label}” to verify`);
    let captured: CaptureResult = null;
    while (captured === null) {
      captured = await pad.capture(label);
    }
    attempts.push({ label, strokes: toRequestStrokes(captured) });
  }
  setStatus("scoring…");
  try {
    const resp = await client.verify(userId, attempts);
    lastScores = resp.per_character_scores;
    serverThreshold = resp.threshold;
    const table = el<HTMLElement>("scores");
    table.innerHTML = "";
    for (const s of resp.per_character_scores) {
      const row = document.createElement("tr");
      row.innerHTML = `<td>${s.label}</td><td>${s.score.toFixed(3)}</td>`;
      table.appendChild(row);
    }
    const slider = el<HTMLInputElement>("threshold-slider");
    slider.value = String(resp.threshold);
    renderVerdict(resp.fused_score, resp.threshold, resp.decision);
    setStatus("done", "ok");
  } catch (err) {
    setStatus(
      isApiError(err) ? `verify failed: ${err.message}` : String(err),
      "error",
    );
  }
}

function wireThresholdSlider(): void {
  const slider = el<HTMLInputElement>("threshold-slider");
  slider.addEventListener("input", () => {
    if (lastScores.length === 0) return;
    const t = Number(slider.value);
    const { fused, decision } = localDecision(lastScores, t);
    renderVerdict(fused, t, decision);
  });
  el<HTMLButtonElement>("threshold-reset").addEventListener("click", () => {
    if (lastScores.length === 0) return;
    slider.value = String(serverThreshold);
    const { fused, decision } = localDecision(lastScores, serverThreshold);
    renderVerdict(fused, serverThreshold, decision);
  });
}

function main(): void {
  const pad = new CapturePad(
    el<HTMLCanvasElement>("pad"),
    el<HTMLElement>("prompt"),
    el<HTMLButtonElement>("ok"),
    el<HTMLButtonElement>("cancel"),
    el<HTMLInputElement>("invisible"),
  );
  el<HTMLButtonElement>("enroll").addEventListener("click", () => {
    void enrollFlow(pad);
  });
  el<HTMLButtonElement>("verify").addEventListener("click", () => {
    void verifyFlow(pad);
  });
  wireThresholdSlider();
  void client.calibration().then((info) => {
    if (info) {
      setStatus(
        `calibrated threshold ${info.threshold.toFixed(3)} (EER ${(info.eer * 100).toFixed(1)}%)`,
      );
    }
  });
}

main();
