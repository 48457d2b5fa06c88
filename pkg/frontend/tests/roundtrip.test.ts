/**
 * End-to-end against the real service: spawn the Python server, enroll a
 * scripted "writer" with one drawing per character, then check that the
 * same writer's replay is accepted and a different writer's is rejected
 * at the calibrated threshold.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { StrokeRecorder, toRequestStrokes } from "../src/capture.js";
import { ServiceClient } from "../src/api.js";
import { glyphScript } from "./replay.js";

const PASSWORD = ["5", "7", "3", "1"];

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      srv.close(() => resolve(address.port));
    });
  });
}

function drawing(writer: string, label: string): number[][][] {
  const recorder = new StrokeRecorder({ canvasWidth: 400, canvasHeight: 400 });
  for (const ev of glyphScript(writer, label)) recorder.handle(ev);
  return toRequestStrokes(recorder.captured());
}

function attempts(writer: string) {
  return PASSWORD.map((label) => ({ label, strokes: drawing(writer, label) }));
}

describe("service round trip", () => {
  let server: ChildProcess;
  let workdir: string;
  let client: ServiceClient;
  let serverLog = "";

  beforeAll(async () => {
    workdir = mkdtempSync(join(tmpdir(), "strokeauth-ui-"));
    const calibration = join(workdir, "calibration.json");
    writeFileSync(
      calibration,
      JSON.stringify({
        genuine: [-0.6, -0.5, -0.4, -0.3],
        impostor: [-9.0, -8.0, -7.0, -6.0],
      }),
    );
    const port = await freePort();
    server = spawn(
      "python3",
      [
        "-m",
        "strokeauth.cli",
        "serve",
        "--port",
        String(port),
        "--store",
        join(workdir, "store.json"),
        "--calibration",
        calibration,
      ],
      { stdio: ["ignore", "pipe", "pipe"] },
    );
    server.stdout?.on("data", (chunk) => (serverLog += chunk));
    server.stderr?.on("data", (chunk) => (serverLog += chunk));
    client = new ServiceClient(`http://127.0.0.1:${port}`);

    const deadline = Date.now() + 30_000;
    for (;;) {
      try {
        const info = await client.calibration();
        if (info !== null) break;
      } catch {
        // not listening yet
      }
      if (Date.now() > deadline) {
        throw new Error(`service never came up:\n${serverLog}`);
      }
      await new Promise((r) => setTimeout(r, 250));
    }
  }, 45_000);

  afterAll(() => {
    server?.kill();
    if (workdir) rmSync(workdir, { recursive: true, force: true });
  });

  it("enrolls one drawing per character", async () => {
    const created = await client.createUser("alice", PASSWORD);
    expect(created.enroll_count).toBe(1);
    // the completeness flag covers the whole password, so it flips only
    // once the final character has its drawing
    const last = PASSWORD[PASSWORD.length - 1];
    for (const label of PASSWORD) {
      const resp = await client.enroll("alice", label, drawing("alice", label));
      expect(resp.remaining).toBe(0);
      expect(resp.enrollment_complete).toBe(label === last);
    }
  }, 30_000);

  it("accepts the genuine replay at the calibrated threshold", async () => {
    const verdict = await client.verify("alice", attempts("alice"));
    expect(verdict.decision).toBe("accept");
    expect(verdict.per_character_scores).toHaveLength(PASSWORD.length);
    const calibrated = await client.calibration();
    expect(verdict.threshold).toBe(calibrated?.threshold);
  }, 30_000);

  it("rejects a different writer's replay", async () => {
    const verdict = await client.verify("alice", attempts("mallory"));
    expect(verdict.decision).toBe("reject");
    expect(verdict.fused_score).toBeLessThan(verdict.threshold);
  }, 30_000);
});
