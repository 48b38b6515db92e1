// Round trip against the real Python service: a tiny corpus is simulated
// once, the server is spawned as a child process, and the console session
// drives it through the public HTTP API only.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { BiasBenchClient } from "../src/api.js";
import { ConsoleSession } from "../src/state.js";

const PORT = 8731 + (Date.now() % 100);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let corpusDir: string;

async function waitForServer(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/api/scenes`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  corpusDir = mkdtempSync(join(tmpdir(), "biasbench-console-"));
  const gridFile = join(corpusDir, "grid.json");
  writeFileSync(
    gridFile,
    JSON.stringify({ diff_on: [0, 40], diff_off: [0, 40], fo: [0], hpf: [0], refr: [0] }),
  );
  const rec = spawnSync(
    "python3",
    [
      "-m", "biasbench.cli", "record",
      "--scene", "spinning-dot",
      "--grid", gridFile,
      "--out", join(corpusDir, "corpus"),
      "--seed", "3",
      "--width", "32",
      "--height", "32",
      "--duration-us", "100000",
    ],
    { encoding: "utf-8" },
  );
  if (rec.status !== 0) throw new Error(`corpus build failed: ${rec.stderr}`);

  server = spawn(
    "python3",
    [
      "-m", "biasbench.cli", "serve",
      "--manifest-dir", join(corpusDir, "corpus"),
      "--port", String(PORT),
      "--demo-log", join(corpusDir, "demos.jsonl"),
    ],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 120_000);

afterAll(() => {
  server?.kill();
});

describe("console round trip", () => {
  it("create -> two slider commits -> two demos -> export matches", async () => {
    const client = new BiasBenchClient(BASE);
    const session = new ConsoleSession(client);

    await session.start("spinning-dot", { diff_off: 0, diff_on: 0 });
    expect(session.state.biases).toMatchObject({ diff_off: 0, diff_on: 0 });

    // commit 1: move diff_off one grid cell
    await session.commit(session.snapPending({ diff_off: 40, diff_on: 0 }));
    expect(session.state.biases).toMatchObject({ diff_off: 40, diff_on: 0 });
    await session.recordDemo("record_delta");
    expect(session.state.demoCount).toBe(1);

    // commit 2: move diff_on one grid cell
    await session.commit(session.snapPending({ diff_off: 40, diff_on: 40 }));
    expect(session.state.biases).toMatchObject({ diff_off: 40, diff_on: 40 });
    await session.recordDemo("record_delta");
    expect(session.state.demoCount).toBe(2);

    const lines = (await client.exportDemos()).trim().split("\n");
    expect(lines.length).toBe(2);
    const actions = lines.map((l) => JSON.parse(l).action);
    expect(actions).toEqual([
      [40, 0, 0, 0, 0],
      [0, 40, 0, 0, 0],
    ]);
  });

  it("UI biases always equal server snapping", async () => {
    const client = new BiasBenchClient(BASE);
    const session = new ConsoleSession(client);
    // off-grid start: the server snaps, the console shows the snapped tuple
    await session.start("spinning-dot", { diff_off: 33, diff_on: 9 });
    expect(session.state.biases).toMatchObject({ diff_off: 40, diff_on: 0 });

    // client-side snap agrees with the server's on every commit
    const pending = session.snapPending({ diff_off: 19, diff_on: 21 });
    expect(pending).toEqual({ diff_off: 0, diff_on: 40 });
    await session.commit(pending);
    expect(session.state.biases).toMatchObject({ diff_off: 0, diff_on: 40 });
  });

  it("rapid double commit serializes into history", async () => {
    const client = new BiasBenchClient(BASE);
    const session = new ConsoleSession(client);
    await session.start("spinning-dot", { diff_off: 0, diff_on: 0 });
    void session.commit({ diff_off: 40, diff_on: 0 });
    void session.commit({ diff_off: 40, diff_on: 40 });
    await session.idle();
    const sid = session.state.sessionId!;
    const metrics = await client.metrics(sid);
    expect(metrics.history_length).toBe(3); // create + 2 serialized adjusts
    expect(session.state.biases).toMatchObject({ diff_off: 40, diff_on: 40 });
  });

  it("frame endpoint serves a PNG", async () => {
    const client = new BiasBenchClient(BASE);
    const session = new ConsoleSession(client);
    await session.start("spinning-dot", {});
    const res = await fetch(session.state.frameUrl!);
    expect(res.ok).toBe(true);
    expect(res.headers.get("content-type")).toBe("image/png");
    const bytes = new Uint8Array(await res.arrayBuffer());
    expect(Array.from(bytes.slice(0, 4))).toEqual([0x89, 0x50, 0x4e, 0x47]);
  });
});
