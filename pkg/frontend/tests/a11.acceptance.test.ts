/**
 * Acceptance A11: a scripted review session against a live service.
 *
 * Reviews 10 frames through the real frontend session/verdict/api code:
 * 3 detections toggled false-positive, 2 missed positions added, the rest
 * accepted as-is. Asserts the dataset store gains exactly 3 negatives and
 * 2 positives at pixel-exact window coordinates, and that retraining on the
 * grown store lowers the classifier score at every mined false-positive
 * window.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ReviewApi } from "../src/api.js";
import { ReviewSession } from "../src/session.js";

const PY = process.env.PYTHON ?? "python3";
const PORT = 18473;
const BASE = `http://127.0.0.1:${PORT}`;

const CONFIG = {
  synth: {
    width: 320,
    height: 280,
    n_pedestrians: [3, 6],
    spacing_mm: [340, 900],
    wall_rate: 0.3,
    hand_rate: 0.1,
  },
  train: { epochs: 12 },
};

let root: string;
let service: ChildProcess | null = null;

function cli(args: string[]): void {
  execFileSync(PY, ["-m", "hahog.cli", ...args], { stdio: "pipe" });
}

function snapOrigin(center: number, window = 66, stride = 6): number {
  // mirror of the pipeline's stride-lattice snapping (banker's rounding
  // never triggers for the pixel choices below: they are lattice-exact)
  return Math.round((center - window / 2) / stride) * stride;
}

async function waitForService(): Promise<void> {
  for (let i = 0; i < 120; i++) {
    try {
      const r = await fetch(`${BASE}/health`);
      if (r.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((res) => setTimeout(res, 500));
  }
  throw new Error("service did not come up");
}

function scoreAt(
  scoresDir: string,
  frameId: string,
  x: number,
  y: number,
): number {
  const dump = JSON.parse(
    readFileSync(join(scoresDir, `${frameId}.scores.json`), "utf-8"),
  ) as {
    cell_size: number;
    window_px: number;
    origin_xs: number[];
    origin_ys: number[];
    alphas: number[][];
  };
  const ox = snapOrigin(x, dump.window_px, dump.cell_size) / dump.cell_size;
  const oy = snapOrigin(y, dump.window_px, dump.cell_size) / dump.cell_size;
  const ix = dump.origin_xs.indexOf(ox);
  const iy = dump.origin_ys.indexOf(oy);
  expect(ix).toBeGreaterThanOrEqual(0);
  expect(iy).toBeGreaterThanOrEqual(0);
  return dump.alphas[iy]![ix]!;
}

beforeAll(async () => {
  root = mkdtempSync(join(tmpdir(), "hahog-a11-"));
  const cfg = join(root, "config.json");
  const { writeFileSync } = await import("node:fs");
  writeFileSync(cfg, JSON.stringify(CONFIG));

  cli(["--config", cfg, "synth", "--out", join(root, "train_corpus"),
       "--frames", "12", "--seed", "1100"]);
  cli(["--config", cfg, "synth", "--out", join(root, "review_corpus"),
       "--frames", "10", "--seed", "1200"]);
  cli(["--config", cfg, "train", "--corpus", join(root, "train_corpus"),
       "--store", join(root, "store"), "--model-out", join(root, "model_a.mlp")]);
  cli(["--config", cfg, "detect", "--corpus", join(root, "review_corpus"),
       "--model", join(root, "model_a.mlp"),
       "--out", join(root, "det_a.jsonl"),
       "--dump-scores", join(root, "scores_a")]);

  service = spawn(
    PY,
    ["-m", "hahog.cli", "serve",
     "--corpus", join(root, "review_corpus"),
     "--model", join(root, "model_a.mlp"),
     "--store", join(root, "store"),
     "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForService();
}, 600_000);

afterAll(() => {
  if (service) service.kill("SIGTERM");
  if (root) rmSync(root, { recursive: true, force: true });
});

describe("A11 hard-mining round trip", () => {
  it("mines exactly 3 negatives and 2 positives with pixel-exact "
     + "coordinates, and retraining lowers alpha at each mined window",
  async () => {
    const api = new ReviewApi(BASE);
    const before = await api.storeStats();
    expect(before.by_provenance["hard-mined"]).toBeUndefined();

    const session = new ReviewSession(api);
    const fpWindows: { frameId: string; x: number; y: number }[] = [];
    const missedClicks: [number, number][] = [
      [105, 87],
      [213, 141],
    ]; // lattice-exact pixels: (p - 33) is a multiple of the 6 px stride
    const missedRecords: { frameId: string; x: number; y: number }[] = [];

    let item = await session.loadNext();
    let reviewed = 0;
    while (item) {
      if (fpWindows.length < 3 && item.item.detections.length > 0) {
        const d = item.item.detections[0]!;
        item.editor.toggle(d.id);
        fpWindows.push({ frameId: item.item.frame_id, x: d.x, y: d.y });
      } else if (missedRecords.length < missedClicks.length) {
        const [mx, my] = missedClicks[missedRecords.length]!;
        item.editor.addMissed(mx, my);
        missedRecords.push({ frameId: item.item.frame_id, x: mx, y: my });
      }
      item = await session.submitAndAdvance();
      reviewed += 1;
    }

    expect(reviewed).toBe(10);
    expect(session.done).toBe(true);
    expect(fpWindows).toHaveLength(3);
    expect(missedRecords).toHaveLength(2);
    expect(session.counters.negativesAdded).toBe(3);
    expect(session.counters.positivesAdded).toBe(2);

    // store deltas: exactly 3 hard-mined negatives, 2 hard-mined positives
    const after = await api.storeStats();
    const mined = after.by_provenance["hard-mined"]!;
    expect(mined).toEqual({ positive: 2, negative: 3 });
    expect(after.counts.positive).toBe(before.counts.positive + 2);
    expect(after.counts.negative).toBe(before.counts.negative + 3);

    // pixel-exact coordinates in the store manifest
    const manifest = JSON.parse(
      readFileSync(join(root, "store", "manifest.json"), "utf-8"),
    ) as { samples: { id: string; label: string; provenance: string;
                      frame_id: string; origin: [number, number] }[] };
    const minedRecs = manifest.samples.filter(
      (s) => s.provenance === "hard-mined",
    );
    expect(minedRecs).toHaveLength(5);
    for (const fp of fpWindows) {
      const rec = minedRecs.find(
        (s) => s.label === "negative" && s.frame_id === fp.frameId,
      )!;
      expect(rec).toBeDefined();
      expect(rec.origin).toEqual([snapOrigin(fp.x), snapOrigin(fp.y)]);
    }
    for (const m of missedRecords) {
      const rec = minedRecs.find(
        (s) => s.label === "positive" && s.id.includes(`${m.x}x${m.y}`),
      )!;
      expect(rec).toBeDefined();
      expect(rec.frame_id).toBe(m.frameId);
      expect(rec.origin).toEqual([snapOrigin(m.x), snapOrigin(m.y)]);
    }

    // retrain on the grown store; alpha must drop at every mined FP window
    service!.kill("SIGTERM");
    service = null;
    const cfg = join(root, "config.json");
    cli(["--config", cfg, "train", "--store", join(root, "store"),
         "--model-out", join(root, "model_b.mlp")]);
    cli(["--config", cfg, "detect", "--corpus", join(root, "review_corpus"),
         "--model", join(root, "model_b.mlp"),
         "--out", join(root, "det_b.jsonl"),
         "--dump-scores", join(root, "scores_b")]);

    for (const fp of fpWindows) {
      const a = scoreAt(join(root, "scores_a"), fp.frameId, fp.x, fp.y);
      const b = scoreAt(join(root, "scores_b"), fp.frameId, fp.x, fp.y);
      expect(b).toBeLessThan(a);
    }
  });
});
