/**
 * Review SPA bootstrap.
 *
 * Keyboard-first flow: Space accepts the frame as-is and advances (one
 * keystroke per all-correct frame), U undoes the last edit, +/- zoom,
 * arrow keys pan. Clicking a detection toggles correct/false-positive;
 * clicking empty depth adds a missed pedestrian at that exact pixel.
 */

import { ReviewApi, ApiError } from "./api.js";
import { hitTest, renderDepth, renderOverlay } from "./render.js";
import { ReviewSession } from "./session.js";
import {
  IDENTITY,
  pan,
  screenToImage,
  zoomAt,
  type ViewTransform,
} from "./transform.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function serviceUrl(): string {
  const q = new URLSearchParams(location.search).get("service");
  return q ?? `${location.protocol}//${location.host}`;
}

async function start() {
  const api = new ReviewApi(serviceUrl());
  const session = new ReviewSession(api);
  const canvas = $<HTMLCanvasElement>("view");
  const ctx = canvas.getContext("2d")!;
  const status = $("status");
  const counters = $("counters");
  let view: ViewTransform = { ...IDENTITY };

  function redraw() {
    const cur = session.current;
    if (!cur) return;
    renderDepth(ctx, cur.raster, cur.calib, view);
    renderOverlay(ctx, cur.editor, view, {
      showDetections: true,
      showMissed: true,
    });
    const fp = cur.editor.falsePositiveIds().length;
    const miss = cur.editor.missedPositions.length;
    status.textContent =
      `${cur.item.frame_id} - ${cur.item.detections.length} detections, ` +
      `${fp} marked false-positive, ${miss} added` +
      (cur.editor.dirty ? " (unsaved)" : "");
    counters.textContent =
      `reviewed ${session.counters.reviewed}/${session.counters.total} - ` +
      `mined +${session.counters.positivesAdded} positives, ` +
      `+${session.counters.negativesAdded} negatives`;
  }

  function showDone() {
    status.textContent = "queue empty - session complete";
    counters.textContent =
      `reviewed ${session.counters.reviewed}/${session.counters.total} - ` +
      `mined +${session.counters.positivesAdded} positives, ` +
      `+${session.counters.negativesAdded} negatives`;
    ctx.fillStyle = "#202020";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "#eeeeee";
    ctx.font = "24px system-ui";
    ctx.fillText("All frames reviewed.", 40, 60);
  }

  async function advance(action: () => Promise<unknown>) {
    try {
      await action();
      if (session.done) showDone();
      else redraw();
    } catch (err) {
      // edits are preserved; surface the failure and let the user retry
      status.textContent =
        err instanceof ApiError
          ? `service error (${err.code}): ${err.message} - press Space to retry`
          : `network failure - press Space to retry`;
    }
  }

  canvas.addEventListener("mousedown", (ev) => {
    const cur = session.current;
    if (!cur) return;
    const rect = canvas.getBoundingClientRect();
    const { ix, iy } = screenToImage(
      view,
      ev.clientX - rect.left,
      ev.clientY - rect.top,
    );
    if (ix < 0 || iy < 0 || ix >= cur.raster.width || iy >= cur.raster.height) {
      return;
    }
    const hit = hitTest(cur.editor, ix, iy);
    if (hit) cur.editor.toggle(hit);
    else cur.editor.addMissed(ix, iy);
    redraw();
  });

  window.addEventListener("keydown", (ev) => {
    const cur = session.current;
    switch (ev.key) {
      case " ":
      case "Enter":
        ev.preventDefault();
        void advance(() =>
          cur ? session.submitAndAdvance() : session.loadNext(),
        );
        break;
      case "u":
        if (cur) {
          cur.editor.undo();
          redraw();
        }
        break;
      case "+":
        view = zoomAt(view, canvas.width / 2, canvas.height / 2, 1);
        redraw();
        break;
      case "-":
        view = zoomAt(view, canvas.width / 2, canvas.height / 2, -1);
        redraw();
        break;
      case "ArrowLeft":
        view = pan(view, 40, 0);
        redraw();
        break;
      case "ArrowRight":
        view = pan(view, -40, 0);
        redraw();
        break;
      case "ArrowUp":
        view = pan(view, 0, 40);
        redraw();
        break;
      case "ArrowDown":
        view = pan(view, 0, -40);
        redraw();
        break;
    }
  });

  const health = await api.health();
  $("model").textContent = `model ${health.model_hash}`;
  await advance(() => session.loadNext());
}

start().catch((err) => {
  document.body.textContent = `failed to start: ${err}`;
});
