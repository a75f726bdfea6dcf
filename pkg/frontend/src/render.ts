/**
 * Canvas adapter: paints the colorized depth field and the verdict overlay.
 * All decisions live in the pure modules; this file only draws.
 */

import { bufferHash, colorizeDepth, type Calibration } from "./colormap.js";
import type { DepthRaster } from "./pgm.js";
import { imageToScreen, type ViewTransform } from "./transform.js";
import type { VerdictEditor } from "./verdict.js";

export interface OverlayOptions {
  showDetections: boolean;
  showMissed: boolean;
}

export function renderDepth(
  ctx: CanvasRenderingContext2D,
  raster: DepthRaster,
  calib: Calibration,
  t: ViewTransform,
): string {
  const rgba = colorizeDepth(raster, calib);
  const image = new ImageData(
    new Uint8ClampedArray(rgba),
    raster.width,
    raster.height,
  );
  ctx.save();
  ctx.fillStyle = "#202020";
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.imageSmoothingEnabled = false;
  // draw at 1x then scale via drawImage for integer zoom
  const off = new OffscreenCanvas(raster.width, raster.height);
  const octx = off.getContext("2d")!;
  octx.putImageData(image, 0, 0);
  ctx.drawImage(
    off,
    t.panX,
    t.panY,
    raster.width * t.zoom,
    raster.height * t.zoom,
  );
  ctx.restore();
  return bufferHash(rgba);
}

export function renderOverlay(
  ctx: CanvasRenderingContext2D,
  editor: VerdictEditor,
  t: ViewTransform,
  opts: OverlayOptions,
): void {
  ctx.save();
  ctx.lineWidth = 2;
  if (opts.showDetections) {
    for (const d of editor.detections) {
      const { sx, sy } = imageToScreen(t, d.x, d.y);
      const fp = editor.judgmentOf(d.id) === "false-positive";
      ctx.strokeStyle = fp ? "#ff4136" : "#2ecc40";
      ctx.beginPath();
      ctx.arc(sx, sy, 10 * t.zoom, 0, 2 * Math.PI);
      ctx.stroke();
      if (fp) {
        ctx.beginPath();
        ctx.moveTo(sx - 7 * t.zoom, sy - 7 * t.zoom);
        ctx.lineTo(sx + 7 * t.zoom, sy + 7 * t.zoom);
        ctx.moveTo(sx + 7 * t.zoom, sy - 7 * t.zoom);
        ctx.lineTo(sx - 7 * t.zoom, sy + 7 * t.zoom);
        ctx.stroke();
      }
    }
  }
  if (opts.showMissed) {
    ctx.strokeStyle = "#ffdc00";
    for (const [mx, my] of editor.missedPositions) {
      const { sx, sy } = imageToScreen(t, mx, my);
      ctx.beginPath();
      ctx.moveTo(sx - 8, sy);
      ctx.lineTo(sx + 8, sy);
      ctx.moveTo(sx, sy - 8);
      ctx.lineTo(sx, sy + 8);
      ctx.stroke();
    }
  }
  ctx.restore();
}

/** Nearest detection within the hit radius (image pixels), if any. */
export function hitTest(
  editor: VerdictEditor,
  ix: number,
  iy: number,
  radiusPx = 12,
): string | null {
  let best: string | null = null;
  let bestD = radiusPx;
  for (const d of editor.detections) {
    const dist = Math.hypot(d.x - ix, d.y - iy);
    if (dist <= bestD) {
      bestD = dist;
      best = d.id;
    }
  }
  return best;
}
