/**
 * Integer zoom/pan view transform.
 *
 * Zoom factors are whole numbers and pans are whole screen pixels, so the
 * screen-to-image mapping is exact: a click always resolves to one integer
 * image pixel with no floating-point drift.
 */

export interface ViewTransform {
  zoom: number; // integer >= 1
  panX: number; // screen pixels
  panY: number;
}

export const IDENTITY: ViewTransform = { zoom: 1, panX: 0, panY: 0 };

export function imageToScreen(
  t: ViewTransform,
  ix: number,
  iy: number,
): { sx: number; sy: number } {
  return { sx: ix * t.zoom + t.panX, sy: iy * t.zoom + t.panY };
}

/** Image pixel whose zoomed cell contains the screen point. */
export function screenToImage(
  t: ViewTransform,
  sx: number,
  sy: number,
): { ix: number; iy: number } {
  return {
    ix: Math.floor((sx - t.panX) / t.zoom),
    iy: Math.floor((sy - t.panY) / t.zoom),
  };
}

export function zoomAt(
  t: ViewTransform,
  sx: number,
  sy: number,
  delta: 1 | -1,
  maxZoom = 8,
): ViewTransform {
  const zoom = Math.min(Math.max(t.zoom + delta, 1), maxZoom);
  if (zoom === t.zoom) return t;
  // keep the image pixel under the cursor stationary
  const { ix, iy } = screenToImage(t, sx, sy);
  return {
    zoom,
    panX: Math.round(sx - ix * zoom),
    panY: Math.round(sy - iy * zoom),
  };
}

export function pan(t: ViewTransform, dx: number, dy: number): ViewTransform {
  return { zoom: t.zoom, panX: t.panX + Math.round(dx), panY: t.panY + Math.round(dy) };
}
