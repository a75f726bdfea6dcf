/**
 * Client-side depth colorization.
 *
 * Lower depth (closer to the sensor, higher above the floor) renders darker,
 * linearly over [min valid depth, sensor height]; invalid pixels get a
 * sentinel color that is never a gray. Colorizing locally from the raw
 * 16-bit data lets the reviewer adjust contrast without refetching.
 */

import type { DepthRaster } from "./pgm.js";

export interface Calibration {
  sensor_height_mm: number;
  scale_mm_per_px: number;
}

/** Magenta: unmistakably not part of the grayscale ramp. */
export const INVALID_RGB: readonly [number, number, number] = [214, 0, 147];

/**
 * Flat scenes would otherwise contrast-stretch floor noise into black
 * speckle, so the mapped span never shrinks below this fraction of the
 * sensor height.
 */
const MIN_SPAN_FRACTION = 0.05;

export function colorizeDepth(
  raster: DepthRaster,
  calib: Calibration,
): Uint8ClampedArray {
  const { data } = raster;
  let dmin = Infinity;
  for (let i = 0; i < data.length; i++) {
    const d = data[i]!;
    if (d !== 0 && d < dmin) dmin = d;
  }
  const sensor = calib.sensor_height_mm;
  if (!Number.isFinite(dmin)) dmin = sensor;
  dmin = Math.min(dmin, sensor * (1 - MIN_SPAN_FRACTION));
  const span = sensor - dmin;

  const out = new Uint8ClampedArray(4 * data.length);
  for (let i = 0; i < data.length; i++) {
    const d = data[i]!;
    const o = 4 * i;
    if (d === 0) {
      out[o] = INVALID_RGB[0];
      out[o + 1] = INVALID_RGB[1];
      out[o + 2] = INVALID_RGB[2];
    } else {
      const t = Math.min(Math.max((d - dmin) / span, 0), 1);
      const gray = Math.round(t * 255);
      out[o] = gray;
      out[o + 1] = gray;
      out[o + 2] = gray;
    }
    out[o + 3] = 255;
  }
  return out;
}

/** FNV-1a over the RGBA buffer; rendering purity checks compare hashes. */
export function bufferHash(buf: Uint8ClampedArray): string {
  let h = 0x811c9dc5;
  for (let i = 0; i < buf.length; i++) {
    h ^= buf[i]!;
    h = Math.imul(h, 0x01000193);
  }
  return (h >>> 0).toString(16).padStart(8, "0");
}
