import { describe, expect, it } from "vitest";

import {
  IDENTITY,
  imageToScreen,
  pan,
  screenToImage,
  zoomAt,
} from "../src/transform.js";

describe("view transform", () => {
  it("identity maps pixels one-to-one", () => {
    expect(screenToImage(IDENTITY, 37, 12)).toEqual({ ix: 37, iy: 12 });
  });

  it("screen->image->screen round-trips exactly at any integer zoom", () => {
    for (const zoom of [1, 2, 3, 5, 8]) {
      const t = { zoom, panX: -17, panY: 23 };
      for (let ix = 0; ix < 50; ix += 7) {
        for (let iy = 0; iy < 50; iy += 7) {
          const { sx, sy } = imageToScreen(t, ix, iy);
          // every screen pixel inside the zoomed cell maps back
          for (const dx of [0, zoom - 1]) {
            expect(screenToImage(t, sx + dx, sy + dx)).toEqual({ ix, iy });
          }
        }
      }
    }
  });

  it("zoomAt keeps the pixel under the cursor stationary", () => {
    let t = { ...IDENTITY };
    const sx = 120, sy = 80;
    const before = screenToImage(t, sx, sy);
    t = zoomAt(t, sx, sy, 1);
    expect(t.zoom).toBe(2);
    expect(screenToImage(t, sx, sy)).toEqual(before);
  });

  it("zoom clamps to [1, max]", () => {
    let t = { ...IDENTITY };
    t = zoomAt(t, 0, 0, -1);
    expect(t.zoom).toBe(1);
    for (let i = 0; i < 20; i++) t = zoomAt(t, 0, 0, 1);
    expect(t.zoom).toBe(8);
  });

  it("pan shifts by whole pixels", () => {
    const t = pan(IDENTITY, 10.4, -3.6);
    expect(t.panX).toBe(10);
    expect(t.panY).toBe(-4);
  });
});
