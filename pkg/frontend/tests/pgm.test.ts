import { describe, expect, it } from "vitest";

import { decodePgm16, PgmError } from "../src/pgm.js";

function pgmBytes(width: number, height: number, samples: number[]): ArrayBuffer {
  const header = new TextEncoder().encode(`P5\n${width} ${height}\n65535\n`);
  const buf = new Uint8Array(header.length + 2 * samples.length);
  buf.set(header, 0);
  const view = new DataView(buf.buffer, header.length);
  samples.forEach((s, i) => view.setUint16(2 * i, s, false));
  return buf.buffer;
}

describe("decodePgm16", () => {
  it("reads dimensions and big-endian samples verbatim", () => {
    const r = decodePgm16(pgmBytes(2, 2, [0, 1200, 3000, 65535]));
    expect(r.width).toBe(2);
    expect(r.height).toBe(2);
    expect([...r.data]).toEqual([0, 1200, 3000, 65535]);
  });

  it("is byte-order sensitive", () => {
    const r = decodePgm16(pgmBytes(1, 1, [0x0102]));
    expect(r.data[0]).toBe(0x0102);
  });

  it("rejects non-P5 payloads", () => {
    const bad = new TextEncoder().encode("P6\n1 1\n65535\n\0\0").buffer;
    expect(() => decodePgm16(bad as ArrayBuffer)).toThrow(PgmError);
  });

  it("rejects truncated payloads", () => {
    const whole = new Uint8Array(pgmBytes(2, 2, [1, 2, 3, 4]));
    const cut = whole.slice(0, whole.length - 3);
    expect(() => decodePgm16(cut.buffer)).toThrow(/payload/);
  });

  it("rejects 8-bit maxval", () => {
    const bad = new TextEncoder().encode("P5\n1 1\n255\n\0").buffer;
    expect(() => decodePgm16(bad as ArrayBuffer)).toThrow(/16-bit/);
  });
});
