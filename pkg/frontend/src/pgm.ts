/**
 * Decoder for the service's 16-bit binary PGM depth rasters
 * ("P5\n<width> <height>\n65535\n" + big-endian samples).
 */

export interface DepthRaster {
  width: number;
  height: number;
  /** Depth in millimeters, row-major; 0 is the invalid-pixel sentinel. */
  data: Uint16Array;
}

export class PgmError extends Error {}

export function decodePgm16(buf: ArrayBuffer): DepthRaster {
  const bytes = new Uint8Array(buf);
  const header = readHeader(bytes);
  const { width, height, offset } = header;
  const expected = 2 * width * height;
  if (bytes.length - offset !== expected) {
    throw new PgmError(
      `payload is ${bytes.length - offset} bytes, expected ${expected}`,
    );
  }
  const view = new DataView(buf, offset);
  const data = new Uint16Array(width * height);
  for (let i = 0; i < data.length; i++) {
    data[i] = view.getUint16(2 * i, false); // big-endian
  }
  return { width, height, data };
}

function readHeader(bytes: Uint8Array) {
  // "P5\n<w> <h>\n65535\n" -- three newline-terminated fields
  const nl = (from: number) => {
    const i = bytes.indexOf(0x0a, from);
    if (i < 0) throw new PgmError("unterminated header");
    return i;
  };
  const ascii = (a: number, b: number) =>
    String.fromCharCode(...bytes.subarray(a, b));

  const n0 = nl(0);
  if (ascii(0, n0) !== "P5") throw new PgmError("not a P5 raster");
  const n1 = nl(n0 + 1);
  const dims = ascii(n0 + 1, n1).trim().split(/\s+/);
  if (dims.length !== 2) throw new PgmError("bad dimensions line");
  const width = Number(dims[0]);
  const height = Number(dims[1]);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new PgmError("bad dimensions");
  }
  const n2 = nl(n1 + 1);
  if (ascii(n1 + 1, n2).trim() !== "65535") {
    throw new PgmError("expected 16-bit maxval 65535");
  }
  return { width, height, offset: n2 + 1 };
}
