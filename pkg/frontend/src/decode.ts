/**
 * Decoding of the service's packed frame format.
 *
 * A frame is the grid's rows in order, each row bit-packed MSB-first and
 * padded to a whole number of bytes, the whole thing base64-encoded.
 */

export function base64ToBytes(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

/** Unpack one frame into a row-major 0/1 array of length width*height. */
export function decodeFrame(packed: Uint8Array, width: number, height: number): Uint8Array {
  const rowBytes = Math.ceil(width / 8);
  if (packed.length !== rowBytes * height) {
    throw new Error(
      `packed frame is ${packed.length} bytes, expected ${rowBytes * height}`);
  }
  const cells = new Uint8Array(width * height);
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      const byte = packed[r * rowBytes + (c >> 3)];
      cells[r * width + c] = (byte >> (7 - (c & 7))) & 1;
    }
  }
  return cells;
}

export function decodeClipFrames(
  frames: string[], width: number, height: number): Uint8Array[] {
  return frames.map((b64) => decodeFrame(base64ToBytes(b64), width, height));
}

/** Render decoded cells the way the server's plaintext endpoint does. */
export function cellsToText(cells: Uint8Array, width: number, height: number): string {
  const rows: string[] = [];
  for (let r = 0; r < height; r++) {
    let row = "";
    for (let c = 0; c < width; c++) {
      row += cells[r * width + c] ? "O" : ".";
    }
    rows.push(row);
  }
  return rows.join("\n");
}
