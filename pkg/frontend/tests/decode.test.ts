import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { base64ToBytes, cellsToText, decodeClipFrames, decodeFrame } from "../src/decode";

const here = dirname(fileURLToPath(import.meta.url));
const fixture = JSON.parse(
  readFileSync(join(here, "fixtures", "clip.json"), "utf-8"));

describe("packed frame decoding", () => {
  it("matches the server's plaintext rendering pixel for pixel", () => {
    const frames = decodeClipFrames(
      fixture.packed_frames, fixture.width, fixture.height);
    expect(frames.length).toBe(fixture.plaintext_frames.length);
    frames.forEach((cells, i) => {
      expect(cellsToText(cells, fixture.width, fixture.height))
        .toBe(fixture.plaintext_frames[i]);
    });
  });

  it("unpacks MSB-first rows padded to whole bytes", () => {
    // 2x10 grid: bit 0 of row 0 and bit 9 of row 1
    const packed = new Uint8Array([0b10000000, 0, 0, 0b01000000]);
    const cells = decodeFrame(packed, 10, 2);
    expect(cells[0]).toBe(1);
    expect(cells[10 + 9]).toBe(1);
    expect([...cells].reduce((a, b) => a + b, 0)).toBe(2);
  });

  it("rejects frames of the wrong size", () => {
    expect(() => decodeFrame(new Uint8Array(3), 10, 2)).toThrow(/expected 4/);
  });

  it("round-trips base64", () => {
    const bytes = base64ToBytes("AAECkP8=");
    expect([...bytes]).toEqual([0, 1, 2, 0x90, 0xff]);
  });
});
