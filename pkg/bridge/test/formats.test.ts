import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { readFlo, writeFlo } from "../src/pieh.js";
import { readFmap, writeFmap } from "../src/fmap.js";
import { readPpm, writePpm } from "../src/pnm.js";

const scratch = () => mkdtempSync(join(tmpdir(), "bridge-formats-"));

describe("flow files", () => {
  it("round-trips bit-exactly", () => {
    const dir = scratch();
    const path = join(dir, "f.flo");
    const u = Float32Array.from({ length: 12 }, (_, i) => (i - 5.5) / 3);
    const v = Float32Array.from({ length: 12 }, (_, i) => Math.fround(Math.sin(i)));
    writeFlo({ width: 4, height: 3, u, v }, path);
    const back = readFlo(path);
    expect(back.width).toBe(4);
    expect(back.height).toBe(3);
    expect(Array.from(back.u)).toEqual(Array.from(u));
    expect(Array.from(back.v)).toEqual(Array.from(v));
    const second = join(dir, "g.flo");
    writeFlo(back, second);
    expect(readFileSync(path).equals(readFileSync(second))).toBe(true);
  });

  it("has the documented byte layout", () => {
    const dir = scratch();
    const path = join(dir, "zero.flo");
    writeFlo({ width: 2, height: 2, u: new Float32Array(4), v: new Float32Array(4) }, path);
    const raw = readFileSync(path);
    expect(raw.length).toBe(44); // 4 magic + 4 + 4 + 2*2*2*4
    expect(raw.toString("latin1", 0, 4)).toBe("PIEH");
    expect(raw.readInt32LE(4)).toBe(2);
  });

  it("rejects bad magic and truncation", () => {
    const dir = scratch();
    const bad = join(dir, "bad.flo");
    writeFileSync(bad, Buffer.from("XXXX0000000000000000", "latin1"));
    expect(() => readFlo(bad)).toThrow(/magic/);
    const truncated = join(dir, "t.flo");
    const buffer = Buffer.alloc(12 + 8 * 4 - 4);
    buffer.write("PIEH", 0, "latin1");
    buffer.writeInt32LE(2, 4);
    buffer.writeInt32LE(2, 8);
    writeFileSync(truncated, buffer);
    expect(() => readFlo(truncated)).toThrow(/size/);
  });

  it("rejects non-finite values on write", () => {
    const dir = scratch();
    const u = Float32Array.of(Number.NaN, 0, 0, 0);
    expect(() => writeFlo({ width: 2, height: 2, u, v: new Float32Array(4) }, join(dir, "x.flo"))).toThrow(
      /finite/,
    );
  });
});

describe("feature volumes", () => {
  it("round-trips bit-exactly with header fields", () => {
    const dir = scratch();
    const path = join(dir, "v.fmap");
    const data = Float32Array.from({ length: 2 * 3 * 4 * 5 }, (_, i) => Math.fround(i / 7 - 3));
    writeFmap({ frames: 2, height: 3, width: 4, channels: 5, normalized: false, data }, path);
    const back = readFmap(path);
    expect([back.frames, back.height, back.width, back.channels]).toEqual([2, 3, 4, 5]);
    expect(back.normalized).toBe(false);
    expect(Array.from(back.data)).toEqual(Array.from(data));
  });

  it("rejects version and size mismatches", () => {
    const dir = scratch();
    const path = join(dir, "v.fmap");
    const data = new Float32Array(2 * 1 * 1 * 1);
    writeFmap({ frames: 2, height: 1, width: 1, channels: 1, normalized: true, data }, path);
    const raw = readFileSync(path);
    const wrongVersion = Buffer.from(raw);
    wrongVersion.writeUInt32LE(7, 4);
    const vPath = join(dir, "wv.fmap");
    writeFileSync(vPath, wrongVersion);
    expect(() => readFmap(vPath)).toThrow(/version/);
    const shortPath = join(dir, "short.fmap");
    writeFileSync(shortPath, raw.subarray(0, raw.length - 4));
    expect(() => readFmap(shortPath)).toThrow(/size/);
  });
});

describe("ppm frames", () => {
  it("round-trips", () => {
    const dir = scratch();
    const path = join(dir, "f.ppm");
    const data = Uint8Array.from({ length: 2 * 3 * 3 }, (_, i) => (i * 37) % 256);
    writePpm({ width: 3, height: 2, data }, path);
    const back = readPpm(path);
    expect(back.width).toBe(3);
    expect(Array.from(back.data)).toEqual(Array.from(data));
  });
});
