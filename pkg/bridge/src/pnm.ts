/** Binary PPM (P6) reading and writing for raw video frames. */

import { readFileSync, writeFileSync } from "node:fs";

export interface RgbImage {
  width: number;
  height: number;
  /** Interleaved RGB, length 3 * width * height. */
  data: Uint8Array;
}

function parseHeader(raw: Buffer, path: string): { width: number; height: number; offset: number } {
  if (raw.length < 2 || raw.toString("latin1", 0, 2) !== "P6") {
    throw new Error(`${path}: not a binary PPM (P6) file`);
  }
  const fields: number[] = [];
  let pos = 2;
  while (fields.length < 3) {
    if (pos >= raw.length) {
      throw new Error(`${path}: truncated PPM header`);
    }
    const ch = raw[pos];
    if (ch === 0x23) {
      // comment: skip to end of line
      while (pos < raw.length && raw[pos] !== 0x0a) pos++;
    } else if (ch === 0x20 || ch === 0x09 || ch === 0x0a || ch === 0x0d) {
      pos++;
    } else if (ch >= 0x30 && ch <= 0x39) {
      let value = 0;
      while (pos < raw.length && raw[pos] >= 0x30 && raw[pos] <= 0x39) {
        value = value * 10 + (raw[pos] - 0x30);
        pos++;
      }
      fields.push(value);
    } else {
      throw new Error(`${path}: unexpected byte in PPM header`);
    }
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (width < 1 || height < 1) {
    throw new Error(`${path}: bad PPM dimensions ${width}x${height}`);
  }
  if (maxval !== 255) {
    throw new Error(`${path}: only 8-bit PPM supported (maxval ${maxval})`);
  }
  return { width, height, offset: pos };
}

export function readPpm(path: string): RgbImage {
  const raw = readFileSync(path);
  const { width, height, offset } = parseHeader(raw, path);
  const needed = 3 * width * height;
  if (raw.length - offset < needed) {
    throw new Error(`${path}: PPM pixel payload truncated`);
  }
  return { width, height, data: new Uint8Array(raw.subarray(offset, offset + needed)) };
}

export function writePpm(image: RgbImage, path: string): void {
  const header = Buffer.from(`P6\n${image.width} ${image.height}\n255\n`, "latin1");
  writeFileSync(path, Buffer.concat([header, Buffer.from(image.data)]));
}
