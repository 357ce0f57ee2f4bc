/**
 * Extraction pipeline: load a frame directory, uniformly sample and resize,
 * then emit a raw feature volume (.fmap) and bidirectional flow files
 * (fwd_NNN.flo / bwd_NNN.flo) in the toolkit's on-disk formats.
 *
 * Normalization (temporal mean subtraction) is deliberately NOT performed
 * here; the consumer owns it, so there is a single normalization
 * implementation under test.
 */

import { mkdirSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { DECODER_LAYERS, DecoderLayer, FeatureExtractor } from "./features.js";
import { estimateFlow } from "./flow.js";
import { PlanarImage, resizeBilinear, toGray, toPlanar } from "./image.js";
import { writeFlo } from "./pieh.js";
import { FeatureVolume, writeFmap } from "./fmap.js";
import { readPpm } from "./pnm.js";

export interface ExtractionConfig {
  framesDir: string;
  outDir: string;
  nFrames: number; // default 16
  width: number; // default 512
  height: number; // default 512
  timestep: number; // default 261
  layer: DecoderLayer; // default "dec1"
  seed: number;
}

export const DEFAULT_CONFIG: Omit<ExtractionConfig, "framesDir" | "outDir"> = {
  nFrames: 16,
  width: 512,
  height: 512,
  timestep: 261,
  layer: "dec1",
  seed: 0,
};

export function parseResolution(raw: string): { width: number; height: number } {
  const match = /^(\d+)x(\d+)$/.exec(raw);
  if (!match) {
    throw new Error(`resolution must look like 512x512, got ${raw}`);
  }
  return { width: Number(match[1]), height: Number(match[2]) };
}

function validate(config: ExtractionConfig): void {
  if (config.nFrames < 2) {
    throw new Error(`need at least 2 frames, got ${config.nFrames}`);
  }
  if (config.width % 8 !== 0 || config.height % 8 !== 0 || config.width < 8 || config.height < 8) {
    throw new Error(`resolution ${config.width}x${config.height} must be a positive multiple of 8`);
  }
  if (!DECODER_LAYERS.includes(config.layer)) {
    throw new Error(`unknown decoder layer ${config.layer}`);
  }
}

/** Uniformly sample `count` indices over [0, total), endpoints included. */
export function sampleIndices(total: number, count: number): number[] {
  if (total < 1) {
    throw new Error("no frames to sample");
  }
  if (count === 1) {
    return [0];
  }
  const indices: number[] = [];
  for (let i = 0; i < count; i++) {
    indices.push(Math.round((i * (total - 1)) / (count - 1)));
  }
  return indices;
}

export function loadFrames(config: ExtractionConfig): PlanarImage[] {
  const names = readdirSync(config.framesDir)
    .filter((name) => /^frame_\d+\.ppm$/.test(name))
    .sort();
  if (names.length === 0) {
    throw new Error(`no frame_*.ppm files in ${config.framesDir}`);
  }
  const picked = sampleIndices(names.length, config.nFrames).map((i) => names[i]);
  return picked.map((name) =>
    resizeBilinear(toPlanar(readPpm(join(config.framesDir, name))), config.width, config.height),
  );
}

function pad3(n: number): string {
  return String(n).padStart(3, "0");
}

export function extractFeatures(config: ExtractionConfig, frames?: PlanarImage[]): string {
  validate(config);
  const loaded = frames ?? loadFrames(config);
  const extractor = new FeatureExtractor(config.seed, config.timestep, config.layer);
  const latentW = config.width / 8;
  const latentH = config.height / 8;
  const scale = [1, 2, 4][DECODER_LAYERS.indexOf(config.layer)];
  const outW = latentW * scale;
  const outH = latentH * scale;
  const channels = extractor.channels;
  const data = new Float32Array(loaded.length * outH * outW * channels);
  for (let f = 0; f < loaded.length; f++) {
    const act = extractor.extractFrame(loaded[f], f);
    if (act.width !== outW || act.height !== outH) {
      throw new Error(`unexpected feature grid ${act.width}x${act.height}`);
    }
    const frameOff = f * outH * outW * channels;
    for (let c = 0; c < channels; c++) {
      const plane = c * outW * outH;
      for (let i = 0; i < outW * outH; i++) {
        data[frameOff + i * channels + c] = act.data[plane + i];
      }
    }
  }
  const volume: FeatureVolume = {
    frames: loaded.length,
    height: outH,
    width: outW,
    channels,
    normalized: false,
    data,
  };
  mkdirSync(config.outDir, { recursive: true });
  const path = join(config.outDir, "features.fmap");
  writeFmap(volume, path);
  return path;
}

export function extractFlows(config: ExtractionConfig, frames?: PlanarImage[]): string {
  validate(config);
  const loaded = frames ?? loadFrames(config);
  const grays = loaded.map(toGray);
  const flowsDir = join(config.outDir, "flows");
  mkdirSync(flowsDir, { recursive: true });
  for (let i = 0; i < loaded.length - 1; i++) {
    const fwd = estimateFlow(grays[i], grays[i + 1], config.width, config.height);
    const bwd = estimateFlow(grays[i + 1], grays[i], config.width, config.height);
    writeFlo(
      { width: fwd.width, height: fwd.height, u: Float32Array.from(fwd.u), v: Float32Array.from(fwd.v) },
      join(flowsDir, `fwd_${pad3(i + 1)}.flo`),
    );
    writeFlo(
      { width: bwd.width, height: bwd.height, u: Float32Array.from(bwd.u), v: Float32Array.from(bwd.v) },
      join(flowsDir, `bwd_${pad3(i + 1)}.flo`),
    );
  }
  return flowsDir;
}
