/**
 * Deterministic convolutional feature extractor.
 *
 * Frames are perturbed with schedule noise for a chosen timestep and pushed
 * through a fixed, seed-initialized convolutional encoder-decoder; the
 * activations of a selected decoder stage are exported as the per-frame
 * feature grid.  No pretrained weights are involved: the weights are drawn
 * once from a seeded PRNG, which keeps extraction fully reproducible while
 * exercising the exact file and resolution contracts of the pipeline.
 */

import { PlanarImage } from "./image.js";
import { Prng } from "./prng.js";

const SCHEDULE_STEPS = 1000;
const BETA_START = 1e-4;
const BETA_END = 0.02;

/** Signal/noise mixing coefficients from a linear-beta variance schedule. */
export function noiseLevel(timestep: number): { signal: number; noise: number } {
  if (!Number.isInteger(timestep) || timestep < 0 || timestep >= SCHEDULE_STEPS) {
    throw new Error(`timestep must be an integer in [0, ${SCHEDULE_STEPS}), got ${timestep}`);
  }
  let alphaBar = 1.0;
  for (let s = 0; s <= timestep; s++) {
    const beta = BETA_START + ((BETA_END - BETA_START) * s) / (SCHEDULE_STEPS - 1);
    alphaBar *= 1.0 - beta;
  }
  return { signal: Math.sqrt(alphaBar), noise: Math.sqrt(1.0 - alphaBar) };
}

interface ConvStage {
  inChannels: number;
  outChannels: number;
  stride: number;
  upsample: boolean;
  weights: Float64Array; // [out][in][3][3]
}

export const DECODER_LAYERS = ["dec1", "dec2", "dec3"] as const;
export type DecoderLayer = (typeof DECODER_LAYERS)[number];

function heInit(prng: Prng, stage: Omit<ConvStage, "weights">): ConvStage {
  const fanIn = stage.inChannels * 9;
  const scale = Math.sqrt(2.0 / fanIn);
  const weights = new Float64Array(stage.outChannels * stage.inChannels * 9);
  for (let i = 0; i < weights.length; i++) {
    weights[i] = prng.gaussian() * scale;
  }
  return { ...stage, weights };
}

function convolve(input: PlanarImage, stage: ConvStage, relu: boolean): PlanarImage {
  let src = input;
  if (stage.upsample) {
    const up = new Float64Array(input.channels * input.width * 2 * input.height * 2);
    const w2 = input.width * 2;
    for (let c = 0; c < input.channels; c++) {
      const srcOff = c * input.width * input.height;
      const dstOff = c * w2 * input.height * 2;
      for (let y = 0; y < input.height * 2; y++) {
        const sy = y >> 1;
        for (let x = 0; x < w2; x++) {
          up[dstOff + y * w2 + x] = input.data[srcOff + sy * input.width + (x >> 1)];
        }
      }
    }
    src = { width: w2, height: input.height * 2, channels: input.channels, data: up };
  }
  const outW = Math.floor((src.width + stage.stride - 1) / stage.stride);
  const outH = Math.floor((src.height + stage.stride - 1) / stage.stride);
  const out = new Float64Array(stage.outChannels * outW * outH);
  const plane = src.width * src.height;
  for (let oc = 0; oc < stage.outChannels; oc++) {
    const wBase = oc * stage.inChannels * 9;
    const oBase = oc * outW * outH;
    for (let oy = 0; oy < outH; oy++) {
      const cy = oy * stage.stride;
      for (let ox = 0; ox < outW; ox++) {
        const cx = ox * stage.stride;
        let acc = 0.0;
        for (let ic = 0; ic < stage.inChannels; ic++) {
          const iBase = ic * plane;
          const wOff = wBase + ic * 9;
          for (let ky = -1; ky <= 1; ky++) {
            const sy = cy + ky;
            if (sy < 0 || sy >= src.height) continue;
            const row = iBase + sy * src.width;
            const wRow = wOff + (ky + 1) * 3;
            for (let kx = -1; kx <= 1; kx++) {
              const sx = cx + kx;
              if (sx < 0 || sx >= src.width) continue;
              acc += stage.weights[wRow + kx + 1] * src.data[row + sx];
            }
          }
        }
        out[oBase + oy * outW + ox] = relu && acc < 0 ? 0 : acc;
      }
    }
  }
  return { width: outW, height: outH, channels: stage.outChannels, data: out };
}

export class FeatureExtractor {
  private encoder: ConvStage[];
  private decoder: ConvStage[];
  private layerIndex: number;
  readonly seed: number;
  readonly timestep: number;

  constructor(seed: number, timestep: number, layer: DecoderLayer = "dec1") {
    const index = DECODER_LAYERS.indexOf(layer);
    if (index < 0) {
      throw new Error(`unknown decoder layer ${layer}; expected one of ${DECODER_LAYERS.join(", ")}`);
    }
    this.layerIndex = index;
    this.seed = seed >>> 0;
    this.timestep = timestep;
    const prng = new Prng((this.seed ^ 0xfeed0001) >>> 0);
    // Encoder halves resolution three times (1/8 total); decoder walks back
    // up. dec1 exports the 1/8-scale stage, dec2 the 1/4, dec3 the 1/2.
    this.encoder = [
      heInit(prng, { inChannels: 3, outChannels: 8, stride: 2, upsample: false }),
      heInit(prng, { inChannels: 8, outChannels: 16, stride: 2, upsample: false }),
      heInit(prng, { inChannels: 16, outChannels: 32, stride: 2, upsample: false }),
    ];
    this.decoder = [
      heInit(prng, { inChannels: 32, outChannels: 32, stride: 1, upsample: false }),
      heInit(prng, { inChannels: 32, outChannels: 16, stride: 1, upsample: true }),
      heInit(prng, { inChannels: 16, outChannels: 8, stride: 1, upsample: true }),
    ];
  }

  get channels(): number {
    return this.decoder[this.layerIndex].outChannels;
  }

  /** Feature grid for one frame; frameIndex seeds the per-frame noise. */
  extractFrame(frame: PlanarImage, frameIndex: number): PlanarImage {
    if (frame.width % 8 !== 0 || frame.height % 8 !== 0) {
      throw new Error(`frame size ${frame.width}x${frame.height} must be divisible by 8`);
    }
    const { signal, noise } = noiseLevel(this.timestep);
    const noisy = new Float64Array(frame.data.length);
    const prng = new Prng((this.seed ^ Math.imul(frameIndex + 1, 0x9e377801)) >>> 0);
    for (let i = 0; i < noisy.length; i++) {
      noisy[i] = signal * frame.data[i] + noise * prng.gaussian();
    }
    let act: PlanarImage = { ...frame, data: noisy };
    for (const stage of this.encoder) {
      act = convolve(act, stage, true);
    }
    for (let d = 0; d <= this.layerIndex; d++) {
      // export stage keeps its pre-activation response (raw features)
      act = convolve(act, this.decoder[d], d < this.layerIndex);
    }
    return act;
  }
}
