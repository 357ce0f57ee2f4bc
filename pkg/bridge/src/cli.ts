#!/usr/bin/env node
/**
 * CLI mirroring the extraction config:
 *
 *   anchor-motion-bridge extract --frames <dir> --out <dir>
 *     [--n-frames 16] [--resolution 512x512] [--timestep 261]
 *     [--layer dec1] [--seed 0] [--features-only] [--flows-only]
 */

import { DecoderLayer } from "./features.js";
import {
  DEFAULT_CONFIG,
  ExtractionConfig,
  extractFeatures,
  extractFlows,
  loadFrames,
  parseResolution,
} from "./extract.js";

interface CliOptions extends ExtractionConfig {
  featuresOnly: boolean;
  flowsOnly: boolean;
}

function usage(): never {
  console.error(
    "usage: anchor-motion-bridge extract --frames <dir> --out <dir> " +
      "[--n-frames N] [--resolution WxH] [--timestep T] [--layer dec1|dec2|dec3] " +
      "[--seed S] [--features-only] [--flows-only]",
  );
  process.exit(2);
}

export function parseArgs(argv: string[]): CliOptions {
  if (argv[0] !== "extract") {
    usage();
  }
  const options: CliOptions = {
    framesDir: "",
    outDir: "",
    ...DEFAULT_CONFIG,
    featuresOnly: false,
    flowsOnly: false,
  };
  for (let i = 1; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i++;
      if (i >= argv.length) usage();
      return argv[i];
    };
    switch (arg) {
      case "--frames":
        options.framesDir = next();
        break;
      case "--out":
        options.outDir = next();
        break;
      case "--n-frames":
        options.nFrames = Number(next());
        break;
      case "--resolution": {
        const { width, height } = parseResolution(next());
        options.width = width;
        options.height = height;
        break;
      }
      case "--timestep":
        options.timestep = Number(next());
        break;
      case "--layer":
        options.layer = next() as DecoderLayer;
        break;
      case "--seed":
        options.seed = Number(next());
        break;
      case "--features-only":
        options.featuresOnly = true;
        break;
      case "--flows-only":
        options.flowsOnly = true;
        break;
      default:
        usage();
    }
  }
  if (!options.framesDir || !options.outDir) {
    usage();
  }
  return options;
}

export function run(argv: string[]): number {
  const options = parseArgs(argv);
  try {
    const frames = loadFrames(options);
    if (!options.flowsOnly) {
      const path = extractFeatures(options, frames);
      console.log(`wrote ${path}`);
    }
    if (!options.featuresOnly) {
      const dir = extractFlows(options, frames);
      console.log(`wrote ${dir}`);
    }
    return 0;
  } catch (error) {
    console.error(`error: ${error instanceof Error ? error.message : error}`);
    return 2;
  }
}

import { pathToFileURL } from "node:url";

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(run(process.argv.slice(2)));
}
