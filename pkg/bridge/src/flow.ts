/**
 * Dense optical flow by pyramidal Horn-Schunck.
 *
 * Classic variational estimator: brightness-constancy data term plus a
 * smoothness term, solved by Jacobi iterations at each pyramid level with
 * the coarser level's (upscaled) flow warping the second image.  Fully
 * deterministic; identical frames yield exactly zero flow.
 */

export interface DenseFlow {
  width: number;
  height: number;
  u: Float64Array;
  v: Float64Array;
}

const SMOOTHNESS = 0.02; // alpha^2 in the Horn-Schunck update
const ITERATIONS = 80;
const MIN_LEVEL_SIZE = 12;
const MAX_LEVELS = 5;

function downsample2(gray: Float64Array, width: number, height: number): {
  data: Float64Array;
  width: number;
  height: number;
} {
  const outW = Math.floor(width / 2);
  const outH = Math.floor(height / 2);
  const out = new Float64Array(outW * outH);
  for (let y = 0; y < outH; y++) {
    for (let x = 0; x < outW; x++) {
      const i = 2 * y * width + 2 * x;
      out[y * outW + x] = 0.25 * (gray[i] + gray[i + 1] + gray[i + width] + gray[i + width + 1]);
    }
  }
  return { data: out, width: outW, height: outH };
}

function sampleBilinear(gray: Float64Array, width: number, height: number, x: number, y: number): number {
  const cx = Math.min(Math.max(x, 0), width - 1);
  const cy = Math.min(Math.max(y, 0), height - 1);
  const x0 = Math.floor(cx);
  const y0 = Math.floor(cy);
  const x1 = Math.min(x0 + 1, width - 1);
  const y1 = Math.min(y0 + 1, height - 1);
  const fx = cx - x0;
  const fy = cy - y0;
  const top = gray[y0 * width + x0] * (1 - fx) + gray[y0 * width + x1] * fx;
  const bottom = gray[y1 * width + x0] * (1 - fx) + gray[y1 * width + x1] * fx;
  return top * (1 - fy) + bottom * fy;
}

function hornSchunckLevel(
  i1: Float64Array,
  i2: Float64Array,
  width: number,
  height: number,
  u: Float64Array,
  v: Float64Array,
): void {
  const count = width * height;
  const warped = new Float64Array(count);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      warped[i] = sampleBilinear(i2, width, height, x + u[i], y + v[i]);
    }
  }
  const ix = new Float64Array(count);
  const iy = new Float64Array(count);
  const it = new Float64Array(count);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      const xm = Math.max(x - 1, 0);
      const xp = Math.min(x + 1, width - 1);
      const ym = Math.max(y - 1, 0);
      const yp = Math.min(y + 1, height - 1);
      // average spatial gradients of both images for stability
      ix[i] =
        0.25 * (i1[y * width + xp] - i1[y * width + xm] + warped[y * width + xp] - warped[y * width + xm]);
      iy[i] =
        0.25 * (i1[yp * width + x] - i1[ym * width + x] + warped[yp * width + x] - warped[ym * width + x]);
      it[i] = warped[i] - i1[i];
    }
  }
  const du = new Float64Array(count);
  const dv = new Float64Array(count);
  const duNext = new Float64Array(count);
  const dvNext = new Float64Array(count);
  for (let iter = 0; iter < ITERATIONS; iter++) {
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        const i = y * width + x;
        const xm = Math.max(x - 1, 0);
        const xp = Math.min(x + 1, width - 1);
        const ym = Math.max(y - 1, 0);
        const yp = Math.min(y + 1, height - 1);
        const uAvg = 0.25 * (du[y * width + xm] + du[y * width + xp] + du[ym * width + x] + du[yp * width + x]);
        const vAvg = 0.25 * (dv[y * width + xm] + dv[y * width + xp] + dv[ym * width + x] + dv[yp * width + x]);
        const t = (ix[i] * uAvg + iy[i] * vAvg + it[i]) / (SMOOTHNESS + ix[i] * ix[i] + iy[i] * iy[i]);
        duNext[i] = uAvg - ix[i] * t;
        dvNext[i] = vAvg - iy[i] * t;
      }
    }
    du.set(duNext);
    dv.set(dvNext);
  }
  for (let i = 0; i < count; i++) {
    u[i] += du[i];
    v[i] += dv[i];
  }
}

/** Flow from frame `from` to frame `to` (both grayscale row-major planes). */
export function estimateFlow(
  from: Float64Array,
  to: Float64Array,
  width: number,
  height: number,
): DenseFlow {
  const pyramid: { i1: Float64Array; i2: Float64Array; width: number; height: number }[] = [
    { i1: from, i2: to, width, height },
  ];
  while (
    pyramid.length < MAX_LEVELS &&
    Math.min(pyramid[pyramid.length - 1].width, pyramid[pyramid.length - 1].height) >= 2 * MIN_LEVEL_SIZE
  ) {
    const prev = pyramid[pyramid.length - 1];
    const d1 = downsample2(prev.i1, prev.width, prev.height);
    const d2 = downsample2(prev.i2, prev.width, prev.height);
    pyramid.push({ i1: d1.data, i2: d2.data, width: d1.width, height: d1.height });
  }

  let u = new Float64Array(pyramid[pyramid.length - 1].width * pyramid[pyramid.length - 1].height);
  let v = new Float64Array(u.length);
  for (let level = pyramid.length - 1; level >= 0; level--) {
    const { i1, i2, width: lw, height: lh } = pyramid[level];
    hornSchunckLevel(i1, i2, lw, lh, u, v);
    if (level > 0) {
      const nw = pyramid[level - 1].width;
      const nh = pyramid[level - 1].height;
      const nu = new Float64Array(nw * nh);
      const nv = new Float64Array(nw * nh);
      for (let y = 0; y < nh; y++) {
        for (let x = 0; x < nw; x++) {
          const sx = ((x + 0.5) * lw) / nw - 0.5;
          const sy = ((y + 0.5) * lh) / nh - 0.5;
          nu[y * nw + x] = 2.0 * sampleBilinear(u, lw, lh, sx, sy);
          nv[y * nw + x] = 2.0 * sampleBilinear(v, lw, lh, sx, sy);
        }
      }
      u = nu;
      v = nv;
    }
  }
  return { width, height, u, v };
}
