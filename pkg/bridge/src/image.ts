/** Image helpers: bilinear resize, grayscale conversion, planar float frames. */

import { RgbImage } from "./pnm.js";

/** Planar float image: data[c * height * width + y * width + x]. */
export interface PlanarImage {
  width: number;
  height: number;
  channels: number;
  data: Float64Array;
}

export function toPlanar(image: RgbImage): PlanarImage {
  const { width, height } = image;
  const plane = width * height;
  const data = new Float64Array(3 * plane);
  for (let i = 0; i < plane; i++) {
    // scale to [-1, 1]
    data[i] = image.data[3 * i] / 127.5 - 1.0;
    data[plane + i] = image.data[3 * i + 1] / 127.5 - 1.0;
    data[2 * plane + i] = image.data[3 * i + 2] / 127.5 - 1.0;
  }
  return { width, height, channels: 3, data };
}

export function resizeBilinear(image: PlanarImage, outWidth: number, outHeight: number): PlanarImage {
  const { width, height, channels } = image;
  if (width === outWidth && height === outHeight) {
    return { width, height, channels, data: image.data.slice() };
  }
  const out = new Float64Array(channels * outWidth * outHeight);
  const scaleX = width / outWidth;
  const scaleY = height / outHeight;
  for (let c = 0; c < channels; c++) {
    const src = c * width * height;
    const dst = c * outWidth * outHeight;
    for (let oy = 0; oy < outHeight; oy++) {
      // pixel-center aligned sampling
      const sy = Math.min(Math.max((oy + 0.5) * scaleY - 0.5, 0), height - 1);
      const y0 = Math.floor(sy);
      const y1 = Math.min(y0 + 1, height - 1);
      const fy = sy - y0;
      for (let ox = 0; ox < outWidth; ox++) {
        const sx = Math.min(Math.max((ox + 0.5) * scaleX - 0.5, 0), width - 1);
        const x0 = Math.floor(sx);
        const x1 = Math.min(x0 + 1, width - 1);
        const fx = sx - x0;
        const top =
          image.data[src + y0 * width + x0] * (1 - fx) + image.data[src + y0 * width + x1] * fx;
        const bottom =
          image.data[src + y1 * width + x0] * (1 - fx) + image.data[src + y1 * width + x1] * fx;
        out[dst + oy * outWidth + ox] = top * (1 - fy) + bottom * fy;
      }
    }
  }
  return { width: outWidth, height: outHeight, channels, data: out };
}

/** Luma plane in [0, 1] from a planar [-1, 1] RGB image. */
export function toGray(image: PlanarImage): Float64Array {
  const plane = image.width * image.height;
  const gray = new Float64Array(plane);
  for (let i = 0; i < plane; i++) {
    const r = (image.data[i] + 1) / 2;
    const g = (image.data[plane + i] + 1) / 2;
    const b = (image.data[2 * plane + i] + 1) / 2;
    gray[i] = 0.299 * r + 0.587 * g + 0.114 * b;
  }
  return gray;
}
