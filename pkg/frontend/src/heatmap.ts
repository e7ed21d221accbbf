// Density-grid rasterization. The scale is fixed per task (grid min/max)
// with a diverging palette so negative regions stay visible when the
// server sends unclipped values.

export interface PixelBuffer {
  width: number;
  height: number;
  pixels: Uint8ClampedArray<ArrayBuffer>; // RGBA rows, y increasing downward
}

export interface HeatmapScale {
  lo: number;
  hi: number;
}

export function gridScale(grid: number[][]): HeatmapScale {
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of grid) {
    for (const v of row) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!isFinite(lo) || !isFinite(hi)) {
    return { lo: 0, hi: 1 };
  }
  if (lo === hi) {
    return { lo: lo - 0.5, hi: hi + 0.5 };
  }
  return { lo, hi };
}

// blue (low/negative) -> white (zero-ish midpoint) -> red (high)
export function divergingColor(value: number, scale: HeatmapScale): [number, number, number] {
  const mid = scale.lo < 0 && scale.hi > 0 ? 0 : (scale.lo + scale.hi) / 2;
  if (value <= mid) {
    const span = mid - scale.lo || 1;
    const s = Math.max(0, Math.min(1, (mid - value) / span));
    return [Math.round(255 * (1 - s)), Math.round(255 * (1 - s)), 255];
  }
  const span = scale.hi - mid || 1;
  const s = Math.max(0, Math.min(1, (value - mid) / span));
  return [255, Math.round(255 * (1 - s)), Math.round(255 * (1 - s))];
}

/**
 * Rasterize a density grid (grid[i][j] = value at x-index i, y-index j)
 * into an RGBA buffer with x rightward and y upward.
 */
export function renderDensity(grid: number[][], scale?: HeatmapScale): PixelBuffer {
  const nx = grid.length;
  const ny = grid[0]?.length ?? 0;
  if (nx === 0 || ny === 0) {
    throw new Error("density grid is empty");
  }
  const s = scale ?? gridScale(grid);
  const pixels = new Uint8ClampedArray(new ArrayBuffer(nx * ny * 4));
  for (let j = 0; j < ny; j++) {
    const py = ny - 1 - j; // flip so larger y draws higher
    for (let i = 0; i < nx; i++) {
      const [r, g, b] = divergingColor(grid[i][j], s);
      const off = (py * nx + i) * 4;
      pixels[off] = r;
      pixels[off + 1] = g;
      pixels[off + 2] = b;
      pixels[off + 3] = 255;
    }
  }
  return { width: nx, height: ny, pixels };
}

/** Map a domain point to pixel coordinates of a rendered density buffer. */
export function domainToPixel(
  point: [number, number],
  lower: number[],
  lengths: number[],
  width: number,
  height: number,
): [number, number] {
  const fx = (point[0] - lower[0]) / lengths[0];
  const fy = (point[1] - lower[1]) / lengths[1];
  return [fx * (width - 1), (1 - fy) * (height - 1)];
}
