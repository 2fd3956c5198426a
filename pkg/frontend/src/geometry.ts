// Small planar helpers for polygon overlays. Rings are [lon, lat] pairs,
// first ring exterior, later rings holes; closed (first == last vertex) or
// open input is accepted everywhere.

import type { Ring } from './types.js';

export interface Bounds {
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

/** Vertices without the closing duplicate, if present. */
export function openRing(ring: Ring): Ring {
  if (ring.length > 1) {
    const [firstX, firstY] = ring[0]!;
    const [lastX, lastY] = ring[ring.length - 1]!;
    if (firstX === lastX && firstY === lastY) return ring.slice(0, -1);
  }
  return ring;
}

/** Ensure the closing duplicate is present. */
export function closeRing(ring: Ring): Ring {
  const open = openRing(ring);
  if (open.length === 0) return [];
  return [...open, open[0]!];
}

export function ringCentroid(ring: Ring): [number, number] {
  const pts = openRing(ring);
  if (pts.length === 0) throw new Error('empty ring has no centroid');
  let sx = 0;
  let sy = 0;
  for (const [x, y] of pts) {
    sx += x;
    sy += y;
  }
  return [sx / pts.length, sy / pts.length];
}

export function ringBounds(rings: Ring[]): Bounds {
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const ring of rings) {
    for (const [x, y] of ring) {
      if (x < minX) minX = x;
      if (y < minY) minY = y;
      if (x > maxX) maxX = x;
      if (y > maxY) maxY = y;
    }
  }
  if (minX > maxX) throw new Error('no vertices to bound');
  return { minX, minY, maxX, maxY };
}

/** SVG path string for a polygon; holes render via even-odd fill. */
export function ringsToPath(rings: Ring[]): string {
  const parts: string[] = [];
  for (const ring of rings) {
    const pts = openRing(ring);
    if (pts.length < 3) continue; // not a polygon, nothing to draw
    const [x0, y0] = pts[0]!;
    let d = `M ${x0} ${y0}`;
    for (let i = 1; i < pts.length; i++) {
      const [x, y] = pts[i]!;
      d += ` L ${x} ${y}`;
    }
    parts.push(d + ' Z');
  }
  return parts.join(' ');
}

/**
 * viewBox string framing the bounds with proportional padding, in map
 * coordinates (y flipped by the caller's transform, not here).
 */
export function fitViewBox(bounds: Bounds, padFraction = 0.2): string {
  const width = bounds.maxX - bounds.minX;
  const height = bounds.maxY - bounds.minY;
  // degenerate extents (single point) still need a visible window
  const padX = width > 0 ? width * padFraction : 0.01;
  const padY = height > 0 ? height * padFraction : 0.01;
  const x = bounds.minX - padX;
  const y = bounds.minY - padY;
  return `${x} ${y} ${width + 2 * padX} ${height + 2 * padY}`;
}
