/**
 * Minimal point-cloud renderer: orthographic projection with yaw/pitch
 * rotation onto a 2-d canvas, plus nearest-point picking in screen space.
 * The drawing surface is injected behind a small interface so headless
 * tests can record exactly what would be painted.
 */

export interface CameraPose {
  yaw: number;    // radians around +z
  pitch: number;  // radians around the screen x axis
  zoom: number;   // pixels per meter
  panX: number;   // screen-space offset
  panY: number;
}

export interface DrawSurface {
  width: number;
  height: number;
  clear(color: string): void;
  drawPoint(x: number, y: number, radius: number, color: string): void;
}

export interface Projected {
  x: number;
  y: number;
  depth: number;
}

export function defaultPose(): CameraPose {
  return { yaw: 0.6, pitch: 0.9, zoom: 60, panX: 0, panY: 0 };
}

export function projectPoint(p: number[], pose: CameraPose, surface: { width: number; height: number }): Projected {
  const [x, y, z] = p;
  const cy = Math.cos(pose.yaw);
  const sy = Math.sin(pose.yaw);
  const cp = Math.cos(pose.pitch);
  const sp = Math.sin(pose.pitch);
  // yaw about z, then pitch toward the viewer
  const rx = cy * x - sy * y;
  const ry = sy * x + cy * y;
  const sx = rx;
  const syy = cp * ry - sp * z;
  const depth = sp * ry + cp * z;
  return {
    x: surface.width / 2 + pose.panX + sx * pose.zoom,
    y: surface.height / 2 + pose.panY - syy * pose.zoom,
    depth,
  };
}

export function autoFit(positions: number[][], surface: { width: number; height: number }): CameraPose {
  const pose = defaultPose();
  if (positions.length === 0) return pose;
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const p of positions) {
    const q = projectPoint(p, { ...pose, zoom: 1, panX: 0, panY: 0 }, { width: 0, height: 0 });
    minX = Math.min(minX, q.x); maxX = Math.max(maxX, q.x);
    minY = Math.min(minY, q.y); maxY = Math.max(maxY, q.y);
  }
  const spanX = Math.max(maxX - minX, 1e-6);
  const spanY = Math.max(maxY - minY, 1e-6);
  pose.zoom = 0.85 * Math.min(surface.width / spanX, surface.height / spanY);
  // the probe projection already carries the screen-space sign of y
  pose.panX = -pose.zoom * (minX + maxX) / 2;
  pose.panY = -pose.zoom * (minY + maxY) / 2;
  return pose;
}

export function renderPoints(
  surface: DrawSurface,
  positions: number[][],
  colors: string[],
  pose: CameraPose,
  pointRadius = 2.5
): void {
  surface.clear("#111418");
  const order: { idx: number; proj: Projected }[] = positions.map((p, idx) => ({
    idx,
    proj: projectPoint(p, pose, surface),
  }));
  order.sort((a, b) => a.proj.depth - b.proj.depth); // back to front
  for (const { idx, proj } of order) {
    surface.drawPoint(proj.x, proj.y, pointRadius, colors[idx]);
  }
}

/**
 * Nearest projected point within pickRadius pixels; null when none is close
 * enough. Ties resolve to the lower index so picking is deterministic.
 */
export function pickPoint(
  positions: number[][],
  pose: CameraPose,
  surface: { width: number; height: number },
  screenX: number,
  screenY: number,
  pickRadius = 8
): number | null {
  let best: number | null = null;
  let bestDist = pickRadius * pickRadius;
  for (let i = 0; i < positions.length; i++) {
    const proj = projectPoint(positions[i], pose, surface);
    const dx = proj.x - screenX;
    const dy = proj.y - screenY;
    const d2 = dx * dx + dy * dy;
    if (d2 < bestDist) {
      best = i;
      bestDist = d2;
    }
  }
  return best;
}

/** Canvas-backed surface used by the browser entry point. */
export class CanvasSurface implements DrawSurface {
  constructor(private ctx: CanvasRenderingContext2D, public width: number, public height: number) {}

  clear(color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.fillRect(0, 0, this.width, this.height);
  }

  drawPoint(x: number, y: number, radius: number, color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.beginPath();
    this.ctx.arc(x, y, radius, 0, 2 * Math.PI);
    this.ctx.fill();
  }
}
