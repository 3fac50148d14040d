/** Canvas painting: two-color cells at integer zoom, an action-region
 * tint, and a reward sparkline per tile. */

export const DEAD_COLOR = "#101418";
export const LIVE_COLOR = "#e8f0e8";
export const REGION_TINT = "rgba(80, 140, 255, 0.18)";

export interface RegionBox {
  top: number;
  left: number;
  height: number;
  width: number;
}

/** Centered action region for an obs grid, mirroring the server layout. */
export function actionRegion(
  obsH: number, obsW: number, actH: number, actW: number): RegionBox {
  return {
    top: Math.floor((obsH - actH) / 2),
    left: Math.floor((obsW - actW) / 2),
    height: actH,
    width: actW,
  };
}

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  cells: Uint8Array,
  width: number,
  height: number,
  zoom: number,
  region: RegionBox | null,
): void {
  ctx.fillStyle = DEAD_COLOR;
  ctx.fillRect(0, 0, width * zoom, height * zoom);
  ctx.fillStyle = LIVE_COLOR;
  for (let r = 0; r < height; r++) {
    const base = r * width;
    for (let c = 0; c < width; c++) {
      if (cells[base + c]) {
        ctx.fillRect(c * zoom, r * zoom, zoom, zoom);
      }
    }
  }
  if (region) {
    ctx.fillStyle = REGION_TINT;
    ctx.fillRect(region.left * zoom, region.top * zoom,
      region.width * zoom, region.height * zoom);
  }
}

export function drawSparkline(
  ctx: CanvasRenderingContext2D,
  values: number[],
  width: number,
  height: number,
  marker: number | null,
): void {
  ctx.fillStyle = "#181c22";
  ctx.fillRect(0, 0, width, height);
  if (values.length === 0) return;
  const lo = Math.min(...values, 0);
  const hi = Math.max(...values, 1e-12);
  const span = hi - lo || 1;
  ctx.strokeStyle = "#7fd4a0";
  ctx.lineWidth = 1;
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = (i / Math.max(values.length - 1, 1)) * (width - 2) + 1;
    const y = height - 2 - ((v - lo) / span) * (height - 4);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  if (marker !== null && values.length > 1) {
    const x = (marker / (values.length - 1)) * (width - 2) + 1;
    ctx.strokeStyle = "#e0b050";
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, height);
    ctx.stroke();
  }
}
