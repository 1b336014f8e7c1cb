/** Canvas drawing for the review overlay (not covered by unit tests). */

import type { Box, ViewTransform } from "./transform.js";
import { boxToCanvas, rasterizeBox } from "./transform.js";

export interface OverlayStyle {
  stroke: string;
  fill: string;
  handleFill: string;
}

export const CANDIDATE_STYLE: OverlayStyle = {
  stroke: "#ffb020",
  fill: "rgba(255, 176, 32, 0.12)",
  handleFill: "#ffb020",
};

export const ADJUSTED_STYLE: OverlayStyle = {
  stroke: "#3fb950",
  fill: "rgba(63, 185, 80, 0.12)",
  handleFill: "#3fb950",
};

export function clearCanvas(ctx: CanvasRenderingContext2D): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

export function drawImage(
  ctx: CanvasRenderingContext2D,
  image: CanvasImageSource,
  imageW: number,
  imageH: number,
  t: ViewTransform,
): void {
  ctx.imageSmoothingEnabled = t.scale < 2;
  ctx.drawImage(image, t.offsetX, t.offsetY, imageW * t.scale, imageH * t.scale);
}

export function drawBox(
  ctx: CanvasRenderingContext2D,
  t: ViewTransform,
  box: Box,
  style: OverlayStyle,
  label = "",
  withHandles = false,
): void {
  const raster = rasterizeBox(boxToCanvas(t, box));
  ctx.save();
  ctx.fillStyle = style.fill;
  ctx.fillRect(raster.x, raster.y, raster.w, raster.h);
  ctx.strokeStyle = style.stroke;
  ctx.lineWidth = 2;
  ctx.strokeRect(raster.x + 0.5, raster.y + 0.5, raster.w - 1, raster.h - 1);
  if (label) {
    ctx.font = "12px system-ui, sans-serif";
    const pad = 3;
    const metrics = ctx.measureText(label);
    const textY = raster.y >= 18 ? raster.y - 18 : raster.y + raster.h;
    ctx.fillStyle = style.stroke;
    ctx.fillRect(raster.x, textY, metrics.width + 2 * pad, 16);
    ctx.fillStyle = "#101418";
    ctx.fillText(label, raster.x + pad, textY + 12);
  }
  if (withHandles) {
    ctx.fillStyle = style.handleFill;
    const xs = [raster.x, raster.x + raster.w / 2, raster.x + raster.w];
    const ys = [raster.y, raster.y + raster.h / 2, raster.y + raster.h];
    for (const hx of xs) {
      for (const hy of ys) {
        if (hx === xs[1] && hy === ys[1]) continue;
        ctx.fillRect(hx - 3, hy - 3, 6, 6);
      }
    }
  }
  ctx.restore();
}
