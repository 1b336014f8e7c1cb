/** Image-to-canvas geometry: fit, zoom, box mapping, and box editing.
 *
 * All functions are pure so the overlay registration can be verified
 * numerically: mapping a box to canvas coordinates, rasterizing to whole
 * device pixels, and mapping back must land within half a pixel of the
 * original at any zoom >= 1.
 */

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export type Handle =
  | "nw" | "n" | "ne"
  | "w" | "inside" | "e"
  | "sw" | "s" | "se"
  | null;

/** Contain-fit the image in the canvas, centered. */
export function fitTransform(
  imageW: number,
  imageH: number,
  canvasW: number,
  canvasH: number,
  margin = 0,
): ViewTransform {
  const availW = Math.max(1, canvasW - 2 * margin);
  const availH = Math.max(1, canvasH - 2 * margin);
  const scale = Math.min(availW / imageW, availH / imageH);
  return {
    scale,
    offsetX: (canvasW - imageW * scale) / 2,
    offsetY: (canvasH - imageH * scale) / 2,
  };
}

/** Rescale around a canvas anchor point, keeping that point fixed. */
export function zoomedAt(
  t: ViewTransform,
  canvasX: number,
  canvasY: number,
  factor: number,
  minScale = 0.05,
  maxScale = 64,
): ViewTransform {
  const scale = Math.min(maxScale, Math.max(minScale, t.scale * factor));
  const ratio = scale / t.scale;
  return {
    scale,
    offsetX: canvasX - (canvasX - t.offsetX) * ratio,
    offsetY: canvasY - (canvasY - t.offsetY) * ratio,
  };
}

export function panned(t: ViewTransform, dx: number, dy: number): ViewTransform {
  return { scale: t.scale, offsetX: t.offsetX + dx, offsetY: t.offsetY + dy };
}

export function toCanvasPoint(t: ViewTransform, x: number, y: number): [number, number] {
  return [t.offsetX + x * t.scale, t.offsetY + y * t.scale];
}

export function toImagePoint(t: ViewTransform, cx: number, cy: number): [number, number] {
  return [(cx - t.offsetX) / t.scale, (cy - t.offsetY) / t.scale];
}

export function boxToCanvas(t: ViewTransform, box: Box): Box {
  const [x, y] = toCanvasPoint(t, box.x, box.y);
  return { x, y, w: box.w * t.scale, h: box.h * t.scale };
}

export function boxToImage(t: ViewTransform, canvasBox: Box): Box {
  const [x, y] = toImagePoint(t, canvasBox.x, canvasBox.y);
  return { x, y, w: canvasBox.w / t.scale, h: canvasBox.h / t.scale };
}

/** Snap a canvas-space box to whole device pixels (edge rounding). */
export function rasterizeBox(canvasBox: Box): Box {
  const x0 = Math.round(canvasBox.x);
  const y0 = Math.round(canvasBox.y);
  const x1 = Math.round(canvasBox.x + canvasBox.w);
  const y1 = Math.round(canvasBox.y + canvasBox.h);
  return { x: x0, y: y0, w: Math.max(1, x1 - x0), h: Math.max(1, y1 - y0) };
}

/** Which resize handle (or the interior) a canvas point touches. */
export function handleAt(canvasBox: Box, cx: number, cy: number, tolerance = 6): Handle {
  const x1 = canvasBox.x + canvasBox.w;
  const y1 = canvasBox.y + canvasBox.h;
  const nearLeft = Math.abs(cx - canvasBox.x) <= tolerance;
  const nearRight = Math.abs(cx - x1) <= tolerance;
  const nearTop = Math.abs(cy - canvasBox.y) <= tolerance;
  const nearBottom = Math.abs(cy - y1) <= tolerance;
  const insideX = cx >= canvasBox.x - tolerance && cx <= x1 + tolerance;
  const insideY = cy >= canvasBox.y - tolerance && cy <= y1 + tolerance;
  if (!insideX || !insideY) return null;
  if (nearTop && nearLeft) return "nw";
  if (nearTop && nearRight) return "ne";
  if (nearBottom && nearLeft) return "sw";
  if (nearBottom && nearRight) return "se";
  if (nearTop) return "n";
  if (nearBottom) return "s";
  if (nearLeft) return "w";
  if (nearRight) return "e";
  if (cx > canvasBox.x && cx < x1 && cy > canvasBox.y && cy < y1) return "inside";
  return null;
}

/** Apply a drag of (dx, dy) image pixels to a handle; clamp to the frame. */
export function resizeBox(
  box: Box,
  handle: Handle,
  dx: number,
  dy: number,
  imageW: number,
  imageH: number,
  minSize = 1,
): Box {
  let x0 = box.x;
  let y0 = box.y;
  let x1 = box.x + box.w;
  let y1 = box.y + box.h;
  if (handle === "inside") {
    const mx = Math.min(Math.max(dx, -x0), imageW - x1);
    const my = Math.min(Math.max(dy, -y0), imageH - y1);
    return { x: x0 + mx, y: y0 + my, w: box.w, h: box.h };
  }
  if (handle === "nw" || handle === "w" || handle === "sw") {
    x0 = Math.min(Math.max(0, x0 + dx), x1 - minSize);
  }
  if (handle === "ne" || handle === "e" || handle === "se") {
    x1 = Math.max(Math.min(imageW, x1 + dx), x0 + minSize);
  }
  if (handle === "nw" || handle === "n" || handle === "ne") {
    y0 = Math.min(Math.max(0, y0 + dy), y1 - minSize);
  }
  if (handle === "sw" || handle === "s" || handle === "se") {
    y1 = Math.max(Math.min(imageH, y1 + dy), y0 + minSize);
  }
  return { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
}

export function clampBoxToImage(box: Box, imageW: number, imageH: number): Box {
  const x0 = Math.min(Math.max(0, box.x), imageW - 1);
  const y0 = Math.min(Math.max(0, box.y), imageH - 1);
  const x1 = Math.max(x0 + 1, Math.min(imageW, box.x + box.w));
  const y1 = Math.max(y0 + 1, Math.min(imageH, box.y + box.h));
  return { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
}
