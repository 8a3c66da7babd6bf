// Invertible mapping between world millimetres and screen pixels.

export interface Viewport {
  pxPerMm: number;
  marginPx: number;
}

export const DEFAULT_VIEWPORT: Viewport = { pxPerMm: 1.6, marginPx: 20 };

export function worldToScreen(v: Viewport, xMm: number, yMm: number): [number, number] {
  return [v.marginPx + xMm * v.pxPerMm, v.marginPx + yMm * v.pxPerMm];
}

export function screenToWorld(v: Viewport, xPx: number, yPx: number): [number, number] {
  return [(xPx - v.marginPx) / v.pxPerMm, (yPx - v.marginPx) / v.pxPerMm];
}

export function clampToGrid(xMm: number, yMm: number, rows: number, cols: number,
                            pitch: number): [number, number] {
  return [
    Math.min(Math.max(xMm, 0), cols * pitch),
    Math.min(Math.max(yMm, 0), rows * pitch),
  ];
}

export function viewportFor(rows: number, cols: number, pitch: number,
                            canvasW: number, canvasH: number, marginPx = 20): Viewport {
  const pxPerMm = Math.min(
    (canvasW - 2 * marginPx) / (cols * pitch),
    (canvasH - 2 * marginPx) / (rows * pitch),
  );
  return { pxPerMm, marginPx };
}
