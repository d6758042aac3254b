import { amountToCss } from "./colormap.js";

/**
 * Painting goes through this narrow interface so the same rendering code
 * drives a real canvas in the browser and a recording fake under jsdom
 * (which has no 2D context).
 */
export interface CellPainter {
  clear(): void;
  fillCell(i: number, j: number, css: string): void;
  drawSegment(x0: number, y0: number, x1: number, y1: number,
              widthPx: number, css: string): void;
  drawHandle(x: number, y: number, css: string): void;
}

export class CanvasPainter implements CellPainter {
  private ctx: CanvasRenderingContext2D;

  constructor(private readonly canvas: HTMLCanvasElement,
              private readonly cellPx: number) {
    const ctx = canvas.getContext("2d");
    if (!ctx) {
      throw new Error("canvas 2D context unavailable");
    }
    this.ctx = ctx;
  }

  clear(): void {
    this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
  }

  fillCell(i: number, j: number, css: string): void {
    this.ctx.fillStyle = css;
    this.ctx.fillRect(i * this.cellPx, j * this.cellPx, this.cellPx, this.cellPx);
  }

  drawSegment(x0: number, y0: number, x1: number, y1: number,
              widthPx: number, css: string): void {
    this.ctx.strokeStyle = css;
    this.ctx.lineWidth = widthPx;
    this.ctx.lineCap = "butt";
    this.ctx.beginPath();
    this.ctx.moveTo(x0 * this.cellPx, y0 * this.cellPx);
    this.ctx.lineTo(x1 * this.cellPx, y1 * this.cellPx);
    this.ctx.stroke();
  }

  drawHandle(x: number, y: number, css: string): void {
    this.ctx.fillStyle = css;
    this.ctx.beginPath();
    this.ctx.arc(x * this.cellPx, y * this.cellPx, 4, 0, 2 * Math.PI);
    this.ctx.fill();
  }
}

/** Test double: remembers every operation and the last fill per cell. */
export class RecordingPainter implements CellPainter {
  ops: Array<Record<string, unknown>> = [];
  cells = new Map<string, string>();

  clear(): void {
    this.ops.push({ op: "clear" });
    this.cells.clear();
  }

  fillCell(i: number, j: number, css: string): void {
    this.ops.push({ op: "fill", i, j, css });
    this.cells.set(`${i},${j}`, css);
  }

  drawSegment(x0: number, y0: number, x1: number, y1: number,
              widthPx: number, css: string): void {
    this.ops.push({ op: "segment", x0, y0, x1, y1, widthPx, css });
  }

  drawHandle(x: number, y: number, css: string): void {
    this.ops.push({ op: "handle", x, y, css });
  }

  cellColor(i: number, j: number): string | undefined {
    return this.cells.get(`${i},${j}`);
  }

  segmentCount(): number {
    return this.ops.filter((o) => o.op === "segment").length;
  }
}

const VIOLATION_CSS = "rgba(229,57,53,0.6)";
const TABOO_CSS = "rgba(229,57,53,0.15)";

export function renderHeatmap(painter: CellPainter, grid: number[][],
                              gap: number): void {
  // Normalize by the gap so the documented [0, 1] domain always applies:
  // a cell at the final gap height renders at full intensity.
  for (let j = 0; j < grid.length; j++) {
    for (let i = 0; i < grid[j].length; i++) {
      painter.fillCell(i, j, amountToCss(grid[j][i] / gap));
    }
  }
}

export function renderViolations(painter: CellPainter,
                                 violations: Array<{ cells: Array<[number, number]> }>): void {
  for (const violation of violations) {
    for (const [i, j] of violation.cells) {
      painter.fillCell(i, j, VIOLATION_CSS);
    }
  }
}

export function renderAnnotations(painter: CellPainter,
                                  zones: Array<{ x0: number; y0: number; x1: number; y1: number }>): void {
  for (const zone of zones) {
    for (let j = Math.floor(Math.min(zone.y0, zone.y1)); j < Math.ceil(Math.max(zone.y0, zone.y1)); j++) {
      for (let i = Math.floor(Math.min(zone.x0, zone.x1)); i < Math.ceil(Math.max(zone.x0, zone.x1)); i++) {
        painter.fillCell(i, j, TABOO_CSS);
      }
    }
  }
}

export function renderPattern(painter: CellPainter,
                              pattern: { points: Array<[number, number]>; feeds: number[] }): void {
  for (let k = 0; k < pattern.feeds.length; k++) {
    const [x0, y0] = pattern.points[k];
    const [x1, y1] = pattern.points[k + 1];
    painter.drawSegment(x0, y0, x1, y1, 2, "rgba(30,30,30,0.85)");
  }
  for (const [x, y] of pattern.points) {
    painter.drawHandle(x, y, "rgba(30,30,30,0.9)");
  }
}
