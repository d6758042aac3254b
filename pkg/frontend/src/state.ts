import type { CompressResponse, ModelKind, Pattern, Point, Rect } from "./types.js";

export const DEFAULT_FEED = 1.0;
const UNDO_DEPTH = 100; // contract asks for at least 50
// Keep points one cell off the border so the unit-width bead stays on-grid.
const EDGE = 1.0;

export interface TabooViolation {
  zone: number;
  cells: Array<[number, number]>;
}

/**
 * Editor state for the pattern studio: the pattern under edit with undo and
 * redo, model and gap selection, the latest simulation responses, and the
 * taboo-zone / cooling-area annotations.
 *
 * Simulation responses are versioned: every edit bumps `patternVersion`, and
 * a response is only accepted if it belongs to the current version and is
 * newer than what is already displayed, so a slow stale reply can never
 * overwrite a fresh one.
 */
export class EditorStore {
  pattern: Pattern = { points: [], feeds: [] };
  selectedModel: ModelKind = "heuristic";
  gap = 1.0;
  resolution: [number, number] = [50, 50];
  tabooZones: Rect[] = [];
  coolingArea: Rect | null = null;
  warning: string | null = null;

  patternVersion = 0;
  /** per-model response cache for the current pattern version */
  responses: Partial<Record<ModelKind, CompressResponse>> = {};
  lastRendered: { model: ModelKind; response: CompressResponse } | null = null;
  private acceptedSeq = 0;

  private undoStack: Pattern[] = [];
  private redoStack: Pattern[] = [];

  private clonePattern(): Pattern {
    return {
      points: this.pattern.points.map((p) => [p[0], p[1]] as Point),
      feeds: [...this.pattern.feeds],
    };
  }

  private beginEdit(): void {
    this.undoStack.push(this.clonePattern());
    if (this.undoStack.length > UNDO_DEPTH) {
      this.undoStack.shift();
    }
    this.redoStack = [];
    this.patternVersion++;
    this.responses = {};
  }

  private clampPoint(x: number, y: number): { point: Point; clamped: boolean } {
    const [h, w] = this.resolution;
    const cx = Math.min(w - EDGE, Math.max(EDGE, x));
    const cy = Math.min(h - EDGE, Math.max(EDGE, y));
    return { point: [cx, cy], clamped: cx !== x || cy !== y };
  }

  get canSimulate(): boolean {
    return this.pattern.points.length >= 2;
  }

  addPoint(x: number, y: number): void {
    const { point, clamped } = this.clampPoint(x, y);
    this.beginEdit();
    this.pattern.points.push(point);
    if (this.pattern.points.length >= 2) {
      this.pattern.feeds.push(DEFAULT_FEED);
    }
    this.warning = clamped ? "point clamped to the editable area" : null;
  }

  dragPoint(index: number, x: number, y: number): void {
    if (index < 0 || index >= this.pattern.points.length) {
      return;
    }
    const { point, clamped } = this.clampPoint(x, y);
    this.beginEdit();
    this.pattern.points[index] = point;
    this.warning = clamped ? "point snapped back inside the grid" : null;
  }

  setFeed(segment: number, feed: number): void {
    if (segment < 0 || segment >= this.pattern.feeds.length) {
      return;
    }
    if (!Number.isFinite(feed) || feed < 0) {
      this.warning = "feed must be a number >= 0";
      return;
    }
    this.beginEdit();
    this.pattern.feeds[segment] = feed;
  }

  deleteSegment(segment: number): void {
    if (segment < 0 || segment >= this.pattern.feeds.length) {
      return;
    }
    this.beginEdit();
    this.pattern.feeds.splice(segment, 1);
    // removing the trailing segment drops its end point, otherwise the
    // segment's start point, so the chain stays connected
    const pointIndex = segment === this.pattern.points.length - 2 ? segment + 1 : segment;
    this.pattern.points.splice(pointIndex, 1);
  }

  replacePattern(pattern: Pattern): void {
    this.beginEdit();
    this.pattern = { points: pattern.points.map((p) => [p[0], p[1]]), feeds: [...pattern.feeds] };
  }

  undo(): boolean {
    const previous = this.undoStack.pop();
    if (!previous) {
      return false;
    }
    this.redoStack.push(this.clonePattern());
    this.pattern = previous;
    this.patternVersion++;
    this.responses = {};
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (!next) {
      return false;
    }
    this.undoStack.push(this.clonePattern());
    this.pattern = next;
    this.patternVersion++;
    this.responses = {};
    return true;
  }

  get undoDepth(): number {
    return this.undoStack.length;
  }

  setModel(model: ModelKind): void {
    this.selectedModel = model;
  }

  setGap(gap: number): void {
    if (!Number.isFinite(gap) || gap <= 0) {
      this.warning = "gap must be > 0";
      return;
    }
    this.gap = gap;
    this.patternVersion++;
    this.responses = {};
  }

  addTabooZone(rect: Rect): void {
    this.tabooZones.push(rect);
  }

  setCoolingArea(rect: Rect | null): void {
    this.coolingArea = rect;
  }

  /**
   * Accept a response if it belongs to the current pattern version and its
   * sequence number is newer than anything rendered so far. Returns true
   * when the caller should re-render.
   */
  acceptResponse(seq: number, version: number, model: ModelKind,
                 response: CompressResponse): boolean {
    if (version !== this.patternVersion || seq <= this.acceptedSeq) {
      return false;
    }
    this.acceptedSeq = seq;
    this.responses[model] = response;
    this.lastRendered = { model, response };
    return true;
  }

  /** Cells inside a taboo zone whose compressed amount reaches the threshold. */
  tabooViolations(threshold = 1e-3): TabooViolation[] {
    const rendered = this.lastRendered;
    if (!rendered) {
      return [];
    }
    const grid = rendered.response.compressed;
    const found: TabooViolation[] = [];
    this.tabooZones.forEach((zone, index) => {
      const cells: Array<[number, number]> = [];
      const iLo = Math.max(0, Math.floor(Math.min(zone.x0, zone.x1)));
      const iHi = Math.min(grid[0].length, Math.ceil(Math.max(zone.x0, zone.x1)));
      const jLo = Math.max(0, Math.floor(Math.min(zone.y0, zone.y1)));
      const jHi = Math.min(grid.length, Math.ceil(Math.max(zone.y0, zone.y1)));
      for (let j = jLo; j < jHi; j++) {
        for (let i = iLo; i < iHi; i++) {
          if (grid[j][i] >= threshold) {
            cells.push([i, j]);
          }
        }
      }
      if (cells.length > 0) {
        found.push({ zone: index, cells });
      }
    });
    return found;
  }
}
