import { ApiClient, ApiError } from "./api.js";
import { Debouncer } from "./debounce.js";
import { relativeError } from "./gridmath.js";
import { CellPainter, renderAnnotations, renderHeatmap, renderPattern,
         renderViolations } from "./heatmap.js";
import { exportPattern, importPattern, SchemaError } from "./io.js";
import { EditorStore } from "./state.js";
import type { ModelKind } from "./types.js";

export interface StudioOptions {
  root: HTMLElement;
  api: ApiClient;
  /** receives the editor canvas once it exists in the DOM */
  makePainter: (canvas: HTMLCanvasElement) => CellPainter;
  cellPx?: number;
  debounceMs?: number;
}

/**
 * The studio controller: owns the editor store, the canvas interactions, the
 * debounced simulation requests, and the stats panel.
 *
 * Request discipline: at most one request is in flight; starting a new one
 * aborts the old. Responses carry the sequence number and pattern version
 * they were issued for and the store drops anything stale, so the heatmap
 * always shows the answer to the newest request.
 */
export class StudioApp {
  readonly store = new EditorStore();
  readonly canvas: HTMLCanvasElement;
  private readonly api: ApiClient;
  private readonly painter: CellPainter;
  private readonly cellPx: number;
  private readonly debouncer: Debouncer;
  private seq = 0;
  private inflight: AbortController | null = null;
  private dragIndex: number | null = null;
  private dragMoved = false;
  /** resolves when no simulation request is pending or in flight */
  private idleResolvers: Array<() => void> = [];
  private pendingCount = 0;

  private statsEl: HTMLElement;
  private bannerEl: HTMLElement;
  private deltaEl: HTMLElement;

  constructor(options: StudioOptions) {
    this.api = options.api;
    this.cellPx = options.cellPx ?? 10;
    this.debouncer = new Debouncer(options.debounceMs ?? 200);

    const root = options.root;
    root.innerHTML = `
      <div class="studio">
        <div class="toolbar">
          <button data-model="heuristic" class="model active">heuristic</button>
          <button data-model="surrogate" class="model">surrogate</button>
          <label>gap <input type="number" step="0.25" value="1" class="gap"></label>
          <button class="undo">undo</button>
          <button class="redo">redo</button>
          <button class="export">export</button>
          <button class="import">import</button>
        </div>
        <div class="banner" hidden></div>
        <canvas class="editor"></canvas>
        <div class="stats"></div>
        <div class="delta"></div>
      </div>`;
    this.canvas = root.querySelector("canvas.editor") as HTMLCanvasElement;
    const [h, w] = this.store.resolution;
    this.canvas.width = w * this.cellPx;
    this.canvas.height = h * this.cellPx;
    this.painter = options.makePainter(this.canvas);
    this.statsEl = root.querySelector(".stats") as HTMLElement;
    this.bannerEl = root.querySelector(".banner") as HTMLElement;
    this.deltaEl = root.querySelector(".delta") as HTMLElement;

    this.canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e as MouseEvent));
    this.canvas.addEventListener("pointermove", (e) => this.onPointerMove(e as MouseEvent));
    this.canvas.addEventListener("pointerup", (e) => this.onPointerUp(e as MouseEvent));
    root.querySelectorAll("button.model").forEach((btn) => {
      btn.addEventListener("click", () => {
        this.setModel((btn as HTMLElement).dataset.model as ModelKind);
        root.querySelectorAll("button.model").forEach((b) => b.classList.remove("active"));
        btn.classList.add("active");
      });
    });
    (root.querySelector("input.gap") as HTMLInputElement)
      .addEventListener("change", (e) => {
        this.store.setGap(parseFloat((e.target as HTMLInputElement).value));
        this.scheduleSimulation();
      });
    (root.querySelector("button.undo") as HTMLElement)
      .addEventListener("click", () => { this.store.undo(); this.afterEdit(); });
    (root.querySelector("button.redo") as HTMLElement)
      .addEventListener("click", () => { this.store.redo(); this.afterEdit(); });
    this.redraw();
  }

  // --- coordinate mapping -------------------------------------------------

  private toGrid(event: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const x = (event.clientX - rect.left) / this.cellPx;
    const y = (event.clientY - rect.top) / this.cellPx;
    return [Math.round(x * 10) / 10, Math.round(y * 10) / 10];
  }

  private findHandle(x: number, y: number): number | null {
    const grabRadius = 0.8;
    let best: number | null = null;
    let bestDist = grabRadius;
    this.store.pattern.points.forEach(([px, py], index) => {
      const d = Math.hypot(px - x, py - y);
      if (d <= bestDist) {
        best = index;
        bestDist = d;
      }
    });
    return best;
  }

  // --- pointer gestures -----------------------------------------------------

  private onPointerDown(event: MouseEvent): void {
    const [x, y] = this.toGrid(event);
    this.dragIndex = this.findHandle(x, y);
    this.dragMoved = false;
  }

  private onPointerMove(event: MouseEvent): void {
    if (this.dragIndex === null) {
      return;
    }
    const [x, y] = this.toGrid(event);
    this.dragMoved = true;
    this.store.dragPoint(this.dragIndex, x, y);
    this.afterEdit();
  }

  private onPointerUp(event: MouseEvent): void {
    if (this.dragIndex === null) {
      // a click away from any handle appends a point
      const [x, y] = this.toGrid(event);
      this.store.addPoint(x, y);
      this.afterEdit();
    }
    this.dragIndex = null;
    this.dragMoved = false;
  }

  setModel(model: ModelKind): void {
    this.store.setModel(model);
    this.scheduleSimulation();
  }

  private afterEdit(): void {
    this.redraw();
    this.scheduleSimulation();
  }

  // --- simulation -----------------------------------------------------------

  scheduleSimulation(): void {
    if (!this.store.canSimulate) {
      return;
    }
    this.pendingCount++;
    this.debouncer.schedule(() => this.fire());
  }

  private fire(): void {
    const store = this.store;
    const seq = ++this.seq;
    const version = store.patternVersion;
    const model = store.selectedModel;
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    this.api.compress({
      pattern: { points: store.pattern.points, feeds: store.pattern.feeds },
      model,
      gap: store.gap,
      resolution: store.resolution,
    }, controller.signal).then((response) => {
      if (store.acceptResponse(seq, version, model, response)) {
        this.hideBanner();
        this.redraw();
      }
    }).catch((err) => {
      if ((err as Error).name === "AbortError") {
        return;
      }
      if (err instanceof ApiError) {
        this.showBanner(`${err.code}: ${err.message}`);
      } else {
        this.showBanner(`backend unreachable: ${(err as Error).message}`);
      }
    }).finally(() => {
      if (this.inflight === controller) {
        this.inflight = null;
      }
      this.settle();
    });
  }

  private settle(): void {
    this.pendingCount = 0;
    if (!this.debouncer.hasPending && this.inflight === null) {
      const resolvers = this.idleResolvers;
      this.idleResolvers = [];
      resolvers.forEach((resolve) => resolve());
    }
  }

  /** Test hook: resolves once no request is pending, scheduled, or in flight. */
  whenIdle(): Promise<void> {
    if (!this.debouncer.hasPending && this.inflight === null && this.pendingCount === 0) {
      return Promise.resolve();
    }
    return new Promise((resolve) => this.idleResolvers.push(resolve));
  }

  flushDebounce(): void {
    this.debouncer.flush();
  }

  // --- rendering --------------------------------------------------------------

  private redraw(): void {
    this.painter.clear();
    const rendered = this.store.lastRendered;
    if (rendered) {
      renderHeatmap(this.painter, rendered.response.compressed, this.store.gap);
      renderAnnotations(this.painter, this.store.tabooZones);
      renderViolations(this.painter, this.store.tabooViolations(1e-3 * this.store.gap));
    }
    renderPattern(this.painter, this.store.pattern);
    this.renderStats();
  }

  private renderStats(): void {
    const rendered = this.store.lastRendered;
    if (!rendered) {
      this.statsEl.textContent = "no simulation yet";
      this.deltaEl.textContent = "";
      return;
    }
    const r = rendered.response;
    this.statsEl.innerHTML =
      `<span class="model-used">${rendered.model}</span>` +
      ` coverage <span class="coverage">${r.coverage_ratio.toFixed(4)}</span>` +
      ` voids <span class="voids">${r.void_count}</span>` +
      ` off-grid <span class="offgrid">${r.off_grid_mass.toFixed(4)}</span>`;
    const { heuristic, surrogate } = this.store.responses;
    if (heuristic && surrogate) {
      const delta = relativeError(heuristic.compressed, surrogate.compressed);
      this.deltaEl.innerHTML =
        `model delta <span class="model-delta">${delta.toFixed(6)}</span>`;
    } else {
      this.deltaEl.textContent = "";
    }
  }

  private showBanner(text: string): void {
    this.bannerEl.textContent = text;
    this.bannerEl.hidden = false;
  }

  private hideBanner(): void {
    this.bannerEl.hidden = true;
  }

  get bannerText(): string | null {
    return this.bannerEl.hidden ? null : this.bannerEl.textContent;
  }

  // --- import / export -----------------------------------------------------

  exportCurrentPattern(): string {
    return exportPattern(this.store.pattern);
  }

  importPatternText(text: string): void {
    try {
      const pattern = importPattern(text);
      this.store.replacePattern(pattern);
      this.afterEdit();
    } catch (err) {
      if (err instanceof SchemaError) {
        this.showBanner(`import failed at ${err.fieldPath}: ${err.message}`);
      } else {
        throw err;
      }
    }
  }
}
