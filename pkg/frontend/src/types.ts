export type Point = [number, number];

export interface Pattern {
  points: Point[];
  feeds: number[];
}

export type ModelKind = "heuristic" | "surrogate";

export interface CompressResponse {
  dispensed: number[][];
  compressed: number[][];
  coverage_ratio: number;
  void_count: number;
  off_grid_mass: number;
}

export interface Rect {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface CompressRequest {
  pattern: Pattern;
  model: ModelKind;
  gap: number;
  resolution: [number, number];
}
