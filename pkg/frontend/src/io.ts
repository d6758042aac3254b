import type { Pattern } from "./types.js";

/** Schema violation with the path of the offending field, e.g. points[2][1]. */
export class SchemaError extends Error {
  constructor(public readonly fieldPath: string, detail: string) {
    super(`${fieldPath}: ${detail}`);
  }
}

function isNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

/** Serialize with the service's pattern schema: {"points": [[x,y],...], "feeds": [...]}. */
export function exportPattern(pattern: Pattern): string {
  return JSON.stringify({ points: pattern.points, feeds: pattern.feeds }, null, 2);
}

export function importPattern(text: string): Pattern {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch (err) {
    throw new SchemaError("(root)", `not valid JSON: ${(err as Error).message}`);
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new SchemaError("(root)", "expected an object");
  }
  const obj = data as Record<string, unknown>;
  for (const key of Object.keys(obj)) {
    if (key !== "points" && key !== "feeds") {
      throw new SchemaError(key, "unknown field");
    }
  }
  if (!Array.isArray(obj.points)) {
    throw new SchemaError("points", "expected a list of [x, y] pairs");
  }
  if (!Array.isArray(obj.feeds)) {
    throw new SchemaError("feeds", "expected a list of numbers");
  }
  const points = obj.points.map((p, k) => {
    if (!Array.isArray(p) || p.length !== 2) {
      throw new SchemaError(`points[${k}]`, "expected [x, y]");
    }
    p.forEach((v, axis) => {
      if (!isNumber(v)) {
        throw new SchemaError(`points[${k}][${axis}]`, "expected a finite number");
      }
    });
    return [p[0], p[1]] as [number, number];
  });
  const feeds = obj.feeds.map((f, k) => {
    if (!isNumber(f) || f < 0) {
      throw new SchemaError(`feeds[${k}]`, "expected a number >= 0");
    }
    return f;
  });
  if (points.length < 2) {
    throw new SchemaError("points", `need at least 2 points, got ${points.length}`);
  }
  if (feeds.length !== points.length - 1) {
    throw new SchemaError("feeds",
      `expected ${points.length - 1} feeds for ${points.length} points, got ${feeds.length}`);
  }
  for (let k = 0; k < feeds.length; k++) {
    const [x0, y0] = points[k];
    const [x1, y1] = points[k + 1];
    if (x0 === x1 && y0 === y1 && feeds[k] !== 0) {
      throw new SchemaError(`feeds[${k}]`, "zero-length segment must have feed 0");
    }
  }
  return { points, feeds };
}
