import { readdirSync, readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { exportPattern, importPattern, SchemaError } from "../src/io.js";

const FIXTURE_DIR = join(__dirname, "fixtures", "patterns");

describe("pattern import/export", () => {
  it("round-trips all ten fixture patterns exactly", () => {
    const files = readdirSync(FIXTURE_DIR).filter((f) => f.endsWith(".json"));
    expect(files.length).toBe(10);
    for (const file of files) {
      const text = readFileSync(join(FIXTURE_DIR, file), "utf-8");
      const pattern = importPattern(text);
      const again = importPattern(exportPattern(pattern));
      expect(again).toEqual(pattern);
      // and the parsed content matches the raw file
      expect(pattern).toEqual(JSON.parse(text));
    }
  });

  it.each([
    ["{broken", "(root)"],
    ['{"points": [[1, 2]], "feeds": []}', "points"],
    ['{"points": [[1, 2], [3, 4]], "feeds": [1, 2]}', "feeds"],
    ['{"points": [[1, 2], [3]], "feeds": [1]}', "points[1]"],
    ['{"points": [[1, 2], [3, "x"]], "feeds": [1]}', "points[1][1]"],
    ['{"points": [[1, 2], [3, 4]], "feeds": [-1]}', "feeds[0]"],
    ['{"points": [[1, 2], [1, 2]], "feeds": [1]}', "feeds[0]"],
    ['{"points": [[1, 2], [3, 4]], "feeds": [1], "extra": 0}', "extra"],
  ])("reports the offending field path for %s", (text, path) => {
    try {
      importPattern(text);
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(SchemaError);
      expect((err as SchemaError).fieldPath).toBe(path);
    }
  });
});
