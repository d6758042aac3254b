import { describe, expect, it } from "vitest";

import { amountToCss, amountToRgb } from "../src/colormap.js";

describe("colormap", () => {
  it("is a pure function of the amount with a fixed [0,1] domain", () => {
    expect(amountToRgb(0.5)).toEqual(amountToRgb(0.5));
    expect(amountToRgb(-1)).toEqual(amountToRgb(0));
    expect(amountToRgb(7)).toEqual(amountToRgb(1));
  });

  it("spans white-ish to deep blue", () => {
    const empty = amountToRgb(0);
    const full = amountToRgb(1);
    expect(empty.r).toBeGreaterThan(240);
    expect(full.b).toBeGreaterThan(full.r);
    expect(full.r).toBeLessThan(50);
  });

  it("darkens monotonically with amount", () => {
    let previous = amountToRgb(0);
    for (let v = 0.1; v <= 1.0001; v += 0.1) {
      const next = amountToRgb(v);
      expect(next.r).toBeLessThanOrEqual(previous.r);
      expect(next.g).toBeLessThanOrEqual(previous.g);
      previous = next;
    }
  });

  it("renders a css rgb string", () => {
    expect(amountToCss(0)).toMatch(/^rgb\(\d+,\d+,\d+\)$/);
  });
});
