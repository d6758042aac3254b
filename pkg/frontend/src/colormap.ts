/**
 * Heatmap colormap: a single-hue blue ramp over the fixed domain [0, 1]
 * (the termination height). Pinning the domain keeps brightness comparable
 * across patterns; the mapping is a pure function of the cell amount.
 */

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

const EMPTY: Rgb = { r: 248, g: 250, b: 252 };
const FULL: Rgb = { r: 13, g: 71, b: 161 };

export function amountToRgb(amount: number): Rgb {
  const t = Math.min(1, Math.max(0, amount));
  return {
    r: Math.round(EMPTY.r + (FULL.r - EMPTY.r) * t),
    g: Math.round(EMPTY.g + (FULL.g - EMPTY.g) * t),
    b: Math.round(EMPTY.b + (FULL.b - EMPTY.b) * t),
  };
}

export function amountToCss(amount: number): string {
  const { r, g, b } = amountToRgb(amount);
  return `rgb(${r},${g},${b})`;
}
