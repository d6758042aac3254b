/** Grid helpers shared by the stats panel and tests. */

/** Sum of |a - b| over all cells, normalized by the total of `a`. */
export function relativeError(a: number[][], b: number[][]): number {
  let diff = 0;
  let total = 0;
  for (let j = 0; j < a.length; j++) {
    for (let i = 0; i < a[j].length; i++) {
      diff += Math.abs(a[j][i] - b[j][i]);
      total += a[j][i];
    }
  }
  if (total === 0) {
    return NaN;
  }
  return diff / total;
}

export function gridTotal(grid: number[][]): number {
  let total = 0;
  for (const row of grid) {
    for (const v of row) {
      total += v;
    }
  }
  return total;
}
