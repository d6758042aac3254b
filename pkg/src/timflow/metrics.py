"""Error metrics, timing protocol, coverage and void diagnostics.

The error measures compare two compressed fields cell by cell: the absolute
error is the summed per-cell difference, the relative error divides that by
the total amount of the reference (first) field, and benchmark reports
average the relative error over a set of patterns.

Timing follows a min-of-N protocol: background activity only ever makes a
run slower, so the minimum over repeated runs is the robust per-pattern
statistic, and mean/standard deviation are taken across patterns.
"""
from __future__ import annotations

import csv
import json
import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import (BenchmarkAborted, EmptyList, EmptyRegion, ShapeMismatch,
                     ZeroReference)
from .pattern import TimGrid

# Amounts below this fraction of the unit termination height count as bare
# surface: numerical residue from relaxation, not material.
DEFAULT_COVER_THRESHOLD = 1e-3


def _field(grid) -> np.ndarray:
    return grid.amounts if isinstance(grid, TimGrid) else np.asarray(grid, dtype=np.float64)


def error_abs(a, b) -> float:
    """Summed per-cell absolute difference between two fields."""
    fa, fb = _field(a), _field(b)
    if fa.shape != fb.shape:
        raise ShapeMismatch(f"shapes differ: {fa.shape} vs {fb.shape}")
    return float(np.abs(fa - fb).sum())


def error_rel(a, b) -> float:
    """Absolute error normalized by the total amount of the reference ``a``."""
    fa = _field(a)
    denom = float(fa.sum())
    if denom == 0.0:
        raise ZeroReference("reference field holds no material")
    return error_abs(a, b) / denom


def error_mean(pairs) -> float:
    """Mean relative error across (reference, candidate) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyList("need at least one pair")
    return sum(error_rel(a, b) for a, b in pairs) / len(pairs)


@dataclass(frozen=True)
class ErrorSummary:
    e_comp: tuple[float, ...]
    e_rel: tuple[float, ...]
    mean_rel: float


def error_summary(pairs) -> ErrorSummary:
    pairs = list(pairs)
    if not pairs:
        raise EmptyList("need at least one pair")
    comp = tuple(error_abs(a, b) for a, b in pairs)
    rel = tuple(error_rel(a, b) for a, b in pairs)
    return ErrorSummary(comp, rel, sum(rel) / len(rel))


@dataclass(frozen=True)
class TimingSummary:
    t_min: tuple[float, ...]
    mean: float
    std: float
    n_runs: int
    n_pat: int


def timing_stats(t_min) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1 denominator) of per-pattern minima."""
    t_min = list(t_min)
    n = len(t_min)
    mean = sum(t_min) / n
    if n < 2:
        return mean, 0.0
    var = sum((t - mean) ** 2 for t in t_min) / (n - 1)
    return mean, math.sqrt(var)


def benchmark_time(subject, inputs, n_runs: int = 10, clock=time.perf_counter) -> TimingSummary:
    """Time ``subject(item)`` for every input, keeping the minimum of n_runs.

    Prepare inputs (model loading, rasterization) before calling: only the
    subject call sits inside the timed region. A raised subject aborts the
    benchmark with the failing pattern index.
    """
    inputs = list(inputs)
    if not inputs:
        raise EmptyList("need at least one input")
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    minima = []
    for index, item in enumerate(inputs):
        runs = []
        for _ in range(n_runs):
            begin = clock()
            try:
                subject(item)
            except Exception as exc:
                raise BenchmarkAborted(f"subject raised on pattern {index}: {exc}",
                                       index=index) from exc
            runs.append(clock() - begin)
        minima.append(min(runs))
    mean, std = timing_stats(minima)
    return TimingSummary(tuple(minima), mean, std, n_runs, len(inputs))


def coverage_ratio(grid, region=None, threshold: float = DEFAULT_COVER_THRESHOLD) -> float:
    """Fraction of region cells holding at least ``threshold`` of material.

    ``region`` is a boolean mask over the grid (default: the whole grid).
    """
    field = _field(grid)
    if region is None:
        mask = np.ones(field.shape, dtype=bool)
    else:
        mask = np.asarray(region, dtype=bool)
        if mask.shape != field.shape:
            raise ShapeMismatch(f"region shape {mask.shape} does not match grid {field.shape}")
    count = int(mask.sum())
    if count == 0:
        raise EmptyRegion("region selects no cells")
    return float((field[mask] >= threshold).sum()) / count


def detect_voids(grid, threshold: float = DEFAULT_COVER_THRESHOLD) -> list[list[tuple[int, int]]]:
    """Find enclosed uncovered pockets: below-threshold regions sealed off from
    the border by covered cells. Uses 4-connectivity; returns one cell list per
    void."""
    field = _field(grid)
    h, w = field.shape
    open_cell = field < threshold
    reached = np.zeros((h, w), dtype=bool)
    queue = deque()
    for i in range(h):
        for j in (0, w - 1):
            if open_cell[i, j] and not reached[i, j]:
                reached[i, j] = True
                queue.append((i, j))
    for j in range(w):
        for i in (0, h - 1):
            if open_cell[i, j] and not reached[i, j]:
                reached[i, j] = True
                queue.append((i, j))
    while queue:
        i, j = queue.popleft()
        for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if 0 <= ni < h and 0 <= nj < w and open_cell[ni, nj] and not reached[ni, nj]:
                reached[ni, nj] = True
                queue.append((ni, nj))
    voids = []
    seen = reached | ~open_cell
    for i in range(h):
        for j in range(w):
            if seen[i, j]:
                continue
            component = []
            seen[i, j] = True
            queue.append((i, j))
            while queue:
                ci, cj = queue.popleft()
                component.append((ci, cj))
                for ni, nj in ((ci - 1, cj), (ci + 1, cj), (ci, cj - 1), (ci, cj + 1)):
                    if 0 <= ni < h and 0 <= nj < w and not seen[ni, nj]:
                        seen[ni, nj] = True
                        queue.append((ni, nj))
            voids.append(component)
    return voids


def write_benchmark_csv(path, pattern_ids, e_comp, e_rel, t_min) -> None:
    """Per-pattern report rows; floats written at full precision so summary
    statistics can be recomputed exactly from the file."""
    rows = list(zip(pattern_ids, e_comp, e_rel, t_min))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["pattern_id", "e_comp", "e_rel", "t_min"])
        for pid, ec, er, tm in rows:
            writer.writerow([pid, repr(float(ec)), repr(float(er)), repr(float(tm))])


def read_benchmark_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [{"pattern_id": row["pattern_id"],
                 "e_comp": float(row["e_comp"]),
                 "e_rel": float(row["e_rel"]),
                 "t_min": float(row["t_min"])} for row in reader]


def summary_row(method: str, mean_rel_error, timing: TimingSummary | None) -> dict:
    """One table row per method: accuracy plus timing mean and spread."""
    return {
        "method": method,
        "mean_relative_error": mean_rel_error,
        "setup_time": None,
        "computation_time_mean": timing.mean if timing else None,
        "computation_time_std": timing.std if timing else None,
    }


def write_summary_json(path, rows) -> None:
    with open(path, "w") as f:
        json.dump({"methods": list(rows)}, f, indent=2, sort_keys=True)
        f.write("\n")
