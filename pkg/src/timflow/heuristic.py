"""Iterative height-relaxation model of material spreading under compression.

The simulator lowers a ceiling from the tallest cell down to the termination
height. Whenever a cell holds more material than the current ceiling, the
excess is removed and a quarter of it is pushed to each of the four edge
neighbors. All cells shed simultaneously per sweep (excess amounts are read
before any are applied), so the visit order of cells never matters. Sweeps
repeat until nothing exceeds the ceiling, then the ceiling drops again.

Raising the dispensed amounts has the same effect as compressing to a lower
final gap, which is what ``scale_for_gap`` exploits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MassOverflow, NonConvergence, NonFiniteInput
from .pattern import TimGrid


@dataclass(frozen=True)
class SingleStep:
    """Drop the ceiling straight to the termination height."""


@dataclass(frozen=True)
class LinearSteps:
    """Lower the ceiling in a fixed number of equal decrements."""

    steps: int = 50

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")


@dataclass(frozen=True)
class Multiplicative:
    """Multiply the ceiling by a factor in (0, 1) until it reaches termination."""

    factor: float = 0.95

    def __post_init__(self):
        if not (0.0 < self.factor < 1.0):
            raise ValueError(f"factor must be in (0, 1), got {self.factor}")


Schedule = SingleStep | LinearSteps | Multiplicative


@dataclass(frozen=True)
class ErrorOnOverflow:
    """Raise MassOverflow as soon as any excess would leave the grid."""


@dataclass(frozen=True)
class CropAndReport:
    """Simulate on a grid padded by ``margin`` cells per side; everything that
    ends up outside the original grid is reported as off-grid mass."""

    margin: int = 0

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")


BoundaryPolicy = ErrorOnOverflow | CropAndReport


@dataclass(frozen=True)
class CompressionConfig:
    termination_height: float = 1.0
    schedule: Schedule = Multiplicative()
    boundary: BoundaryPolicy = ErrorOnOverflow()
    max_inner_sweeps: int = 1_000_000

    def __post_init__(self):
        if not self.termination_height > 0:
            raise ValueError(f"termination_height must be > 0, got {self.termination_height}")
        if self.max_inner_sweeps < 1:
            raise ValueError("max_inner_sweeps must be >= 1")


@dataclass(frozen=True)
class CompressionResult:
    compressed: TimGrid
    off_grid_mass: float
    iterations: int
    overflowed: bool


def _ceilings(start: float, termination: float, schedule: Schedule):
    """Decreasing ceiling values from just below ``start`` down to termination."""
    if start <= termination:
        return
    if isinstance(schedule, SingleStep):
        yield termination
        return
    if isinstance(schedule, LinearSteps):
        step = (start - termination) / schedule.steps
        for k in range(1, schedule.steps):
            yield start - k * step
        yield termination
        return
    level = start
    while True:
        level *= schedule.factor
        if level <= termination:
            yield termination
            return
        yield level


def _relax(work: np.ndarray, ceiling: float, stop_on_overflow: bool,
           max_sweeps: int) -> tuple[float, int]:
    """Sweep until max(work) <= ceiling; returns (mass pushed off-grid, sweeps)."""
    h, w = work.shape
    off = 0.0
    sweeps = 0
    # Rounding can leave cells bouncing a few ulps above the ceiling forever
    # (half-even rounding of paired quarter-shares); a relative slack ends the
    # loop there while staying far below the documented 1e-9 height tolerance.
    slack = ceiling * 1e-12
    while float(work.max()) > ceiling + slack:
        if sweeps >= max_sweeps:
            raise NonConvergence(f"no convergence after {max_sweeps} sweeps at ceiling {ceiling:g}")
        excess = work - ceiling
        np.maximum(excess, 0.0, out=excess)
        if stop_on_overflow and (excess[0].any() or excess[-1].any()
                                 or excess[:, 0].any() or excess[:, -1].any()):
            raise MassOverflow(
                f"excess at the border would leave the {w}x{h} grid at ceiling {ceiling:g}")
        work -= excess
        excess *= 0.25
        # Pair the incoming shares as (below+above) + (right+left): addition is
        # commutative per pair, so mirrored or transposed inputs relax to the
        # bitwise-identical mirrored or transposed state.
        vert = np.zeros_like(excess)
        vert[:-1, :] = excess[1:, :]
        vert[1:, :] += excess[:-1, :]
        horiz = np.zeros_like(excess)
        horiz[:, :-1] = excess[:, 1:]
        horiz[:, 1:] += excess[:, :-1]
        vert += horiz
        work += vert
        if not stop_on_overflow:
            off += float(excess[0].sum() + excess[-1].sum()
                         + excess[:, 0].sum() + excess[:, -1].sum())
        sweeps += 1
    return off, sweeps


def _as_field(grid) -> np.ndarray:
    arr = grid.amounts if isinstance(grid, TimGrid) else np.asarray(grid, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D field, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("input field contains NaN or infinity")
    if (arr < 0).any():
        raise ValueError("input field contains negative amounts")
    return np.array(arr, dtype=np.float64)


def compress(initial, config: CompressionConfig | None = None) -> CompressionResult:
    """Compress a dispensed field down to the configured termination height.

    Returns the settled field (every cell at or below the termination height),
    the mass that left the grid (zero under ErrorOnOverflow), the number of
    relaxation sweeps executed, and whether any mass went off-grid.
    """
    cfg = config or CompressionConfig()
    field = _as_field(initial)
    h, w = field.shape
    margin = cfg.boundary.margin if isinstance(cfg.boundary, CropAndReport) else 0
    if margin:
        work = np.zeros((h + 2 * margin, w + 2 * margin), dtype=np.float64)
        work[margin:margin + h, margin:margin + w] = field
    else:
        work = field
    stop_on_overflow = isinstance(cfg.boundary, ErrorOnOverflow)
    start = float(work.max())
    off = 0.0
    sweeps = 0
    for ceiling in _ceilings(start, cfg.termination_height, cfg.schedule):
        level_off, level_sweeps = _relax(work, ceiling, stop_on_overflow, cfg.max_inner_sweeps)
        off += level_off
        sweeps += level_sweeps
    if margin:
        core = np.array(work[margin:margin + h, margin:margin + w])
        ring = float(work.sum() - core.sum())
        off += max(ring, 0.0)
    else:
        core = work
    return CompressionResult(TimGrid(core, copy=False), off, sweeps, off > 0.0)


def inner_relax(grid, ceiling: float, boundary: BoundaryPolicy | None = None,
                max_sweeps: int = 1_000_000) -> TimGrid:
    """Relax a field until no cell exceeds ``ceiling`` (one ceiling level only).

    Mass is conserved per sweep; the maximum never rises between sweeps. Use
    compress() when off-grid mass accounting or ceiling schedules are needed.
    """
    if not ceiling > 0:
        raise ValueError(f"ceiling must be > 0, got {ceiling}")
    boundary = boundary or ErrorOnOverflow()
    work = _as_field(grid)
    stop_on_overflow = isinstance(boundary, ErrorOnOverflow)
    _relax(work, ceiling, stop_on_overflow, max_sweeps)
    return TimGrid(work, copy=False)
