import math

import numpy as np
import pytest

from timflow.errors import (BenchmarkAborted, EmptyList, EmptyRegion,
                            ShapeMismatch, ZeroReference)
from timflow.heuristic import CompressionConfig, CropAndReport, compress
from timflow.metrics import (TimingSummary, benchmark_time, coverage_ratio,
                             detect_voids, error_abs, error_mean, error_rel,
                             read_benchmark_csv, timing_stats,
                             write_benchmark_csv)
from timflow.pattern import DispensePattern, GridSpec, TimGrid, discretize


class TestErrorMetrics:
    def test_identical_grids(self):
        g = TimGrid(np.random.default_rng(0).uniform(0, 1, (8, 8)))
        assert error_abs(g, g) == 0.0
        assert error_rel(g, g) == 0.0

    def test_all_ones_vs_zeros_50x50(self):
        ones = np.ones((50, 50))
        zeros = np.zeros((50, 50))
        assert error_abs(ones, zeros) == 2500.0

    def test_two_by_two_fixture(self):
        a = np.array([[1.0, 0.0], [0.0, 1.0]])
        b = np.array([[0.5, 0.5], [0.0, 1.0]])
        assert error_abs(a, b) == 1.0
        assert error_rel(a, b) == 0.5

    def test_error_mean_fixtures(self):
        a = np.array([[1.0, 0.0], [0.0, 1.0]])
        b = np.array([[0.5, 0.5], [0.0, 1.0]])
        assert error_mean([(a, a)]) == 0.0
        assert error_mean([(a, a), (a, b)]) == 0.25

    def test_error_mean_matches_scalar_loop(self):
        rng = np.random.default_rng(1)
        pairs = [(rng.uniform(0, 1, (6, 6)), rng.uniform(0, 1, (6, 6)))
                 for _ in range(50)]
        expected = 0.0
        for a, b in pairs:
            num = 0.0
            den = 0.0
            for i in range(6):
                for j in range(6):
                    num += abs(a[i, j] - b[i, j])
                    den += a[i, j]
            expected += num / den
        expected /= len(pairs)
        assert error_mean(pairs) == pytest.approx(expected, rel=1e-12)

    def test_abs_symmetry_and_rel_asymmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.uniform(0, 2, (5, 5))
            b = rng.uniform(0, 2, (5, 5))
            assert error_abs(a, b) == error_abs(b, a)
            assert error_rel(a, b) * a.sum() == pytest.approx(error_rel(b, a) * b.sum(),
                                                              rel=1e-12)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b, c = (rng.uniform(0, 2, (5, 5)) for _ in range(3))
            assert error_abs(a, c) <= error_abs(a, b) + error_abs(b, c) + 1e-12

    def test_shape_mismatch_and_zero_reference(self):
        with pytest.raises(ShapeMismatch):
            error_abs(np.ones((2, 2)), np.ones((3, 3)))
        with pytest.raises(ZeroReference):
            error_rel(np.zeros((2, 2)), np.ones((2, 2)))
        with pytest.raises(EmptyList):
            error_mean([])


class FakeClock:
    """Scripted monotonic clock: each call returns the next value."""

    def __init__(self, deltas):
        self.now = 0.0
        self.deltas = iter(deltas)

    def __call__(self):
        value = self.now
        self.now += next(self.deltas, 0.0)
        return value


class TestBenchmarkTime:
    def test_min_semantics_with_fake_clock(self):
        # Three runs on one pattern taking 3, 2, 4 time units.
        raw_runs = [3.0, 2.0, 4.0]
        clock = FakeClock([3.0, 0.0, 2.0, 0.0, 4.0, 0.0])
        summary = benchmark_time(lambda _: None, ["p"], n_runs=3, clock=clock)
        assert summary.t_min == (2.0,)
        assert summary.mean == 2.0 and summary.std == 0.0
        assert summary.t_min[0] <= sum(raw_runs) / len(raw_runs)

    def test_mean_and_std_across_patterns(self):
        # Two patterns with min run times 2 and 4.
        deltas = [2.0, 0.0, 3.0, 0.0, 4.0, 0.0, 5.0, 0.0]
        summary = benchmark_time(lambda _: None, ["a", "b"], n_runs=2,
                                 clock=FakeClock(deltas))
        assert summary.t_min == (2.0, 4.0)
        assert summary.mean == 3.0
        assert summary.std == pytest.approx(math.sqrt(2.0))

    def test_min_not_above_mean_of_runs_real_clock(self):
        summary = benchmark_time(lambda x: sum(range(x)), [2000, 4000], n_runs=5)
        assert summary.n_runs == 5 and summary.n_pat == 2
        assert all(t > 0 for t in summary.t_min)

    def test_subject_error_carries_pattern_index(self):
        def subject(item):
            if item == "bad":
                raise ValueError("boom")
        with pytest.raises(BenchmarkAborted) as err:
            benchmark_time(subject, ["ok", "bad"], n_runs=2)
        assert err.value.index == 1

    def test_timing_stats_single_pattern(self):
        assert timing_stats([5.0]) == (5.0, 0.0)


class TestCoverage:
    def test_full_and_empty(self):
        assert coverage_ratio(np.ones((5, 5)), threshold=0.5) == 1.0
        assert coverage_ratio(np.zeros((5, 5)), threshold=0.5) == 0.0

    def test_half_covered_rectangle_region(self):
        grid = np.zeros((4, 8))
        grid[:, :4] = 1.0
        region = np.zeros((4, 8), dtype=bool)
        region[1:3, 2:6] = True  # half above threshold by construction
        assert coverage_ratio(grid, region, threshold=0.5) == 0.5

    def test_empty_region(self):
        with pytest.raises(EmptyRegion):
            coverage_ratio(np.ones((3, 3)), np.zeros((3, 3), dtype=bool))

    def test_region_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            coverage_ratio(np.ones((3, 3)), np.zeros((2, 2), dtype=bool))


def oracle_voids(field, threshold):
    """Independent flood fill using an explicit stack and visited set."""
    h, w = field.shape
    open_cells = {(i, j) for i in range(h) for j in range(w) if field[i, j] < threshold}
    border = [c for c in open_cells if c[0] in (0, h - 1) or c[1] in (0, w - 1)]
    outside = set()
    stack = list(border)
    while stack:
        cell = stack.pop()
        if cell in outside or cell not in open_cells:
            continue
        outside.add(cell)
        i, j = cell
        stack.extend([(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)])
    enclosed = open_cells - outside
    components = []
    while enclosed:
        seed = enclosed.pop()
        component = {seed}
        stack = [seed]
        while stack:
            i, j = stack.pop()
            for n in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                if n in enclosed:
                    enclosed.discard(n)
                    component.add(n)
                    stack.append(n)
        components.append(component)
    return components


class TestVoids:
    def test_fully_covered_no_voids(self):
        assert detect_voids(np.ones((6, 6))) == []

    def test_empty_grid_no_voids(self):
        assert detect_voids(np.zeros((6, 6))) == []

    def test_simple_ring_has_one_void(self):
        grid = np.zeros((7, 7))
        grid[1:6, 1:6] = 1.0
        grid[2:5, 2:5] = 0.0
        grid[3, 3] = 0.0
        voids = detect_voids(grid, threshold=0.5)
        assert len(voids) == 1
        assert sorted(voids[0]) == sorted((i, j) for i in range(2, 5) for j in range(2, 5))

    def test_compressed_ring_pattern_matches_oracle(self):
        # Closed square loop; after compression the inside stays a sealed void.
        pts = ((15.0, 15.0), (35.0, 15.0), (35.0, 35.0), (15.0, 35.0), (15.0, 15.0))
        pattern = DispensePattern(pts, (2.0,) * 4)
        compressed = compress(discretize(pattern, GridSpec((50, 50))),
                              CompressionConfig(boundary=CropAndReport(0)))
        field = compressed.compressed.amounts
        voids = detect_voids(field, threshold=1e-3)
        oracle = oracle_voids(field, 1e-3)
        assert len(voids) == 1
        assert len(oracle) == 1
        assert sorted(voids[0]) == sorted(oracle[0])

    def test_void_count_invariant_under_mirroring(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            field = (rng.uniform(0, 1, (12, 12)) > 0.45).astype(float)
            n = len(detect_voids(field, threshold=0.5))
            assert len(detect_voids(field[::-1, :], threshold=0.5)) == n
            assert len(detect_voids(field[:, ::-1], threshold=0.5)) == n


class TestReports:
    def test_csv_round_trip_full_precision(self, tmp_path):
        path = tmp_path / "bench.csv"
        t_min = [0.1234567890123456, 2.0 / 3.0, 1e-7]
        write_benchmark_csv(path, [0, 1, 2], [1.0, 2.0, 3.0],
                            [0.1, 0.2, 0.3], t_min)
        rows = read_benchmark_csv(path)
        assert [r["t_min"] for r in rows] == t_min
        mean, std = timing_stats([r["t_min"] for r in rows])
        ref_mean, ref_std = timing_stats(t_min)
        assert mean == ref_mean and std == ref_std
