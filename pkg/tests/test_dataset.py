import numpy as np
import pytest

from timflow.dataset import (Dataset, GeneratorConfig, build_dataset,
                             generate_pattern, load_dataset, save_dataset,
                             single_record_dataset)
from timflow.errors import FormatError, GenerationStalled
from timflow.pattern import DispensePattern, TimGrid

# chi-square critical value at p = 0.001 for 5 degrees of freedom
CHI2_CRIT_5DF = 20.515


def small_config(count=5, seed=42):
    return GeneratorConfig(seed=seed, count=count, resolution=(24, 24), margin=6,
                           feed_range=(0.5, 1.5))


class TestGeneratorConfig:
    def test_defaults(self):
        cfg = GeneratorConfig(seed=1, count=10)
        assert cfg.resolution == (50, 50)
        assert cfg.segments == (1, 6)
        assert cfg.margin == 8
        assert cfg.max_total_mass == 625.0

    @pytest.mark.parametrize("kwargs", [
        {"count": 0}, {"margin": -1}, {"segments": (0, 3)}, {"segments": (4, 2)},
        {"feed_range": (2.0, 1.0)}, {"resolution": (10, 10), "margin": 5},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            GeneratorConfig(**{"seed": 1, "count": 1, **kwargs})


class TestGeneratePattern:
    def test_same_seed_same_sequence(self):
        cfg = small_config()
        a = [generate_pattern(np.random.default_rng(9), cfg) for _ in range(1)]
        b = [generate_pattern(np.random.default_rng(9), cfg) for _ in range(1)]
        assert a == b

    def test_points_inside_margin_inset_box(self):
        cfg = small_config()
        rng = np.random.default_rng(10)
        for _ in range(10_000):
            pattern = generate_pattern(rng, cfg)
            for x, y in pattern.points:
                assert 6 <= x <= 18 and 6 <= y <= 18

    def test_segment_counts_cover_range_uniformly(self):
        cfg = GeneratorConfig(seed=1, count=1, resolution=(50, 50))
        rng = np.random.default_rng(11)
        counts = np.zeros(6)
        n = 10_000
        for _ in range(n):
            counts[generate_pattern(rng, cfg).segment_count - 1] += 1
        assert (counts > 0).all()
        chi2 = float(((counts - n / 6) ** 2 / (n / 6)).sum())
        assert chi2 < CHI2_CRIT_5DF  # p > 0.001 against uniform

    def test_feeds_in_range(self):
        cfg = small_config()
        rng = np.random.default_rng(12)
        for _ in range(200):
            for f in generate_pattern(rng, cfg).feeds:
                assert 0.5 <= f <= 1.5


class TestBuildDataset:
    def test_exact_count_and_targets_bounded(self):
        ds = build_dataset(small_config(count=8))
        assert len(ds) == 8
        for record in ds.records:
            assert record.compressed.amounts.max() <= 1.0 + 1e-9
            assert record.dispensed.amounts.dtype == np.float32

    def test_mass_conserved_per_record(self):
        ds = build_dataset(small_config(count=8))
        for record in ds.records:
            # float32 storage costs ~1e-7 relative precision
            assert record.compressed.total() == pytest.approx(record.dispensed.total(),
                                                              rel=1e-5)

    def test_deterministic_across_runs(self):
        a = build_dataset(small_config(count=6))
        b = build_dataset(small_config(count=6))
        assert a.records == b.records

    def test_stalls_when_nothing_fits(self):
        # A zero mass cap rejects every pattern that deposits anything.
        cfg = GeneratorConfig(seed=3, count=1, resolution=(24, 24), margin=6,
                              max_total_mass=0.0)
        with pytest.raises(GenerationStalled):
            build_dataset(cfg)


class TestTimdRoundTrip:
    def test_round_trip_identity(self, tmp_path):
        ds = build_dataset(small_config(count=10))
        path = tmp_path / "d.timd"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert loaded.config == ds.config
        assert loaded.records == ds.records

    def test_byte_identical_files_for_same_seed(self, tmp_path):
        p1, p2 = tmp_path / "a.timd", tmp_path / "b.timd"
        save_dataset(build_dataset(small_config(count=4)), p1)
        save_dataset(build_dataset(small_config(count=4)), p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert (tmp_path / "a.timd.json").read_text() == (tmp_path / "b.timd.json").read_text()

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "d.timd"
        save_dataset(build_dataset(small_config(count=2)), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) // 2])
        with pytest.raises(FormatError, match="truncated"):
            load_dataset(path)

    def test_wrong_magic_names_expected(self, tmp_path):
        path = tmp_path / "d.timd"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(FormatError, match="TIMD"):
            load_dataset(path)

    def test_wrong_version(self, tmp_path):
        path = tmp_path / "d.timd"
        save_dataset(build_dataset(small_config(count=2)), path)
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version"):
            load_dataset(path)

    def test_single_record_dataset_round_trip(self, tmp_path):
        pattern = DispensePattern(((5.0, 5.5), (9.0, 5.5)), (1.0,))
        grid = TimGrid(np.zeros((12, 12), dtype=np.float32))
        ds = single_record_dataset(pattern, grid, grid)
        path = tmp_path / "one.timd"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert loaded.config is None
        assert loaded.records[0].pattern == pattern
