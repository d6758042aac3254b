"""Random pattern generation, dataset construction, and the TIMD file format.

A dataset record pairs the rasterized dispensed state of a random pattern
with the heuristic's compressed output; records are the training data for the
surrogate network. Grids are stored as 32-bit floats, which is also how the
network consumes them, so a dataset survives a save/load round trip bitwise.

TIMD layout (all little-endian):
    magic "TIMD", u16 version (=1), u32 count, u32 H, u32 W
    per record: u16 segment count S, (S+1) points as f64 (x, y) pairs,
                S feeds as f64, H*W f32 dispensed, H*W f32 compressed
A JSON sidecar at <path>.json stores the generator configuration.
"""
from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, GenerationStalled, IoError, MassOverflow
from .heuristic import CompressionConfig, compress
from .pattern import DispensePattern, GridSpec, TimGrid, discretize

logger = logging.getLogger(__name__)

_MAGIC = b"TIMD"
_VERSION = 1
_MAX_ATTEMPTS = 500


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    count: int
    resolution: tuple[int, int] = (50, 50)
    segments: tuple[int, int] = (1, 6)
    margin: int = 8
    feed_range: tuple[float, float] = (0.5, 2.0)
    max_total_mass: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "resolution", tuple(int(v) for v in self.resolution))
        object.__setattr__(self, "segments", tuple(int(v) for v in self.segments))
        object.__setattr__(self, "feed_range", tuple(float(v) for v in self.feed_range))
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        lo, hi = self.segments
        if not (1 <= lo <= hi):
            raise ValueError(f"bad segment range {self.segments}")
        fmin, fmax = self.feed_range
        if not (0 <= fmin <= fmax):
            raise ValueError(f"bad feed range {self.feed_range}")
        h, w = self.resolution
        if 2 * self.margin >= min(h, w):
            raise ValueError(f"margin {self.margin} leaves no room on a {h}x{w} grid")
        if self.max_total_mass is None:
            object.__setattr__(self, "max_total_mass", 0.25 * h * w)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "count": self.count,
            "resolution": list(self.resolution),
            "segments": list(self.segments),
            "margin": self.margin,
            "feed_range": list(self.feed_range),
            "max_total_mass": self.max_total_mass,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GeneratorConfig":
        return cls(seed=data["seed"], count=data["count"],
                   resolution=tuple(data["resolution"]),
                   segments=tuple(data["segments"]),
                   margin=data["margin"],
                   feed_range=tuple(data["feed_range"]),
                   max_total_mass=data["max_total_mass"])


@dataclass(frozen=True)
class DatasetRecord:
    pattern: DispensePattern
    dispensed: TimGrid
    compressed: TimGrid


@dataclass(frozen=True)
class Dataset:
    config: GeneratorConfig | None
    records: tuple[DatasetRecord, ...]
    rejections: int = 0

    def __len__(self):
        return len(self.records)

    def pairs(self) -> list[tuple[TimGrid, TimGrid]]:
        """(dispensed, compressed) pairs for training and evaluation."""
        return [(r.dispensed, r.compressed) for r in self.records]


def generate_pattern(rng: np.random.Generator, config: GeneratorConfig) -> DispensePattern:
    """Draw a random polyline: uniform segment count, points uniform inside the
    margin-inset box, feeds uniform in the configured range."""
    lo, hi = config.segments
    n_seg = int(rng.integers(lo, hi + 1))
    h, w = config.resolution
    m = config.margin
    xs = rng.uniform(m, w - m, n_seg + 1)
    ys = rng.uniform(m, h - m, n_seg + 1)
    feeds = rng.uniform(config.feed_range[0], config.feed_range[1], n_seg)
    return DispensePattern(tuple(zip(xs.tolist(), ys.tolist())), tuple(feeds.tolist()))


def _record_rng(seed: int, index: int) -> np.random.Generator:
    # Stream derived from (seed, index): records are reproducible independent
    # of how many rejections earlier records burned.
    return np.random.default_rng(np.random.SeedSequence((seed, index)))


def build_dataset(config: GeneratorConfig,
                  compression: CompressionConfig | None = None) -> Dataset:
    """Generate, rasterize, and compress ``config.count`` accepted patterns.

    Patterns that overflow the grid or exceed the total-mass cap are rejected
    and redrawn from the same per-record stream; the rejection count is kept
    for diagnostics.
    """
    compression = compression or CompressionConfig()
    spec = GridSpec(config.resolution)
    records = []
    rejections = 0
    for index in range(config.count):
        rng = _record_rng(config.seed, index)
        for _ in range(_MAX_ATTEMPTS):
            pattern = generate_pattern(rng, config)
            dispensed = discretize(pattern, spec)
            if dispensed.total() > config.max_total_mass:
                rejections += 1
                continue
            try:
                result = compress(dispensed, compression)
            except MassOverflow:
                rejections += 1
                continue
            records.append(DatasetRecord(pattern,
                                         dispensed.astype(np.float32),
                                         result.compressed.astype(np.float32)))
            break
        else:
            raise GenerationStalled(
                f"record {index}: {_MAX_ATTEMPTS} consecutive rejections; "
                "loosen margin, feeds, or the mass cap")
    if rejections:
        logger.info("dataset generation rejected %d candidate patterns", rejections)
    return Dataset(config, tuple(records), rejections)


def _pack_record(record: DatasetRecord) -> bytes:
    n_seg = record.pattern.segment_count
    parts = [struct.pack("<H", n_seg)]
    pts = np.array(record.pattern.points, dtype="<f8")
    feeds = np.array(record.pattern.feeds, dtype="<f8")
    parts.append(pts.tobytes())
    parts.append(feeds.tobytes())
    parts.append(record.dispensed.amounts.astype("<f4", copy=False).tobytes())
    parts.append(record.compressed.amounts.astype("<f4", copy=False).tobytes())
    return b"".join(parts)


class _Cursor:
    def __init__(self, blob: bytes, origin: str):
        self.blob = blob
        self.origin = origin
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError(f"{self.origin}: truncated (wanted {n} bytes at offset {self.pos})")
        chunk = self.blob[self.pos:self.pos + n]
        self.pos += n
        return chunk


def dataset_to_bytes(dataset: Dataset) -> bytes:
    if not dataset.records:
        raise ValueError("refusing to serialize an empty dataset")
    h, w = dataset.records[0].dispensed.shape
    parts = [_MAGIC, struct.pack("<HIII", _VERSION, len(dataset.records), h, w)]
    parts.extend(_pack_record(record) for record in dataset.records)
    return b"".join(parts)


def save_dataset(dataset: Dataset, path) -> None:
    path = os.fspath(path)
    blob = dataset_to_bytes(dataset)
    try:
        with open(path, "wb") as f:
            f.write(blob)
        if dataset.config is not None:
            with open(path + ".json", "w") as f:
                json.dump(dataset.config.to_json(), f, indent=2, sort_keys=True)
                f.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def dataset_from_bytes(blob: bytes, origin: str = "<bytes>") -> Dataset:
    cur = _Cursor(blob, origin)
    magic = cur.take(4)
    if magic != _MAGIC:
        raise FormatError(f"{origin}: bad magic {magic!r}, expected {_MAGIC!r}")
    version, count, h, w = struct.unpack("<HIII", cur.take(14))
    if version != _VERSION:
        raise FormatError(f"{origin}: unsupported version {version}, expected {_VERSION}")
    records = []
    for _ in range(count):
        (n_seg,) = struct.unpack("<H", cur.take(2))
        pts = np.frombuffer(cur.take((n_seg + 1) * 16), dtype="<f8").reshape(n_seg + 1, 2)
        feeds = np.frombuffer(cur.take(n_seg * 8), dtype="<f8")
        dispensed = np.frombuffer(cur.take(h * w * 4), dtype="<f4").reshape(h, w)
        compressed = np.frombuffer(cur.take(h * w * 4), dtype="<f4").reshape(h, w)
        pattern = DispensePattern(tuple(map(tuple, pts.tolist())), tuple(feeds.tolist()))
        records.append(DatasetRecord(pattern, TimGrid(dispensed), TimGrid(compressed)))
    if cur.pos != len(blob):
        raise FormatError(f"{origin}: {len(blob) - cur.pos} trailing bytes")
    return Dataset(None, tuple(records))


def load_dataset(path) -> Dataset:
    path = os.fspath(path)
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    dataset = dataset_from_bytes(blob, origin=path)
    config = None
    sidecar = path + ".json"
    if os.path.exists(sidecar):
        try:
            with open(sidecar) as f:
                config = GeneratorConfig.from_json(json.load(f))
        except OSError as exc:
            raise IoError(f"cannot read {sidecar}: {exc}") from exc
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise FormatError(f"{sidecar}: bad generator config: {exc}") from exc
    return Dataset(config, dataset.records)


def single_record_dataset(pattern: DispensePattern, dispensed: TimGrid,
                          compressed: TimGrid) -> Dataset:
    """Wrap one grid pair for file exchange through the TIMD format."""
    return Dataset(None, (DatasetRecord(pattern,
                                        dispensed.astype(np.float32),
                                        compressed.astype(np.float32)),))
