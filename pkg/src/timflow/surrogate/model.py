"""Surrogate network: architecture, forward/backward passes, and TIMW files.

The network maps a dispensed grid to the compressed grid in one shot: a stack
of same-padding convolutions with rectified-linear activations, optionally a
few full-width dense layers, and always a final single-filter 3x3 convolution
squashed through a logistic so outputs live in (0, 1). Inputs are divided by
``input_scale`` (the largest amount seen in training) before the first layer.

The loss is binary cross-entropy against heuristic outputs, which are heights
in [0, 1] once compression terminates at unit height. backward() fuses the
logistic with the cross-entropy, so the gradient at the output convolution's
pre-activation is simply (prediction - target) / cell_count.
"""
from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import FormatError, IoError, ShapeMismatch
from ..pattern import DispensePattern, GridSpec, TimGrid, discretize, scale_for_gap
from .layers import Conv2D, Dense, Flatten, ReLU, ToImage, sigmoid

_MAGIC = b"TIMW"
_VERSION = 1

_FILTER_CHOICES = (8, 32, 128, 512)
_KERNEL_CHOICES = (3, 5)
_BATCH_CHOICES = (8, 32, 128)


@dataclass(frozen=True)
class Hyperparams:
    """Training configuration constrained to the searchable ranges.

    Defaults are the architecture the search settles on at full scale: five
    convolutional layers of 128 5x5 filters, no dense layers, batch size 8.
    ``learning_rate = 0`` is allowed as an explicit no-op for plumbing tests.
    """

    conv_layers: int = 5
    filters: int = 128
    kernel: int = 5
    dense_layers: int = 0
    dense_width: int | None = None
    batch_size: int = 8
    learning_rate: float = 0.0011
    epochs: int = 10

    def __post_init__(self):
        if not 2 <= self.conv_layers <= 6:
            raise ValueError(f"conv_layers must be in [2, 6], got {self.conv_layers}")
        if self.filters not in _FILTER_CHOICES:
            raise ValueError(f"filters must be one of {_FILTER_CHOICES}, got {self.filters}")
        if self.kernel not in _KERNEL_CHOICES:
            raise ValueError(f"kernel must be one of {_KERNEL_CHOICES}, got {self.kernel}")
        if not 0 <= self.dense_layers <= 2:
            raise ValueError(f"dense_layers must be in [0, 2], got {self.dense_layers}")
        if self.dense_width is not None and self.dense_width < 1:
            raise ValueError("dense_width must be >= 1 when set")
        if self.batch_size not in _BATCH_CHOICES:
            raise ValueError(f"batch_size must be one of {_BATCH_CHOICES}, got {self.batch_size}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ValueError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


class SurrogateModel:
    """Built network plus the input scale it was trained with.

    ``build`` accepts arbitrary positive layer sizes (tiny models are used for
    gradient checking); Hyperparams enforces the searchable ranges separately.
    """

    def __init__(self, layers, named_params, arch, resolution, input_scale, dtype):
        self.layers = layers
        self._named_params = named_params  # list of (name, layer, key), order fixed
        self.arch = arch
        self.resolution = tuple(resolution)
        self.input_scale = float(input_scale)
        self.dtype = np.dtype(dtype)

    @classmethod
    def build(cls, resolution, conv_layers=5, filters=128, kernel=5, dense_layers=0,
              dense_width=None, input_scale=1.0, seed=0, rng=None,
              dtype=np.float32) -> "SurrogateModel":
        if conv_layers < 0 or filters < 1 or kernel < 1 or kernel % 2 == 0:
            # conv_layers counts hidden convolutions; zero leaves only the
            # mandatory single-filter output convolution.
            raise ValueError("conv_layers must be >= 0, filters >= 1, kernel odd")
        if dense_layers < 0:
            raise ValueError("dense_layers must be >= 0")
        if not input_scale > 0:
            raise ValueError(f"input_scale must be > 0, got {input_scale}")
        h, w = (int(resolution[0]), int(resolution[1]))
        if dense_width is None:
            dense_width = h * w
        rng = rng if rng is not None else np.random.default_rng(seed)
        layers = []
        in_ch = 1
        for _ in range(conv_layers):
            layers.append(Conv2D(in_ch, filters, kernel, rng, dtype))
            layers.append(ReLU())
            in_ch = filters
        if dense_layers:
            layers.append(Flatten())
            in_features = in_ch * h * w
            for _ in range(dense_layers):
                layers.append(Dense(in_features, dense_width, rng, dtype))
                layers.append(ReLU())
                in_features = dense_width
            if dense_width != h * w:
                raise ValueError(f"dense_width must equal H*W={h * w} to reshape, "
                                 f"got {dense_width}")
            layers.append(ToImage(h, w))
            in_ch = 1
        layers.append(Conv2D(in_ch, 1, 3, rng, dtype, output_layer=True))
        named = []
        conv_idx = 0
        dense_idx = 0
        for layer in layers:
            if isinstance(layer, Conv2D):
                name = "out" if layer is layers[-1] else f"conv{conv_idx}"
                if name != "out":
                    conv_idx += 1
                named.append((f"{name}.w", layer, "w"))
                named.append((f"{name}.b", layer, "b"))
            elif isinstance(layer, Dense):
                named.append((f"dense{dense_idx}.w", layer, "w"))
                named.append((f"dense{dense_idx}.b", layer, "b"))
                dense_idx += 1
        arch = {"conv_layers": conv_layers, "filters": filters, "kernel": kernel,
                "dense_layers": dense_layers, "dense_width": dense_width}
        return cls(layers, named, arch, (h, w), input_scale, dtype)

    @classmethod
    def from_hyperparams(cls, resolution, hp: Hyperparams, input_scale=1.0, seed=0,
                         rng=None, dtype=np.float32) -> "SurrogateModel":
        return cls.build(resolution, conv_layers=hp.conv_layers, filters=hp.filters,
                         kernel=hp.kernel, dense_layers=hp.dense_layers,
                         dense_width=hp.dense_width, input_scale=input_scale,
                         seed=seed, rng=rng, dtype=dtype)

    # --- parameter access -------------------------------------------------

    def param_items(self):
        """Ordered (name, array) pairs; arrays are the live tensors."""
        return [(name, getattr(layer, key)) for name, layer, key in self._named_params]

    def get_weights(self) -> dict:
        return {name: arr.copy() for name, arr in self.param_items()}

    def set_weights(self, weights: dict) -> None:
        for name, layer, key in self._named_params:
            arr = getattr(layer, key)
            src = weights[name]
            if src.shape != arr.shape:
                raise ShapeMismatch(f"{name}: expected {arr.shape}, got {src.shape}")
            arr[...] = src

    # --- passes -----------------------------------------------------------

    def forward_batch(self, x, with_ctx=False):
        """x: (batch, 1, H, W) already divided by input_scale. Returns logistic
        outputs in (0, 1); with_ctx also returns per-layer contexts plus the
        output pre-activation for the fused backward pass."""
        ctxs = []
        for layer in self.layers:
            x, ctx = layer.forward(x)
            if with_ctx:
                ctxs.append(ctx)
        z = x
        p = sigmoid(z)
        tiny = np.finfo(p.dtype).tiny
        one_down = np.nextafter(p.dtype.type(1.0), p.dtype.type(0.0))
        np.clip(p, tiny, one_down, out=p)
        if with_ctx:
            return p, ctxs
        return p

    def backward_batch(self, ctxs, prediction, target):
        """Gradients of mean binary cross-entropy over all cells of the batch."""
        count = prediction.size
        grad = ((prediction - target) / count).astype(self.dtype, copy=False)
        grads = {}
        for layer, ctx in zip(reversed(self.layers), reversed(ctxs)):
            grad, layer_grads = layer.backward(ctx, grad)
            if layer_grads:
                for name, owner, key in self._named_params:
                    if owner is layer:
                        grads[name] = layer_grads[key]
        return grads

    def _scale_input(self, grid: TimGrid):
        if grid.shape != self.resolution:
            raise ShapeMismatch(f"input {grid.shape} does not match model {self.resolution}")
        x = (grid.amounts / self.input_scale).astype(self.dtype)
        return x[None, None, :, :]

    def __repr__(self):
        a = self.arch
        return (f"SurrogateModel({self.resolution[0]}x{self.resolution[1]}, "
                f"{a['conv_layers']}xconv({a['filters']}f,k{a['kernel']}), "
                f"{a['dense_layers']} dense, scale={self.input_scale:g})")


def forward(model: SurrogateModel, grid: TimGrid) -> TimGrid:
    """Predict the compressed field for one dispensed grid; cells in (0, 1)."""
    x = model._scale_input(grid)
    p = model.forward_batch(x)
    return TimGrid(p[0, 0].astype(np.float64), copy=False)


def loss_bce(prediction, target) -> float:
    """Mean binary cross-entropy over cells, predictions clamped to
    [1e-7, 1 - 1e-7] so boundary targets stay finite."""
    p = prediction.amounts if isinstance(prediction, TimGrid) else np.asarray(prediction)
    t = target.amounts if isinstance(target, TimGrid) else np.asarray(target)
    if p.shape != t.shape:
        raise ShapeMismatch(f"shapes differ: {p.shape} vs {t.shape}")
    t = np.asarray(t, dtype=np.float64)
    if t.min() < 0 or t.max() > 1:
        raise ValueError("targets must lie in [0, 1]")
    p = np.clip(np.asarray(p, dtype=np.float64), 1e-7, 1.0 - 1e-7)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log1p(-p))))


def backward(model: SurrogateModel, grid: TimGrid, target: TimGrid) -> dict:
    """Gradient of loss_bce(forward(model, grid), target) for every weight."""
    x = model._scale_input(grid)
    t = target.amounts if isinstance(target, TimGrid) else np.asarray(target)
    if t.shape != model.resolution:
        raise ShapeMismatch(f"target {t.shape} does not match model {model.resolution}")
    p, ctxs = model.forward_batch(x, with_ctx=True)
    return model.backward_batch(ctxs, p, t.astype(model.dtype)[None, None, :, :])


def predict_compressed(model: SurrogateModel, pattern: DispensePattern, gap: float = 1.0) -> TimGrid:
    """Rasterize, account for the gap by input scaling, run the network, and
    rescale the outputs back to real heights."""
    dispensed = discretize(pattern, GridSpec(model.resolution))
    scaled = scale_for_gap(dispensed, gap)
    out = forward(model, scaled)
    if gap == 1.0:
        return out
    return TimGrid(out.amounts * gap, copy=False)


# --- TIMW weights file -------------------------------------------------------

def save_model(model: SurrogateModel, path) -> None:
    """Write magic, version, JSON header, then raw little-endian f32 tensors."""
    path = os.fspath(path)
    items = model.param_items()
    header = {
        "hyperparams": model.arch,
        "input_scale": model.input_scale,
        "resolution": list(model.resolution),
        "layers": [{"name": name, "shape": list(arr.shape)} for name, arr in items],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<HI", _VERSION, len(blob)))
            f.write(blob)
            for _, arr in items:
                f.write(arr.astype("<f4", copy=False).tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path) -> SurrogateModel:
    path = os.fspath(path)
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if raw[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {_MAGIC!r}")
    if len(raw) < 10:
        raise FormatError(f"{path}: truncated header")
    version, header_len = struct.unpack("<HI", raw[4:10])
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version}, expected {_VERSION}")
    if len(raw) < 10 + header_len:
        raise FormatError(f"{path}: truncated header block")
    try:
        header = json.loads(raw[10:10 + header_len].decode("utf-8"))
        arch = header["hyperparams"]
        model = SurrogateModel.build(
            tuple(header["resolution"]),
            conv_layers=arch["conv_layers"], filters=arch["filters"],
            kernel=arch["kernel"], dense_layers=arch["dense_layers"],
            dense_width=arch["dense_width"], input_scale=header["input_scale"],
            dtype=np.float32)
        offset = 10 + header_len
        weights = {}
        for spec, (name, arr) in zip(header["layers"], model.param_items()):
            if spec["name"] != name or tuple(spec["shape"]) != arr.shape:
                raise FormatError(f"{path}: layer {spec['name']} does not match "
                                  f"architecture entry {name} {arr.shape}")
            n_bytes = int(np.prod(spec["shape"])) * 4
            if offset + n_bytes > len(raw):
                raise FormatError(f"{path}: truncated tensor data for {name}")
            weights[name] = np.frombuffer(raw[offset:offset + n_bytes],
                                          dtype="<f4").reshape(arr.shape).copy()
            offset += n_bytes
        if offset != len(raw):
            raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad header: {exc}") from exc
    model.set_weights(weights)
    return model
