"""Minimal dependency-free layers for the convolutional surrogate.

All layers act on arrays shaped (batch, channels, rows, cols) and implement
forward(x) -> (y, ctx) plus backward(ctx, grad_y) -> (grad_x, param_grads).
Convolutions use same-size zero padding and are evaluated as matrix products
over im2col column blocks. Blocks are sized to stay cache-resident: this
machine class is memory-bandwidth-poor, and materializing full column
matrices in DRAM costs more than the arithmetic itself.
"""
from __future__ import annotations

import numpy as np

# Column-buffer budget per block; small enough to sit in last-level cache.
_BLOCK_BYTES = 4 << 20


def he_uniform(rng, shape, fan_in, dtype):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, shape).astype(dtype)


def glorot_uniform(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape).astype(dtype)


def sigmoid(z):
    # Split by sign to avoid overflow in exp for large |z|.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Conv2D:
    """Same-padding convolution; weights (out_ch, in_ch, k, k), bias (out_ch,)."""

    def __init__(self, in_ch, out_ch, kernel, rng, dtype=np.float32, output_layer=False):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel = kernel
        self.pad = kernel // 2
        fan_in = in_ch * kernel * kernel
        shape = (out_ch, in_ch, kernel, kernel)
        if output_layer:
            self.w = glorot_uniform(rng, shape, fan_in, out_ch * kernel * kernel, dtype)
        else:
            self.w = he_uniform(rng, shape, fan_in, dtype)
        self.b = np.zeros(out_ch, dtype=dtype)

    def params(self):
        return {"w": self.w, "b": self.b}

    def _windows(self, x):
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad), (self.pad, self.pad)))
        # (N, C, H, W, k, k) strided view over the padded input
        return np.lib.stride_tricks.sliding_window_view(
            xp, (self.kernel, self.kernel), axis=(2, 3))

    def _row_block(self, w, itemsize):
        per_row = self.in_ch * self.kernel * self.kernel * w * itemsize
        return max(1, _BLOCK_BYTES // per_row)

    def forward(self, x):
        n, c, h, w = x.shape
        k = self.kernel
        win = self._windows(x)
        wmat = self.w.reshape(self.out_ch, c * k * k)
        y = np.empty((n, self.out_ch, h, w), dtype=x.dtype)
        rows = self._row_block(w, x.dtype.itemsize)
        bias = self.b[:, None, None].astype(x.dtype)
        for s in range(n):
            for r0 in range(0, h, rows):
                r1 = min(r0 + rows, h)
                cols = win[s, :, r0:r1].transpose(0, 3, 4, 1, 2).reshape(c * k * k, -1)
                y[s, :, r0:r1] = (wmat @ cols).reshape(self.out_ch, r1 - r0, w) + bias
        return y, x

    def backward(self, ctx_x, grad_y):
        n, c, h, w = ctx_x.shape
        k = self.kernel
        p = self.pad
        win = self._windows(ctx_x)
        wmat = self.w.reshape(self.out_ch, c * k * k)
        grad_w = np.zeros_like(wmat)
        grad_b = grad_y.sum(axis=(0, 2, 3))
        grad_x = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=ctx_x.dtype)
        rows = self._row_block(w, ctx_x.dtype.itemsize)
        for s in range(n):
            for r0 in range(0, h, rows):
                r1 = min(r0 + rows, h)
                cols = win[s, :, r0:r1].transpose(0, 3, 4, 1, 2).reshape(c * k * k, -1)
                g = grad_y[s, :, r0:r1].reshape(self.out_ch, -1)
                grad_w += g @ cols.T
                gcols = (wmat.T @ g).reshape(c, k, k, r1 - r0, w)
                for ki in range(k):
                    for kj in range(k):
                        grad_x[s, :, r0 + ki:r1 + ki, kj:kj + w] += gcols[:, ki, kj]
        if p:
            grad_x = grad_x[:, :, p:-p, p:-p]
        return np.ascontiguousarray(grad_x), {"w": grad_w.reshape(self.w.shape),
                                              "b": grad_b}


class Dense:
    """Fully connected layer on (batch, features)."""

    def __init__(self, in_features, out_features, rng, dtype=np.float32):
        self.w = he_uniform(rng, (out_features, in_features), in_features, dtype)
        self.b = np.zeros(out_features, dtype=dtype)

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x):
        return x @ self.w.T + self.b, x

    def backward(self, ctx_x, grad_y):
        grad_w = grad_y.T @ ctx_x
        grad_b = grad_y.sum(axis=0)
        grad_x = grad_y @ self.w
        return grad_x, {"w": grad_w, "b": grad_b}


class ReLU:
    def params(self):
        return {}

    def forward(self, x):
        y = np.maximum(x, 0)
        return y, y

    def backward(self, ctx_y, grad_y):
        return grad_y * (ctx_y > 0), {}


class Flatten:
    def params(self):
        return {}

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, ctx_shape, grad_y):
        return grad_y.reshape(ctx_shape), {}


class ToImage:
    """(batch, H*W) -> (batch, 1, H, W) ahead of the output convolution."""

    def __init__(self, height, width):
        self.height = height
        self.width = width

    def params(self):
        return {}

    def forward(self, x):
        return x.reshape(x.shape[0], 1, self.height, self.width), None

    def backward(self, ctx, grad_y):
        return grad_y.reshape(grad_y.shape[0], -1), {}
