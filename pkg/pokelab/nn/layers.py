"""Batched layers with explicit backward passes.

Convolutions are valid cross-correlations on NCHW tensors; dense layers map
(N, fan_in) -> (N, fan_out) with weights stored as (fan_out, fan_in). Every
backward pass returns the input gradient and adds parameter gradients into the
LayerParams accumulators.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from ..exceptions import ShapeError

Cache = Dict[str, Any]


@dataclass
class LayerParams:
    weights: np.ndarray
    biases: np.ndarray
    grad_weights: np.ndarray = field(default=None)
    grad_biases: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.biases = np.ascontiguousarray(self.biases, dtype=np.float64)
        if self.grad_weights is None:
            self.grad_weights = np.zeros_like(self.weights)
        if self.grad_biases is None:
            self.grad_biases = np.zeros_like(self.biases)
        if self.grad_weights.shape != self.weights.shape or self.grad_biases.shape != self.biases.shape:
            raise ShapeError("gradient shape must equal parameter shape")

    def zero_grad(self) -> None:
        self.grad_weights.fill(0.0)
        self.grad_biases.fill(0.0)

    def shadow(self) -> "LayerParams":
        """Shares the parameters, owns fresh gradient accumulators."""
        return LayerParams(self.weights, self.biases)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.weights, self.biases

    def grads(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.grad_weights, self.grad_biases


def glorot_uniform(shape: Tuple[int, ...], fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


CONV_BIAS_INIT = 0.01


def init_conv(in_ch: int, out_ch: int, k: int, rng: np.random.Generator) -> LayerParams:
    """Glorot weights; a small positive bias keeps empty background windows off the ReLU kink."""
    fan_in, fan_out = in_ch * k * k, out_ch * k * k
    return LayerParams(glorot_uniform((out_ch, in_ch, k, k), fan_in, fan_out, rng), np.full(out_ch, CONV_BIAS_INIT))


def init_dense(fan_in: int, fan_out: int, rng: np.random.Generator) -> LayerParams:
    return LayerParams(glorot_uniform((fan_out, fan_in), fan_in, fan_out, rng), np.zeros(fan_out))


def conv_output_size(size: int, k: int, stride: int) -> int:
    return (size - k) // stride + 1


def conv2d(x: np.ndarray, params: LayerParams, stride: int = 1) -> Tuple[np.ndarray, Cache]:
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects NCHW input, got shape {x.shape}")
    n, c, h, w = x.shape
    f, wc, kh, kw = params.weights.shape
    if wc != c:
        raise ShapeError(f"conv2d channel mismatch: input {c}, kernel {wc}")
    if h < kh or w < kw or stride < 1:
        raise ShapeError(f"conv2d input {h}x{w} too small for kernel {kh}x{kw}")
    ho, wo = conv_output_size(h, kh, stride), conv_output_size(w, kw, stride)
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    out = cols @ params.weights.reshape(f, -1).T + params.biases
    y = out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(y), {"cols": cols, "x_shape": x.shape, "stride": stride, "out_hw": (ho, wo)}


def conv2d_backward(dy: np.ndarray, cache: Cache, params: LayerParams) -> np.ndarray:
    n, c, h, w = cache["x_shape"]
    f, _, kh, kw = params.weights.shape
    ho, wo = cache["out_hw"]
    stride = cache["stride"]
    if dy.shape != (n, f, ho, wo):
        raise ShapeError(f"conv2d_backward got {dy.shape}, expected {(n, f, ho, wo)}")
    dy_cols = dy.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
    params.grad_weights += (dy_cols.T @ cache["cols"]).reshape(params.weights.shape)
    params.grad_biases += dy_cols.sum(axis=0)
    dcols = (dy_cols @ params.weights.reshape(f, -1)).reshape(n, ho, wo, c, kh, kw)
    dx = np.zeros((n, c, h, w))
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx


def dense(x: np.ndarray, params: LayerParams) -> Tuple[np.ndarray, Cache]:
    if x.ndim != 2 or x.shape[1] != params.weights.shape[1]:
        raise ShapeError(f"dense expects (N, {params.weights.shape[1]}), got {x.shape}")
    return x @ params.weights.T + params.biases, {"x": x}


def dense_backward(dy: np.ndarray, cache: Cache, params: LayerParams) -> np.ndarray:
    x = cache["x"]
    if dy.shape != (x.shape[0], params.weights.shape[0]):
        raise ShapeError(f"dense_backward got {dy.shape}")
    params.grad_weights += dy.T @ x
    params.grad_biases += dy.sum(axis=0)
    return dy @ params.weights


def relu(x: np.ndarray) -> Tuple[np.ndarray, Cache]:
    return np.maximum(x, 0.0), {"mask": x > 0.0}


def relu_backward(dy: np.ndarray, cache: Cache) -> np.ndarray:
    return dy * cache["mask"]
