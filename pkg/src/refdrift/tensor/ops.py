"""Neural-net operations on top of the autodiff core.

Everything is batched: images are (N, C, H, W), sequences are (N, T, ...).
Stacked leading axes broadcast through matmul, so member-parallel listener
evaluation reuses these ops unchanged.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Tensor, _accum, _from_op
from .rng import RngStream


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(out):
        def run():
            g = out.grad
            dot = (g * y).sum(axis=axis, keepdims=True)
            _accum(a, y * (g - dot), own=True)
        return run

    return _from_op(y, (a,), bw)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(out):
        def run():
            g = out.grad
            index = [slice(None)] * g.ndim
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    index[axis] = slice(lo, hi)
                    _accum(t, g[tuple(index)])
        return run

    return _from_op(data, tuple(tensors), bw)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    data = np.stack([t.data for t in tensors], axis=axis)

    def bw(out):
        def run():
            g = out.grad
            for i, t in enumerate(tensors):
                if t.requires_grad:
                    _accum(t, np.take(g, i, axis=axis))
        return run

    return _from_op(data, tuple(tensors), bw)


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    def bw(out):
        def run():
            full = np.zeros_like(a.data)
            full[..., start:stop] = out.grad
            _accum(a, full, own=True)
        return run

    return _from_op(a.data[..., start:stop], (a,), bw)


def gather_last(a: Tensor, ids: np.ndarray) -> Tensor:
    """Pick one entry along the last axis per leading index: out[...] = a[..., ids[...]]."""
    ids = np.asarray(ids)
    if ids.shape != a.data.shape[:-1]:
        raise ValueError(
            f"gather_last: index shape {ids.shape} does not match leading shape "
            f"{a.data.shape[:-1]}"
        )
    picked = np.take_along_axis(a.data, ids[..., None], axis=-1)[..., 0]

    def bw(out):
        def run():
            full = np.zeros_like(a.data)
            np.put_along_axis(full, ids[..., None], out.grad[..., None], axis=-1)
            _accum(a, full, own=True)
        return run

    return _from_op(picked, (a,), bw)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup: table (V, E), ids int array -> (ids.shape + (E,))."""
    ids = np.asarray(ids)
    data = table.data[ids]

    def bw(out):
        def run():
            dtable = np.zeros_like(table.data)
            np.add.at(dtable, ids.ravel(), out.grad.reshape(-1, table.data.shape[-1]))
            _accum(table, dtable, own=True)
        return run

    return _from_op(data, (table,), bw)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = x @ weight
    if bias is not None:
        out = out + bias
    return out


# ---------------------------------------------------------------------------
# convolution / pooling / batchnorm
# ---------------------------------------------------------------------------


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, pad: int = 0) -> Tensor:
    """x (N, C, H, W) * weight (F, C, KH, KW) -> (N, F, OH, OW)."""
    n, c, h, w = x.data.shape
    f, cw, kh, kw = weight.data.shape
    if c != cw:
        raise ValueError(f"conv2d: input channels {x.data.shape} vs weight {weight.data.shape}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = win.shape[2], win.shape[3]
    out = np.tensordot(win, weight.data, axes=([1, 4, 5], [1, 2, 3]))  # (N, OH, OW, F)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    if bias is not None:
        out += bias.data[None, :, None, None]
    parents = (x, weight) if bias is None else (x, weight, bias)

    def bw(outt):
        def run():
            g = outt.grad
            gt = g.transpose(0, 2, 3, 1)  # (N, OH, OW, F)
            if weight.requires_grad:
                dw = np.tensordot(gt, win, axes=([0, 1, 2], [0, 2, 3]))
                _accum(weight, dw, own=True)
            if bias is not None and bias.requires_grad:
                _accum(bias, g.sum(axis=(0, 2, 3)), own=True)
            if x.requires_grad:
                t = np.tensordot(gt, weight.data, axes=([3], [0]))  # (N, OH, OW, C, KH, KW)
                dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
                for u in range(kh):
                    for v in range(kw):
                        dxp[:, :, u:u + oh * stride:stride, v:v + ow * stride:stride] += \
                            t[:, :, :, :, u, v].transpose(0, 3, 1, 2)
                dx = dxp[:, :, pad:pad + h, pad:pad + w] if pad else dxp
                _accum(x, dx, own=pad == 0)
        return run

    return _from_op(out, parents, bw)


def maxpool2d(x: Tensor, k: int = 2) -> Tensor:
    """Non-overlapping k x k max pooling; spatial dims must divide by k.

    Ties within a window route the gradient to the first (row-major) max.
    """
    n, c, h, w = x.data.shape
    if h % k or w % k:
        raise ValueError(f"maxpool2d: spatial dims of {x.data.shape} not divisible by k={k}")
    oh, ow = h // k, w // k
    xr = x.data.reshape(n, c, oh, k, ow, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, k * k)
    idx = xr.argmax(axis=-1)
    out = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]

    def bw(outt):
        def run():
            dxr = np.zeros((n, c, oh, ow, k * k))
            np.put_along_axis(dxr, idx[..., None], outt.grad[..., None], axis=-1)
            dx = dxr.reshape(n, c, oh, ow, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
            _accum(x, dx)
        return run

    return _from_op(out, (x,), bw)


class BatchNormState:
    """Running statistics for one batchnorm layer (not gradient-carrying)."""

    def __init__(self, channels: int):
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def copy(self) -> "BatchNormState":
        out = BatchNormState(len(self.running_mean))
        out.running_mean = self.running_mean.copy()
        out.running_var = self.running_var.copy()
        return out


def batchnorm2d(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState,
                training: bool, momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization over (N, H, W); updates running stats in train mode."""
    n, c, h, w = x.data.shape
    if gamma.data.shape != (c,):
        raise ValueError(f"batchnorm2d: input {x.data.shape} vs gamma {gamma.data.shape}")
    m = n * h * w
    if training:
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        state.running_mean += momentum * (mu - state.running_mean)
        unbiased = var * (m / (m - 1)) if m > 1 else var
        state.running_var += momentum * (unbiased - state.running_var)
    else:
        mu = state.running_mean
        var = state.running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu[None, :, None, None]) * inv[None, :, None, None]
    out = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def bw(outt):
        def run():
            g = outt.grad
            if gamma.requires_grad:
                _accum(gamma, (g * xhat).sum(axis=(0, 2, 3)), own=True)
            if beta.requires_grad:
                _accum(beta, g.sum(axis=(0, 2, 3)), own=True)
            if x.requires_grad:
                gg = g * gamma.data[None, :, None, None]
                if training:
                    s1 = gg.sum(axis=(0, 2, 3), keepdims=True)
                    s2 = (gg * xhat).sum(axis=(0, 2, 3), keepdims=True)
                    dx = (gg - s1 / m - xhat * s2 / m) * inv[None, :, None, None]
                else:
                    dx = gg * inv[None, :, None, None]
                _accum(x, dx, own=True)
        return run

    return _from_op(out, (x, gamma, beta), bw)


# ---------------------------------------------------------------------------
# stochastic ops
# ---------------------------------------------------------------------------


def dropout(x: Tensor, rate: float, rng: RngStream) -> Tensor:
    """Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    keep = (rng.uniform(x.data.shape) >= rate) / (1.0 - rate)

    def bw(out):
        def run():
            _accum(x, out.grad * keep, own=True)
        return run

    return _from_op(x.data * keep, (x,), bw)


def hard_one_hot(y: Tensor) -> Tensor:
    """Forward: exact one-hot at argmax of the last axis. Backward: identity."""
    idx = y.data.argmax(axis=-1)
    data = np.zeros_like(y.data)
    np.put_along_axis(data, idx[..., None], 1.0, axis=-1)

    def bw(out):
        def run():
            _accum(y, out.grad)
        return run

    return _from_op(data, (y,), bw)


def gumbel_softmax(logits: Tensor, temperature: float, straight_through: bool,
                   rng: RngStream) -> Tensor:
    """Gumbel-Softmax sample over the last axis.

    With straight_through the forward value is the exact one-hot at the soft
    sample's argmax while gradients flow through the soft sample.
    """
    if temperature <= 0.0:
        raise ValueError(f"gumbel_softmax temperature must be > 0, got {temperature}")
    noise = Tensor(rng.gumbel(logits.data.shape))
    y = softmax((logits + noise) * (1.0 / temperature), axis=-1)
    if straight_through:
        return hard_one_hot(y)
    return y


def one_hot(ids: np.ndarray, depth: int) -> np.ndarray:
    """Plain one-hot array (no gradient)."""
    ids = np.asarray(ids)
    out = np.zeros(ids.shape + (depth,))
    np.put_along_axis(out, ids[..., None], 1.0, axis=-1)
    return out
