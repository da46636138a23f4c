"""Forward-only layer kernels on HWC float32 tensors.

Activations are rank-3 arrays laid out height x width x channels (channels
innermost, C order). Convolution weights are ``(filters, kh, kw, in_per_group)``
and fully-connected weights are ``(out, in)`` where ``in`` follows the same
row-major flattening of the activation.

Every op has a numba kernel and a numpy fallback; ``backend`` picks one
explicitly, otherwise the process-wide default from ``layergauge._accel`` is
used.  Convolution and LRN accumulate in float64 and round once on output.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from layergauge import _accel
from layergauge._accel import njit
from layergauge.errors import ConfigurationError, DimensionError


@dataclass(frozen=True)
class ConvParams:
    stride: int = 1
    padding: int = 0
    groups: int = 1

    def __post_init__(self):
        if self.stride < 1:
            raise ConfigurationError(f"stride must be positive, got {self.stride}")
        if self.padding < 0:
            raise ConfigurationError(f"padding must be non-negative, got {self.padding}")
        if self.groups < 1:
            raise ConfigurationError(f"groups must be positive, got {self.groups}")


@dataclass(frozen=True)
class LrnParams:
    """Cross-channel LRN constants; defaults are the AlexNet ones."""

    depth_radius: int = 2
    k: float = 2.0
    alpha: float = 1e-4
    beta: float = 0.75

    def __post_init__(self):
        if self.depth_radius < 1:
            raise ConfigurationError("depth_radius must be positive")
        if not (self.k > 0 and self.alpha >= 0 and self.beta > 0):
            raise ConfigurationError(f"invalid LRN constants k={self.k} alpha={self.alpha} beta={self.beta}")


def _resolve(backend):
    if backend is None:
        return _accel.BACKEND
    if backend not in ("numba", "numpy"):
        raise ConfigurationError(f"unknown backend {backend!r}")
    if backend == "numba" and not _accel.HAS_NUMBA:
        raise ConfigurationError("numba backend requested but numba is not installed")
    return backend


def _as_tensor(x, rank=None, name="input"):
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if rank is not None and arr.ndim != rank:
        raise DimensionError(f"{name} must be rank {rank}, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} has an empty axis: shape {arr.shape}")
    return arr


def conv_output_size(size, kernel, stride, padding):
    span = size + 2 * padding - kernel
    if span < 0:
        raise ConfigurationError(f"kernel {kernel} exceeds padded input extent {size + 2 * padding}")
    if span % stride:
        raise ConfigurationError(
            f"non-integral conv output: ({size} + 2*{padding} - {kernel}) / {stride} + 1"
        )
    return span // stride + 1


def pool_output_size(size, window, stride):
    if window > size:
        raise ConfigurationError(f"pooling window {window} larger than input extent {size}")
    return (size - window) // stride + 1


# --------------------------------------------------------------------------
# numba kernels


@njit
def _conv2d_nb(x, w, b, stride, pad, groups, out):
    H, W, _ = x.shape
    F, kh, kw, cg = w.shape
    oh, ow, _ = out.shape
    fg = F // groups
    kdim = kh * kw * cg
    wf = np.ascontiguousarray(w).reshape(F, kdim)
    cols = np.empty((oh * ow, kdim))
    for g in range(groups):
        c0 = g * cg
        # im2col in (i, j, c) order to match the weight layout
        for oy in range(oh):
            y0 = oy * stride - pad
            for ox in range(ow):
                x0 = ox * stride - pad
                row = oy * ow + ox
                col = 0
                for i in range(kh):
                    yy = y0 + i
                    for j in range(kw):
                        xx = x0 + j
                        inside = 0 <= yy < H and 0 <= xx < W
                        for c in range(cg):
                            cols[row, col] = np.float64(x[yy, xx, c0 + c]) if inside else 0.0
                            col += 1
        filt = np.empty((kdim, fg))
        for f in range(fg):
            for t in range(kdim):
                filt[t, f] = np.float64(wf[g * fg + f, t])
        res = np.dot(cols, filt)
        for oy in range(oh):
            for ox in range(ow):
                for f in range(fg):
                    out[oy, ox, g * fg + f] = res[oy * ow + ox, f] + np.float64(b[g * fg + f])


@njit
def _lrn_nb(x, r, k, alpha, beta, out):
    H, W, C = x.shape
    sq = np.empty(C)
    for y in range(H):
        for xx in range(W):
            for c in range(C):
                v = np.float64(x[y, xx, c])
                sq[c] = v * v
            # running window sum over channels [c - r, c + r]
            s = 0.0
            for j in range(min(r, C - 1) + 1):
                s += sq[j]
            for c in range(C):
                out[y, xx, c] = np.float64(x[y, xx, c]) * np.exp(-beta * np.log(k + alpha * s))
                if c + r + 1 < C:
                    s += sq[c + r + 1]
                if c - r >= 0:
                    s -= sq[c - r]


@njit
def _maxpool_nb(x, window, stride, out):
    oh, ow, C = out.shape
    for oy in range(oh):
        for ox in range(ow):
            for c in range(C):
                out[oy, ox, c] = x[oy * stride, ox * stride, c]
            for i in range(window):
                for j in range(window):
                    for c in range(C):
                        v = x[oy * stride + i, ox * stride + j, c]
                        if v > out[oy, ox, c]:
                            out[oy, ox, c] = v


# --------------------------------------------------------------------------
# numpy fallbacks


def _conv2d_np(x, w, b, stride, pad, groups, out):
    F, kh, kw, cg = w.shape
    oh, ow, _ = out.shape
    fg = F // groups
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0))) if pad else x
    # (oh', ow', C, kh, kw) -> keep only strided anchors
    windows = sliding_window_view(xp, (kh, kw), axis=(0, 1))[::stride, ::stride][:oh, :ow]
    for g in range(groups):
        patch = windows[:, :, g * cg:(g + 1) * cg].transpose(0, 1, 3, 4, 2)
        patch = patch.reshape(oh * ow, kh * kw * cg).astype(np.float64)
        filt = w[g * fg:(g + 1) * fg].reshape(fg, kh * kw * cg).astype(np.float64)
        res = patch @ filt.T + b[g * fg:(g + 1) * fg].astype(np.float64)
        out[:, :, g * fg:(g + 1) * fg] = res.reshape(oh, ow, fg)


def _lrn_np(x, r, k, alpha, beta, out):
    C = x.shape[2]
    sq = np.square(x, dtype=np.float64)
    csum = np.concatenate([np.zeros(x.shape[:2] + (1,)), np.cumsum(sq, axis=2)], axis=2)
    idx = np.arange(C)
    hi = np.minimum(C - 1, idx + r) + 1
    lo = np.maximum(0, idx - r)
    window = csum[:, :, hi] - csum[:, :, lo]
    out[...] = x.astype(np.float64) / (k + alpha * window) ** beta


def _maxpool_np(x, window, stride, out):
    oh, ow, _ = out.shape
    win = sliding_window_view(x, (window, window), axis=(0, 1))[::stride, ::stride][:oh, :ow]
    out[...] = win.max(axis=(3, 4))


# --------------------------------------------------------------------------
# public ops


def conv2d(x, weights, bias, params=ConvParams(), backend=None):
    """Grouped 2-D convolution with symmetric zero padding."""
    x = _as_tensor(x, 3)
    weights = _as_tensor(weights, 4, "weights")
    bias = _as_tensor(bias, 1, "bias")
    H, W, C = x.shape
    F, kh, kw, cg = weights.shape
    g = params.groups
    if C % g:
        raise DimensionError(f"input channels {C} not divisible by groups {g}")
    if F % g:
        raise DimensionError(f"filter count {F} not divisible by groups {g}")
    if cg * g != C:
        raise DimensionError(f"channel axis: weights expect {cg} x {g} groups = {cg * g} channels, input has {C}")
    if bias.shape[0] != F:
        raise DimensionError(f"bias length {bias.shape[0]} != filter count {F}")
    oh = conv_output_size(H, kh, params.stride, params.padding)
    ow = conv_output_size(W, kw, params.stride, params.padding)
    out = np.empty((oh, ow, F), dtype=np.float32)
    kernel = _conv2d_nb if _resolve(backend) == "numba" else _conv2d_np
    kernel(x, weights, bias, params.stride, params.padding, g, out)
    return out


def relu(x):
    x = _as_tensor(x)
    return np.maximum(x, np.float32(0.0))


def lrn(x, params=LrnParams(), backend=None):
    """Local response normalization across channels (no alpha/n scaling)."""
    x = _as_tensor(x, 3)
    out = np.empty_like(x)
    kernel = _lrn_nb if _resolve(backend) == "numba" else _lrn_np
    kernel(x, params.depth_radius, float(params.k), float(params.alpha), float(params.beta), out)
    return out


def maxpool(x, window, stride, backend=None):
    x = _as_tensor(x, 3)
    if window < 1 or stride < 1:
        raise ConfigurationError(f"window and stride must be positive, got {window}, {stride}")
    oh = pool_output_size(x.shape[0], window, stride)
    ow = pool_output_size(x.shape[1], window, stride)
    out = np.empty((oh, ow, x.shape[2]), dtype=np.float32)
    kernel = _maxpool_nb if _resolve(backend) == "numba" else _maxpool_np
    kernel(x, window, stride, out)
    return out


def fully_connected(x, weights, bias):
    """``weights @ flatten(x) + bias``; both backends use the BLAS matvec."""
    flat = _as_tensor(x).reshape(-1)
    weights = _as_tensor(weights, 2, "weights")
    bias = _as_tensor(bias, 1, "bias")
    if weights.shape[1] != flat.shape[0]:
        raise DimensionError(f"weights expect {weights.shape[1]} inputs, flattened input has {flat.shape[0]}")
    if bias.shape[0] != weights.shape[0]:
        raise DimensionError(f"bias length {bias.shape[0]} != weight rows {weights.shape[0]}")
    return weights @ flat + bias


def dropout_inference(x):
    """Dropout at inference time: the input passes through untouched."""
    return x
