"""Layer kernels in NHWC layout.

Convolutions run in the frequency domain: the per-frequency channel mixing
becomes a batch of small matrix products, which is several times cheaper
than im2col for 7×7 kernels on a single core.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sfft


def _fft_shape(h: int, w: int) -> tuple[int, int]:
    return (sfft.next_fast_len(h, real=True), sfft.next_fast_len(w, real=True))


def _to_freq_major(a: np.ndarray) -> np.ndarray:
    # (B, U, V, C) -> (U*V, B, C)
    b, u, v, c = a.shape
    return a.transpose(1, 2, 0, 3).reshape(u * v, b, c)


def _from_freq_major(a: np.ndarray, u: int, v: int) -> np.ndarray:
    uv, b, c = a.shape
    return a.reshape(u, v, b, c).transpose(2, 0, 1, 3)


class ConvCache:
    __slots__ = ("x", "xf", "wf", "padded_shape", "fft_shape", "stride1_shape")


def use_fft(h: int, w: int, kr: int, kc: int, c: int, f: int) -> bool:
    """Pick the cheaper convolution route from rough operation counts."""
    u, v = _fft_shape(h, w)
    direct = (h - kr + 1) * (w - kc + 1) * kr * kc * c * f
    spectral = u * v * (3 * (c + f) * np.log2(u * v) + 2 * c * f)
    return spectral < direct


def conv_forward(x, w, b, stride=(1, 1), padding=(0, 0)):
    """Cross-correlate ``x`` (B,H,W,C) with ``w`` (Kr,Kc,C,F); returns (y, cache)."""
    pr, pc = padding
    if pr or pc:
        x = np.pad(x, ((0, 0), (pr, pr), (pc, pc), (0, 0)))
    bsz, h, wd, c = x.shape
    kr, kc, _, f = w.shape
    if not use_fft(h, wd, kr, kc, c, f):
        return _direct_forward(x, w, b, stride)
    s = _fft_shape(h, wd)
    xf = sfft.rfft2(x, s=s, axes=(1, 2))
    wf = sfft.rfft2(w, s=s, axes=(0, 1))
    u, v = xf.shape[1:3]
    yf = _to_freq_major(xf) @ wf.conj().reshape(u * v, c, f)
    y = sfft.irfft2(_from_freq_major(yf, u, v), s=s, axes=(1, 2))
    ho1, wo1 = h - kr + 1, wd - kc + 1
    y = y[:, :ho1:stride[0], :wo1:stride[1]] + b
    cache = ConvCache()
    cache.x = None
    cache.xf, cache.wf = xf, wf
    cache.padded_shape, cache.fft_shape = (h, wd), s
    cache.stride1_shape = (ho1, wo1)
    return np.ascontiguousarray(y, dtype=x.dtype), cache


def conv_backward(dy, w, cache, stride=(1, 1), padding=(0, 0), need_dx=True):
    """Gradients ``(dx, dw, db)`` of a convolution given the upstream ``dy``."""
    kr, kc, c, f = w.shape
    bsz = dy.shape[0]
    h, wd = cache.padded_shape
    if cache.x is not None:
        return _direct_backward(dy, w, cache, stride, padding, need_dx)
    s = cache.fft_shape
    ho1, wo1 = cache.stride1_shape
    if stride != (1, 1):
        full = np.zeros((bsz, ho1, wo1, f), dtype=dy.dtype)
        full[:, ::stride[0], ::stride[1]] = dy
        dy1 = full
    else:
        dy1 = dy
    dyf = sfft.rfft2(dy1, s=s, axes=(1, 2))
    u, v = dyf.shape[1:3]
    dyf_m = _to_freq_major(dyf)
    xf_m = _to_freq_major(cache.xf)
    dwf = xf_m.transpose(0, 2, 1) @ dyf_m.conj()
    dw = sfft.irfft2(dwf.reshape(u, v, c, f), s=s, axes=(0, 1))[:kr, :kc]
    db = dy.sum(axis=(0, 1, 2))
    dx = None
    if need_dx:
        dxf = dyf_m @ cache.wf.reshape(u * v, c, f).transpose(0, 2, 1)
        dx = sfft.irfft2(_from_freq_major(dxf, u, v), s=s, axes=(1, 2))[:, :h, :wd]
        pr, pc = padding
        dx = np.ascontiguousarray(dx[:, pr:h - pr, pc:wd - pc], dtype=dy.dtype)
    return dx, np.ascontiguousarray(dw, dtype=dy.dtype), db


def _direct_forward(x, w, b, stride):
    kr, kc = w.shape[:2]
    win = sliding_window_view(x, (kr, kc), axis=(1, 2))[:, ::stride[0], ::stride[1]]
    # win: (B, Ho, Wo, C, Kr, Kc)
    y = np.tensordot(win, w.transpose(2, 0, 1, 3), axes=3) + b
    cache = ConvCache()
    cache.x, cache.xf, cache.wf = x, None, None
    cache.padded_shape = x.shape[1:3]
    cache.fft_shape = None
    cache.stride1_shape = (x.shape[1] - kr + 1, x.shape[2] - kc + 1)
    return np.ascontiguousarray(y, dtype=x.dtype), cache


def _direct_backward(dy, w, cache, stride, padding, need_dx):
    kr, kc, c, f = w.shape
    x = cache.x
    win = sliding_window_view(x, (kr, kc), axis=(1, 2))[:, ::stride[0], ::stride[1]]
    dw = np.tensordot(win, dy, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
    db = dy.sum(axis=(0, 1, 2))
    dx = None
    if need_dx:
        h, wd = cache.padded_shape
        ho, wo = dy.shape[1:3]
        dx = np.zeros((dy.shape[0], h, wd, c), dtype=dy.dtype)
        for u in range(kr):
            for v in range(kc):
                dx[:, u:u + stride[0] * (ho - 1) + 1:stride[0],
                   v:v + stride[1] * (wo - 1) + 1:stride[1]] += dy @ w[u, v].T
        pr, pc = padding
        dx = np.ascontiguousarray(dx[:, pr:h - pr, pc:wd - pc])
    return dx, np.ascontiguousarray(dw, dtype=dy.dtype), db


def maxpool_forward(x, size=(2, 2), stride=(2, 2)):
    bsz, h, wd, c = x.shape
    kr, kc = size
    ho, wo = (h - kr) // stride[0] + 1, (wd - kc) // stride[1] + 1
    win = sliding_window_view(x, (kr, kc), axis=(1, 2))[:, ::stride[0], ::stride[1]][:, :ho, :wo]
    flat = win.reshape(bsz, ho, wo, c, kr * kc)
    arg = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return y, (x.shape, arg)


def maxpool_backward(dy, cache, size=(2, 2), stride=(2, 2)):
    shape, arg = cache
    bsz, ho, wo, c = dy.shape
    kr, kc = size
    dx = np.zeros(shape, dtype=dy.dtype)
    rows = np.arange(ho)[None, :, None, None] * stride[0] + arg // kc
    cols = np.arange(wo)[None, None, :, None] * stride[1] + arg % kc
    bi = np.arange(bsz)[:, None, None, None]
    ci = np.arange(c)[None, None, None, :]
    np.add.at(dx, (bi, rows, cols, ci), dy)
    return dx


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
