"""Minimal dense-tensor arithmetic with tape-based reverse-mode differentiation.

Values live in numpy arrays at a globally selected precision (float32 by
default, float64 for test oracles). Gradients are recorded on an explicit
tape: every primitive op executed while a `Tape` is active appends a backward
closure, and `Tape.backward(loss)` replays the closures in reverse execution
order, which is a reverse topological order of the computation DAG.

Convolutions accumulate in float64 internally regardless of the working
precision so that float32 outputs agree bitwise with a naive nested-loop
reference at the same output precision.
"""

from __future__ import annotations

import contextlib

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_DEFAULT_DTYPE = np.float32


class DimensionError(ValueError):
    """Raised when operand shapes violate an op's contract."""


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype}; use float32 or float64")
    _DEFAULT_DTYPE = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE


class Tensor:
    """A dense array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def detach(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; constants are wrapped as non-grad tensors.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=_DEFAULT_DTYPE), requires_grad=requires_grad)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# Tape


class Tape:
    """Ordered record of primitive ops for one backward pass."""

    def __init__(self):
        self._records = []
        self._prev = None

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        self._prev = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._prev
        return False

    def __len__(self):
        return len(self._records)

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)=1 and accumulate gradients into every recorded input.

        Grads of tensors produced on this tape are reset first, so repeated
        backward calls see fresh intermediates; leaf grads accumulate and are
        the caller's to clear.
        """
        if loss.data.size != 1:
            raise DimensionError(f"backward requires a scalar loss, got shape {loss.data.shape}")
        for out_t, _ in self._records:
            out_t.grad = None
        loss.grad = np.ones_like(loss.data)
        for _, fn in reversed(self._records):
            fn()


_ACTIVE_TAPE: Tape | None = None


@contextlib.contextmanager
def no_grad():
    """Disable recording; ops only compute values."""
    global _ACTIVE_TAPE
    prev = _ACTIVE_TAPE
    _ACTIVE_TAPE = None
    try:
        yield
    finally:
        _ACTIVE_TAPE = prev


def backward(loss: Tensor, tape: Tape | None = None) -> None:
    t = tape if tape is not None else _ACTIVE_TAPE
    if t is None:
        raise RuntimeError("backward needs a tape (pass one or call inside `with Tape()`)")
    t.backward(loss)


def _record(out: Tensor, inputs, back_fn) -> None:
    if _ACTIVE_TAPE is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _ACTIVE_TAPE._records.append((out, back_fn))


def _accum(t: Tensor, g: np.ndarray) -> None:
    g = g.astype(t.data.dtype, copy=False)
    if t.grad is None:
        t.grad = g.copy() if g.base is not None or not g.flags.owndata else g
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcasted gradient back down to `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, opname: str) -> None:
    # Permitted: equal shapes, a scalar operand, or a 1-D bias matching the
    # trailing axis. Anything fancier is out of contract.
    sa, sb = a.data.shape, b.data.shape
    if sa == sb or a.data.size == 1 or b.data.size == 1:
        return
    if len(sb) == 1 and len(sa) >= 1 and sa[-1] == sb[0]:
        return
    if len(sa) == 1 and len(sb) >= 1 and sb[-1] == sa[0]:
        return
    raise DimensionError(f"{opname}: shapes {sa} and {sb} are not broadcast-compatible")


# ---------------------------------------------------------------------------
# Elementwise ops


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    out = Tensor(a.data + b.data)

    def back():
        if out.grad is None:
            return
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad, b.data.shape))

    _record(out, (a, b), back)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    out = Tensor(a.data - b.data)

    def back():
        if out.grad is None:
            return
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-out.grad, b.data.shape))

    _record(out, (a, b), back)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    out = Tensor(a.data * b.data)

    def back():
        if out.grad is None:
            return
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad * b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad * a.data, b.data.shape))

    _record(out, (a, b), back)
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    out = Tensor(a.data / b.data)

    def back():
        if out.grad is None:
            return
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad / b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-out.grad * a.data / (b.data * b.data), b.data.shape))

    _record(out, (a, b), back)
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)

    def back():
        if out.grad is not None and a.requires_grad:
            _accum(a, -out.grad)

    _record(out, (a,), back)
    return out


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.data))

    def back():
        if out.grad is not None and a.requires_grad:
            _accum(a, out.grad * (1.0 - out.data * out.data))

    _record(out, (a,), back)
    return out


def elu(a: Tensor) -> Tensor:
    pos = a.data > 0
    # expm1 only sees the negative part so large activations cannot overflow
    out = Tensor(np.where(pos, a.data, np.expm1(np.minimum(a.data, 0.0))))

    def back():
        if out.grad is not None and a.requires_grad:
            _accum(a, out.grad * np.where(pos, 1.0, out.data + 1.0))

    _record(out, (a,), back)
    return out


def exp(a: Tensor) -> Tensor:
    out = Tensor(np.exp(a.data))

    def back():
        if out.grad is not None and a.requires_grad:
            _accum(a, out.grad * out.data)

    _record(out, (a,), back)
    return out


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise ValueError("log: non-positive input")
    out = Tensor(np.log(a.data))

    def back():
        if out.grad is not None and a.requires_grad:
            _accum(a, out.grad / a.data)

    _record(out, (a,), back)
    return out


def clip(a: Tensor, min_val=None, max_val=None) -> Tensor:
    out = Tensor(np.clip(a.data, min_val, max_val))
    inside = np.ones(a.data.shape, dtype=bool)
    if min_val is not None:
        inside &= a.data >= min_val
    if max_val is not None:
        inside &= a.data <= max_val

    def back():
        if out.grad is not None and a.requires_grad:
            _accum(a, out.grad * inside)

    _record(out, (a,), back)
    return out


def minimum(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "minimum")
    take_a = a.data <= b.data
    out = Tensor(np.where(take_a, a.data, b.data))

    def back():
        if out.grad is None:
            return
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad * take_a, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad * ~take_a, b.data.shape))

    _record(out, (a, b), back)
    return out


def maximum(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "maximum")
    take_a = a.data >= b.data
    out = Tensor(np.where(take_a, a.data, b.data))

    def back():
        if out.grad is None:
            return
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad * take_a, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad * ~take_a, b.data.shape))

    _record(out, (a, b), back)
    return out


# ---------------------------------------------------------------------------
# Reductions and shape ops


def tsum(a: Tensor, axis=None) -> Tensor:
    out = Tensor(a.data.sum(axis=axis))

    def back():
        if out.grad is None or not a.requires_grad:
            return
        if axis is None:
            _accum(a, np.broadcast_to(out.grad, a.data.shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(out.grad, axis), a.data.shape))

    _record(out, (a,), back)
    return out


def tmean(a: Tensor, axis=None) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    out = Tensor(a.data.mean(axis=axis))

    def back():
        if out.grad is None or not a.requires_grad:
            return
        if axis is None:
            _accum(a, np.broadcast_to(out.grad / n, a.data.shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(out.grad / n, axis), a.data.shape))

    _record(out, (a,), back)
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))

    def back():
        if out.grad is not None and a.requires_grad:
            _accum(a, out.grad.reshape(a.data.shape))

    _record(out, (a,), back)
    return out


def swap_last_axes(a: Tensor) -> Tensor:
    if a.data.ndim < 2:
        raise DimensionError("swap_last_axes needs >= 2 dims")
    out = Tensor(np.swapaxes(a.data, -1, -2).copy())

    def back():
        if out.grad is not None and a.requires_grad:
            _accum(a, np.swapaxes(out.grad, -1, -2))

    _record(out, (a,), back)
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back():
        if out.grad is None:
            return
        parts = np.split(out.grad, splits, axis=axis)
        for t, g in zip(tensors, parts):
            if t.requires_grad:
                _accum(t, g)

    _record(out, tuple(tensors), back)
    return out


# ---------------------------------------------------------------------------
# Matrix product


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0:
        raise DimensionError("matmul requires at least 1-D operands")
    a_vec, b_vec = ad.ndim == 1, bd.ndim == 1
    a2 = ad[None, :] if a_vec else ad
    b2 = bd[:, None] if b_vec else bd
    if a2.shape[-1] != b2.shape[-2]:
        raise DimensionError(f"matmul: inner dims {a2.shape[-1]} != {b2.shape[-2]}")
    try:
        out_d = np.matmul(a2, b2)
    except ValueError as e:
        raise DimensionError(f"matmul: {e}") from None
    if a_vec:
        out_d = out_d[..., 0, :]
    if b_vec:
        out_d = out_d[..., 0] if not a_vec else out_d[0]
    out = Tensor(out_d)

    def back():
        if out.grad is None:
            return
        if a_vec and b_vec:
            g2 = out.grad.reshape(1, 1)
        elif a_vec:
            g2 = np.expand_dims(out.grad, -2)
        elif b_vec:
            g2 = np.expand_dims(out.grad, -1)
        else:
            g2 = out.grad
        if a.requires_grad:
            ga = np.matmul(g2, np.swapaxes(b2, -1, -2))
            if a_vec:
                ga = ga[..., 0, :]
            _accum(a, _unbroadcast(ga, ad.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a2, -1, -2), g2)
            if b_vec:
                gb = gb[..., 0]
            _accum(b, _unbroadcast(gb, bd.shape))

    _record(out, (a, b), back)
    return out


# ---------------------------------------------------------------------------
# Convolutions
#
# Layouts: conv2d input (..., C, H, W), kernels (F, C, kh, kw);
# conv1d input (..., C, T), kernels (F, C, k). Leading batch axes optional.
# Accumulation runs in float64, output is cast to the working precision.


def _conv2d_forward(x: np.ndarray, k: np.ndarray, stride: int, padding: int):
    kh, kw = k.shape[-2:]
    if padding:
        pad = [(0, 0)] * (x.ndim - 2) + [(padding, padding), (padding, padding)]
        xp = np.pad(x, pad)
    else:
        xp = x
    H, W = xp.shape[-2:]
    if kh > H or kw > W:
        raise DimensionError(f"conv2d: kernel {kh}x{kw} larger than padded input {H}x{W}")
    win = sliding_window_view(xp, (kh, kw), axis=(-2, -1))[..., ::stride, ::stride, :, :]
    # win: (..., C, OH, OW, kh, kw) -> cols (..., OH, OW, C*kh*kw)
    cols = np.moveaxis(win, -5, -3).reshape(win.shape[:-5] + win.shape[-4:-2] + (-1,))
    kmat = k.reshape(k.shape[0], -1)
    out = np.matmul(cols.astype(np.float64), kmat.T.astype(np.float64))
    return np.moveaxis(out, -1, -3), xp, cols


def conv2d(x: Tensor, kernels: Tensor, stride: int = 1, padding: int = 0,
           bias: Tensor | None = None) -> Tensor:
    if kernels.data.ndim != 4:
        raise DimensionError(f"conv2d kernels must be (F, C, kh, kw), got {kernels.data.shape}")
    if x.data.ndim < 3:
        raise DimensionError(f"conv2d input must be (..., C, H, W), got {x.data.shape}")
    if x.data.shape[-3] != kernels.data.shape[1]:
        raise DimensionError(
            f"conv2d: input channels {x.data.shape[-3]} != kernel channels {kernels.data.shape[1]}")
    out_d, xp, cols = _conv2d_forward(x.data, kernels.data, stride, padding)
    if bias is not None:
        out_d = out_d + bias.data.astype(np.float64)[:, None, None]
    out = Tensor(out_d.astype(_infer_dtype(x)))

    F = kernels.data.shape[0]
    kh, kw = kernels.data.shape[-2:]
    OH, OW = out_d.shape[-2:]

    def back():
        if out.grad is None:
            return
        g = out.grad.astype(np.float64)
        g_cols = np.moveaxis(g, -3, -1)                       # (..., OH, OW, F)
        if kernels.requires_grad:
            gk = np.matmul(
                g_cols.reshape(-1, F).T, cols.reshape(-1, cols.shape[-1]).astype(np.float64))
            _accum(kernels, gk.reshape(kernels.data.shape))
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=tuple(i for i in range(g.ndim) if i != g.ndim - 3)))
        if x.requires_grad:
            kmat = kernels.data.reshape(F, -1).astype(np.float64)
            dcols = np.matmul(g_cols, kmat)                   # (..., OH, OW, C*kh*kw)
            dcols = dcols.reshape(dcols.shape[:-1] + (xp.shape[-3], kh, kw))
            dxp = np.zeros(xp.shape, dtype=np.float64)
            for i in range(kh):
                for j in range(kw):
                    dxp[..., i:i + stride * (OH - 1) + 1:stride,
                        j:j + stride * (OW - 1) + 1:stride] += np.moveaxis(dcols[..., i, j], -1, -3)
            if padding:
                dxp = dxp[..., padding:-padding, padding:-padding]
            _accum(x, dxp)

    _record(out, (x, kernels) + ((bias,) if bias is not None else ()), back)
    return out


def conv1d(x: Tensor, kernels: Tensor, stride: int = 1,
           bias: Tensor | None = None) -> Tensor:
    """Temporal convolution over the trailing axis of (..., C, T)."""
    if kernels.data.ndim != 3:
        raise DimensionError(f"conv1d kernels must be (F, C, k), got {kernels.data.shape}")
    if x.data.ndim < 2:
        raise DimensionError(f"conv1d input must be (..., C, T), got {x.data.shape}")
    if x.data.shape[-2] != kernels.data.shape[1]:
        raise DimensionError(
            f"conv1d: input channels {x.data.shape[-2]} != kernel channels {kernels.data.shape[1]}")
    k = kernels.data.shape[-1]
    T = x.data.shape[-1]
    if k > T:
        raise DimensionError(f"conv1d: kernel width {k} larger than input length {T}")
    win = sliding_window_view(x.data, k, axis=-1)[..., ::stride, :]   # (..., C, OT, k)
    cols = np.moveaxis(win, -3, -2).reshape(win.shape[:-3] + (win.shape[-2], -1))
    kmat = kernels.data.reshape(kernels.data.shape[0], -1)
    out_d = np.matmul(cols.astype(np.float64), kmat.T.astype(np.float64))
    out_d = np.moveaxis(out_d, -1, -2)                                # (..., F, OT)
    if bias is not None:
        out_d = out_d + bias.data.astype(np.float64)[:, None]
    out = Tensor(out_d.astype(_infer_dtype(x)))

    F = kernels.data.shape[0]
    OT = out_d.shape[-1]

    def back():
        if out.grad is None:
            return
        g = out.grad.astype(np.float64)
        g_cols = np.moveaxis(g, -2, -1)                               # (..., OT, F)
        if kernels.requires_grad:
            gk = np.matmul(
                g_cols.reshape(-1, F).T, cols.reshape(-1, cols.shape[-1]).astype(np.float64))
            _accum(kernels, gk.reshape(kernels.data.shape))
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=tuple(i for i in range(g.ndim) if i != g.ndim - 2)))
        if x.requires_grad:
            dcols = np.matmul(g_cols, kmat.astype(np.float64))
            dcols = dcols.reshape(dcols.shape[:-1] + (x.data.shape[-2], k))
            dx = np.zeros(x.data.shape, dtype=np.float64)
            for i in range(k):
                dx[..., i:i + stride * (OT - 1) + 1:stride] += np.moveaxis(dcols[..., i], -1, -2)
            _accum(x, dx)

    _record(out, (x, kernels) + ((bias,) if bias is not None else ()), back)
    return out


def _infer_dtype(x: Tensor):
    return x.data.dtype
