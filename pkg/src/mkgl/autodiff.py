"""Reverse-mode automatic differentiation over dense numpy tensors.

A Tensor wraps a float array; while a Tape is active, every primitive records
itself so that Tape.backward can replay the recording in reverse and accumulate
gradients. With no active tape, primitives run forward-only (evaluation mode).
Only the primitives this pipeline needs are provided.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float32

_ACTIVE_TAPE = None


class ShapeError(ValueError):
    pass


class Tensor:
    """Dense n-dimensional value, optionally carrying a gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype)
        elif not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def item(self):
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered recording of primitive applications for one backward pass.

    Execution order is a topological order, so traversing the recording in
    reverse visits every node exactly once with its output gradient complete.
    """

    def __init__(self):
        self._nodes = []

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a tape is already active")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def record(self, out, parents, backward_fn):
        self._nodes.append((out, parents, backward_fn))

    def backward(self, loss):
        if loss.data.size != 1:
            raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for out, parents, backward_fn in reversed(self._nodes):
            g = out.grad
            if g is None:
                continue
            for parent, pg in zip(parents, backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = pg.astype(parent.data.dtype, copy=True)
                else:
                    parent.grad += pg

    def clear(self):
        self._nodes.clear()


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else DEFAULT_DTYPE
    return Tensor(np.asarray(x, dtype=dtype))


def _record(out_data, parents, backward_fn):
    requires = _ACTIVE_TAPE is not None and any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=requires)
    if requires:
        _ACTIVE_TAPE.record(out, parents, backward_fn)
    return out


def _unbroadcast(grad, shape):
    """Sum a broadcasted gradient back down to the original shape."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b, like=a)
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    return _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b, like=a)
    try:
        out = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")
    return _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b, like=a)
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    return _record(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b, like=a)
    out = a.data / b.data
    return _record(
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def neg(a):
    return _record(-a.data, (a,), lambda g: (-g,))


def scale(a, s):
    s = float(s)
    return _record(a.data * s, (a,), lambda g: (g * s,))


def exp(a):
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: (g * out,))


def log(a):
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a):
    out = np.sqrt(a.data)

    def backward(g):
        # subgradient 0 at the origin so std of a singleton stays finite
        safe = np.where(out > 0.0, out, 1.0)
        return (np.where(out > 0.0, g * 0.5 / safe, 0.0),)

    return _record(out, (a,), backward)


def clamp(a, lo, hi):
    out = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)
    return _record(out, (a,), lambda g: (g * inside,))


# ---------------------------------------------------------------------------
# nonlinearities


def sigmoid(a):
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _record(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a):
    out = np.tanh(a.data)
    return _record(out, (a,), lambda g: (g * (1.0 - out * out),))


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a):
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner),)

    return _record(out, (a,), backward)


def softmax(a, axis=-1):
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        dot = np.sum(g * out, axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _record(out, (a,), backward)


def layer_norm(a, gamma, beta, eps=1e-5):
    """Normalize over the last axis, then scale and shift."""
    if gamma.shape != a.shape[-1:] or beta.shape != a.shape[-1:]:
        raise ShapeError(
            f"layer_norm: gamma {gamma.shape} / beta {beta.shape} do not match feature dim {a.shape[-1:]}"
        )
    x = a.data
    n = x.shape[-1]
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv
    out = gamma.data * xhat + beta.data

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        g_gamma = np.sum(g * xhat, axis=lead)
        g_beta = np.sum(g, axis=lead)
        gx = g * gamma.data
        gxhat_sum = gx.sum(axis=-1, keepdims=True)
        gxhat_dot = (gx * xhat).sum(axis=-1, keepdims=True)
        ga = inv / n * (n * gx - gxhat_sum - xhat * gxhat_dot)
        return ga, g_gamma, g_beta

    return _record(out, (a, gamma, beta), backward)


# ---------------------------------------------------------------------------
# linear algebra / structure


def matmul(a, b):
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = a.data @ b.data

    def backward(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:
            return g * bd, g * ad
        if ad.ndim == 1:
            ga = g @ np.swapaxes(bd, -1, -2)
            gb = np.outer(ad, g) if bd.ndim == 2 else None
            if gb is None:
                gb = ad[..., :, None] * g[..., None, :]
            return ga, gb
        if bd.ndim == 1:
            ga = g[..., None] * bd
            gb = np.swapaxes(ad, -1, -2) @ g if ad.ndim == 2 else np.tensordot(ad, g, axes=(tuple(range(ad.ndim - 1)), tuple(range(g.ndim))))
            return ga, gb
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _record(out, (a, b), backward)


def transpose(a, axes=None):
    out = np.transpose(a.data, axes)
    if axes is None:
        inv = None
    else:
        inv = np.argsort(axes)
    return _record(out, (a,), lambda g: (np.transpose(g, inv),))


def reshape(a, shape):
    orig = a.data.shape
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def concat(tensors, axis=0):
    tensors = list(tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(out, tuple(tensors), backward)


def slice_(a, key):
    out = a.data[key]

    def backward(g):
        full = np.zeros_like(a.data)
        full[key] = g
        return (full,)

    return _record(out, (a,), backward)


def broadcast_to(a, shape):
    out = np.broadcast_to(a.data, shape).copy()
    return _record(out, (a,), lambda g: (_unbroadcast(g, a.shape),))


def embedding_gather(table, ids):
    """Rows of an embedding matrix; scatter-add on the way back."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise IndexError(f"embedding_gather: id out of range for table of {table.data.shape[0]} rows")
    out = table.data[ids]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return _record(out, (table,), backward)


def select_index(a, idx, axis=-1):
    """Pick one element per row along an axis (cross-entropy target gather)."""
    idx = np.asarray(idx, dtype=np.int64)
    expanded = np.expand_dims(idx, axis=axis)
    out = np.take_along_axis(a.data, expanded, axis=axis).squeeze(axis)

    def backward(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, expanded, np.expand_dims(g, axis), axis=axis)
        return (full,)

    return _record(out, (a,), backward)


def _reduce(a, axis, keepdims, kind):
    x = a.data
    if kind == "sum":
        out = x.sum(axis=axis, keepdims=keepdims)
    elif kind == "mean":
        out = x.mean(axis=axis, keepdims=keepdims)
    elif kind == "max":
        out = x.max(axis=axis, keepdims=keepdims)
    else:
        out = x.min(axis=axis, keepdims=keepdims)

    def expand(g):
        if axis is None:
            return np.broadcast_to(g, x.shape)
        if keepdims:
            return np.broadcast_to(g, x.shape)
        return np.broadcast_to(np.expand_dims(g, axis), x.shape)

    if kind in ("sum", "mean"):
        if axis is None:
            count = x.size
        else:
            count = x.shape[axis] if isinstance(axis, int) else int(np.prod([x.shape[i] for i in axis]))
        factor = 1.0 / count if kind == "mean" else 1.0

        def backward(g):
            return (expand(g) * factor,)

    else:
        outk = x.max(axis=axis, keepdims=True) if kind == "max" else x.min(axis=axis, keepdims=True)
        winners = x == outk
        # split the gradient among ties so the sum of flows matches the output
        counts = winners.sum(axis=axis, keepdims=True)

        def backward(g):
            return (expand(g) * winners / counts,)

    return _record(out, (a,), backward)


def reduce_sum(a, axis=None, keepdims=False):
    return _reduce(a, axis, keepdims, "sum")


def reduce_mean(a, axis=None, keepdims=False):
    return _reduce(a, axis, keepdims, "mean")


def reduce_max(a, axis=None, keepdims=False):
    return _reduce(a, axis, keepdims, "max")


def reduce_min(a, axis=None, keepdims=False):
    return _reduce(a, axis, keepdims, "min")


def dropout(a, p, seed):
    """Seeded inverted dropout; callers skip it entirely at evaluation."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p must be in [0, 1), got {p}")
    if p == 0.0:
        return a
    mask = np.random.default_rng(seed).random(a.shape) >= p
    factor = mask / (1.0 - p)
    return _record(a.data * factor, (a,), lambda g: (g * factor,))


# ---------------------------------------------------------------------------
# segment reductions (message passing over edge lists)
#
# `seg` must be sorted ascending and cover [0, num_segments) without gaps;
# callers compact away empty segments first. Sorting is part of the contract:
# it pins the float reduction order, which keeps outputs exactly invariant to
# the caller's edge ordering.


def _segment_starts(seg, num_segments):
    seg = np.asarray(seg, dtype=np.int64)
    if seg.size == 0:
        raise ValueError("segment reduction over an empty edge list")
    if np.any(np.diff(seg) < 0):
        raise ValueError("segment ids must be sorted")
    starts = np.searchsorted(seg, np.arange(num_segments))
    counts = np.diff(np.append(starts, seg.size))
    if np.any(counts == 0):
        raise ValueError("empty segment; compact ids before reducing")
    return seg, starts, counts


def segment_sum(a, seg, num_segments):
    seg, starts, _ = _segment_starts(seg, num_segments)
    out = np.add.reduceat(a.data, starts, axis=0)
    return _record(out, (a,), lambda g: (g[seg],))


def segment_mean(a, seg, num_segments):
    seg, starts, counts = _segment_starts(seg, num_segments)
    out = np.add.reduceat(a.data, starts, axis=0) / counts[:, None]
    return _record(out, (a,), lambda g: (g[seg] / counts[seg][:, None],))


def _segment_extremum(a, seg, num_segments, kind):
    seg, starts, _ = _segment_starts(seg, num_segments)
    ufunc = np.maximum if kind == "max" else np.minimum
    out = ufunc.reduceat(a.data, starts, axis=0)

    def backward(g):
        winners = a.data == out[seg]
        pos = np.arange(seg.size) - starts[seg]
        masked = np.where(winners, pos[:, None], seg.size)
        first = np.minimum.reduceat(masked, starts, axis=0)
        route = winners & (pos[:, None] == first[seg])
        return (g[seg] * route,)

    return _record(out, (a,), backward)


def segment_max(a, seg, num_segments):
    return _segment_extremum(a, seg, num_segments, "max")


def segment_min(a, seg, num_segments):
    return _segment_extremum(a, seg, num_segments, "min")


# ---------------------------------------------------------------------------
# scatter rows back into a larger matrix


def row_scatter(values, row_ids, num_rows):
    row_ids = np.asarray(row_ids, dtype=np.int64)
    out = np.zeros((num_rows,) + values.data.shape[1:], dtype=values.data.dtype)
    out[row_ids] = values.data
    return _record(out, (values,), lambda g: (g[row_ids],))


# ---------------------------------------------------------------------------
# gradient verification


def grad_check(f, x, eps=1e-5):
    """Max relative error between reverse-mode and central finite differences.

    Runs in float64 regardless of the pipeline dtype; eps below float32
    resolution is explicitly allowed by the contract.
    """
    if not (1e-6 < eps < 1e-2):
        raise ValueError(f"grad_check: eps must lie in (1e-6, 1e-2), got {eps}")
    x64 = Tensor(x.data.astype(np.float64), requires_grad=True)
    with Tape() as tape:
        y = f(x64)
        if y.data.size != 1:
            raise ShapeError(f"grad_check requires a scalar-valued f, got shape {y.shape}")
        tape.backward(y)
    analytic = np.zeros_like(x64.data) if x64.grad is None else x64.grad

    numeric = np.zeros_like(x64.data)
    flat = x64.data.reshape(-1)
    nflat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x64).item()
        flat[i] = orig - eps
        lo = f(x64).item()
        flat[i] = orig
        nflat[i] = (hi - lo) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
