"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Operations executed while a :class:`Tape` is active are recorded on it when
any input requires a gradient.  ``Tape.backward`` replays the records in exact
reverse order.  Outside of a tape, operations run as plain numpy (inference).

    >>> x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = sum_(mul(x, x))
    >>> tape.backward(loss)
    >>> x.grad
    array([2., 4., 6.])
"""

from __future__ import annotations

import struct
import threading
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided
from scipy.special import expit

__all__ = [
    "Tensor", "Tape", "ShapeError", "backward", "grad_check", "apply",
    "matmul", "conv1d", "pointwise_conv2d", "add", "sub", "mul", "neg",
    "reshape", "transpose", "concat", "softmax", "log_softmax", "sigmoid",
    "relu", "prelu", "layer_norm", "mean", "sum_", "take", "getitem",
    "dumps", "loads", "save", "load",
]


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible with an operation."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        t = cls.__new__(cls)
        t.data = data
        t.requires_grad = requires_grad
        t.grad = None
        t.name = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


class _Record:
    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op, inputs, output, backward):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


_local = threading.local()


def _active_tape() -> "Tape | None":
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Tape:
    """Ordered log of differentiable operations.

    Use as a context manager; nested tapes record only on the innermost one.
    Tapes are thread-local, so separate threads may record separate tapes.
    """

    def __init__(self):
        self.records: list[_Record] = []

    def __enter__(self) -> "Tape":
        if not hasattr(_local, "stack"):
            _local.stack = []
        _local.stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _local.stack.pop()

    def __len__(self) -> int:
        return len(self.records)

    def backward(self, loss: Tensor) -> None:
        backward(self, loss)


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every leaf on ``tape``."""
    if loss.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    produced = {id(r.output) for r in tape.records}
    leaves: dict[int, Tensor] = {}
    for rec in reversed(tape.records):
        g = grads.pop(id(rec.output), None)
        if g is None:
            continue
        in_grads = rec.backward(g)
        for inp, gi in zip(rec.inputs, in_grads):
            if gi is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
            if key not in produced:
                leaves[key] = inp
    if id(loss) not in produced and loss.requires_grad:
        leaves[id(loss)] = loss
    for key, leaf in leaves.items():
        g = grads[key]
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor._wrap(np.asarray(x, dtype=np.float64), False)


def _result(op: str, data: np.ndarray, inputs: Sequence[Tensor], bw: Callable) -> Tensor:
    req = any(t.requires_grad for t in inputs)
    out = Tensor._wrap(data, req)
    if req:
        tape = _active_tape()
        if tape is not None:
            tape.records.append(_Record(op, tuple(inputs), out, bw))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcast_check(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# --------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check("add", a, b)

    def bw(g):
        return (_unbroadcast(g, a.shape) if a.requires_grad else None,
                _unbroadcast(g, b.shape) if b.requires_grad else None)

    return _result("add", a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check("sub", a, b)

    def bw(g):
        return (_unbroadcast(g, a.shape) if a.requires_grad else None,
                _unbroadcast(-g, b.shape) if b.requires_grad else None)

    return _result("sub", a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check("mul", a, b)

    def bw(g):
        return (_unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                _unbroadcast(g * a.data, b.shape) if b.requires_grad else None)

    return _result("mul", a.data * b.data, (a, b), bw)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _result("neg", -a.data, (a,), lambda g: (-g,))


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    y = expit(x.data)
    return _result("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def relu(x) -> Tensor:
    x = _as_tensor(x)
    pos = x.data > 0
    return _result("relu", np.where(pos, x.data, 0.0), (x,), lambda g: (g * pos,))


def prelu(x, slope, axis: int = 1) -> Tensor:
    """PReLU with one learned slope per channel along ``axis``."""
    x, slope = _as_tensor(x), _as_tensor(slope)
    axis = axis % x.ndim
    if slope.ndim != 1 or slope.shape[0] != x.shape[axis]:
        raise ShapeError(f"prelu: slope shape {slope.shape} does not match input {x.shape} on axis {axis}")
    bshape = [1] * x.ndim
    bshape[axis] = -1
    a = slope.data.reshape(bshape)
    pos = x.data > 0
    out = np.where(pos, x.data, a * x.data)
    red = tuple(i for i in range(x.ndim) if i != axis)

    def bw(g):
        gx = np.where(pos, g, a * g) if x.requires_grad else None
        gs = np.where(pos, 0.0, g * x.data).sum(axis=red) if slope.requires_grad else None
        return gx, gs

    return _result("prelu", out, (x, slope), bw)


# --------------------------------------------------------------------------
# reductions and normalisation


def sum_(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result("sum", np.asarray(out), (x,), bw)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    out = x.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        n = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        n = int(np.prod([x.shape[a] for a in axes]))

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, x.shape).copy(),)

    return _result("mean", np.asarray(out), (x,), bw)


def softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _result("softmax", y, (x,), bw)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    y = z - lse

    def bw(g):
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)

    return _result("log_softmax", y, (x,), bw)


def layer_norm(x, scale, shift, axes=(-1,), eps: float = 1e-5) -> Tensor:
    """Normalise ``x`` over ``axes`` then apply broadcastable scale and shift."""
    x, scale, shift = _as_tensor(x), _as_tensor(scale), _as_tensor(shift)
    axes = tuple(a % x.ndim for a in axes)
    for p, nm in ((scale, "scale"), (shift, "shift")):
        try:
            np.broadcast_shapes(p.shape, x.shape)
        except ValueError:
            raise ShapeError(f"layer_norm: {nm} shape {p.shape} incompatible with input {x.shape}") from None
    mu = x.data.mean(axis=axes, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * scale.data + shift.data

    def bw(g):
        gx = None
        if x.requires_grad:
            gh = g * scale.data
            gx = inv * (gh - gh.mean(axis=axes, keepdims=True)
                        - xhat * (gh * xhat).mean(axis=axes, keepdims=True))
        gs = _unbroadcast(g * xhat, scale.shape) if scale.requires_grad else None
        gb = _unbroadcast(g, shift.shape) if shift.requires_grad else None
        return gx, gs, gb

    return _result("layer_norm", out, (x, scale, shift), bw)


# --------------------------------------------------------------------------
# linear algebra and convolution


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError(f"matmul: incompatible batch shapes {a.shape} and {b.shape}") from None

    def bw(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                # shared weight: one GEMM over all leading dims
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _result("matmul", out, (a, b), bw)


def _pad_pair(padding) -> tuple[int, int]:
    if isinstance(padding, (tuple, list)):
        left, right = padding
    else:
        left = right = padding
    if left < 0 or right < 0:
        raise ValueError(f"conv1d: negative padding {padding}")
    return int(left), int(right)


def conv1d(x, weight, bias=None, stride: int = 1, dilation: int = 1, groups: int = 1,
           padding=0) -> Tensor:
    """1-D cross-correlation over (B, C_in, T) with weight (C_out, C_in/groups, K).

    ``padding`` is an int (both sides) or a ``(left, right)`` pair of zeros.
    """
    x, weight = _as_tensor(x), _as_tensor(weight)
    inputs = [x, weight]
    if bias is not None:
        bias = _as_tensor(bias)
        inputs.append(bias)
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeError(f"conv1d: expected 3-D input and weight, got {x.shape} and {weight.shape}")
    B, cin, T = x.shape
    cout, cg, K = weight.shape
    if cin % groups or cout % groups or cg != cin // groups:
        raise ShapeError(f"conv1d: input {x.shape} and weight {weight.shape} inconsistent with groups={groups}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"conv1d: bias shape {bias.shape} does not match weight {weight.shape}")
    left, right = _pad_pair(padding)
    Tp = T + left + right
    span = dilation * (K - 1) + 1
    if Tp < span:
        raise ShapeError(f"conv1d: input length {T} (padded {Tp}) shorter than receptive field {span}")
    Tout = (Tp - span) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (left, right))) if left or right else x.data
    xp = np.ascontiguousarray(xp)
    if K == 1 and stride == 1 and groups == 1:
        cols = None
        out = np.matmul(weight.data[:, :, 0], xp)
    else:
        sb, sc, st = xp.strides
        cols = as_strided(xp, shape=(B, cin, K, Tout), strides=(sb, sc, st * dilation, st * stride),
                          writeable=False)
        # per-item matmuls keep each batch row's rounding independent of B
        if groups == 1:
            out = np.matmul(weight.data.reshape(cout, cin * K), cols.reshape(B, cin * K, Tout))
        elif cg == 1 and cout == cin:
            w_dw = weight.data[:, 0, :]
            out = cols[:, :, 0, :] * w_dw[None, :, 0, None]
            for k in range(1, K):
                out = out + cols[:, :, k, :] * w_dw[None, :, k, None]
        else:
            cols_g = cols.reshape(B, groups, cg * K, Tout)
            w_g = weight.data.reshape(groups, cout // groups, cg * K)
            out = np.matmul(w_g, cols_g).reshape(B, cout, Tout)
    if bias is not None:
        out = out + bias.data[None, :, None]

    def bw(g):
        gx = gw = gb = None
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2))
        if cols is None:
            w2 = weight.data[:, :, 0]
            if weight.requires_grad:
                gw = np.matmul(g, xp.transpose(0, 2, 1)).sum(axis=0)[:, :, None]
            if x.requires_grad:
                gxp = np.matmul(w2.T, g)
        else:
            if groups == 1:
                flat = cols.reshape(B, cin * K, Tout)
                if weight.requires_grad:
                    gw = np.matmul(g, flat.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
                gcols = (np.matmul(weight.data.reshape(cout, cin * K).T, g).reshape(B, cin, K, Tout)
                         if x.requires_grad else None)
            elif cg == 1 and cout == cin:
                if weight.requires_grad:
                    gw = np.stack([(g * cols[:, :, k, :]).sum(axis=(0, 2)) for k in range(K)], axis=1)[:, None, :]
                gcols = g[:, :, None, :] * weight.data[:, 0, :][None, :, :, None] if x.requires_grad else None
            else:
                gg = g.reshape(B, groups, cout // groups, Tout)
                if weight.requires_grad:
                    gw = np.einsum("bgot,bgckt->gock", gg, cols.reshape(B, groups, cg, K, Tout),
                                   optimize=True).reshape(weight.shape)
                gcols = (np.einsum("bgot,gock->bgckt", gg, weight.data.reshape(groups, cout // groups, cg, K),
                                   optimize=True).reshape(B, cin, K, Tout) if x.requires_grad else None)
            if x.requires_grad:
                gxp = np.zeros((B, cin, Tp))
                stop = stride * (Tout - 1) + 1
                for k in range(K):
                    o = k * dilation
                    gxp[:, :, o:o + stop:stride] += gcols[:, :, k, :]
        if x.requires_grad:
            gx = gxp[:, :, left:left + T]
        res = [gx, gw]
        if bias is not None:
            res.append(gb)
        return tuple(res)

    return _result("conv1d", out, inputs, bw)


def pointwise_conv2d(x, weight) -> Tensor:
    """1x1 2-D convolution, stride 1, no bias: (B, C_in, H, W) x (C_out, C_in, 1, 1)."""
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4 or weight.shape[2:] != (1, 1) or weight.shape[1] != x.shape[1]:
        raise ShapeError(f"pointwise_conv2d: input {x.shape} incompatible with weight {weight.shape}")
    w = weight.data[:, :, 0, 0]
    B, C, H, W = x.shape
    out = np.matmul(w, x.data.reshape(B, C, H * W)).reshape(B, -1, H, W)

    def bw(g):
        g2 = g.reshape(B, -1, H * W)
        gx = np.matmul(w.T, g2).reshape(x.shape) if x.requires_grad else None
        gw = (np.matmul(g2, x.data.reshape(B, C, H * W).transpose(0, 2, 1)).sum(axis=0)[:, :, None, None]
              if weight.requires_grad else None)
        return gx, gw

    return _result("pointwise_conv2d", out, (x, weight), bw)


# --------------------------------------------------------------------------
# layout


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {x.shape} into {tuple(shape)}") from None
    return _result("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None) -> Tensor:
    x = _as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    if sorted(a % x.ndim for a in axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose: axes {axes} invalid for shape {x.shape}")
    inv = np.argsort([a % x.ndim for a in axes])
    out = np.ascontiguousarray(x.data.transpose(axes))
    return _result("transpose", out, (x,), lambda g: (g.transpose(inv),))


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: no inputs")
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: shapes {[t.shape for t in ts]} differ off axis {axis}") from None
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result("concat", out, ts, bw)


def getitem(x, index) -> Tensor:
    x = _as_tensor(x)
    out = x.data[index]
    advanced = isinstance(index, (list, np.ndarray)) or (
        isinstance(index, tuple) and any(isinstance(i, (list, np.ndarray)) for i in index))

    def bw(g):
        gx = np.zeros_like(x.data)
        if advanced:
            np.add.at(gx, index, g)
        else:
            gx[index] = g
        return (gx,)

    return _result("getitem", np.array(out, dtype=np.float64), (x,), bw)


def take(x, indices, axis: int = 0) -> Tensor:
    x = _as_tensor(x)
    idx = np.asarray(indices, dtype=np.intp)
    out = np.take(x.data, idx, axis=axis)

    def bw(g):
        gx = np.zeros_like(x.data)
        moved = np.moveaxis(gx, axis, 0)
        np.add.at(moved, idx, np.moveaxis(g, axis, 0))
        return (gx,)

    return _result("take", out, (x,), bw)


_OPS: dict[str, Callable] = {
    "matmul": matmul, "conv1d": conv1d, "pointwise_conv2d": pointwise_conv2d,
    "add": add, "sub": sub, "mul": mul, "neg": neg, "reshape": reshape,
    "transpose": transpose, "concat": lambda *ts, axis=0: concat(ts, axis),
    "softmax": softmax, "log_softmax": log_softmax, "sigmoid": sigmoid,
    "relu": relu, "prelu": prelu, "layer_norm": layer_norm, "mean": mean,
    "sum": sum_, "take": take, "getitem": getitem,
}


def apply(op_kind: str, *inputs, **attributes) -> Tensor:
    """Dispatch an operation by name, e.g. ``apply("conv1d", x, w, padding=2)``."""
    try:
        fn = _OPS[op_kind]
    except KeyError:
        raise ValueError(f"unknown op_kind {op_kind!r}; known: {sorted(_OPS)}") from None
    return fn(*inputs, **attributes)


# --------------------------------------------------------------------------
# gradient checking


def grad_check(fn: Callable[..., Tensor], inputs, epsilon: float = 1e-5,
               exclude: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    """Max relative error between tape gradients and central differences.

    ``fn`` maps the given tensors to a scalar tensor.  ``exclude`` optionally
    maps an input array to a boolean mask of coordinates to skip (kinks).
    """
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    inputs = list(inputs)
    for t in inputs:
        t.grad = None
    with Tape() as tape:
        out = fn(*inputs)
    if out.size != 1:
        raise ShapeError(f"grad_check: function output must be scalar, got shape {out.shape}")
    tape.backward(out)
    worst = 0.0
    for t in inputs:
        if not t.requires_grad:
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        skip = exclude(t.data) if exclude is not None else np.zeros(t.shape, dtype=bool)
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            if skip.reshape(-1)[i]:
                continue
            orig = flat[i]
            flat[i] = orig + epsilon
            fp = float(fn(*inputs).data)
            flat[i] = orig - epsilon
            fm = float(fn(*inputs).data)
            flat[i] = orig
            num = (fp - fm) / (2 * epsilon)
            a = float(analytic.reshape(-1)[i])
            err = abs(a - num) / max(1e-8, abs(a) + abs(num))
            worst = max(worst, err)
    return worst


# --------------------------------------------------------------------------
# binary container: b"SDTN", u32 version, u32 rank, u64 dims, f64 data (LE)

MAGIC = b"SDTN"
VERSION = 1


def dumps(array) -> bytes:
    arr = np.ascontiguousarray(array.data if isinstance(array, Tensor) else array, dtype="<f8")
    head = MAGIC + struct.pack("<II", VERSION, arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes()


def loads(blob: bytes) -> np.ndarray:
    if blob[:4] != MAGIC:
        raise ValueError("not an SDTN container (bad magic)")
    version, rank = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported SDTN version {version}")
    dims = struct.unpack_from(f"<{rank}Q", blob, 12)
    start = 12 + 8 * rank
    n = int(np.prod(dims)) if rank else 1
    if len(blob) - start != 8 * n:
        raise ValueError(f"SDTN payload has {len(blob) - start} bytes, expected {8 * n}")
    return np.frombuffer(blob, dtype="<f8", count=n, offset=start).astype(np.float64).reshape(dims)


def save(path, array) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(array))


def load(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return loads(fh.read())
