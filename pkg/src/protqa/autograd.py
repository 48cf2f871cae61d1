"""Define-by-run reverse-mode autodiff over numpy arrays.

Every model computation in this package runs through the `Tensor` ops below.
Graphs are rebuilt on every forward pass; `backward` accumulates gradients
into the `.grad` slot of every tracked tensor. Ops hard-fail on NaN/Inf in
their output, naming the producing op.
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager

import numpy as np

from .errors import ContractError, DimensionError, NumericError

DEFAULT_DTYPE = np.float32

_grad_state = threading.local()  # per-thread: graphs belong to one logical thread


def _grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph construction (inference paths); thread-local."""
    prev = _grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = prev


def _guard(op: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in output of '{op}'")
    return arr


class Tensor:
    """Shaped float array with an optional gradient slot.

    `tracked` marks tensors that participate in differentiation; an op output
    is tracked iff any input is, so frozen-weight subgraphs build no graph.
    """

    __slots__ = ("data", "grad", "tracked", "_parents", "_vjps")

    def __init__(self, data, tracked: bool = False, dtype=None):
        if dtype is None and not isinstance(data, (np.ndarray, np.generic)):
            dtype = DEFAULT_DTYPE
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.tracked = bool(tracked)
        self._parents: tuple[Tensor, ...] = ()
        self._vjps: tuple = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, tracked=False)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, tracked={self.tracked})"

    # operator sugar; all arithmetic routes through the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, index):
        return take(self, index)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _make(op: str, data: np.ndarray, parents: tuple[Tensor, ...], vjps: tuple) -> Tensor:
    _guard(op, data)
    out = Tensor(data)
    if _grad_enabled() and any(p.tracked for p in parents):
        out.tracked = True
        # keep only edges into tracked parents; untracked subgraphs are free
        kept = [(p, v) for p, v in zip(parents, vjps) if p.tracked]
        out._parents = tuple(p for p, _ in kept)
        out._vjps = tuple(v for _, v in kept)
    return out


def _reduce_to_shape(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast dimensions so `grad` matches `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data
    return _make(
        "add",
        data,
        (a, b),
        (lambda g: _reduce_to_shape(g, a.shape), lambda g: _reduce_to_shape(g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data
    return _make(
        "mul",
        data,
        (a, b),
        (
            lambda g: _reduce_to_shape(g * b.data, a.shape),
            lambda g: _reduce_to_shape(g * a.data, b.shape),
        ),
    )


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    if isinstance(exponent, Tensor):
        raise ContractError("power supports scalar exponents only")
    data = a.data**exponent
    return _make("power", data, (a,), (lambda g: g * exponent * a.data ** (exponent - 1),))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 1 or b.data.ndim < 1:
        raise DimensionError("matmul operands must have rank >= 1")
    if a.shape[-1] != b.shape[-2 if b.data.ndim > 1 else 0]:
        raise DimensionError(f"matmul inner extents disagree: {a.shape} x {b.shape}")
    data = np.matmul(a.data, b.data)

    def grad_a(g):
        return _reduce_to_shape(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)

    def grad_b(g):
        return _reduce_to_shape(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)

    return _make("matmul", data, (a, b), (grad_a, grad_b))


def transpose(a: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    a = as_tensor(a)
    data = np.transpose(a.data, axes)
    if axes is None:
        inv = None
    else:
        inv = tuple(np.argsort(axes))
    return _make("transpose", data, (a,), (lambda g: np.transpose(g, inv),))


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)
    return _make("reshape", data, (a,), (lambda g: g.reshape(a.shape),))


def concat(parts, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise DimensionError("concat of zero tensors")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i):
        def vjp(g):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
            return g[tuple(sl)]

        return vjp

    return _make("concat", data, tuple(parts), tuple(make_vjp(i) for i in range(len(parts))))


def take(a: Tensor, index) -> Tensor:
    """Basic slicing/indexing with scatter-add gradient."""
    a = as_tensor(a)
    data = a.data[index]

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, index, g)
        return out

    return _make("take", np.array(data, copy=True), (a,), (vjp,))


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.shape).copy()

    return _make("sum", data, (a,), (vjp,))


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        count = a.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax along `axis` (default: last)."""
    x = as_tensor(x)
    if x.data.ndim == 0 or x.shape[axis] == 0:
        raise DimensionError("softmax over an empty axis")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        return (g - dot) * s

    return _make("softmax", s, (x,), (vjp,))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row normalization over the last axis, then affine gain/bias."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1] if x.data.ndim else 0
    if d == 0:
        raise DimensionError("layer_norm over an empty row")
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError("layer_norm gain/bias must have the row width")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gain.data + bias.data

    def grad_x(g):
        gg = g * gain.data
        m1 = gg.mean(axis=-1, keepdims=True)
        m2 = (gg * xhat).mean(axis=-1, keepdims=True)
        return (gg - m1 - xhat * m2) * inv

    def grad_gain(g):
        return (g * xhat).reshape(-1, d).sum(axis=0)

    def grad_bias(g):
        return g.reshape(-1, d).sum(axis=0)

    return _make("layer_norm", data, (x, gain, bias), (grad_x, grad_gain, grad_bias))


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Rows of `table` at integer `ids`; gradient scatter-adds into rows."""
    table = as_tensor(table)
    idx = np.asarray(ids, dtype=np.int64)
    v = table.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= v):
        raise IndexError(f"embedding id out of range [0, {v})")

    data = table.data[idx]

    def vjp(g):
        out = np.zeros_like(table.data)
        np.add.at(out, idx, g)
        return out

    return _make("embedding_lookup", data, (table,), (vjp,))


def cross_entropy(logits: Tensor, targets, ignore_mask=None) -> Tensor:
    """Mean -log softmax(logits)[target] over unmasked positions.

    `ignore_mask[i]` true drops position i from the mean entirely.
    """
    logits = as_tensor(logits)
    if logits.data.ndim != 2:
        raise DimensionError("cross_entropy expects T x V logits")
    t = np.asarray(targets, dtype=np.int64)
    n, v = logits.shape
    if t.shape != (n,):
        raise DimensionError("targets length must match logits rows")
    if ignore_mask is None:
        keep = np.ones(n, dtype=bool)
    else:
        keep = ~np.asarray(ignore_mask, dtype=bool)
    if not keep.any():
        raise NumericError("cross_entropy: every position is masked, mean undefined")
    if t[keep].size and (t[keep].min() < 0 or t[keep].max() >= v):
        raise IndexError(f"target id out of range [0, {v})")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    n_keep = int(keep.sum())
    loss = -logp[keep, t[keep]].sum() / n_keep

    def vjp(g):
        p = np.exp(logp)
        p[np.arange(n), t.clip(0, v - 1)] -= 1.0
        p[~keep] = 0.0
        return (g / n_keep) * p

    return _make("cross_entropy", np.asarray(loss, dtype=logits.dtype), (logits,), (vjp,))


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    data = np.maximum(x.data, 0)
    return _make("relu", data, (x,), (lambda g: g * (x.data > 0),))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """tanh-approximate GELU."""
    x = as_tensor(x)
    u = _GELU_C * (x.data + 0.044715 * x.data**3)
    t = np.tanh(u)
    data = 0.5 * x.data * (1.0 + t)

    def vjp(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x.data**2)
        return g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t**2) * du)

    return _make("gelu", data, (x,), (vjp,))


def silu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    sig = 1.0 / (1.0 + np.exp(-x.data))
    data = x.data * sig

    def vjp(g):
        return g * (sig * (1.0 + x.data * (1.0 - sig)))

    return _make("silu", data, (x,), (vjp,))


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    return _make("tanh", t, (x,), (lambda g: g * (1.0 - t**2),))


def dropout(x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; `rng=None` means eval mode (identity)."""
    x = as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout rate {p} outside [0, 1)")
    if rng is None or p == 0.0:
        return x
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    data = x.data * mask
    return _make("dropout", data, (x,), (lambda g: g * mask,))


# ---------------------------------------------------------------------------
# reverse pass


def backward(loss: Tensor) -> None:
    """Populate `.grad` on every tracked ancestor of a scalar loss.

    Repeated calls accumulate: two calls leave exactly twice the gradient.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward expects a Tensor")
    if loss.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.tracked:
            node.grad = g if node.grad is None else node.grad + g
        for parent, vjp in zip(node._parents, node._vjps):
            pg = vjp(g)
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg


def zero_grads(params) -> None:
    for p in params:
        p.grad = None
