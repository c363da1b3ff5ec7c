"""Small reverse-mode autodiff engine over float64 numpy arrays.

Only the operations the model needs are provided. Broadcasting is limited
to adding a bias row vector to a matrix and to 0-d scalar operands.

Example::

    x = Parameter(np.array([1.0, 2.0]), name="x")
    total(square(x)).backward()
    x.grad  # array([2., 4.])
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import special


class ShapeMismatch(ValueError):
    pass


class DomainError(ValueError):
    pass


class NonScalarRoot(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable | None = None,
        op: str = "leaf",
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op})"

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    __add__ = lambda self, other: add(self, _wrap(other))  # noqa: E731
    __radd__ = lambda self, other: add(_wrap(other), self)  # noqa: E731
    __sub__ = lambda self, other: subtract(self, _wrap(other))  # noqa: E731
    __rsub__ = lambda self, other: subtract(_wrap(other), self)  # noqa: E731
    __mul__ = lambda self, other: mul(self, _wrap(other))  # noqa: E731
    __rmul__ = lambda self, other: mul(_wrap(other), self)  # noqa: E731
    __truediv__ = lambda self, other: div(self, _wrap(other))  # noqa: E731
    __matmul__ = lambda self, other: matmul(self, other)  # noqa: E731
    __neg__ = lambda self: scale(self, -1.0)  # noqa: E731

    def __getitem__(self, key):
        return index(self, key)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


class Parameter(Tensor):
    """A persistent, named leaf tensor."""

    __slots__ = ("name", "trainable")

    def __init__(self, data, name: str = "", trainable: bool = True):
        super().__init__(data, requires_grad=trainable)
        self.name = name
        self.trainable = trainable

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    return Tensor(x)


def _make(data, parents: Sequence[Tensor], backward, op: str) -> Tensor:
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward, op)
    return Tensor(data, op=op)


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every leaf requiring grad."""
    if root.data.size != 1 or root.ndim > 1:
        raise NonScalarRoot(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if pg is None or not p.requires_grad:
                continue
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg


# --------------------------------------------------------------- binary ops


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> str:
    if a.shape == b.shape:
        return "same"
    if b.ndim == 0:
        return "scalar_b"
    if a.ndim == 0:
        return "scalar_a"
    if a.ndim == 2 and b.ndim == 1 and b.shape[0] == a.shape[1]:
        return "row_b"
    raise ShapeMismatch(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _reduce(g: np.ndarray, mode: str, which: str) -> np.ndarray:
    if mode == "scalar_b" and which == "b":
        return np.asarray(g.sum())
    if mode == "scalar_a" and which == "a":
        return np.asarray(g.sum())
    if mode == "row_b" and which == "b":
        return g.sum(axis=0)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    mode = _binary_shapes(a, b, "add")
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_reduce(g, mode, "a"), _reduce(g, mode, "b")),
        "add",
    )


def subtract(a: Tensor, b: Tensor) -> Tensor:
    mode = _binary_shapes(a, b, "subtract")
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_reduce(g, mode, "a"), -_reduce(g, mode, "b")),
        "subtract",
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    mode = _binary_shapes(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(
        ad * bd,
        (a, b),
        lambda g: (_reduce(g * bd, mode, "a"), _reduce(g * ad, mode, "b")),
        "mul",
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    mode = _binary_shapes(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd
    return _make(
        out,
        (a, b),
        lambda g: (_reduce(g / bd, mode, "a"), _reduce(-g * out / bd, mode, "b")),
        "div",
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def scale_rows(a: Tensor, w: Tensor) -> Tensor:
    """Multiply row ``i`` of matrix ``a`` by ``w[i]``."""
    if a.ndim != 2 or w.shape != (a.shape[0],):
        raise ShapeMismatch(f"scale_rows: {a.shape} with weights {w.shape}")
    ad, wd = a.data, w.data
    return _make(
        ad * wd[:, None],
        (a, w),
        lambda g: (g * wd[:, None], (g * ad).sum(axis=1)),
        "scale_rows",
    )


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = list(tensors)
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"concat: {exc}") from None
    ax = axis % out.ndim
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]
    return _make(out, tensors, lambda g: tuple(np.split(g, bounds, axis=ax)), "concat")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeMismatch(f"transpose needs a matrix, got {a.shape}")
    return _make(a.data.T, (a,), lambda g: (g.T,), "transpose")


def index(a: Tensor, key) -> Tensor:
    """Numpy-style indexing; repeated indices accumulate in backward."""
    out = a.data[key]

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)

    return _make(out, (a,), bw, "index")


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    return index(a, np.asarray(idx, dtype=np.int64))


# ---------------------------------------------------------- elementwise ops


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softplus(a: Tensor) -> Tensor:
    x = a.data
    out = np.logaddexp(0.0, x)
    sig = np.exp(x - out)  # sigmoid(x), stable
    return _make(out, (a,), lambda g: (g * sig,), "softplus")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    if np.any(~(a.data > 0)):
        raise DomainError("log of a non-positive value")
    x = a.data
    return _make(np.log(x), (a,), lambda g: (g / x,), "log")


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.data < 0):
        raise DomainError("sqrt of a negative value")
    out = np.sqrt(a.data)
    safe = np.where(out > 0, out, 1.0)
    # subgradient 0 at the origin so constant inputs do not produce nan
    return _make(out, (a,), lambda g: (np.where(out > 0, g / (2.0 * safe), 0.0),), "sqrt")


def square(a: Tensor) -> Tensor:
    x = a.data
    return _make(x * x, (a,), lambda g: (2.0 * g * x,), "square")


def digamma(a: Tensor) -> Tensor:
    if np.any(~(a.data > 0)):
        raise DomainError("digamma of a non-positive value")
    x = a.data
    return _make(special.digamma(x), (a,), lambda g: (g * special.trigamma(x),), "digamma")


# --------------------------------------------------------------- reductions


def total(a: Tensor) -> Tensor:
    shape = a.shape
    return _make(a.data.sum(), (a,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    if n == 0:
        raise ShapeMismatch("mean of an empty tensor")
    shape = a.shape
    return _make(
        a.data.mean(), (a,), lambda g: (np.broadcast_to(g / n, shape).copy(),), "mean"
    )


def row_sum(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeMismatch(f"row_sum needs a matrix, got {a.shape}")
    cols = a.shape[1]
    return _make(
        a.data.sum(axis=1), (a,), lambda g: (np.repeat(g[:, None], cols, axis=1),), "row_sum"
    )


def frobenius_norm(a: Tensor) -> Tensor:
    x = a.data
    out = np.sqrt((x * x).sum())
    return _make(
        out, (a,), lambda g: ((g / out) * x if out > 0 else np.zeros_like(x),), "frobenius_norm"
    )


def logsumexp_rows(a: Tensor) -> Tensor:
    """log(sum(exp(row))) for each row, max-shifted."""
    if a.ndim != 2:
        raise ShapeMismatch(f"logsumexp_rows needs a matrix, got {a.shape}")
    x = a.data
    mx = x.max(axis=1, keepdims=True)
    ex = np.exp(x - mx)
    s = ex.sum(axis=1, keepdims=True)
    out = (mx + np.log(s))[:, 0]
    soft = ex / s
    return _make(out, (a,), lambda g: (g[:, None] * soft,), "logsumexp_rows")


# ------------------------------------------------------------ segment ops


def _segment_args(x: Tensor, ids, num_segments: int | None):
    ids = np.asarray(ids, dtype=np.int64)
    if ids.shape != (x.shape[0],):
        raise ShapeMismatch(f"segment ids {ids.shape} do not match rows {x.shape[0]}")
    if num_segments is None:
        num_segments = int(ids.max()) + 1 if ids.size else 0
    return ids, num_segments


def segment_sum(x: Tensor, ids, num_segments: int | None = None) -> Tensor:
    ids, k = _segment_args(x, ids, num_segments)
    out = np.zeros((k,) + x.shape[1:])
    np.add.at(out, ids, x.data)
    return _make(out, (x,), lambda g: (g[ids],), "segment_sum")


def segment_count(ids, num_segments: int) -> np.ndarray:
    return np.bincount(np.asarray(ids, dtype=np.int64), minlength=num_segments).astype(np.float64)


def segment_mean(x: Tensor, ids, num_segments: int | None = None) -> Tensor:
    """Mean per segment; empty segments give zeros."""
    ids, k = _segment_args(x, ids, num_segments)
    counts = segment_count(ids, k)
    inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
    out = np.zeros((k,) + x.shape[1:])
    np.add.at(out, ids, x.data)
    shape = (k,) + (1,) * (x.ndim - 1)
    out = out * inv.reshape(shape)
    return _make(out, (x,), lambda g: ((g * inv.reshape(shape))[ids],), "segment_mean")


def segment_max(x: Tensor, ids, num_segments: int | None = None) -> Tensor:
    """Max per segment and column; empty segments give zeros.

    The gradient goes to the first row attaining the max.
    """
    ids, k = _segment_args(x, ids, num_segments)
    xd = x.data
    out = np.full((k,) + xd.shape[1:], -np.inf)
    np.maximum.at(out, ids, xd)
    empty = segment_count(ids, k) == 0
    out[empty] = 0.0

    order = np.argsort(ids, kind="stable")
    hit = (xd == out[ids])[order]
    running = np.cumsum(hit, axis=0)
    sorted_ids = ids[order]
    starts = np.searchsorted(sorted_ids, sorted_ids, side="left")
    starts = starts.reshape((-1,) + (1,) * (xd.ndim - 1))
    before = np.where(starts > 0, running[np.maximum(starts - 1, 0).reshape(-1)], 0)
    first_sorted = hit & (running - before == 1)
    first = np.empty_like(first_sorted)
    first[order] = first_sorted

    return _make(out, (x,), lambda g: (g[ids] * first,), "segment_max")


# -------------------------------------------------------------- optimizer


def adam_step(params, grads, state: dict, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8):
    """One Adam update with bias correction, in place.

    ``state`` holds ``t`` and per-parameter ``m``/``v`` lists; pass an empty
    dict on the first call.
    """
    if not state:
        state["t"] = 0
        state["m"] = [np.zeros_like(p.data) for p in params]
        state["v"] = [np.zeros_like(p.data) for p in params]
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        m = state["m"][i] = beta1 * state["m"][i] + (1.0 - beta1) * g
        v = state["v"][i] = beta2 * state["v"][i] + (1.0 - beta2) * g * g
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


class Adam:
    def __init__(self, params: Sequence[Parameter], lr: float = 5e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state: dict = {}

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        grads = [p.grad for p in self.params]
        adam_step(self.params, grads, self.state, self.lr, *self.betas, self.eps)
