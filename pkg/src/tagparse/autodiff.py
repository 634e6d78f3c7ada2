"""Reverse-mode automatic differentiation on dense float64 numpy arrays.

A Tensor wraps an ndarray plus the bookkeeping needed to backpropagate:
the parent tensors it was computed from and a closure that maps the
gradient at the node to gradients at its parents.  Graphs are built
implicitly by calling the op functions in this module; `backward` walks
the recorded graph once in reverse creation order (creation order is a
topological order, since an op's inputs always exist before its output).

Everything is float64 and row-major.  Supported shapes are 0-d scalars,
1-d vectors, and 2-d matrices, which is all the sequence models here
need.  Ops check shapes eagerly and raise ShapeError with both offending
shapes in the message.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "tensor",
    "parameter",
    "no_grad",
    "grad_enabled",
    "add",
    "sub",
    "mul",
    "matmul",
    "transpose",
    "concat",
    "rows",
    "cols",
    "sigmoid",
    "tanh",
    "softmax",
    "embedding",
    "cross_entropy",
    "tsum",
    "tmean",
    "add_n",
    "backward",
    "glorot",
    "finite_diff_check",
]


class ShapeError(ValueError):
    """Raised when an op receives arrays whose shapes cannot combine."""


_ids = itertools.count()
_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A node in the computation graph.

    `parents` and `_backward` are empty/None for leaves (constants and
    parameters).  `needs_grad` marks nodes on a path from a parameter,
    so backward can skip constant subgraphs entirely.
    """

    __slots__ = ("data", "parents", "_backward", "needs_grad", "name", "_id")

    def __init__(self, data, parents=(), backward_fn=None, needs_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = parents
        self._backward = backward_fn
        self.needs_grad = needs_grad
        self.name = name
        self._id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = self.name or ("param" if self.needs_grad and not self.parents else "tensor")
        return f"Tensor({tag}, shape={self.data.shape})"

    # Operator sugar; the free functions do the real work.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def tensor(data) -> Tensor:
    """Wrap data as a constant leaf (no gradient flows into it)."""
    return Tensor(data)


def parameter(data, name: str) -> Tensor:
    """Wrap data as a trainable leaf; `name` keys checkpoints and optimizer errors."""
    return Tensor(data, needs_grad=True, name=name)


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: tuple, backward_fn) -> Tensor:
    """Build an op output, recording the graph only when some input needs it."""
    if _grad_enabled and any(p.needs_grad for p in parents):
        return Tensor(data, parents, backward_fn, needs_grad=True)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: cannot broadcast {a.data.shape} with {b.data.shape}")
    ash, bsh = a.data.shape, b.data.shape

    def bwd(g):
        return _unbroadcast(g, ash), _unbroadcast(g, bsh)

    return _node(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    try:
        out = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: cannot broadcast {a.data.shape} with {b.data.shape}")
    ash, bsh = a.data.shape, b.data.shape

    def bwd(g):
        return _unbroadcast(g, ash), _unbroadcast(-g, bsh)

    return _node(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    """Elementwise product; either side may be a python scalar."""
    if isinstance(b, (int, float)) and isinstance(a, Tensor):
        k = float(b)

        def bwd_scalar(g):
            return (g * k,)

        return _node(a.data * k, (a,), bwd_scalar)
    if isinstance(a, (int, float)) and isinstance(b, Tensor):
        return mul(b, a)
    a, b = _coerce(a), _coerce(b)
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: cannot broadcast {a.data.shape} with {b.data.shape}")
    ad, bd = a.data, b.data

    def bwd(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _node(out, (a, b), bwd)


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} @ {b.data.shape}")
    ad, bd = a.data, b.data

    def bwd(g):
        return g @ bd.T, ad.T @ g

    return _node(ad @ bd, (a, b), bwd)


def transpose(a) -> Tensor:
    a = _coerce(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: expected 2-d, got {a.data.shape}")

    def bwd(g):
        return (g.T,)

    return _node(a.data.T, (a,), bwd)


def concat(parts: Sequence, axis: int = 1) -> Tensor:
    """Concatenate 2-d tensors along `axis` (0: stack rows, 1: widen columns)."""
    parts = [_coerce(p) for p in parts]
    shapes = [p.data.shape for p in parts]
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {shapes} along axis {axis}")
    sizes = [s[axis] for s in shapes]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        if axis == 0:
            return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _node(out, tuple(parts), bwd)


def rows(a, start: int, stop: int) -> Tensor:
    """Select the row block [start, stop) of a 2-d tensor."""
    a = _coerce(a)
    ash = a.data.shape
    if a.data.ndim != 2 or not (0 <= start < stop <= ash[0]):
        raise ShapeError(f"rows: bad slice [{start}:{stop}) for shape {ash}")

    def bwd(g):
        full = np.zeros(ash)
        full[start:stop] = g
        return (full,)

    return _node(a.data[start:stop].copy(), (a,), bwd)


def cols(a, start: int, stop: int) -> Tensor:
    """Select the column block [start, stop) of a 2-d tensor."""
    a = _coerce(a)
    ash = a.data.shape
    if a.data.ndim != 2 or not (0 <= start < stop <= ash[1]):
        raise ShapeError(f"cols: bad slice [{start}:{stop}) for shape {ash}")

    def bwd(g):
        full = np.zeros(ash)
        full[:, start:stop] = g
        return (full,)

    return _node(a.data[:, start:stop].copy(), (a,), bwd)


def sigmoid(a) -> Tensor:
    a = _coerce(a)
    # Branch on sign so exp never overflows.
    x = a.data
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def bwd(g):
        return (g * out * (1.0 - out),)

    return _node(out, (a,), bwd)


def tanh(a) -> Tensor:
    a = _coerce(a)
    out = np.tanh(a.data)

    def bwd(g):
        return (g * (1.0 - out * out),)

    return _node(out, (a,), bwd)


def softmax(a) -> Tensor:
    """Softmax over the last axis; rows are nonnegative and sum to 1."""
    a = _coerce(a)
    x = a.data
    if x.ndim == 0:
        raise ShapeError("softmax: scalar input has no axis")
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _node(out, (a,), bwd)


def embedding(table, ids) -> Tensor:
    """Gather rows `ids` from a (vocab, dim) table; gradient scatters back."""
    table = _coerce(table)
    if table.data.ndim != 2:
        raise ShapeError(f"embedding: table must be 2-d, got {table.data.shape}")
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError(f"embedding: ids must be 1-d, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise IndexError(
            f"embedding: id out of range for table with {table.data.shape[0]} rows")
    tshape = table.data.shape

    def bwd(g):
        full = np.zeros(tshape)
        np.add.at(full, idx, g)
        return (full,)

    return _node(table.data[idx], (table,), bwd)


def cross_entropy(probs, target, floor: float = 1e-12) -> Tensor:
    """Weighted negative log-likelihood: -sum(target * log(max(probs, floor))).

    `target` is treated as a constant weight array (rows need not sum to 1);
    no gradient flows into it.  The floor guards log(0); where probs fall
    below it the local derivative is zero, matching the clipped objective.
    """
    probs = _coerce(probs)
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    if t.shape != probs.data.shape:
        raise ShapeError(f"cross_entropy: target {t.shape} vs probs {probs.data.shape}")
    p = np.maximum(probs.data, floor)
    out = np.asarray(-(t * np.log(p)).sum())
    live = probs.data >= floor

    def bwd(g):
        return (np.where(live, -t / p, 0.0) * g,)

    return _node(out, (probs,), bwd)


def tsum(a) -> Tensor:
    """Sum all entries to a scalar."""
    a = _coerce(a)
    ash = a.data.shape

    def bwd(g):
        return (np.full(ash, g),)

    return _node(np.asarray(a.data.sum()), (a,), bwd)


def tmean(a) -> Tensor:
    """Mean of all entries as a scalar."""
    a = _coerce(a)
    ash = a.data.shape
    n = a.data.size

    def bwd(g):
        return (np.full(ash, g / n),)

    return _node(np.asarray(a.data.mean()), (a,), bwd)


def add_n(parts: Sequence) -> Tensor:
    """Sum same-shape tensors (n-ary add, one graph node)."""
    parts = [_coerce(p) for p in parts]
    if not parts:
        raise ValueError("add_n: empty input")
    shape = parts[0].data.shape
    for p in parts:
        if p.data.shape != shape:
            raise ShapeError(f"add_n: mixed shapes {shape} vs {p.data.shape}")
    out = parts[0].data.copy()
    for p in parts[1:]:
        out += p.data
    k = len(parts)

    def bwd(g):
        return (g,) * k

    return _node(out, tuple(parts), bwd)


def backward(root: Tensor, wrt: Iterable[Tensor]) -> dict:
    """Backpropagate from a scalar root; returns {tensor: gradient} for `wrt`.

    Every tensor in `wrt` gets an entry; tensors the root does not depend on
    get zeros.  Visits each reachable node exactly once, children before
    parents (reverse creation order is a reverse topological order).
    """
    if root.data.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.data.shape}")
    wrt = list(wrt)
    keep = set(id(t) for t in wrt)

    # Collect the reachable grad-bearing subgraph.
    seen = {id(root)}
    nodes = [root]
    stack = [root]
    while stack:
        node = stack.pop()
        for p in node.parents:
            if p.needs_grad and id(p) not in seen:
                seen.add(id(p))
                nodes.append(p)
                stack.append(p)
    nodes.sort(key=lambda t: t._id, reverse=True)

    grads = {id(root): np.ones_like(root.data)}
    for node in nodes:
        g = grads.get(id(node))
        if g is None:
            continue
        if id(node) not in keep:
            del grads[id(node)]
        if node._backward is None:
            continue
        pgrads = node._backward(g)
        for p, pg in zip(node.parents, pgrads):
            if not p.needs_grad:
                continue
            acc = grads.get(id(p))
            # Never mutate: closures may hand back views of g.
            grads[id(p)] = pg if acc is None else acc + pg

    return {t: grads.get(id(t), np.zeros_like(t.data)) for t in wrt}


def glorot(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    """Xavier/Glorot uniform init: U(-a, a), a = sqrt(6 / (fan_in + fan_out))."""
    if len(shape) == 2:
        fan_out, fan_in = shape
    else:
        fan_out = fan_in = shape[0]
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def finite_diff_check(loss_fn: Callable[[], Tensor], params: Sequence[Tensor],
                      num_coords: int = 50, h: float = 1e-6,
                      rng: np.random.Generator | None = None) -> float:
    """Compare backward gradients against central finite differences.

    Independently of the backward pass, evaluates loss_fn forward-only at
    +/-h perturbations of randomly sampled parameter coordinates and
    returns the maximum relative error observed.  The denominator is
    floored at 1e-3 so that coordinates whose true derivative is below
    finite-difference resolution read as agreement, not noise.
    """
    rng = rng or np.random.default_rng(0)
    analytic = backward(loss_fn(), params)
    worst = 0.0
    sized = [p for p in params if p.data.size > 0]
    for _ in range(num_coords):
        p = sized[rng.integers(len(sized))]
        flat = p.data.reshape(-1)
        i = int(rng.integers(flat.size))
        orig = flat[i]
        with no_grad():
            flat[i] = orig + h
            up = float(loss_fn().data)
            flat[i] = orig - h
            down = float(loss_fn().data)
            flat[i] = orig
        fd = (up - down) / (2.0 * h)
        an = float(analytic[p].reshape(-1)[i])
        err = abs(fd - an) / max(abs(fd), abs(an), 1e-3)
        worst = max(worst, err)
    return worst
