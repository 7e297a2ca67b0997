"""Define-by-run reverse-mode autodiff over numpy arrays.

Every operation returns a :class:`Tensor` that remembers its parents and a
closure mapping the output adjoint to one adjoint per parent.  Sparse
matrices (scipy CSR) only ever appear as constant left operands of
:func:`spmm`.
"""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

_DTYPE = np.float64


class ShapeError(ValueError):
    """Operand shapes are incompatible for an operation."""


class ContractError(ValueError):
    """An operation was called outside its contract."""


def set_default_dtype(dtype) -> None:
    """Switch new tensors between float64 (default) and float32."""
    global _DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.float64, np.float32):
        raise ValueError("dtype must be float32 or float64")
    _DTYPE = dtype.type


def default_dtype():
    return _DTYPE


@contextmanager
def using_dtype(dtype):
    """Temporarily switch the default dtype."""
    previous = _DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


class Tensor:
    __slots__ = ("data", "requires_grad", "name", "op", "_parents", "_backward", "__weakref__")

    def __init__(self, data, requires_grad=False, name=None, *, _parents=(), _backward=None,
                 _op="leaf"):
        self.data = np.asarray(data, dtype=_DTYPE)
        self.requires_grad = requires_grad
        self.name = name
        self.op = _op
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, op={self.op})"

    # operator sugar
    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __neg__(self): return mul(self, -1.0)
    def __truediv__(self, o):
        if isinstance(o, Tensor):
            raise ContractError("division by a tensor is not supported")
        return mul(self, 1.0 / o)
    def __matmul__(self, o): return matmul(self, o)
    def __getitem__(self, key): return getitem(self, key)

    @property
    def T(self):
        return transpose(self)


def parameter(data, name=None) -> Tensor:
    return Tensor(np.array(data, dtype=_DTYPE), requires_grad=True, name=name)


def constant(data) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data)


def _make(data, parents, backward, op):
    parents = tuple(parents)
    rg = any(p.requires_grad for p in parents)
    return Tensor(data, rg, _parents=parents if rg else (), _backward=backward if rg else None,
                  _op=op)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _broadcast_check(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    _broadcast_check("add", a, b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    _broadcast_check("sub", a, b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    """Elementwise (Hadamard) product with broadcasting."""
    a, b = constant(a), constant(b)
    _broadcast_check("mul", a, b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
                 "mul")


def sigmoid(x) -> Tensor:
    x = constant(x)
    y = expit(x.data)
    return _make(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(x) -> Tensor:
    x = constant(x)
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def exp(x) -> Tensor:
    x = constant(x)
    y = np.exp(x.data)
    return _make(y, (x,), lambda g: (g * y,), "exp")


def log(x, clamp=None) -> Tensor:
    """Natural log; with ``clamp=eps`` inputs are clipped to ``[eps, 1-eps]``
    first (zero gradient where clipping is active)."""
    x = constant(x)
    if clamp is None:
        xd = x.data
        inside = None
    else:
        x64 = x.data.astype(np.float64)
        xd = np.clip(x64, clamp, 1.0 - clamp)
        inside = (x64 >= clamp) & (x64 <= 1.0 - clamp)

    def back(g):
        gx = g / xd
        return (gx if inside is None else gx * inside,)

    return _make(np.log(xd), (x,), back, "log")


# --------------------------------------------------------------- linear

def matmul(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def back(g):
        if b.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return _make(a.data @ b.data, (a, b), back, "matmul")


def spmm(s, x) -> Tensor:
    """Constant sparse matrix times dense tensor."""
    x = constant(x)
    if not sp.issparse(s):
        raise ContractError("spmm: left operand must be a scipy sparse matrix")
    if s.shape[1] != x.shape[0]:
        raise ShapeError(f"spmm: cannot multiply {s.shape} by {x.shape}")
    st = s.T.tocsr()
    return _make(np.asarray(s @ x.data), (x,), lambda g: (np.asarray(st @ g),), "spmm")


def transpose(x) -> Tensor:
    x = constant(x)
    return _make(x.data.T, (x,), lambda g: (g.T,), "transpose")


def reshape(x, shape) -> Tensor:
    x = constant(x)
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {x.shape} to {shape}") from None
    return _make(y, (x,), lambda g: (g.reshape(x.shape),), "reshape")


# ---------------------------------------------------- indexing / joining

def getitem(x, key) -> Tensor:
    """Basic (slice/int) indexing."""
    x = constant(x)
    y = x.data[key]

    def back(g):
        out = np.zeros_like(x.data)
        out[key] += g
        return (out,)

    return _make(y, (x,), back, "getitem")


def _scatter_rows(idx, g, n):
    """Sum rows of ``g`` into an ``n``-row array at positions ``idx``."""
    flat = idx.ravel()
    g2 = g.reshape(len(flat), -1)
    sel = sp.csr_matrix((np.ones(len(flat)), (flat, np.arange(len(flat)))), shape=(n, len(flat)))
    return np.asarray(sel @ g2)


def gather_rows(x, idx) -> Tensor:
    """``x[idx]`` along the first axis with an integer index array of any shape."""
    x = constant(x)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.min() < -x.shape[0] or idx.max() >= x.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for {x.shape[0]} rows")
    y = x.data[idx]

    def back(g):
        return (_scatter_rows(idx % x.shape[0], g, x.shape[0]).reshape(x.shape),)

    return _make(y, (x,), back, "gather_rows")


def mix_rows(x, idx, weights) -> Tensor:
    """``out[i] = sum_k weights[i, k] * x[idx[i, k]]`` for a 2-D ``x``.

    Equivalent to gathering ``x[idx]`` and contracting with ``weights`` but
    never materialises the ``(m, k, D)`` intermediate.
    """
    x, weights = constant(x), constant(weights)
    idx = np.asarray(idx, dtype=np.int64)
    if x.ndim != 2 or idx.ndim != 2 or weights.shape != idx.shape:
        raise ShapeError(f"mix_rows: x {x.shape}, idx {idx.shape}, weights {weights.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ShapeError(f"mix_rows: index out of range for {x.shape[0]} rows")
    m, k = idx.shape
    rows = np.repeat(np.arange(m), k)
    mix = sp.csr_matrix((weights.data.ravel(), (rows, idx.ravel())), shape=(m, x.shape[0]))
    y = np.asarray(mix @ x.data)

    def back(g):
        gx = np.asarray(mix.T @ g)
        gw = np.einsum("ikd,id->ik", x.data[idx], g)
        return gx, gw

    return _make(y, (x, weights), back, "mix_rows")


def rowdot(a, b) -> Tensor:
    """Row-wise inner products of two equally shaped 2-D tensors."""
    a, b = constant(a), constant(b)
    if a.ndim != 2 or a.shape != b.shape:
        raise ShapeError(f"rowdot: shapes {a.shape} and {b.shape}")
    y = np.einsum("id,id->i", a.data, b.data)
    return _make(y, (a, b), lambda g: (g[:, None] * b.data, g[:, None] * a.data), "rowdot")


def concat(xs, axis=1) -> Tensor:
    xs = [constant(x) for x in xs]
    try:
        y = np.concatenate([x.data for x in xs], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[x.shape for x in xs]}") from None
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return _make(y, xs, lambda g: tuple(np.split(g, bounds, axis=axis)), "concat")


# ----------------------------------------------------------- reductions

def sum(x, axis=None, keepdims=False) -> Tensor:  # noqa: A001 - mirrors numpy
    x = constant(x)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(x.data.sum(axis=axis, keepdims=keepdims), (x,), back, "sum")


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = constant(x)
    count = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis, keepdims), 1.0 / count)


# ---------------------------------------------------------- activations

def row_softmax(x) -> Tensor:
    """Softmax over the last axis."""
    x = constant(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _make(y, (x,), back, "row_softmax")


# --------------------------------------------------------------- losses

def bce_from_prob(p, target, clamp=1e-12) -> Tensor:
    """Elementwise binary cross-entropy ``-[t log p + (1-t) log(1-p)]``.

    ``p`` is clipped to ``[clamp, 1-clamp]`` before the logs.
    """
    p = constant(p)
    t = np.broadcast_to(np.asarray(target, dtype=p.data.dtype), p.shape)
    # clip in float64: 1 - 1e-12 is not representable in float32
    p64 = p.data.astype(np.float64)
    pc = np.clip(p64, clamp, 1.0 - clamp)
    inside = (p64 >= clamp) & (p64 <= 1.0 - clamp)
    y = -(t * np.log(pc) + (1.0 - t) * np.log1p(-pc))

    def back(g):
        return (g * (-(t / pc) + (1.0 - t) / (1.0 - pc)) * inside,)

    return _make(y, (p,), back, "bce")


def cross_entropy_logits(logits, labels, weights=None) -> Tensor:
    """``-sum_i w_i log softmax(logits_i)[labels_i]`` (sum reduction)."""
    logits = constant(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    w = np.ones(len(labels)) if weights is None else np.asarray(weights, dtype=np.float64)
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(len(labels))
    nll = lse - z[rows, labels]
    prob = np.exp(z - lse[:, None])

    def back(g):
        d = prob.copy()
        d[rows, labels] -= 1.0
        return (g * w[:, None] * d,)

    return _make(np.dot(w, nll), (logits,), back, "cross_entropy")


# -------------------------------------------------------------- dropout

def dropout(x, rate, rng) -> Tensor:
    """Inverted dropout with keep probability ``1 - rate``."""
    x = constant(x)
    if rate <= 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _make(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


def sparse_dropout(s, rate, rng):
    """Dropout on the stored entries of a constant sparse matrix."""
    if rate <= 0.0:
        return s
    s = s.tocsr(copy=True)
    keep = rng.random(s.nnz) >= rate
    s.data = s.data * keep / (1.0 - rate)
    s.eliminate_zeros()
    return s


# --------------------------------------------------------------- engine

def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, seed=None) -> dict:
    """Adjoints for every tensor reachable from ``loss``, keyed by ``id``.

    ``seed`` is the upstream adjoint; it defaults to 1 and is required when
    ``loss`` is not a scalar.
    """
    if seed is None:
        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        seed = np.ones_like(loss.data)
    elif np.shape(seed) != loss.shape:
        raise ShapeError(f"backward: seed shape {np.shape(seed)} != output shape {loss.shape}")
    grads = {id(loss): np.asarray(seed, dtype=loss.data.dtype)}
    for node in reversed(_topo_order(loss)):
        g = grads.pop(id(node), None) if node._backward is not None else grads.get(id(node))
        if g is None or node._backward is None:
            continue
        for p, gp in zip(node._parents, node._backward(g)):
            if gp is None or not p.requires_grad:
                continue
            if gp.dtype != p.data.dtype:
                gp = gp.astype(p.data.dtype)
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + gp
            else:
                grads[id(p)] = gp
    return grads


def gradients(loss: Tensor, params: dict) -> dict:
    """``{name: dloss/dparam}``; unreachable parameters get zeros."""
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise ContractError("gradients needs a scalar loss tensor")
    g = backward(loss) if loss.requires_grad else {}
    return {k: np.asarray(g.get(id(p), np.zeros_like(p.data))).reshape(p.shape)
            for k, p in params.items()}


def vjp(output: Tensor, seed, params: dict) -> dict:
    """Vector-Jacobian product ``seed^T d(output)/d(param)`` for each parameter."""
    g = backward(output, seed) if output.requires_grad else {}
    return {k: np.asarray(g.get(id(p), np.zeros_like(p.data))).reshape(p.shape)
            for k, p in params.items()}


def iter_graph(root: Tensor):
    """All tensors in the graph rooted at ``root`` (parents before children)."""
    return _topo_order(root) if root.requires_grad else [root]


class ExprGraph:
    """A named expression: ``build(**inputs) -> {output_name: Tensor}``.

    Holds the trainable parameters the expression closes over, so that
    :func:`evaluate` and :func:`gradients` can be driven by name.
    """

    def __init__(self, build, parameters=None):
        self.build = build
        self.parameters = dict(parameters or {})

    def __call__(self, **inputs):
        return self.build(**{k: constant(v) for k, v in inputs.items()})


def evaluate(expr: ExprGraph, inputs: dict) -> dict:
    """Forward values of every output of ``expr`` as numpy arrays."""
    return {k: v.data for k, v in expr(**inputs).items()}
