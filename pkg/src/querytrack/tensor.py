"""Dense tensors with reverse-mode differentiation on a dynamic tape.

Design notes:
  - Row-major numpy storage.  float64 is the default and the dtype the
    gradient oracle assumes; training casts parameters to float32.
  - Ops record parents and a backward closure when any input requires
    gradients and grad mode is on.  ``backward()`` propagates through a
    per-call dict and accumulates into the ``.grad`` of leaf tensors only,
    so calling it twice on the same graph adds the gradients twice.
    Clearing is explicit (``zero_grad``).
  - Tensors participating in a recorded graph are treated as immutable;
    nothing here mutates ``data`` in place.
  - The hot kernels (softmax, layer_norm, gelu, sigmoid) dispatch through
    querytrack.backend; everything else is plain numpy.
"""
from __future__ import annotations

import numpy as np

from .backend import kernels
from .errors import ContractError, ShapeError

_grad_enabled = True


class no_grad:
    """Context manager disabling tape recording (inference fast path)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, Tensor):
            data = data.data
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=np.float64)
        elif not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        self.data = data
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward_fn = None

    # -- bookkeeping ---------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self):
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def grad_array(self):
        """Gradient as an array; zeros when this leaf was never reached."""
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    def is_leaf(self):
        return self._backward_fn is None

    # -- autodiff ------------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {self.data.shape}")
        if not self.requires_grad:
            return
        topo = _toposort(self)
        pending = {id(self): np.ones_like(self.data)}
        for node in topo:
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._backward_fn is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + pg
                else:
                    pending[key] = pg

    # -- operator sugar --------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)


class Parameter(Tensor):
    """Leaf tensor that always carries gradients, with a model-path name."""

    __slots__ = ("name",)

    def __init__(self, data, name=""):
        super().__init__(np.array(data, copy=True), requires_grad=True)
        self.name = name


def _toposort(root):
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    order.reverse()
    return order


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise ---------------------------------------------------------


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")
    return _make(data, (a, b), lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")
    return _make(
        data,
        (a, b),
        lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)),
    )


def div(a, b):
    a, b = _wrap(a), _wrap(b)
    data = a.data / b.data
    return _make(
        data,
        (a, b),
        lambda g: (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def neg(a):
    a = _wrap(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def power(a, p):
    a = _wrap(a)
    p = float(p)
    return _make(a.data**p, (a,), lambda g: (g * p * a.data ** (p - 1),))


def absolute(a):
    a = _wrap(a)
    return _make(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def exp(a):
    a = _wrap(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a):
    a = _wrap(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def maximum(a, b):
    a, b = _wrap(a), _wrap(b)
    mask = a.data >= b.data
    return _make(
        np.maximum(a.data, b.data),
        (a, b),
        lambda g: (unbroadcast(g * mask, a.shape), unbroadcast(g * ~mask, b.shape)),
    )


def minimum(a, b):
    a, b = _wrap(a), _wrap(b)
    mask = a.data <= b.data
    return _make(
        np.minimum(a.data, b.data),
        (a, b),
        lambda g: (unbroadcast(g * mask, a.shape), unbroadcast(g * ~mask, b.shape)),
    )


def relu(a):
    a = _wrap(a)
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


def clip(a, lo, hi):
    """Clamp values; gradient passes only where the input was strictly inside."""
    a = _wrap(a)
    mask = (a.data > lo) & (a.data < hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,))


# -- linear algebra / structure -------------------------------------------


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return _make(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def transpose(a, axes=None):
    a = _wrap(a)
    if axes is None:
        if a.data.ndim != 2:
            raise ShapeError(f"transpose without axes needs 2-D input, got {a.shape}")
        return _make(a.data.T.copy(), (a,), lambda g: (g.T,))
    inv = np.argsort(axes)
    return _make(
        np.transpose(a.data, axes).copy(),
        (a,),
        lambda g: (np.transpose(g, inv),),
    )


def reshape(a, shape):
    a = _wrap(a)
    orig = a.data.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def concat(tensors, axis=0):
    tensors = [_wrap(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(data, tensors, backward)


def getitem(a, idx):
    a = _wrap(a)
    shape = a.data.shape
    data = np.array(a.data[idx])

    def backward(g):
        full = np.zeros(shape, dtype=g.dtype)
        np.add.at(full, idx, g)
        return (full,)

    return _make(data, (a,), backward)


def reduce_sum(a, axis=None, keepdims=False):
    a = _wrap(a)
    shape = a.data.shape
    data = np.sum(a.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(data, (a,), backward)


def reduce_mean(a, axis=None, keepdims=False):
    a = _wrap(a)
    shape = a.data.shape
    n = a.data.size if axis is None else shape[axis]
    data = np.mean(a.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy() / n,)

    return _make(data, (a,), backward)


# -- fused kernel ops ------------------------------------------------------


def _rows2d(x, axis):
    """View x with `axis` moved last and flattened to (rows, k), contiguous."""
    moved = np.moveaxis(x, axis, -1)
    return np.ascontiguousarray(moved.reshape(-1, moved.shape[-1])), moved.shape


def softmax(a, axis=-1):
    a = _wrap(a)
    if a.data.ndim == 0:
        raise ShapeError("softmax needs at least one axis")
    axis = axis % a.data.ndim
    x2d, moved_shape = _rows2d(a.data, axis)
    y2d = kernels.softmax_fwd(x2d)
    data = np.moveaxis(y2d.reshape(moved_shape), -1, axis)

    def backward(g):
        g2d, _ = _rows2d(g, axis)
        gx = kernels.softmax_bwd(y2d, g2d)
        return (np.moveaxis(gx.reshape(moved_shape), -1, axis),)

    return _make(data, (a,), backward)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize each row of a 2-D tensor to zero mean / unit variance, then
    apply the affine (gamma, beta)."""
    x, gamma, beta = _wrap(x), _wrap(gamma), _wrap(beta)
    if x.data.ndim != 2:
        raise ShapeError(f"layer_norm expects 2-D input, got {x.shape}")
    xc = np.ascontiguousarray(x.data)
    gc = np.ascontiguousarray(gamma.data)
    bc = np.ascontiguousarray(beta.data)
    y, mean, rstd = kernels.layernorm_fwd(xc, gc, bc, eps)

    def backward(g):
        gx, dgamma, dbeta = kernels.layernorm_bwd(xc, gc, mean, rstd, np.ascontiguousarray(g))
        return gx, dgamma, dbeta

    return _make(y, (x, gamma, beta), backward)


def gelu(a):
    a = _wrap(a)
    flat = np.ascontiguousarray(a.data.ravel())
    data = kernels.gelu_fwd(flat).reshape(a.data.shape)

    def backward(g):
        gx = kernels.gelu_bwd(flat, np.ascontiguousarray(g.ravel()))
        return (gx.reshape(a.data.shape),)

    return _make(data, (a,), backward)


def sigmoid(a):
    a = _wrap(a)
    flat = np.ascontiguousarray(a.data.ravel())
    yflat = kernels.sigmoid_fwd(flat)
    data = yflat.reshape(a.data.shape)

    def backward(g):
        gx = kernels.sigmoid_bwd(yflat, np.ascontiguousarray(g.ravel()))
        return (gx.reshape(a.data.shape),)

    return _make(data, (a,), backward)


# -- gradient oracle -------------------------------------------------------


def fd_grad(f, param, h=1e-4, indices=None):
    """Central finite-difference gradient of scalar f() w.r.t. `param`.

    Perturbs entries of param.data in place and restores them; `f` must be a
    deterministic closure over the current parameter values.  `indices`
    restricts the estimate to a subset of flat indices (full gradient when
    None).  Returns an array shaped like param.data (unsampled entries 0).
    """
    data = param.data
    out = np.zeros_like(data, dtype=np.float64)
    flat = data.reshape(-1)
    idxs = range(flat.size) if indices is None else indices
    for i in idxs:
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f())
        flat[i] = orig - h
        fm = float(f())
        flat[i] = orig
        out.reshape(-1)[i] = (fp - fm) / (2.0 * h)
    return out
