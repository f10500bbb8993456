"""Small reverse-mode automatic differentiation engine over numpy arrays.

Every differentiable operation records its parents and a backward rule.
Backward rules are themselves written with :class:`Tensor` operations, so
calling :func:`grad` with ``create_graph=True`` yields gradients that can be
differentiated again. The gradient penalty baseline needs exactly that: the
input gradient of the critic is differentiated with respect to the weights.

Only the handful of primitives the training code uses are provided.
"""

from contextlib import contextmanager

import numpy as np

from .errors import ContractError, DimensionError, NonFiniteError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled():
    return _grad_enabled


class Tensor:
    """Immutable float64 array with an optional backward rule."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, op=""):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        if not np.isfinite(arr).all():
            raise NonFiniteError("tensor contains NaN or Inf", source=op or "tensor")
        arr.flags.writeable = False
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return transpose(self)

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def __len__(self):
        return self.data.shape[0]

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __truediv__ = lambda self, other: div(self, other)
    __rtruediv__ = lambda self, other: div(other, self)
    __matmul__ = lambda self, other: matmul(self, other)
    __neg__ = lambda self: neg(self)
    __pow__ = lambda self, p: power(self, p)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def min(self, axis=None):
        return tmin(self, axis=axis)[0]

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def backward(self):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` as numpy arrays."""
        leaves = [t for t in _topo_order(self) if t.requires_grad and not t._parents]
        grads = grad(self, leaves)
        for leaf, g in zip(leaves, grads):
            leaf.grad = g.data if leaf.grad is None else leaf.grad + g.data


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward, op):
    parents = tuple(parents)
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward, op)
    return Tensor(data, op=op)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = tsum(g, axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = tsum(g, axis=axes, keepdims=True)
    return g


# --- primitives -------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(neg(g), b.shape)), "sub")


def neg(a):
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (neg(g),), "neg")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data * b.data, (a, b),
        lambda g: (_unbroadcast(mul(g, b), a.shape), _unbroadcast(mul(g, a), b.shape)),
        "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        ga = _unbroadcast(div(g, b), a.shape)
        gb = _unbroadcast(neg(div(mul(g, a), mul(b, b))), b.shape)
        return ga, gb

    return _make(a.data / b.data, (a, b), backward, "div")


def power(a, p):
    """Elementwise ``a ** p`` for a constant real exponent."""
    a = as_tensor(a)
    p = float(p)
    return _make(a.data ** p, (a,), lambda g: (mul(g, mul(p, power(a, p - 1.0))),), "pow")


def sqrt(a):
    a = as_tensor(a)
    out = None

    def backward(g):
        return (div(g, mul(2.0, out)),)

    out = _make(np.sqrt(a.data), (a,), backward, "sqrt")
    return out


def tabs(a):
    a = as_tensor(a)
    sign = Tensor(np.sign(a.data))
    return _make(np.abs(a.data), (a,), lambda g: (mul(g, sign),), "abs")


def leaky_relu(a, slope=0.2):
    a = as_tensor(a)
    mask = Tensor(np.where(a.data > 0, 1.0, slope))
    return _make(a.data * mask.data, (a,), lambda g: (mul(g, mask),), "leaky_relu")


def relu(a):
    a = as_tensor(a)
    mask = Tensor((a.data > 0).astype(np.float64))
    return _make(a.data * mask.data, (a,), lambda g: (mul(g, mask),), "relu")


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shapes {a.shape} and {b.shape} do not align")
    return _make(
        a.data @ b.data, (a, b),
        lambda g: (matmul(g, transpose(b)), matmul(transpose(a), g)), "matmul")


def transpose(a):
    a = as_tensor(a)
    return _make(a.data.T, (a,), lambda g: (transpose(g),), "transpose")


def reshape(a, shape):
    a = as_tensor(a)
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (reshape(g, old),), "reshape")


def broadcast_to(a, shape):
    a = as_tensor(a)
    shape = tuple(shape)
    return _make(
        np.broadcast_to(a.data, shape), (a,),
        lambda g: (_unbroadcast(g, a.shape),), "broadcast")


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            axes = (axis,) if isinstance(axis, int) else axis
            axes = tuple(ax % len(shape) for ax in axes)
            kept = [1 if i in axes else n for i, n in enumerate(shape)]
            g = reshape(g, tuple(kept))
        elif axis is None and not keepdims:
            g = reshape(g, (1,) * len(shape))
        return (broadcast_to(g, shape),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward, "sum")


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def tmin(a, axis=0):
    """Minimum along ``axis`` plus the lowest-index argmin.

    The gradient flows only to the selected element (Danskin's rule).
    Returns ``(values, argmins)``.
    """
    a = as_tensor(a)
    if a.ndim == 0 or a.size == 0:
        raise ContractError("min over an empty tensor")
    if axis is None:
        flat = reshape(a, (a.size,))
        values, idx = tmin(flat, axis=0)
        return values, idx
    axis = axis % a.ndim
    idx = np.argmin(a.data, axis=axis)
    onehot = np.zeros(a.shape)
    np.put_along_axis(onehot, np.expand_dims(idx, axis), 1.0, axis=axis)
    onehot = Tensor(onehot)
    shape = a.shape

    def backward(g):
        g = broadcast_to(reshape(g, tuple(1 if i == axis else n for i, n in enumerate(shape))), shape)
        return (mul(g, onehot),)

    values = _make(np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis),
                   (a,), backward, "min")
    return values, idx


# --- graph traversal -----------------------------------------------------------

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


def grad(output, inputs, create_graph=False):
    """Gradients of a scalar ``output`` with respect to each tensor in ``inputs``.

    Inputs that ``output`` does not depend on get a zero gradient. With
    ``create_graph=True`` the returned tensors carry their own graph.
    """
    if output.size != 1:
        raise ContractError(f"backward needs a scalar output, got shape {output.shape}")
    single = isinstance(inputs, Tensor)
    inputs = [inputs] if single else list(inputs)
    order = _topo_order(output)
    grads = {id(output): Tensor(np.ones(output.shape))}
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = create_graph
    try:
        for node in reversed(order):
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else add(grads[key], pg)
    finally:
        _grad_enabled = previous
    result = [grads.get(id(t), Tensor(np.zeros(t.shape))) for t in inputs]
    return result[0] if single else result
