"""Reverse-mode autodiff over dense numpy arrays.

Every op returns a new Tensor that remembers its parents and a closure
routing the output gradient back to them; backward() replays the closures
in reverse topological order. Coverage is deliberately narrow: exactly the
shapes and operators the NAP layers need (vectors, matrices, and batched
4-d conv inputs). All forward and backward values are checked finite.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import NumericError, ShapeError

DEFAULT_DTYPE = np.float32

_grad_enabled = True


def grad_enabled():
    return _grad_enabled


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, optimizer math)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _check_finite(arr, op):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced by '{op}'")


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to the parent's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _accum(t, g):
    if not t.requires_grad:
        return
    if g.shape != t.data.shape:
        g = _unbroadcast(g, t.data.shape)
    _check_finite(g, "backward")
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        _check_finite(arr, "tensor")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad) and _grad_enabled
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def numpy(self):
        return np.array(self.data)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph plumbing -----------------------------------------------------

    def backward(self):
        """Seed this (scalar) node with gradient 1 and backprop the graph."""
        if self.data.size != 1:
            raise ShapeError("backward() needs a scalar loss")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    def zero_grad(self):
        self.grad = None

    # -- elementwise / arithmetic -------------------------------------------

    def __add__(self, other):
        other = _wrap(other, self)
        out = _result(self.data + other.data, (self, other), "add")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad)
                _accum(other, out.grad)
            out._backward = bw
        return out

    __radd__ = __add__

    def __sub__(self, other):
        other = _wrap(other, self)
        out = _result(self.data - other.data, (self, other), "sub")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad)
                _accum(other, -out.grad)
            out._backward = bw
        return out

    def __rsub__(self, other):
        return _wrap(other, self).__sub__(self)

    def __mul__(self, other):
        other = _wrap(other, self)
        with np.errstate(over="ignore"):
            out = _result(self.data * other.data, (self, other), "mul")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad * other.data)
                _accum(other, out.grad * self.data)
            out._backward = bw
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __truediv__(self, other):
        if isinstance(other, Tensor) or not np.isscalar(other):
            raise TypeError("tensor division only supports scalar divisors")
        return self * (1.0 / float(other))

    def __matmul__(self, other):
        if not isinstance(other, Tensor):
            other = Tensor(other)
        if self.ndim != 2 or other.ndim != 2:
            raise ShapeError("matmul expects 2-d operands")
        if self.shape[1] != other.shape[0]:
            raise ShapeError(f"matmul shapes {self.shape} x {other.shape}")
        out = _result(self.data @ other.data, (self, other), "matmul")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad @ other.data.T)
                _accum(other, self.data.T @ out.grad)
            out._backward = bw
        return out

    # -- nonlinearities -----------------------------------------------------

    def relu(self):
        out = _result(np.maximum(self.data, 0.0), (self,), "relu")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad * (self.data > 0))
            out._backward = bw
        return out

    def sigmoid(self):
        x = self.data
        y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                     np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        out = _result(y.astype(x.dtype, copy=False), (self,), "sigmoid")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad * out.data * (1.0 - out.data))
            out._backward = bw
        return out

    def tanh(self):
        out = _result(np.tanh(self.data), (self,), "tanh")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad * (1.0 - out.data * out.data))
            out._backward = bw
        return out

    def exp(self):
        # overflow becomes a NumericError via the finiteness check, not a warning
        with np.errstate(over="ignore"):
            out = _result(np.exp(self.data), (self,), "exp")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad * out.data)
            out._backward = bw
        return out

    def square(self):
        with np.errstate(over="ignore"):
            out = _result(self.data * self.data, (self,), "square")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad * 2.0 * self.data)
            out._backward = bw
        return out

    # -- reductions -----------------------------------------------------------

    def sum(self):
        out = _result(self.data.sum(), (self,), "sum")
        if out.requires_grad:
            def bw():
                _accum(self, np.broadcast_to(out.grad, self.data.shape))
            out._backward = bw
        return out

    def mean(self):
        return self.sum() / self.data.size

    def sum_axis(self, axis, keepdims=False):
        axis = (axis,) if isinstance(axis, int) else tuple(axis)
        out = _result(self.data.sum(axis=axis, keepdims=keepdims), (self,), "sum_axis")
        if out.requires_grad:
            kept = list(self.data.shape)
            for ax in axis:
                kept[ax] = 1
            def bw():
                g = out.grad.reshape(kept)
                _accum(self, np.broadcast_to(g, self.data.shape))
            out._backward = bw
        return out

    def mean_axis(self, axis, keepdims=False):
        axis = (axis,) if isinstance(axis, int) else tuple(axis)
        count = 1
        for ax in axis:
            count *= self.data.shape[ax]
        return self.sum_axis(axis, keepdims=keepdims) / count

    # -- shape ops ------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = _result(self.data.reshape(shape), (self,), "reshape")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad.reshape(self.data.shape))
            out._backward = bw
        return out

    @property
    def T(self):
        if self.ndim != 2:
            raise ShapeError("T expects a 2-d tensor")
        out = _result(self.data.T, (self,), "transpose")
        if out.requires_grad:
            def bw():
                _accum(self, out.grad.T)
            out._backward = bw
        return out

    def narrow(self, axis, start, length):
        """Contiguous slice [start, start+length) along one axis."""
        idx = [slice(None)] * self.ndim
        idx[axis] = slice(start, start + length)
        idx = tuple(idx)
        out = _result(self.data[idx], (self,), "narrow")
        if out.requires_grad:
            def bw():
                g = np.zeros_like(self.data)
                g[idx] = out.grad
                _accum(self, g)
            out._backward = bw
        return out


def _wrap(value, like):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


def _result(data, parents, op):
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data if isinstance(data, np.ndarray) else np.asarray(data)
    out.grad = None
    out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
    out._parents = tuple(parents) if out.requires_grad else ()
    out._backward = None
    return out


def _toposort(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def concat(tensors, axis=0):
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of an empty list")
    out = _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), "concat")
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        def bw():
            offset = 0
            for t, size in zip(tensors, sizes):
                idx = [slice(None)] * out.data.ndim
                idx[axis] = slice(offset, offset + size)
                _accum(t, out.grad[tuple(idx)])
                offset += size
        out._backward = bw
    return out


def stack_rows(tensors):
    """Stack 1-d tensors of equal length into a (n, d) matrix."""
    return concat([t.reshape(1, -1) for t in tensors], axis=0)


def conv2d(x, kernel, bias, stride=1, pad=0):
    """2-d convolution over a batched (B, C, H, W) input.

    kernel is (O, C, kh, kw); output is (B, O, Ho, Wo) with
    Ho = (H + 2*pad - kh)//stride + 1.
    """
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError("conv2d expects 4-d input and kernel")
    B, C, H, W = x.shape
    O, Ck, kh, kw = kernel.shape
    if Ck != C:
        raise ShapeError(f"conv2d channel mismatch: input {C}, kernel {Ck}")
    Ho = (H + 2 * pad - kh) // stride + 1
    Wo = (W + 2 * pad - kw) // stride + 1
    if Ho < 1 or Wo < 1:
        raise ShapeError("conv2d output would be empty")

    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    L = Ho * Wo
    cols = np.empty((B, C, kh * kw, L), dtype=x.data.dtype)
    offsets = [(di, dj) for di in range(kh) for dj in range(kw)]
    for idx, (di, dj) in enumerate(offsets):
        patch = xp[:, :, di:di + stride * Ho:stride, dj:dj + stride * Wo:stride]
        cols[:, :, idx, :] = patch.reshape(B, C, L)
    cols2 = cols.reshape(B, C * kh * kw, L)
    w2 = kernel.data.reshape(O, C * kh * kw)
    out_data = np.matmul(w2, cols2).reshape(B, O, Ho, Wo) + bias.data.reshape(1, O, 1, 1)

    out = _result(out_data, (x, kernel, bias), "conv2d")
    if out.requires_grad:
        def bw():
            g = out.grad.reshape(B, O, L)
            _accum(bias, out.grad.sum(axis=(0, 2, 3)))
            gw2 = np.matmul(g, cols2.transpose(0, 2, 1)).sum(axis=0)
            _accum(kernel, gw2.reshape(kernel.data.shape))
            if x.requires_grad:
                gcols = np.matmul(w2.T, g).reshape(B, C, kh * kw, L)
                gxp = np.zeros_like(xp)
                for idx, (di, dj) in enumerate(offsets):
                    gxp[:, :, di:di + stride * Ho:stride, dj:dj + stride * Wo:stride] += \
                        gcols[:, :, idx, :].reshape(B, C, Ho, Wo)
                _accum(x, gxp[:, :, pad:pad + H, pad:pad + W] if pad else gxp)
        out._backward = bw
    return out
