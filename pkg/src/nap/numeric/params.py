"""Named parameter store, init scheme, Adam, and global-norm clipping."""

from __future__ import annotations

import math

import numpy as np

from ..errors import NumericError, ShapeError
from .rng import substream
from .tensor import Tensor


class ParamStore:
    """Map name -> trainable Tensor, plus Adam state and a step counter.

    Initialization is keyed by (seed, "init", name) so parameter values do
    not depend on creation order.
    """

    def __init__(self, seed=0, dtype=np.float32):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self.params = {}
        self.adam_m = {}
        self.adam_v = {}
        self.step = 0

    def _register(self, name, data):
        if name in self.params:
            raise ShapeError(f"duplicate parameter name '{name}'")
        t = Tensor(data.astype(self.dtype), requires_grad=True)
        self.params[name] = t
        self.adam_m[name] = np.zeros_like(t.data)
        self.adam_v[name] = np.zeros_like(t.data)
        return t

    def uniform(self, name, shape):
        """Weight init: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); fan_in = prod(shape[1:])."""
        fan_in = 1
        for n in shape[1:]:
            fan_in *= n
        bound = 1.0 / math.sqrt(max(fan_in, 1))
        rng = substream(self.seed, "init", name)
        return self._register(name, rng.uniform(-bound, bound, size=shape))

    def zeros(self, name, shape):
        return self._register(name, np.zeros(shape))

    def constant(self, name, data):
        return self._register(name, np.array(data, dtype=self.dtype))

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def names(self):
        return sorted(self.params)

    def zero_grad(self):
        for t in self.params.values():
            t.grad = np.zeros_like(t.data)

    def n_elements(self):
        return sum(t.data.size for t in self.params.values())


def clip_global_norm(store, max_norm):
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the pre-clip norm. max_norm = inf is the identity.
    """
    total = 0.0
    for name in store.names():
        g = store.params[name].grad
        if g is None:
            raise NumericError(f"missing gradient for '{name}'")
        total += float(np.sum(g.astype(np.float64) ** 2))
    norm = math.sqrt(total)
    if math.isfinite(max_norm) and norm > max_norm and norm > 0:
        scale = max_norm / norm
        for name in store.names():
            store.params[name].grad *= scale
    return norm


def adam_step(store, lr=0.001, betas=(0.9, 0.999), eps=1e-8):
    """Standard Adam update with bias correction; increments the step counter."""
    b1, b2 = betas
    store.step += 1
    t = store.step
    for name in store.names():
        p = store.params[name]
        g = p.grad
        if g is None:
            raise NumericError(f"missing gradient for '{name}'")
        m = store.adam_m[name]
        v = store.adam_v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.data.dtype)
    return store
