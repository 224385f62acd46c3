"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError
from .tensor import no_grad


def grad_check(f, store, h=1e-5, sample_per_param=None, rng=None):
    """Max relative error between autodiff and central finite differences.

    f must be a pure scalar function of the store's parameters (it is
    re-evaluated many times). Checks every element by default; pass
    sample_per_param to probe a random subset of each tensor instead.
    Use a float64 store: 32-bit has no headroom at h=1e-5.
    """
    if store.dtype != np.float64:
        raise NumericError("grad_check requires a float64 ParamStore")

    store.zero_grad()
    loss = f(store)
    loss.backward()
    analytic = {name: store.params[name].grad.copy() for name in store.names()}

    max_rel = 0.0
    for name in store.names():
        flat = store.params[name].data.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        if sample_per_param is not None and flat.size > sample_per_param:
            if rng is None:
                rng = np.random.default_rng(0)
            idxs = rng.choice(flat.size, size=sample_per_param, replace=False)
        else:
            idxs = range(flat.size)
        for i in idxs:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + h
                f_plus = f(store).item()
                flat[i] = orig - h
                f_minus = f(store).item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            rel = abs(a_flat[i] - numeric) / max(abs(a_flat[i]), abs(numeric), 1e-6)
            max_rel = max(max_rel, rel)
    return max_rel
