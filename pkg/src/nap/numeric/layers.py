"""Layer-level forward ops built on the tensor core."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, conv2d, stack_rows


def linear(x, W, b):
    """Affine map y = W x + b.

    W is (m, n). x may be a vector (n,) or a batch (B, n); the batch case
    applies the same map row-wise.
    """
    if isinstance(x, np.ndarray):
        x = Tensor(x)
    if W.ndim != 2:
        raise ShapeError("linear weight must be 2-d")
    if x.ndim == 1:
        if x.shape[0] != W.shape[1]:
            raise ShapeError(f"linear shapes x{x.shape} W{W.shape}")
        return (x.reshape(1, -1) @ W.T + b).reshape(-1)
    if x.ndim == 2:
        if x.shape[1] != W.shape[1]:
            raise ShapeError(f"linear shapes x{x.shape} W{W.shape}")
        return x @ W.T + b
    raise ShapeError("linear input must be 1-d or 2-d")


@dataclass
class LstmState:
    hidden: Tensor
    cell: Tensor


@dataclass
class LstmWeights:
    """Combined gate weights, gate order i, f, g, o along the first axis."""

    w_x: Tensor  # (4H, n)
    w_h: Tensor  # (4H, H)
    b: Tensor    # (4H,)


def lstm_zero_state(hidden_dim, batch=None, dtype=np.float32):
    shape = (hidden_dim,) if batch is None else (batch, hidden_dim)
    zeros = np.zeros(shape, dtype=dtype)
    return LstmState(Tensor(zeros), Tensor(zeros.copy()))


def lstm_cell(state, x, weights):
    """One LSTM step: sigmoid input/forget/output gates, tanh candidate."""
    squeeze = x.ndim == 1
    if squeeze:
        x = x.reshape(1, -1)
        h = state.hidden.reshape(1, -1)
        c = state.cell.reshape(1, -1)
    else:
        h, c = state.hidden, state.cell
    H = weights.w_h.shape[1]
    if weights.w_x.shape[0] != 4 * H or x.shape[1] != weights.w_x.shape[1]:
        raise ShapeError("lstm_cell weight/input shapes do not conform")
    pre = x @ weights.w_x.T + h @ weights.w_h.T + weights.b
    i = pre.narrow(1, 0, H).sigmoid()
    f = pre.narrow(1, H, H).sigmoid()
    g = pre.narrow(1, 2 * H, H).tanh()
    o = pre.narrow(1, 3 * H, H).sigmoid()
    c_next = f * c + i * g
    h_next = o * c_next.tanh()
    if squeeze:
        return LstmState(h_next.reshape(-1), c_next.reshape(-1))
    return LstmState(h_next, c_next)


def graph_conv(self_idx, node_feats, W, b):
    """One-hop graph convolution: ReLU(b + mean over neighbors of W a_j).

    node_feats is the list of node feature vectors. When self_idx is an
    index, that entry is treated as the self node and dropped from the mean;
    self_idx=None means the list already holds only neighbors. An empty
    neighbor set contributes a zero mean, so the result is ReLU(b).
    """
    feats = list(node_feats)
    if self_idx is not None:
        if not 0 <= self_idx < len(feats):
            raise ShapeError(f"self_idx {self_idx} out of range")
        feats = feats[:self_idx] + feats[self_idx + 1:]
    if not feats:
        return b.relu()
    A = stack_rows([f if isinstance(f, Tensor) else Tensor(f) for f in feats])
    if A.shape[1] != W.shape[1]:
        raise ShapeError(f"graph_conv shapes feats{A.shape} W{W.shape}")
    mean = (A @ W.T).mean_axis(0)
    return (mean + b).relu()


@dataclass
class ConvNetWeights:
    k1: Tensor      # (8, C, 3, 3)
    b1: Tensor      # (8,)
    k2: Tensor      # (16, 8, 3, 3)
    b2: Tensor      # (16,)
    w_out: Tensor   # (d_s, 16)
    b_out: Tensor   # (d_s,)


def conv_net_batch(grids, weights):
    """Scene CNN over a (B, C, H, W) batch -> (B, d_s) features.

    conv(C->8, 3x3, stride 2, pad 1, ReLU) -> conv(8->16, same) ->
    global average pool -> linear(16 -> d_s).
    """
    y = conv2d(grids, weights.k1, weights.b1, stride=2, pad=1).relu()
    y = conv2d(y, weights.k2, weights.b2, stride=2, pad=1).relu()
    pooled = y.mean_axis((2, 3))
    return linear(pooled, weights.w_out, weights.b_out)


def conv_net(grid, weights):
    """Scene CNN on a single (C, H, W) grid -> (d_s,) feature."""
    if grid.ndim != 3:
        raise ShapeError("conv_net expects a (C, H, W) grid")
    C, H, W = grid.shape
    return conv_net_batch(grid.reshape(1, C, H, W), weights).reshape(-1)


def init_lstm(store, prefix, in_dim, hidden_dim):
    return LstmWeights(
        w_x=store.uniform(f"{prefix}.w_x", (4 * hidden_dim, in_dim)),
        w_h=store.uniform(f"{prefix}.w_h", (4 * hidden_dim, hidden_dim)),
        b=store.zeros(f"{prefix}.b", (4 * hidden_dim,)),
    )


def init_conv_net(store, prefix, in_channels, d_s):
    return ConvNetWeights(
        k1=store.uniform(f"{prefix}.k1", (8, in_channels, 3, 3)),
        b1=store.zeros(f"{prefix}.b1", (8,)),
        k2=store.uniform(f"{prefix}.k2", (16, 8, 3, 3)),
        b2=store.zeros(f"{prefix}.b2", (16,)),
        w_out=store.uniform(f"{prefix}.w_out", (d_s, 16)),
        b_out=store.zeros(f"{prefix}.b_out", (d_s,)),
    )
