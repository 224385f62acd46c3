"""Dense-tensor numeric core: forward ops, reverse-mode autodiff, Adam, RNG."""

from .tensor import Tensor, concat, conv2d, no_grad, stack_rows
from .rng import gaussian_sample, substream
from .params import ParamStore, adam_step, clip_global_norm
from .layers import (
    ConvNetWeights,
    LstmState,
    LstmWeights,
    conv_net,
    conv_net_batch,
    graph_conv,
    linear,
    lstm_cell,
)
from .gradcheck import grad_check

__all__ = [
    "Tensor",
    "concat",
    "conv2d",
    "no_grad",
    "stack_rows",
    "gaussian_sample",
    "substream",
    "ParamStore",
    "adam_step",
    "clip_global_norm",
    "ConvNetWeights",
    "LstmState",
    "LstmWeights",
    "conv_net",
    "conv_net_batch",
    "graph_conv",
    "linear",
    "lstm_cell",
    "grad_check",
]
