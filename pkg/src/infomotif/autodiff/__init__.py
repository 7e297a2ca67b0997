"""Minimal dense/sparse reverse-mode autodiff and Adam."""
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check, relative_error
from .optim import Adam, AdamState, adam_step
from .tensor import (ContractError, ExprGraph, ShapeError, Tensor, add, backward,
                     bce_from_prob, concat, constant, cross_entropy_logits, default_dtype,
                     dropout, evaluate, exp, gather_rows, getitem, gradients, iter_graph, log,
                     matmul, mean, mix_rows, mul, parameter, relu, reshape, row_softmax, rowdot,
                     set_default_dtype, sigmoid, sparse_dropout, spmm, sub, sum, transpose,
                     using_dtype, vjp)
from .determinism import deterministic, set_deterministic

__all__ = [
    "Adam", "AdamState", "CheckpointError", "ContractError", "ExprGraph", "GradCheckReport",
    "ShapeError", "Tensor", "adam_step", "add", "backward", "bce_from_prob", "concat",
    "constant", "cross_entropy_logits", "default_dtype", "deterministic", "dropout",
    "evaluate", "exp", "gather_rows", "getitem", "grad_check", "gradients", "iter_graph",
    "load_checkpoint", "log", "matmul", "mean", "mix_rows", "mul", "parameter", "relative_error", "relu",
    "reshape", "row_softmax", "rowdot", "save_checkpoint", "set_default_dtype", "set_deterministic",
    "sigmoid", "sparse_dropout", "spmm", "sub", "sum", "transpose", "using_dtype", "vjp",
]
