from .tensor import ParamSet, ShapeError, Tensor, REFERENCE, TRAINABLE
from .tape import Node, Tape
from .net import init_mlp, mlp_forward
from .optim import AdamConfig, AdamState, adam_step, clip_grads_, global_grad_norm
from .gradcheck import check_gradients, fd_gradient

__all__ = [
    "ParamSet", "ShapeError", "Tensor", "REFERENCE", "TRAINABLE",
    "Node", "Tape",
    "init_mlp", "mlp_forward",
    "AdamConfig", "AdamState", "adam_step", "clip_grads_", "global_grad_norm",
    "check_gradients", "fd_gradient",
]
