from .layers import (LayerParams, conv2d, conv2d_backward, dense, dense_backward, relu, relu_backward,
                     init_conv, init_dense, conv_output_size)
from .losses import softmax, softmax_cross_entropy, l1_loss
from .optim import AdamState, adam_step
from .gradcheck import GradCheckResult, grad_check, relative_error
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "LayerParams", "conv2d", "conv2d_backward", "dense", "dense_backward", "relu", "relu_backward",
    "init_conv", "init_dense", "conv_output_size", "softmax", "softmax_cross_entropy", "l1_loss",
    "AdamState", "adam_step", "GradCheckResult", "grad_check", "relative_error", "save_checkpoint", "load_checkpoint",
]
