"""Convolutional model generator: layers, architecture, checkpoints."""

from .layers import (
    bilinear_upsample2,
    bilinear_upsample2_backward,
    conv2d_valid,
    conv2d_valid_backward,
    crop2d,
    crop2d_backward,
    dense_backward,
    dense_forward,
    dropout,
    dropout_backward,
    leaky_relu,
    leaky_relu_backward,
    nearest_upsample2,
    nearest_upsample2_backward,
    scale_neg8,
    scale_neg8_backward,
    sigmoid,
    sigmoid_backward,
    transposed_conv2,
    transposed_conv2_backward,
)
from .model import (
    ArchConfig,
    ForwardTrace,
    NetParams,
    arch_for_mesh,
    init_params,
    load_params,
    net_backward,
    net_forward,
    param_count,
    sample_latent,
    save_params,
)

__all__ = [name for name in dir() if not name.startswith("_")]
