from .tensor import (ShapeError, Tensor, add, backward, concat, cross_entropy, default_dtype,
                     dropout, embedding_lookup, gelu, getitem, layer_norm, mask_add, matmul,
                     mean, mul, precision, relu, reshape, scale, set_default_dtype, softmax,
                     transpose, tsum)
from .nn import (ConfigError, EncoderConfig, Linear, LayerNorm, Module, MultiHeadAttention,
                 TransformerEncoder)
from .optim import Adam, OptimizerState
from .gradcheck import GradCheckReport, finite_difference_check

__all__ = [
    "ShapeError", "Tensor", "add", "backward", "concat", "cross_entropy", "default_dtype",
    "dropout", "embedding_lookup", "gelu", "getitem", "layer_norm", "mask_add", "matmul",
    "mean", "mul", "precision", "relu", "reshape", "scale", "set_default_dtype", "softmax",
    "transpose", "tsum", "ConfigError", "EncoderConfig", "Linear", "LayerNorm", "Module",
    "MultiHeadAttention", "TransformerEncoder", "Adam", "OptimizerState", "GradCheckReport",
    "finite_difference_check",
]
