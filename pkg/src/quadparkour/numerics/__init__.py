from .tensor import (
    Tensor,
    Tape,
    no_grad,
    backward,
    set_default_dtype,
    get_default_dtype,
    tensor,
    zeros,
    add,
    sub,
    mul,
    div,
    neg,
    matmul,
    conv2d,
    conv1d,
    tanh,
    elu,
    exp,
    log,
    clip,
    minimum,
    maximum,
    tsum,
    tmean,
    reshape,
    swap_last_axes,
    concat,
    DimensionError,
)
from .optim import Adam

__all__ = [
    "Tensor",
    "Tape",
    "no_grad",
    "backward",
    "set_default_dtype",
    "get_default_dtype",
    "tensor",
    "zeros",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "conv2d",
    "conv1d",
    "tanh",
    "elu",
    "exp",
    "log",
    "clip",
    "minimum",
    "maximum",
    "tsum",
    "tmean",
    "reshape",
    "swap_last_axes",
    "concat",
    "DimensionError",
    "Adam",
]
