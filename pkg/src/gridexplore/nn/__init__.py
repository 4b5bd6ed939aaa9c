from .tensor import GraphError, Tensor, concat, no_grad
from .layers import (
    BatchNorm,
    CnnEncoder,
    Conv2d,
    Dense,
    GruCell,
    LayerNorm,
    Mlp,
    Module,
    make_norm,
    orthogonal,
)
from .optim import Adam, clip_grad_norm
from .serialize import BlobError, pack_arrays, unpack_arrays

__all__ = [
    "Adam",
    "BatchNorm",
    "BlobError",
    "CnnEncoder",
    "Conv2d",
    "Dense",
    "GraphError",
    "GruCell",
    "LayerNorm",
    "Mlp",
    "Module",
    "Tensor",
    "clip_grad_norm",
    "concat",
    "make_norm",
    "no_grad",
    "orthogonal",
    "pack_arrays",
    "unpack_arrays",
]
