"""Desk-scale image-text retrieval workbench.

Dense-matrix autodiff kernel, a two-pipeline retrieval model with style
extraction and shared-memory gating, the paired training losses, a recall
evaluator, synthetic and file-backed corpora, and a service/CLI wrapper.
"""
from .errors import (CkstnError, ConfigError, DimensionError, IoError,
                     NumericError, ValidationError)
from .tensor import Tensor, no_grad

__version__ = "0.1.0"

__all__ = [
    "CkstnError", "ConfigError", "DimensionError", "IoError",
    "NumericError", "ValidationError", "Tensor", "no_grad", "__version__",
]
