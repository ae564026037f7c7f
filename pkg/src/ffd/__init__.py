"""Fast Fruit Detector: single-scale, NMS-free detection from tiled latent queries."""

from .errors import ConfigError, DataError, DimensionError, FFDError, NumericalError
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "DimensionError", "FFDError", "KERNEL_BACKEND",
           "NumericalError", "__version__"]
