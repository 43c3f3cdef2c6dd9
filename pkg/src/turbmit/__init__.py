"""Turbulence mitigation: registration, lucky-frame fusion, deblurring and refinement."""

from .config import PipelineConfig, load_config
from .kernels import BACKEND
from .pipeline import restore, restore_sequence

__version__ = "0.1.0"

__all__ = ["BACKEND", "PipelineConfig", "__version__", "load_config", "restore", "restore_sequence"]
