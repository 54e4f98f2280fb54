"""Filament estimation for planar point clouds: tube supports, EDT and medial estimators."""

from .kernels import BACKEND
from .model import FilamentCurve, SupportModel, build_curve
from .sampler import NoiseSpec, SamplerConfig, sample
from .support import estimate_support

__version__ = "0.1.0"

__all__ = ["BACKEND", "FilamentCurve", "SupportModel", "build_curve", "NoiseSpec", "SamplerConfig", "sample",
           "estimate_support", "__version__"]
