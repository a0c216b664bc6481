"""Seedable chain generators for the built-in experiments."""

from .ar1 import ar1_truth, ar1_crossing_n
from .base import (
    AR1Grower,
    RWMHGrower,
    SamplerError,
    SamplerSpec,
    ar1_generate,
    open_sampler,
    rwmh_generate,
)
from .rng import stream
from .targets import AR1, Bimodal, Logistic, StudentT

__all__ = [
    "AR1",
    "AR1Grower",
    "Bimodal",
    "Logistic",
    "RWMHGrower",
    "SamplerError",
    "SamplerSpec",
    "StudentT",
    "ar1_crossing_n",
    "ar1_generate",
    "ar1_truth",
    "open_sampler",
    "rwmh_generate",
    "stream",
]
