"""Simplex-volume alignment of language, image, and flow embeddings on the unit sphere."""

__version__ = "0.1.0"

from .contrastive import NegativeMode, NegativePolicy, TupleBatch, info_nce, loss_grad
from .energy import EnergyParams, Pair, area_grad, energy, energy_grad
from .errors import SimplexAlignError
from .sphere import normalize, simplex_volume, tangent_project, triangle_area

__all__ = [
    "EnergyParams",
    "NegativeMode",
    "NegativePolicy",
    "Pair",
    "SimplexAlignError",
    "TupleBatch",
    "area_grad",
    "energy",
    "energy_grad",
    "info_nce",
    "loss_grad",
    "normalize",
    "simplex_volume",
    "tangent_project",
    "triangle_area",
]
