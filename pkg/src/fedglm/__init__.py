"""Distributed linear and generalized linear models from shared QR factors."""
from .glm import Family, fit_glm
from .linalg import TriangularFactor, merge_factors, thin_r
from .lm import FitResult, fit_lm

__version__ = "0.1.0"
__all__ = ["Family", "FitResult", "TriangularFactor", "fit_glm", "fit_lm",
           "merge_factors", "thin_r"]
