"""Numerical toolkit for special Kähler structures on the punctured unit disk."""

from .fields import DomainError, HarmonicExpansion, PointPolar, ScalarExpression, SchemaError
from .models import ModelSpec, SpecialKahlerData, flat_cone, fundamental_example, log_model

__all__ = [
    "DomainError",
    "HarmonicExpansion",
    "ModelSpec",
    "PointPolar",
    "ScalarExpression",
    "SchemaError",
    "SpecialKahlerData",
    "flat_cone",
    "fundamental_example",
    "log_model",
]

__version__ = "0.1.0"
