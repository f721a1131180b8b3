"""Numerical laboratory for two-dimensional affine special Kähler metrics.

A metric ``g = e^{-u}|dz|^2`` is special Kähler when ``(h, u, a)`` satisfy
``Laplace(h) = 0`` and ``Laplace(u) = |dh + a phi|^2 e^{2u}``.  The
subpackages build such data, solve for u, verify the connection identities
and classify isolated singularities into the power and logarithmic branches.
"""

from ._kernels import BACKEND
from .catalog import ClosedFormMetric, HarmonicSpec, get_metric, list_metrics
from .field_core import AnnulusGrid, ComplexField, OneForm, ScalarField
from .kw_solver import KwProblem, KwSolution, solve, solve_with_exponent
from .singularity import Classification, RadialProfile, classify, extract_profile

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AnnulusGrid", "ScalarField", "OneForm", "ComplexField", "HarmonicSpec",
    "ClosedFormMetric", "get_metric", "list_metrics", "KwProblem", "KwSolution", "solve",
    "solve_with_exponent", "Classification", "RadialProfile", "classify", "extract_profile",
]
