"""Fast robust subspace estimation: subspace S- and LTS-estimators."""

from .baselines import classical_pca, spherical_pca
from .errors import (
    DegenerateFitError,
    DesignError,
    RobsubError,
    ScaleConvergenceError,
    ZeroScaleColumnError,
)
from .estimator import (
    AlgorithmParams,
    StartValue,
    SubspaceFit,
    eigen_residual,
    fit_deterministic,
    fit_random,
    iterate_fit,
)
from .scales import ScaleSpec

__version__ = "0.1.0"

__all__ = [
    "AlgorithmParams",
    "DegenerateFitError",
    "DesignError",
    "RobsubError",
    "ScaleConvergenceError",
    "ScaleSpec",
    "StartValue",
    "SubspaceFit",
    "ZeroScaleColumnError",
    "classical_pca",
    "eigen_residual",
    "fit_deterministic",
    "fit_random",
    "iterate_fit",
    "spherical_pca",
]
