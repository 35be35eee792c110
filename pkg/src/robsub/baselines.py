"""Classical and spherical PCA, used as reference estimators."""

from __future__ import annotations

import numpy as np

from .estimator import SubspaceFit, _check_problem, distances
from .kernels import als_pca, spatial_median

__all__ = ["classical_pca", "spherical_pca"]

TIGHT_TOL = 1e-10
MAX_PASSES = 5000


def _fit_from_basis(X, B, m, label):
    A = (X - m) @ B
    d = distances(X, B, A, m)
    n = X.shape[0]
    return SubspaceFit(
        B=B, A=A, m=m, scale=float(np.sqrt(np.mean(d * d))), weights=np.ones(n),
        distances=d, converged=True, start_id=label,
    )


def classical_pca(X, q, tol=TIGHT_TOL, max_passes=MAX_PASSES):
    """Mean-centered PCA; the ``scale`` field is the RMS orthogonal distance."""
    X = _check_problem(X, q)
    m = X.mean(axis=0)
    res = als_pca(X - m, q, N3=max_passes, tol=tol)
    fit = _fit_from_basis(X, res.B, m, "pca")
    fit.iterations = res.iterations
    return fit


def spherical_pca(X, q, tol=TIGHT_TOL, max_passes=MAX_PASSES):
    """PCA of the observations projected on the unit sphere around the spatial median.

    Scores and distances are reported for the original (unprojected) data.
    """
    X = _check_problem(X, q)
    m = spatial_median(X)
    Y = X - m
    norms = np.linalg.norm(Y, axis=1)
    S = np.zeros_like(Y)
    nz = norms > 0
    S[nz] = Y[nz] / norms[nz, None]
    res = als_pca(S, q, N3=max_passes, tol=tol)
    fit = _fit_from_basis(X, res.B, m, "spc")
    fit.iterations = res.iterations
    return fit
