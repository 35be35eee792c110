"""Deterministic robust starting values for the subspace estimators.

Five transformations of the robustly standardized data (tanh, ranks, normal
scores, spatial signs and the standardized data itself) each give a rough PCA
basis. Projecting the standardized data on that basis and keeping the half of
the rows closest to the origin yields a clean subset, whose classical PCA
subspace and mean form one start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .errors import ZeroScaleColumnError
from .estimator import StartValue
from .kernels import als_pca
from .scales import qn_columns

__all__ = [
    "TransformSet",
    "robust_standardize",
    "build_transforms",
    "select_subset",
    "deterministic_start_set",
    "START_LABELS",
]

START_LABELS = ("tanh", "rank", "normal_scores", "spatial_sign", "standardized")


@dataclass
class TransformSet:
    U1: np.ndarray
    U2: np.ndarray
    U3: np.ndarray
    U4: np.ndarray
    U5: np.ndarray

    def __iter__(self):
        return iter((self.U1, self.U2, self.U3, self.U4, self.U5))


def robust_standardize(X, what="column"):
    """Subtract the column medians and divide by the column Qn scales."""
    X = np.asarray(X, dtype=float)
    centers = np.median(X, axis=0)
    scales = qn_columns(X)
    bad = np.flatnonzero(~(scales > 0))
    if bad.size:
        raise ZeroScaleColumnError(int(bad[0]), what=what)
    return (X - centers) / scales, centers, scales


def build_transforms(X, Z):
    """The five transformed data matrices used to build the starts."""
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n = X.shape[0]
    U1, _, _ = robust_standardize(np.tanh(Z), what="tanh-transformed column")
    U2 = rankdata(X, method="average", axis=0).astype(float)
    U3 = ndtri((U2 - 1.0 / 3.0) / (n + 1.0 / 3.0))
    norms = np.linalg.norm(Z, axis=1)
    signs = np.zeros_like(Z)
    nz = norms > 0
    signs[nz] = Z[nz] / norms[nz, None]
    U4, _, _ = robust_standardize(signs, what="spatial-sign column")
    return TransformSet(U1, U2, U3, U4, Z)


def select_subset(scores, size):
    """Indices of the ``size`` rows with the smallest Euclidean norm.

    Ties are broken by ascending row index.
    """
    norms = np.linalg.norm(scores, axis=1)
    return np.sort(np.argsort(norms, kind="stable")[:size])


def deterministic_start_set(X, q, N3=3, tol=1e-6):
    """Five ``StartValue`` objects, in the order tanh, ranks, normal scores,
    spatial signs, standardized data."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    half = math.ceil(n / 2)
    if n < 4:
        raise ValueError(f"deterministic starts need n >= 4, got n={n}")
    if q > min(half, p):
        raise ValueError(f"q={q} exceeds min(ceil(n/2), p)={min(half, p)}")
    Z, _, _ = robust_standardize(X)
    starts = []
    for label, U in zip(START_LABELS, build_transforms(X, Z)):
        B_rough = als_pca(U - U.mean(axis=0), q, N3=N3, tol=tol).B
        idx = select_subset(Z @ B_rough, half)
        sub = X[idx]
        m = sub.mean(axis=0)
        B0 = als_pca(sub - m, q, N3=N3, tol=tol).B
        starts.append(StartValue(B0=B0, m0=m, label=label))
    return starts
