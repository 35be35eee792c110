"""Synthetic contaminated designs, prediction error and the equivariance experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DesignError, RobsubError
from .kernels import random_orthogonal, standardized_last_angle

__all__ = [
    "SimulationDesign",
    "LabeledSample",
    "eigenvalue_profile",
    "highdim_slope",
    "generate_sample",
    "rep_rng",
    "relative_prediction_error",
    "optimal_basis",
    "equivariance_experiment",
]

DESIGN_A = "a"
DESIGN_B = "b"
HIGHDIM = "hd"
DESIGNS = (DESIGN_A, DESIGN_B, HIGHDIM)


@dataclass(frozen=True)
class SimulationDesign:
    """Clean N(0, diag(lambda)) rows plus a fraction ``eps`` of outliers.

    Outliers are drawn from N(k x0, 0.25 diag(lambda)) with x0 equal to one
    on the first p - q coordinates (the low-variance directions). For the
    high-dimensional design, ``explained`` is the share of total variance
    carried by the top q eigenvalues.
    """

    kind: str = DESIGN_A
    n: int = 100
    p: int = 10
    q: int = 2
    eps: float = 0.0
    k: float = 0.0
    seed: int = 0
    explained: float = 0.8

    def __post_init__(self):
        if self.kind not in DESIGNS:
            raise DesignError(f"unknown design {self.kind!r}; expected one of {DESIGNS}")
        if self.n < 1 or self.p < 2:
            raise DesignError("need n >= 1 and p >= 2")
        if not 1 <= self.q < self.p:
            raise DesignError(f"need 1 <= q < p, got q={self.q}, p={self.p}")
        if not 0.0 <= self.eps < 0.5:
            raise DesignError(f"eps must be in [0, 0.5), got {self.eps}")
        if self.k < 0:
            raise DesignError(f"k must be >= 0, got {self.k}")
        if not 0.0 < self.explained < 1.0:
            raise DesignError("explained must be in (0, 1)")

    @property
    def n_outliers(self):
        return int(math.floor(self.n * self.eps))

    def with_k(self, k):
        return replace(self, k=k)


@dataclass
class LabeledSample:
    X: np.ndarray
    is_outlier: np.ndarray
    Sigma_diag: np.ndarray


def highdim_slope(p, q, explained=0.8):
    """Slope c of the small eigenvalues 1 + c j giving the top q the target share.

    Closed form of ``S_q / (S_q + sum_{j<=p-q} (1 + c j)) = explained`` with
    ``S_q = 20 q + 5 q (q + 1)``.
    """
    r = p - q
    top = 20.0 * q + 5.0 * q * (q + 1)
    c = 2.0 * (top * (1.0 - explained) / explained - r) / (r * (r + 1))
    if not c > 0:
        limit = top / (top + r)
        raise DesignError(
            f"top {q} directions cannot explain {explained:.0%} of the variance at "
            f"p={p} with eigenvalues 1 + c*j, c > 0 (largest attainable share "
            f"{limit:.4f}); lower the explained share"
        )
    return c


def eigenvalue_profile(design):
    p, q = design.p, design.q
    j = np.arange(1, p + 1, dtype=float)
    if design.kind == DESIGN_B:
        return 2.0 ** (j - 1)
    lam = np.empty(p)
    low = j <= p - q
    slope = 0.1 if design.kind == DESIGN_A else highdim_slope(p, q, design.explained)
    lam[low] = 1.0 + slope * j[low]
    lam[~low] = 20.0 * (1.0 + 0.5 * (j[~low] - p + q))
    return lam


def rep_rng(seed, rep):
    """Independent generator for replication ``rep`` of a run seeded by ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(rep)]))


def generate_sample(design, rng=None):
    """Draw one sample; outliers are the last ``floor(n * eps)`` rows."""
    if rng is None:
        rng = np.random.default_rng(design.seed)
    lam = eigenvalue_profile(design)
    sd = np.sqrt(lam)
    n_out = design.n_outliers
    n_clean = design.n - n_out
    clean = rng.standard_normal((n_clean, design.p)) * sd
    x0 = np.zeros(design.p)
    x0[: design.p - design.q] = 1.0
    out = design.k * x0 + rng.standard_normal((n_out, design.p)) * (0.5 * sd)
    X = np.vstack([clean, out])
    flags = np.zeros(design.n, dtype=bool)
    flags[n_clean:] = True
    return LabeledSample(X=X, is_outlier=flags, Sigma_diag=lam)


def optimal_basis(p, q):
    """The last q coordinate axes: optimal for ascending eigenvalues."""
    return np.eye(p)[:, p - q:]


def relative_prediction_error(B_hat, Sigma_diag, q=None):
    """Unexplained out-of-sample variance relative to the optimum, minus one.

    ``Sigma_diag`` holds the true eigenvalues in ascending order.
    """
    B = np.asarray(B_hat, dtype=float)
    lam = np.asarray(Sigma_diag, dtype=float)
    q = B.shape[1] if q is None else q
    if B.shape != (lam.size, q):
        raise ValueError(f"basis shape {B.shape} does not match p={lam.size}, q={q}")
    if np.linalg.norm(B.T @ B - np.eye(q)) > 1e-8:
        raise ValueError("B_hat is not orthonormal")
    total = lam.sum()
    u_pred = 1.0 - float(np.einsum("jk,j,jk->", B, lam, B)) / total
    u_opt = lam[: lam.size - q].sum() / total
    return u_pred / u_opt - 1.0


def _basis(result):
    return np.asarray(getattr(result, "B", result), dtype=float)


def equivariance_experiment(method, design, reps, seed=0):
    """Standardized last principal angle between B(X) and P^T B(X P^T) per rep.

    Returns a list with one float per replication, or the exception raised by
    ``method`` for that replication.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    out = []
    for rep in range(reps):
        rng = rep_rng(seed, rep)
        sample = generate_sample(design, rng)
        P = random_orthogonal(design.p, design.p, rng)
        try:
            B = _basis(method(sample.X))
            B_rot = P.T @ _basis(method(sample.X @ P.T))
            out.append(standardized_last_angle(B, B_rot))
        except RobsubError as exc:
            out.append(exc)
    return out
