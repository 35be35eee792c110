"""Basis utilities, spatial median, principal angles and the ALS PCA kernel."""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateFitError

__all__ = [
    "orthonormalize",
    "random_orthogonal",
    "canonical_basis",
    "spatial_median",
    "principal_angles",
    "standardized_last_angle",
    "solve_scores",
    "als_pca",
    "ALSResult",
]


def orthonormalize(B, rtol=1e-12):
    """Orthonormal basis of the column space of ``B``.

    Householder QR, then each column is flipped so that its largest-magnitude
    entry is positive, which makes the output reproducible bit for bit.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise ValueError("expected a p x q matrix")
    Q, R = np.linalg.qr(B)
    diag = np.abs(np.diag(R))
    if diag.size and (diag.min() <= rtol * max(diag.max(), np.finfo(float).tiny)):
        raise DegenerateFitError("basis matrix is rank deficient")
    idx = np.argmax(np.abs(Q), axis=0)
    signs = np.sign(Q[idx, np.arange(Q.shape[1])])
    signs[signs == 0] = 1.0
    return Q * signs


def random_orthogonal(p, q, rng):
    """Haar-distributed p x q orthonormal matrix (QR of a Gaussian matrix).

    The R-diagonal sign correction keeps the distribution exactly uniform on
    the Stiefel manifold.
    """
    if q > p:
        raise ValueError(f"q={q} exceeds p={p}")
    Z = rng.standard_normal((p, q))
    Q, R = np.linalg.qr(Z)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def canonical_basis(p, q):
    return np.eye(p, q)


def spatial_median(X, tol=1e-8, max_iter=200, init=None):
    """Minimizer of the sum of Euclidean distances to the rows of ``X``.

    Weiszfeld iterations with the Vardi-Zhang modification for iterates that
    coincide with a data point. Stops when the step norm falls below
    ``tol * max(1, |m|)`` or after ``max_iter`` iterations.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("spatial_median of an empty matrix")
    y = np.median(X, axis=0) if init is None else np.array(init, dtype=float)
    for _ in range(max_iter):
        diff = X - y
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        at = dist <= 1e-12
        if at.all():
            return y
        inv = np.zeros_like(dist)
        inv[~at] = 1.0 / dist[~at]
        T = inv @ X / inv.sum()
        eta = float(at.sum())
        if eta > 0:
            r = np.linalg.norm(inv @ diff)
            if r <= eta:
                # y is the optimum: the data point pulls harder than the rest
                return y
            gamma = eta / r
            new = (1.0 - gamma) * T + gamma * y
        else:
            new = T
        step = np.linalg.norm(new - y)
        y = new
        if step <= tol * max(1.0, np.linalg.norm(y)):
            break
    return y


def principal_angles(B1, B2):
    """Principal angles (ascending) between the column spans of B1 and B2.

    Cosines come from the singular values of ``B1^T B2``; small angles are
    taken from the sines, the singular values of ``B2 - B1 B1^T B2``, which
    keeps them accurate below ~1e-8 where arccos loses all precision.
    """
    B1 = np.asarray(B1, dtype=float)
    B2 = np.asarray(B2, dtype=float)
    if B1.shape != B2.shape:
        raise ValueError(f"dimension mismatch {B1.shape} vs {B2.shape}")
    M = B1.T @ B2
    cos = np.clip(np.linalg.svd(M, compute_uv=False), 0.0, 1.0)
    cos_angles = np.sort(np.arccos(cos))
    sin = np.clip(np.linalg.svd(B2 - B1 @ M, compute_uv=False), 0.0, 1.0)
    sin_angles = np.sort(np.arcsin(sin))
    return np.where(cos_angles < math.pi / 4, sin_angles, cos_angles)


def standardized_last_angle(B1, B2):
    """Largest principal angle divided by pi/2, in [0, 1]."""
    return float(principal_angles(B1, B2).max() / (math.pi / 2))


def solve_scores(Y, B):
    """Least-squares scores ``A`` minimizing ``|Y - A B^T|`` row by row."""
    G = B.T @ B
    rhs = Y @ B
    try:
        return np.linalg.solve(G, rhs.T).T
    except np.linalg.LinAlgError as exc:
        raise DegenerateFitError("singular basis Gram matrix") from exc


def _solve_basis(Y, A, w=None):
    if w is None:
        G = A.T @ A
        rhs = A.T @ Y
    else:
        Aw = A * w[:, None]
        G = Aw.T @ A
        rhs = Aw.T @ Y
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 1e-12 * max(ev[-1], np.finfo(float).tiny):
        raise DegenerateFitError("singular score Gram matrix")
    return np.linalg.solve(G, rhs).T


def _mean_sq_residual(Y, A, B):
    R = Y - A @ B.T
    return float(np.einsum("ij,ij->", R, R)) / Y.shape[0]


class ALSResult:
    """Output of :func:`als_pca`: basis, scores and the residual trace."""

    __slots__ = ("B", "A", "iterations", "history")

    def __init__(self, B, A, iterations, history):
        self.B = B
        self.A = A
        self.iterations = iterations
        self.history = history

    def __iter__(self):
        yield self.B
        yield self.A


def als_pca(Y, q, B0=None, N3=3, tol=1e-6):
    """Classical q-dimensional PCA subspace by alternating least squares.

    ``Y`` must already be centered. Each pass solves for the scores given the
    basis and then for the basis given the scores, so only q x q systems are
    ever solved. Runs at most ``N3`` passes, stopping early once the relative
    decrease of the mean squared residual is ``<= tol``.

    Returns an :class:`ALSResult`, which unpacks as ``(B, A)`` with ``B``
    orthonormal and ``A = Y B``.
    """
    Y = np.asarray(Y, dtype=float)
    n, p = Y.shape
    if q > min(n, p) or q < 1:
        raise ValueError(f"q={q} must be in [1, min(n, p)={min(n, p)}]")
    B = canonical_basis(p, q) if B0 is None else np.asarray(B0, dtype=float)
    A = solve_scores(Y, B)
    s0 = _mean_sq_residual(Y, A, B)
    history = [s0]
    it = 0
    while it < N3 and s0 > 0.0:
        A = solve_scores(Y, B)
        B = _solve_basis(Y, A)
        s = _mean_sq_residual(Y, A, B)
        history.append(s)
        it += 1
        delta = 1.0 - s / s0
        s0 = s
        if delta <= tol:
            break
        # same span, better conditioned for the next solve
        B = np.linalg.qr(B)[0]
    B = orthonormalize(B)
    return ALSResult(B, Y @ B, it, history)
