"""Direct-basis iteratively reweighted fitting of the subspace S- and LTS-estimators.

The estimator minimizes a robust scale (M-scale or LTS scale) of the Euclidean
distances between the observations and their approximations ``m + B a_i``.
Instead of working with the p - q dimensional orthogonal complement, the q
basis directions are updated directly from the first-order conditions, so only
q x q systems are solved.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateFitError, RobsubError
from .kernels import orthonormalize, random_orthogonal, solve_scores, spatial_median
from .scales import ScaleSpec

logger = logging.getLogger(__name__)

__all__ = [
    "AlgorithmParams",
    "StartValue",
    "SubspaceFit",
    "update_scores",
    "update_basis",
    "update_center",
    "distances",
    "iterate_fit",
    "refine_fit",
    "fit_random",
    "fit_deterministic",
    "eigen_residual",
]


@dataclass(frozen=True)
class AlgorithmParams:
    """Iteration budget of the fitting algorithm.

    ``N1`` center/score warm-up passes with the basis fixed, then ``N2`` full
    passes each running up to ``N3`` inner basis updates. The best ``n_keep``
    screened starts are refined with up to ``N2_refine`` full passes.
    ``n_keep=None`` means 10 for random starts and 1 for deterministic ones.
    """

    N1: int = 3
    N2: int = 2
    N3: int = 3
    N2_refine: int = 10
    n_keep: int | None = None
    tol: float = 1e-6

    def __post_init__(self):
        for name in ("N1", "N2", "N3", "N2_refine"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_keep is not None and self.n_keep < 1:
            raise ValueError("n_keep must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")

    def to_dict(self):
        return {
            "N1": self.N1, "N2": self.N2, "N3": self.N3,
            "N2_refine": self.N2_refine, "n_keep": self.n_keep, "tol": self.tol,
        }


@dataclass(frozen=True)
class StartValue:
    B0: np.ndarray
    m0: np.ndarray
    label: str = ""


@dataclass
class SubspaceFit:
    B: np.ndarray
    A: np.ndarray
    m: np.ndarray
    scale: float
    weights: np.ndarray
    distances: np.ndarray
    iterations: int = 0
    converged: bool = False
    start_id: str = ""
    spec: ScaleSpec | None = None
    history: list = field(default_factory=list)
    degenerate_scale: bool = False

    @property
    def q(self):
        return self.B.shape[1]


def update_scores(X, B, m):
    """Scores of every row of ``X`` with respect to basis ``B`` and center ``m``.

    For orthonormal ``B`` this is ``(X - m) B``; in general the least-squares
    coordinates ``(X - m) B (B^T B)^{-1}``.
    """
    return solve_scores(np.asarray(X, dtype=float) - m, np.asarray(B, dtype=float))


def update_basis(X, A, m, w):
    """Weighted least-squares basis given the scores (rows solve q x q systems).

    Returns ``(X - m)^T W A (A^T W A)^{-1}``, which is not orthonormal.
    """
    A = np.asarray(A, dtype=float)
    w = np.asarray(w, dtype=float)
    Aw = A * w[:, None]
    G = Aw.T @ A
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 1e-12 * max(ev[-1], np.finfo(float).tiny):
        raise DegenerateFitError(
            f"singular weighted score Gram matrix ({int(np.count_nonzero(w))} "
            f"positive weights, q={A.shape[1]})"
        )
    rhs = Aw.T @ (np.asarray(X, dtype=float) - m)
    return np.linalg.solve(G, rhs).T


def update_center(X, w):
    w = np.asarray(w, dtype=float)
    total = w.sum()
    if not total > 0:
        raise DegenerateFitError("all weights are zero")
    return w @ np.asarray(X, dtype=float) / total


def _center_given_fit(X, A, B, w):
    # m_j = sum_i w_i (x_ij - a_i^T b_j) / sum_i w_i
    return update_center(X - A @ B.T, w)


def distances(X, B, A, m):
    R = X - m - A @ B.T
    return np.sqrt(np.einsum("ij,ij->i", R, R))


def _check_problem(X, q):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be an n x p matrix")
    n, p = X.shape
    if not 1 <= q <= min(n, p):
        raise DegenerateFitError(f"q={q} must be in [1, min(n, p)={min(n, p)}]")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if np.all(X == X[0]):
        raise DegenerateFitError("all observations are identical")
    return X


def iterate_fit(X, start, spec=None, params=None, *, unit_weights=False):
    """Run the reweighted fitting loop from one starting value.

    Parameters
    ----------
    X : ndarray, shape (n, p)
    start : StartValue
        Orthonormal ``B0`` (p x q) and center ``m0``.
    spec : ScaleSpec
        Objective; defaults to the 50% breakdown M-scale.
    params : AlgorithmParams
        ``N1`` warm-up passes (center and scores only), then full passes up
        to a total of ``N1 + N2``; each full pass runs up to ``N3`` inner
        updates of scores, basis and center with the weights held fixed.
        Stops early once the relative decrease of the squared scale is
        ``<= tol``.
    unit_weights : bool
        Test hook forcing all weights to 1, which turns the procedure into
        alternating least squares for classical PCA.

    Returns
    -------
    SubspaceFit
        Orthonormal basis, scores ``(X - m) B``, the objective scale and the
        per-pass scale history (``history[0]`` is the starting scale).
    """
    spec = spec or ScaleSpec()
    params = params or AlgorithmParams()
    X = np.asarray(X, dtype=float)
    B = np.asarray(start.B0, dtype=float)
    m = np.asarray(start.m0, dtype=float)
    n = X.shape[0]

    def objective(d):
        if unit_weights:
            return float(np.sqrt(np.mean(d * d)))
        return spec.scale(d)

    def weights(d, sigma):
        if unit_weights:
            return np.ones(n)
        return spec.weights(d, sigma)

    A = update_scores(X, B, m)
    d = distances(X, B, A, m)
    sigma0 = objective(d)
    history = [sigma0]
    total = params.N1 + params.N2
    it = 1
    converged = sigma0 == 0.0
    while it <= total and not converged:
        w = weights(d, sigma0)
        m = update_center(X, w)
        if it > params.N1:
            s0 = sigma0
            for _ in range(params.N3):
                try:
                    A = update_scores(X, B, m)
                    B = update_basis(X, A, m, w)
                    m = _center_given_fit(X, A, B, w)
                except DegenerateFitError as exc:
                    raise DegenerateFitError(str(exc), iteration=it) from exc
                s = objective(distances(X, B, A, m))
                delta_inner = 1.0 - (s * s) / (s0 * s0) if s0 > 0 else 0.0
                s0 = s
                if delta_inner <= params.tol:
                    break
            try:
                B = orthonormalize(B)
            except DegenerateFitError as exc:
                raise DegenerateFitError(str(exc), iteration=it) from exc
        A = update_scores(X, B, m)
        d = distances(X, B, A, m)
        sigma = objective(d)
        history.append(sigma)
        delta = 1.0 - (sigma * sigma) / (sigma0 * sigma0)
        sigma0 = sigma
        it += 1
        if delta <= params.tol or sigma == 0.0:
            converged = True

    B = orthonormalize(B)
    A = (X - m) @ B
    d = distances(X, B, A, m)
    scale = objective(d)
    if scale > 0:
        w = weights(d, scale)
    else:
        w = np.ones(n) if unit_weights or spec.is_mscale else spec.weights(d, scale)
    return SubspaceFit(
        B=B, A=A, m=m, scale=scale, weights=w, distances=d,
        iterations=it - 1, converged=converged, start_id=start.label,
        spec=spec, history=history,
        degenerate_scale=bool(scale == 0.0 and np.any(d > 0)),
    )


def refine_fit(X, fit, spec=None, params=None):
    """Continue iterating a screened fit with up to ``N2_refine`` full passes."""
    params = params or AlgorithmParams()
    spec = spec or fit.spec or ScaleSpec()
    refine_params = replace(params, N1=0, N2=params.N2_refine)
    start = StartValue(B0=fit.B, m0=fit.m, label=fit.start_id)
    out = iterate_fit(X, start, spec, refine_params)
    out.history = fit.history + out.history[1:]
    out.iterations = fit.iterations + out.iterations
    return out


def _screen_and_refine(X, starts, spec, params, n_keep, threads):
    def screen(start):
        try:
            return iterate_fit(X, start, spec, params)
        except RobsubError as exc:
            logger.debug("start %s failed: %s", start.label, exc)
            return exc

    def refine(fit):
        try:
            return refine_fit(X, fit, spec, params)
        except RobsubError as exc:
            logger.debug("refinement of %s failed: %s", fit.start_id, exc)
            return exc

    screened = _map(screen, starts, threads)
    ok = [(f.scale, i, f) for i, f in enumerate(screened) if isinstance(f, SubspaceFit)]
    if not ok:
        errors = "; ".join(str(e) for e in screened)
        raise DegenerateFitError(f"all {len(starts)} starts failed: {errors}")
    ok.sort(key=lambda t: (t[0], t[1]))
    kept = ok[:n_keep]
    refined = _map(refine, [f for _, _, f in kept], threads)
    best = [(f.scale, i, f) for (_, i, _), f in zip(kept, refined) if isinstance(f, SubspaceFit)]
    if not best:
        raise DegenerateFitError("all refinements failed")
    best.sort(key=lambda t: (t[0], t[1]))
    return best[0][2]


def _map(func, items, threads):
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def random_starts(X, q, n_starts=50, seed=0, center="spatial"):
    """Random orthonormal bases (one independent substream per start)."""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if center == "spatial":
        m0 = spatial_median(X)
    elif center == "coordinatewise":
        m0 = np.median(X, axis=0)
    else:
        raise ValueError(f"unknown center {center!r}")
    seqs = np.random.SeedSequence(seed).spawn(n_starts)
    return [
        StartValue(random_orthogonal(p, q, np.random.default_rng(s)), m0, f"random{i}")
        for i, s in enumerate(seqs)
    ]


def fit_random(X, q, spec=None, n_starts=50, params=None, seed=0, *,
               center="spatial", threads=None):
    """Subspace estimator from random orthonormal starting bases.

    Each start is screened with the ``N1 + N2`` schedule, the ``n_keep``
    (default 10) with the lowest scale are refined, and the lowest-scale
    refined fit is returned. Ties are broken by start index, so the result
    does not depend on ``threads``.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    spec = spec or ScaleSpec()
    params = params or AlgorithmParams()
    X = _check_problem(X, q)
    starts = random_starts(X, q, n_starts, seed, center)
    n_keep = params.n_keep if params.n_keep is not None else 10
    return _screen_and_refine(X, starts, spec, params, n_keep, threads)


def fit_deterministic(X, q, spec=None, params=None, *, threads=None):
    """Subspace estimator from the five deterministic robust starts."""
    from .starts import deterministic_start_set

    spec = spec or ScaleSpec()
    params = params or AlgorithmParams()
    X = _check_problem(X, q)
    starts = deterministic_start_set(X, q)
    n_keep = params.n_keep if params.n_keep is not None else 1
    return _screen_and_refine(X, starts, spec, params, n_keep, threads)


def weighted_covariance(X, m, w):
    Y = np.asarray(X, dtype=float) - m
    return (Y * w[:, None]).T @ Y / Y.shape[0]


def eigen_residual(fit, X):
    """Relative residual of the weighted-covariance eigen-equation ``C B = B L``.

    ``C`` is the weighted covariance around ``fit.m`` with ``fit.weights`` and
    ``L = B^T C B``. Computed as ``Y^T (w * (Y B))`` so no p x p matrix is formed.
    """
    Y = np.asarray(X, dtype=float) - fit.m
    B = fit.B
    CB = Y.T @ ((Y @ B) * fit.weights[:, None]) / Y.shape[0]
    num = np.linalg.norm(CB - B @ (B.T @ CB))
    den = np.linalg.norm(CB)
    if den == 0.0:
        return 0.0
    return float(num / den)
