"""Univariate robust scales and the weight functions used by the reweighting steps.

All distances are plain 1-d arrays of nonnegative reals. The Tukey biweight is
used in its normalized form ``rho(u) = min(3u^2 - 3u^4 + u^6, 1)``, so the
tuning constant is absorbed into the scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ScaleConvergenceError

__all__ = [
    "ScaleSpec",
    "tukey_rho",
    "tukey_psi",
    "m_scale",
    "lts_scale",
    "lts_h",
    "s_weights",
    "lts_weights",
    "median",
    "qn_scale",
    "QN_CONSTANT",
]

QN_CONSTANT = 2.2219

MSCALE = "mscale"
LTSSCALE = "lts"


@dataclass(frozen=True)
class ScaleSpec:
    """Objective used by the subspace estimator.

    ``kind`` is ``"mscale"`` (Tukey biweight M-scale with target ``b``) or
    ``"lts"`` (least trimmed squares scale with trimming fraction ``alpha``).
    """

    kind: str = MSCALE
    b: float = 0.5
    alpha: float = 0.5

    def __post_init__(self):
        if self.kind == MSCALE:
            if not 0.0 < self.b <= 0.5:
                raise ValueError(f"M-scale requires 0 < b <= 0.5, got {self.b}")
        elif self.kind == LTSSCALE:
            # alpha = 0.5 is accepted as the conventional 50% breakdown choice;
            # h = n - floor(n/2) still keeps at least half the observations.
            if not 0.0 <= self.alpha <= 0.5:
                raise ValueError(f"LTS requires 0 <= alpha <= 0.5, got {self.alpha}")
        else:
            raise ValueError(f"unknown scale kind {self.kind!r}")

    @classmethod
    def mscale(cls, b=0.5):
        return cls(kind=MSCALE, b=b)

    @classmethod
    def lts(cls, alpha=0.5):
        return cls(kind=LTSSCALE, alpha=alpha)

    @property
    def is_mscale(self):
        return self.kind == MSCALE

    def scale(self, d, tol=1e-10):
        if self.is_mscale:
            return m_scale(d, self.b, tol=tol)
        return lts_scale(d, self.alpha)

    def weights(self, d, sigma):
        if self.is_mscale:
            return s_weights(d, sigma)
        return lts_weights(d, self.alpha)

    def to_dict(self):
        out = {"kind": self.kind}
        if self.is_mscale:
            out["b"] = self.b
        else:
            out["alpha"] = self.alpha
        return out

    @classmethod
    def from_dict(cls, data):
        if data["kind"] == MSCALE:
            return cls.mscale(data["b"])
        return cls.lts(data["alpha"])


def tukey_rho(u):
    """Normalized Tukey biweight loss, bounded by 1."""
    u2 = np.minimum(np.abs(np.asarray(u, dtype=float)), 1.0) ** 2
    # the clipped polynomial equals 1 exactly at |u| = 1
    return u2 * (3.0 - 3.0 * u2 + u2 * u2)


def tukey_psi(u):
    """Derivative of :func:`tukey_rho`: ``6u(1 - u^2)^2`` inside ``(-1, 1)``."""
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    t = 1.0 - u * u
    return 6.0 * u * t * t


def m_scale(d, b=0.5, tol=1e-10, rho=tukey_rho, max_iter=200):
    """M-scale of the distances ``d``: the ``s`` solving ``mean(rho(d/s)) = b``.

    The map ``s -> mean(rho(d/s))`` is nonincreasing, so the root is bracketed
    and then located by the Illinois variant of regula falsi on ``log s``,
    run until the bracket is a few ulps wide. When the equation holds on an
    interval, the largest root is returned, which keeps the scale equivariant.

    Parameters
    ----------
    d : array_like
        Nonnegative distances.
    b : float
        Target value of the mean loss, ``0 < b <= 0.5`` for the biweight.
    tol : float
        Required accuracy on the defining equation, checked at the root.
    rho : callable
        Loss function; swap in ``lambda u: u**2`` with ``b=1`` to get the RMS.

    Returns
    -------
    float
        The scale, or 0 when too many distances are zero for a positive root
        to exist.

    Raises
    ------
    ScaleConvergenceError
        If the bracket does not close within ``max_iter`` steps or the
        equation misses ``tol`` there.
    """
    d = np.asarray(d, dtype=float).ravel()
    if d.size == 0:
        raise ValueError("m_scale of an empty vector")
    pos = d[d > 0]
    if pos.size == 0:
        return 0.0

    if rho is tukey_rho:
        target = d.size * b

        # Near |u| = 1 rho rounds to 1 while its small terms carry the root;
        # sum rho(u) directly for small u and 1 - (1 - u^2)^3 for large u, in fsum.
        def g(t):
            with np.errstate(over="ignore"):
                a = np.minimum(d / math.exp(t), 1.0)
            low = a < 0.5
            u2 = a[low] * a[low]
            c = (1.0 - a[~low]) * (1.0 + a[~low])
            terms = np.concatenate([u2 * (3.0 - 3.0 * u2 + u2 * u2), -(c * c * c)])
            return math.fsum(np.append(terms, (~low).sum() - target).tolist()) / d.size
    else:
        def g(t):
            with np.errstate(over="ignore"):
                return float(np.mean(rho(d / math.exp(t)))) - b

    # With bounded rho the root set can be an interval (d = (0.375, 0), b = 0.5
    # solves on all of (0, 0.375]). Keep g >= 0 at lo and g < 0 at hi so the
    # bracket closes on the largest root.
    lo = math.log(pos.min())
    g_lo = g(lo)
    while g_lo < 0.0:
        # more than 1 - b of the mass sits at zero: no positive root
        lo -= 2.0
        if lo < -700.0:
            return 0.0
        g_lo = g(lo)

    hi = math.log(pos.max())
    g_hi = g(hi)
    while g_hi >= 0.0:
        hi += 1.0
        if hi > 700.0:
            raise ScaleConvergenceError("could not bracket the M-scale root")
        g_hi = g(hi)

    side = 0
    widths = [math.inf, math.inf]
    for _ in range(max_iter):
        width = hi - lo
        if width <= 4e-16 * max(1.0, abs(lo)):
            if abs(g(lo)) > tol:
                raise ScaleConvergenceError(
                    f"M-scale equation not met within tol={tol} at the bracketed root"
                )
            return math.exp(lo)
        t = (lo * g_hi - hi * g_lo) / (g_hi - g_lo)
        if not lo < t < hi or width > 0.5 * widths[0]:
            # falsi steps stall when one side is nearly flat; fall back to bisection
            t = 0.5 * (lo + hi)
        widths = [widths[1], width]
        g_t = g(t)
        if g_t >= 0.0:
            lo, g_lo = t, g_t
            if side == -1:
                g_hi *= 0.5
            side = -1
        else:
            hi, g_hi = t, g_t
            if side == 1:
                g_lo *= 0.5
            side = 1
    raise ScaleConvergenceError(
        f"M-scale root finder did not converge in {max_iter} iterations"
    )


def lts_h(n, alpha):
    """Number of observations kept by the LTS scale: ``n - floor(n*alpha)``."""
    return n - int(math.floor(n * alpha))


def lts_scale(d, alpha=0.5):
    """Root mean of the ``h`` smallest squared distances."""
    d = np.asarray(d, dtype=float).ravel()
    if d.size == 0:
        raise ValueError("lts_scale of an empty vector")
    h = lts_h(d.size, alpha)
    sq = np.sort(d * d)[:h]
    return math.sqrt(math.fsum(sq.tolist()) / h)


def s_weights(d, sigma):
    """Reweighting factors ``psi(d/sigma) * sigma / d`` for the M-scale.

    For the biweight this simplifies to ``6 (1 - u^2)^2`` with ``u = d/sigma``,
    which also supplies the limit 6 at ``d = 0``.
    """
    if not sigma > 0:
        raise ValueError(f"s_weights requires sigma > 0, got {sigma}")
    u = np.asarray(d, dtype=float) / sigma
    t = 1.0 - u * u
    return np.where(u >= 1.0, 0.0, 6.0 * t * t)


def lts_weights(d, alpha=0.5):
    """Indicator of ``d_i <= d_(h:n)``; ties at the threshold are all kept."""
    d = np.asarray(d, dtype=float).ravel()
    h = lts_h(d.size, alpha)
    threshold = np.partition(d, h - 1)[h - 1]
    return (d <= threshold).astype(float)


def median(x):
    return float(np.median(np.asarray(x, dtype=float)))


def qn_scale(x, constant=QN_CONSTANT):
    """Rousseeuw-Croux Qn via all pairwise absolute differences.

    ``constant * k``-th smallest of ``|x_i - x_j|, i < j`` with
    ``k = C(h, 2)`` and ``h = n // 2 + 1``. No small-sample correction.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 2:
        return 0.0
    h = n // 2 + 1
    k = comb(h, 2)
    iu = np.triu_indices(n, 1)
    diffs = np.abs(x[:, None] - x[None, :])[iu]
    return constant * float(np.partition(diffs, k - 1)[k - 1])


def _naive_qn_columns(X, k):
    n = X.shape[0]
    i, j = np.triu_indices(n, 1)
    out = np.empty(X.shape[1])
    # chunk columns so the n(n-1)/2 x chunk block stays small
    chunk = max(1, int(4_000_000 // max(1, i.size)))
    Xt = np.ascontiguousarray(X.T)
    for start in range(0, X.shape[1], chunk):
        block = Xt[start:start + chunk]
        diffs = np.abs(block[:, i] - block[:, j])
        out[start:start + chunk] = np.partition(diffs, k - 1, axis=1)[:, k - 1]
    return out


def _bisect_within(S, t):
    p, n = S.shape
    lo = np.broadcast_to(np.arange(n), (p, n)).copy()
    hi = np.full((p, n), n - 1)
    t = t[:, None]
    while np.any(lo < hi):
        mid = (lo + hi + 1) // 2
        ok = np.take_along_axis(S, mid, axis=1) - S <= t
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid - 1)
    return lo


def _last_within(S, t):
    """Per row i of each sorted column: largest j >= i with S[j] - S[i] <= t.

    ``S[j] - S[i]`` is nondecreasing in j in floating point too. A sorted
    search on ``S[i] + t`` gives the answer up to rounding; entries where the
    exact predicate disagrees are redone by bisection on the difference.
    """
    p, n = S.shape
    rows = np.arange(n)
    j = np.empty((p, n), dtype=np.intp)
    for c in range(p):
        j[c] = np.searchsorted(S[c], S[c] + t[c], side="right") - 1
    j = np.maximum(j, rows)
    tt = t[:, None]
    for _ in range(4):
        # rounding in S[i] + t can misplace j by a position or two
        over = (j > rows) & (np.take_along_axis(S, j, axis=1) - S > tt)
        nxt = np.minimum(j + 1, n - 1)
        under = (j + 1 < n) & (np.take_along_axis(S, nxt, axis=1) - S <= tt)
        if not (over.any() or under.any()):
            return j
        j = j - over + under
    bad = np.flatnonzero(np.any(over | under, axis=1))
    j[bad] = _bisect_within(S[bad], t[bad])
    return j


def _selected_qn_columns(X, k, sample=1000):
    # Bracket the k-th smallest gap from a sample of pairs, count the gaps
    # below each end exactly, then select among the few gaps in between.
    # Columns whose bracket misses fall back to the full enumeration.
    n, p = X.shape
    S = np.ascontiguousarray(np.sort(X, axis=0).T)
    total = n * (n - 1) // 2
    i_all, j_all = np.triu_indices(n, 1)
    pick = np.random.default_rng(0).choice(total, size=min(sample, total), replace=False)
    gaps = S[:, j_all[pick]] - S[:, i_all[pick]]
    m = pick.size
    frac = k / total
    margin = 4.0 * math.sqrt(frac * (1.0 - frac) / m) + 2.0 / m
    r_lo = int(math.floor((frac - margin) * m))
    r_hi = int(math.ceil((frac + margin) * m))
    t_lo = np.partition(gaps, r_lo, axis=1)[:, r_lo] if r_lo >= 0 else np.full(p, -1.0)
    t_hi = np.partition(gaps, r_hi, axis=1)[:, r_hi] if r_hi < m else np.full(p, np.inf)
    rows = np.arange(n)
    upper_lo = _last_within(S, t_lo)
    upper_hi = _last_within(S, t_hi)
    below = (upper_lo - rows).sum(axis=1)
    upto = (upper_hi - rows).sum(axis=1)
    # gaps strictly inside each bracket, laid out column by column
    counts = (upper_hi - upper_lo).ravel()
    starts = np.cumsum(counts) - counts
    first = (np.arange(p * n) // n) * n + upper_lo.ravel() + 1 - starts
    flat = S.ravel()
    partner = np.arange(counts.sum()) + np.repeat(first, counts)
    window = flat[partner] - np.repeat(flat, counts)
    bounds = np.concatenate([[0], np.cumsum(upto - below)])
    out = np.empty(p)
    missed = []
    for c in range(p):
        if not below[c] < k <= upto[c]:
            missed.append(c)
            continue
        r = k - below[c] - 1
        out[c] = np.partition(window[bounds[c]:bounds[c + 1]], r)[r]
    if missed:
        out[missed] = _naive_qn_columns(X[:, missed], k)
    return out


def qn_columns(X, constant=QN_CONSTANT):
    """Qn of every column of ``X``; same value as :func:`qn_scale` per column.

    Small samples enumerate all pairwise gaps. Larger ones select the required
    order statistic from sorted columns without forming all n(n-1)/2 gaps.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < 2:
        return np.zeros(X.shape[1])
    h = n // 2 + 1
    k = comb(h, 2)
    if n <= 64:
        return constant * _naive_qn_columns(X, k)
    return constant * _selected_qn_columns(X, k)
