"""Orthogonal and score distances with cutoffs for outlier diagnostic plots."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.stats import chi2, norm

from .errors import DegenerateFitError
from .scales import ScaleSpec, lts_h, lts_scale, m_scale, qn_scale, tukey_rho

__all__ = [
    "REGULAR",
    "ORTHOGONAL_OUTLIER",
    "GOOD_LEVERAGE",
    "BAD_LEVERAGE",
    "DiagnosticTable",
    "orthogonal_distances",
    "score_distances",
    "outlier_flags",
    "diagnose",
]

REGULAR = "regular"
ORTHOGONAL_OUTLIER = "orthogonal_outlier"
GOOD_LEVERAGE = "good_leverage"
BAD_LEVERAGE = "bad_leverage"

LEVEL = 0.975


@dataclass
class DiagnosticTable:
    orthogonal_distance: np.ndarray
    score_distance: np.ndarray
    od_cutoff: float
    sd_cutoff: float
    flag: np.ndarray

    def __len__(self):
        return self.flag.size

    def counts(self):
        return {f: int(np.sum(self.flag == f))
                for f in (REGULAR, ORTHOGONAL_OUTLIER, GOOD_LEVERAGE, BAD_LEVERAGE)}

    def outliers(self):
        """Indices flagged as orthogonal outliers or bad leverage points."""
        return np.flatnonzero((self.flag == ORTHOGONAL_OUTLIER) | (self.flag == BAD_LEVERAGE))

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "od", "sd", "od_cutoff", "sd_cutoff", "flag"])
        for i in range(len(self)):
            writer.writerow([
                i, repr(float(self.orthogonal_distance[i])),
                repr(float(self.score_distance[i])),
                repr(float(self.od_cutoff)), repr(float(self.sd_cutoff)), self.flag[i],
            ])


def orthogonal_distances(X, fit):
    """Distance from each row to the affine subspace ``m + span(B)``."""
    Y = np.asarray(X, dtype=float) - fit.m
    R = Y - (Y @ fit.B) @ fit.B.T
    return np.sqrt(np.einsum("ij,ij->i", R, R))


@lru_cache(maxsize=None)
def _mscale_consistency(b):
    # population M-scale of N(0, 1): E rho(Z / s) = b
    def excess(s):
        val, _ = integrate.quad(lambda z: float(tukey_rho(z / s)) * norm.pdf(z),
                                -np.inf, np.inf, limit=200)
        return val - b
    return 1.0 / optimize.brentq(excess, 1e-3, 1e3, xtol=1e-14)


def _lts_consistency(n, alpha):
    gamma = lts_h(n, alpha) / n
    z = norm.ppf(0.5 * (1.0 + gamma))
    trimmed = gamma - 2.0 * z * norm.pdf(z)
    return math.sqrt(gamma / trimmed)


def score_distances(fit, spec=None):
    """Robust score distances ``sqrt(sum_k ((a_ik - med_k) / s_k)^2)``.

    ``s_k`` is the univariate M-scale (or LTS scale, following ``spec``) of
    the median-centered score column, multiplied by its consistency factor
    at the normal model.
    """
    spec = spec or fit.spec or ScaleSpec()
    A = np.asarray(fit.A, dtype=float)
    n, q = A.shape
    if n < 2:
        raise DegenerateFitError("score distances need at least two observations")
    centered = A - np.median(A, axis=0)
    scales = np.empty(q)
    for k in range(q):
        r = np.abs(centered[:, k])
        if spec.is_mscale:
            scales[k] = m_scale(r, spec.b) * _mscale_consistency(spec.b)
        else:
            scales[k] = lts_scale(r, spec.alpha) * _lts_consistency(n, spec.alpha)
    bad = np.flatnonzero(~(scales > 0))
    if bad.size:
        raise DegenerateFitError(f"score column {int(bad[0])} has zero robust scale")
    return np.sqrt(np.sum((centered / scales) ** 2, axis=1))


def od_cutoff(od, level=LEVEL):
    """Cutoff from the Wilson-Hilferty normal approximation of OD^(2/3)."""
    t = np.asarray(od, dtype=float) ** (2.0 / 3.0)
    mu = float(np.median(t))
    sigma = qn_scale(t)
    if sigma == 0.0:
        # no spread: skip the power round trip so equal distances sit exactly on the cutoff
        return float(np.median(np.asarray(od, dtype=float)))
    return (mu + sigma * norm.ppf(level)) ** 1.5


def sd_cutoff(q, level=LEVEL):
    return math.sqrt(chi2.ppf(level, q))


def outlier_flags(od, sd, q, level=LEVEL):
    od = np.asarray(od, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if od.shape != sd.shape:
        raise ValueError("od and sd must have the same length")
    c_od = od_cutoff(od, level)
    c_sd = sd_cutoff(q, level)
    far_od = od > c_od
    far_sd = sd > c_sd
    flag = np.full(od.size, REGULAR, dtype=object)
    flag[far_od & ~far_sd] = ORTHOGONAL_OUTLIER
    flag[~far_od & far_sd] = GOOD_LEVERAGE
    flag[far_od & far_sd] = BAD_LEVERAGE
    return DiagnosticTable(od, sd, c_od, c_sd, flag)


def diagnose(X, fit, spec=None, level=LEVEL):
    """Full diagnostic table for a fit on the data it was computed from."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != fit.B.shape[0]:
        raise ValueError(f"data has p={X.shape[1]} columns but fit has p={fit.B.shape[0]}")
    od = orthogonal_distances(X, fit)
    sd = score_distances(replace(fit, A=(X - fit.m) @ fit.B), spec)
    return outlier_flags(od, sd, fit.B.shape[1], level)
