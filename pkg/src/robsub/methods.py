"""Named estimators used by the simulation and equivariance commands."""

from __future__ import annotations

from functools import partial

from .baselines import classical_pca, spherical_pca
from .estimator import AlgorithmParams, fit_deterministic, fit_random
from .scales import ScaleSpec

METHODS = ("dsubs", "dsublts", "rsubs", "rsublts", "spc", "pca")

# breakdown point -> M-scale target b and LTS trimming alpha
BDP_TO_B = {0.5: 0.5, 0.25: 0.2426}
BDP_TO_ALPHA = {0.5: 0.5, 0.25: 0.25}


def scale_spec(kind, bdp=0.5):
    if bdp not in BDP_TO_B:
        raise ValueError(f"bdp must be one of {sorted(BDP_TO_B)}, got {bdp}")
    if kind == "s":
        return ScaleSpec.mscale(BDP_TO_B[bdp])
    if kind == "lts":
        return ScaleSpec.lts(BDP_TO_ALPHA[bdp])
    raise ValueError(f"unknown scale kind {kind!r}")


def make_method(name, q, *, bdp=0.5, params=None, seed=0, n_starts=50, threads=None,
                spec=None):
    """Callable ``X -> SubspaceFit`` for one of :data:`METHODS`.

    ``spec`` overrides the scale implied by ``bdp`` for the robust methods.
    """
    params = params or AlgorithmParams()
    if name == "pca":
        return partial(classical_pca, q=q)
    if name == "spc":
        return partial(spherical_pca, q=q)
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r}; expected one of {METHODS}")
    if spec is None:
        spec = scale_spec("s" if name.endswith("subs") else "lts", bdp)
    if name.startswith("d"):
        return partial(fit_deterministic, q=q, spec=spec, params=params, threads=threads)
    return partial(fit_random, q=q, spec=spec, n_starts=n_starts, params=params,
                   seed=seed, threads=threads)
