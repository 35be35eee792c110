"""CSV input and the JSON fit document."""

from __future__ import annotations

import csv
import json

import numpy as np

from .estimator import AlgorithmParams, SubspaceFit
from .scales import ScaleSpec, lts_h

__all__ = ["InputError", "read_matrix", "write_matrix", "fit_to_document",
           "document_to_fit", "write_fit", "read_fit"]

FORMAT_VERSION = 1


class InputError(Exception):
    """Unreadable, ragged or non-numeric input."""


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_matrix(path):
    """Read a comma-separated numeric matrix; a non-numeric first row is a header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(t.strip() for t in r)]
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if rows and not _is_number(rows[0][0].strip()):
        rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no data rows")
    width = len(rows[0])
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise InputError(f"{path}: row {i + 1} has {len(row)} fields, expected {width}")
        for j, tok in enumerate(row):
            tok = tok.strip()
            try:
                data[i, j] = float(tok)
            except ValueError:
                raise InputError(f"{path}: non-numeric value {tok!r} at row {i + 1}, "
                                 f"column {j + 1}") from None
            if not np.isfinite(data[i, j]):
                raise InputError(f"{path}: missing or non-finite value at row {i + 1}, "
                                 f"column {j + 1}")
    return data


def write_matrix(path, X, header=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(header)
        for row in np.asarray(X, dtype=float):
            writer.writerow([repr(float(v)) for v in row])


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float).ravel(order="F")]


def fit_to_document(fit, *, method, params=None, seed=None, seconds=None):
    n, p = fit.A.shape[0], fit.B.shape[0]
    spec = None
    if fit.spec is not None and method not in ("pca", "spc"):
        spec = fit.spec.to_dict()
        if not fit.spec.is_mscale:
            spec["h"] = lts_h(n, fit.spec.alpha)
    return {
        "format_version": FORMAT_VERSION,
        "method": method,
        "n": n,
        "p": p,
        "q": fit.q,
        "scale_spec": spec,
        "params": params.to_dict() if params is not None else None,
        "center": _floats(fit.m),
        "basis": _floats(fit.B),
        "scale": float(fit.scale),
        "weights": _floats(fit.weights),
        "distances": _floats(fit.distances),
        "iterations": int(fit.iterations),
        "converged": bool(fit.converged),
        "start_id": fit.start_id,
        "seed": seed,
        "seconds": seconds,
    }


def document_to_fit(doc, X=None):
    """Rebuild a :class:`SubspaceFit`; scores are recomputed when ``X`` is given."""
    p, q = doc["p"], doc["q"]
    B = np.array(doc["basis"], dtype=float).reshape((p, q), order="F")
    m = np.array(doc["center"], dtype=float)
    A = None if X is None else (np.asarray(X, dtype=float) - m) @ B
    spec = ScaleSpec.from_dict(doc["scale_spec"]) if doc.get("scale_spec") else None
    return SubspaceFit(
        B=B, A=A, m=m, scale=doc["scale"],
        weights=np.array(doc["weights"], dtype=float),
        distances=np.array(doc["distances"], dtype=float),
        iterations=doc["iterations"], converged=doc["converged"],
        start_id=doc.get("start_id", ""), spec=spec,
    )


def params_from_document(doc):
    return AlgorithmParams(**doc["params"]) if doc.get("params") else None


def write_fit(path, doc):
    # json emits the shortest repr of each float, which round-trips exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, allow_nan=False)
        fh.write("\n")


def read_fit(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read fit document {path}: {exc}") from exc
    for key in ("p", "q", "basis", "center"):
        if key not in doc:
            raise InputError(f"{path}: fit document is missing {key!r}")
    return doc
