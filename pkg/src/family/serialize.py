"""JSON form of fit results and atomic file output.

Every document carries ``schema_version`` and an echo of the resolved
configuration. Matrices are nested row-major lists with explicit ``p1`` and
``p2``.
"""
from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .penalty import PenaltySpec
from .solver import FitResult

SCHEMA_VERSION = "1"


def atomic_write(path, text):
    """Write ``text`` to a temporary file beside ``path``, then rename it over."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(doc):
    return json.dumps(_plain(doc), indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, doc):
    atomic_write(path, dumps(doc))


def read_json(path):
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("schema_version") if isinstance(doc, dict) else None
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema version {version!r}")
    return doc


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def result_to_dict(result: FitResult, config=None, extra=None):
    B = np.asarray(result.B_hat, dtype=float)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "p1": B.shape[0] - 1,
        "p2": B.shape[1] - 1,
        "B": B,
        "support": np.asarray(result.support, dtype=bool),
        "objective": result.objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "r_final": result.r_final,
        "s_final": result.s_final,
        "rho": result.rho,
        "spec": result.spec.to_dict(),
        "config": config or {},
    }
    if extra:
        doc.update(extra)
    return doc


def result_from_dict(doc):
    """Rebuild a FitResult (without solver state) from ``result_to_dict`` output."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {doc.get('schema_version')!r}")
    shape = (doc["p1"] + 1, doc["p2"] + 1)
    B = np.asarray(doc["B"], dtype=float).reshape(shape)
    support = np.asarray(doc["support"], dtype=bool).reshape(shape)
    return FitResult(
        B_hat=B,
        support=support,
        objective=float(doc["objective"]),
        iterations=int(doc["iterations"]),
        converged=bool(doc["converged"]),
        r_final=float(doc["r_final"]),
        s_final=float(doc["s_final"]),
        spec=PenaltySpec.from_dict(doc["spec"]),
        rho=float(doc.get("rho", 1.0)),
    )
