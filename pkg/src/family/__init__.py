"""Convex penalized regression with pairwise interactions under strong heredity.

Set ``FAMILY_NUM_THREADS`` before the first import to cap BLAS threads; it
fills ``OMP_NUM_THREADS``, ``OPENBLAS_NUM_THREADS`` and ``MKL_NUM_THREADS``
when those are unset.
"""
import os as _os

_threads = _os.environ.get("FAMILY_NUM_THREADS")
if _threads:
    for _name in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_name, _threads)

from .design import (  # noqa: E402
    Dataset,
    DesignTensor,
    Standardizer,
    build_design,
    combine_symmetric,
    predict,
    read_csv,
    standardize,
)
from .errors import FamilyError, NotConverged  # noqa: E402
from .penalty import PenaltyKind, PenaltySpec, prox, zero_check  # noqa: E402
from .solver import (  # noqa: E402
    AdmmOptions,
    FactorCache,
    FitResult,
    admm_fit,
    alpha_lambda_grid,
    extract_support,
    fit_path,
    lambda_max,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmOptions",
    "Dataset",
    "DesignTensor",
    "FactorCache",
    "FamilyError",
    "FitResult",
    "NotConverged",
    "PenaltyKind",
    "PenaltySpec",
    "Standardizer",
    "admm_fit",
    "alpha_lambda_grid",
    "build_design",
    "combine_symmetric",
    "extract_support",
    "fit_path",
    "lambda_max",
    "predict",
    "prox",
    "read_csv",
    "standardize",
    "zero_check",
]
