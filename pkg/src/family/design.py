"""Datasets, standardization and the interaction design array.

The design array ``W`` has one column per cell ``(j, k)`` of the
``(p1 + 1) x (p2 + 1)`` coefficient matrix ``B``:

* ``(0, 0)`` is the intercept (all ones),
* ``(j, 0)`` is ``X[:, j-1]`` and ``(0, k)`` is ``Z[:, k-1]``,
* ``(j, k)`` with ``j, k >= 1`` is ``X[:, j-1] * Z[:, k-1]``.

Columns are stored in the fixed order intercept, X mains, Z mains, then the
interactions in row-major ``(j, k)`` order. ``DesignTensor.col_index`` maps a
cell to its column and ``DesignTensor.cell_order`` gives the columns in the
row-major order of ``B.ravel()``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantColumn, NotSymmetricProblem, ShapeMismatch


@dataclass(frozen=True)
class Dataset:
    """Covariate blocks ``X`` (n x p1), ``Z`` (n x p2) and response ``y``.

    Passing ``Z=None`` builds the symmetric problem where ``Z`` is ``X``.
    """

    X: np.ndarray
    y: np.ndarray
    Z: np.ndarray | None = None
    symmetric: bool = field(default=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if X.shape[0] == 1 and np.ndim(self.X) == 1:
            X = X.T
        y = np.asarray(self.y, dtype=float).ravel()
        if self.Z is None:
            Z = X
            symmetric = True
        else:
            Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
            if Z.shape[0] == 1 and np.ndim(self.Z) == 1:
                Z = Z.T
            symmetric = bool(self.symmetric)
        n, p1 = X.shape
        if n < 1 or p1 < 1 or Z.shape[1] < 1:
            raise ShapeMismatch("need n >= 1, p1 >= 1 and p2 >= 1")
        if Z.shape[0] != n or y.shape[0] != n:
            raise ShapeMismatch(
                f"X has {n} rows, Z has {Z.shape[0]}, y has {y.shape[0]}"
            )
        for name, arr in (("X", X), ("Z", Z), ("y", y)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if symmetric and (Z.shape != X.shape or not np.array_equal(X, Z)):
            raise NotSymmetricProblem("symmetric dataset requires X == Z")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "symmetric", symmetric)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p1(self):
        return self.X.shape[1]

    @property
    def p2(self):
        return self.Z.shape[1]

    def with_response(self, y):
        if self.symmetric:
            return Dataset(self.X, y)
        return Dataset(self.X, y, Z=self.Z)

    def subset(self, rows):
        rows = np.asarray(rows)
        if self.symmetric:
            return Dataset(self.X[rows], self.y[rows])
        return Dataset(self.X[rows], self.y[rows], Z=self.Z[rows])


@dataclass(frozen=True)
class Standardizer:
    """Column means and standard deviations used to standardize a Dataset."""

    x_means: np.ndarray
    x_sds: np.ndarray
    z_means: np.ndarray
    z_sds: np.ndarray
    y_mean: float
    symmetric: bool = False

    def transform(self, data: Dataset) -> Dataset:
        """Apply the stored scaling to new data (e.g. a test split)."""
        if data.p1 != self.x_means.size or data.p2 != self.z_means.size:
            raise ShapeMismatch("dataset dimensions differ from the fitted scaler")
        X = (data.X - self.x_means) / self.x_sds
        if data.symmetric:
            return Dataset(X, data.y)
        Z = (data.Z - self.z_means) / self.z_sds
        return Dataset(X, data.y, Z=Z)

    def to_original(self, B):
        """Express coefficients fitted on the standardized scale on the raw scale.

        Expanding ``(x - m)(z - v) / (s t)`` distributes each interaction over
        the main effects and the intercept.
        """
        B = np.asarray(B, dtype=float)
        p1, p2 = self.x_means.size, self.z_means.size
        if B.shape != (p1 + 1, p2 + 1):
            raise ShapeMismatch(f"B has shape {B.shape}, expected {(p1 + 1, p2 + 1)}")
        mx, sx, mz, sz = self.x_means, self.x_sds, self.z_means, self.z_sds
        inter = B[1:, 1:] / np.outer(sx, sz)
        C = np.empty_like(B)
        C[1:, 1:] = inter
        C[1:, 0] = B[1:, 0] / sx - inter @ mz
        C[0, 1:] = B[0, 1:] / sz - mx @ inter
        C[0, 0] = (
            B[0, 0]
            - np.dot(B[1:, 0], mx / sx)
            - np.dot(B[0, 1:], mz / sz)
            + mx @ inter @ mz
        )
        return C


def standardize(data: Dataset) -> tuple[Dataset, Standardizer]:
    """Center and scale every covariate column to mean 0, variance 1.

    The variance uses the ``n - 1`` divisor. Constant columns raise
    ``ConstantColumn``. The response is returned untouched.
    """
    if data.n < 2:
        raise ValueError("standardization needs at least two observations")

    def _moments(M, block):
        means = M.mean(axis=0)
        sds = M.std(axis=0, ddof=1)
        bad = np.flatnonzero(~(sds > 0))
        if bad.size:
            raise ConstantColumn(block, int(bad[0]))
        return means, sds

    x_means, x_sds = _moments(data.X, "X")
    if data.symmetric:
        z_means, z_sds = x_means, x_sds
    else:
        z_means, z_sds = _moments(data.Z, "Z")
    scaler = Standardizer(
        x_means, x_sds, z_means, z_sds, float(data.y.mean()), data.symmetric
    )
    return scaler.transform(data), scaler


def center(data: Dataset) -> Dataset:
    """Subtract column means from X, Z and y (no scaling)."""
    X = data.X - data.X.mean(axis=0)
    y = data.y - data.y.mean()
    if data.symmetric:
        return Dataset(X, y)
    return Dataset(X, y, Z=data.Z - data.Z.mean(axis=0))


def column_index(p1, p2):
    """Cell -> column map of the flattened design, shape ``(p1+1, p2+1)``."""
    idx = np.empty((p1 + 1, p2 + 1), dtype=np.intp)
    idx[0, 0] = 0
    idx[1:, 0] = 1 + np.arange(p1)
    idx[0, 1:] = 1 + p1 + np.arange(p2)
    idx[1:, 1:] = 1 + p1 + p2 + np.arange(p1 * p2).reshape(p1, p2)
    return idx


@dataclass(frozen=True)
class DesignTensor:
    """Flattened ``n x (p1+1)(p2+1)`` interaction design."""

    data: np.ndarray
    p1: int
    p2: int
    symmetric: bool = False

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def shape_B(self):
        return (self.p1 + 1, self.p2 + 1)

    @property
    def col_index(self):
        return column_index(self.p1, self.p2)

    @property
    def cell_order(self):
        """Column permutation putting the design in ``B.ravel()`` order."""
        return self.col_index.ravel()

    def matrix(self):
        """Design columns in row-major cell order, so ``matrix() @ B.ravel()``
        is the linear predictor."""
        return self.data[:, self.cell_order]

    def column(self, j, k):
        return self.data[:, self.col_index[j, k]]


def build_design(data: Dataset) -> DesignTensor:
    X, Z = data.X, data.Z
    n, p1, p2 = data.n, data.p1, data.p2
    out = np.empty((n, (p1 + 1) * (p2 + 1)))
    out[:, 0] = 1.0
    out[:, 1 : 1 + p1] = X
    out[:, 1 + p1 : 1 + p1 + p2] = Z
    out[:, 1 + p1 + p2 :] = (X[:, :, None] * Z[:, None, :]).reshape(n, p1 * p2)
    return DesignTensor(out, p1, p2, data.symmetric)


def predict(design: DesignTensor, B) -> np.ndarray:
    """Linear predictor ``W * B``."""
    B = np.asarray(B, dtype=float)
    if B.shape != design.shape_B:
        raise ShapeMismatch(f"B has shape {B.shape}, expected {design.shape_B}")
    return design.data @ B.ravel()[np.argsort(design.cell_order)]


def combine_symmetric(B):
    """Collapse a coefficient matrix of the ``X == Z`` problem.

    Returns the combined main effects ``B[0, j] + B[j, 0]`` and the symmetric
    interaction matrix with ``B[j, k] + B[k, j]`` off the diagonal and
    ``B[j, j]`` on it.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise NotSymmetricProblem(f"B of shape {B.shape} is not square")
    main = B[0, 1:] + B[1:, 0]
    core = B[1:, 1:]
    inter = core + core.T
    np.fill_diagonal(inter, np.diag(core))
    return main, inter


@dataclass(frozen=True)
class WeakDesign:
    """Flattened weak-heredity arrays.

    ``wx`` has columns for cells ``(j, k)``, j=1..p1, k=0..p2 in row-major
    order; ``wz`` for cells ``(j, k)``, j=0..p1, k=1..p2.
    """

    wx: np.ndarray
    wz: np.ndarray
    p1: int
    p2: int


def build_weak_design(data: Dataset) -> WeakDesign:
    """Build ``W^X`` and ``W^Z``. Callers pass centered data (see ``center``)."""
    X, Z = data.X, data.Z
    n, p1, p2 = data.n, data.p1, data.p2
    wx = np.empty((n, p1, p2 + 1))
    wx[:, :, 0] = X
    wx[:, :, 1:] = X[:, :, None] * Z[:, None, :]
    wz = np.empty((n, p1 + 1, p2))
    wz[:, 0, :] = Z
    wz[:, 1:, :] = X[:, :, None] * Z[:, None, :]
    return WeakDesign(wx.reshape(n, -1), wz.reshape(n, -1), p1, p2)


def read_csv(path, response, x_columns=None, z_columns=None) -> Dataset:
    """Load a Dataset from a headed CSV file.

    Without ``x_columns`` every non-response column goes into ``X``. Without
    ``z_columns`` the problem is symmetric (``Z`` is ``X``). Empty fields are
    rejected.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    header = [h.strip() for h in header]
    if response not in header:
        raise KeyError(f"response column {response!r} not found in {path}")
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
        if any(v.strip() == "" for v in row):
            raise ValueError(f"{path}:{lineno}: missing value")
    values = np.array(rows, dtype=float) if rows else np.empty((0, len(header)))

    def cols(names):
        missing = [c for c in names if c not in header]
        if missing:
            raise KeyError(f"columns not found in {path}: {missing}")
        return values[:, [header.index(c) for c in names]]

    if x_columns is None:
        x_columns = [h for h in header if h != response and h not in (z_columns or [])]
    y = values[:, header.index(response)]
    X = cols(x_columns)
    if z_columns is None:
        return Dataset(X, y)
    return Dataset(X, y, Z=cols(z_columns))
