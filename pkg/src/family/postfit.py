"""Relaxed refits, the oracle model and selection metrics."""
from __future__ import annotations

import csv
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from .design import DesignTensor, combine_symmetric
from .errors import ShapeMismatch


class UnderdeterminedRefit(UserWarning):
    """More active columns than observations; the minimum-norm fit is returned."""


class SeparationDetected(UserWarning):
    """Logistic MLE diverges; coefficients are capped."""


def _canonical_groups(support, symmetric):
    """Group supported cells that share a design column.

    With ``X == Z`` the cells ``(j, k)``/``(k, j)`` and ``(j, 0)``/``(0, j)``
    index identical columns; each group is keyed by its upper-triangular
    representative.
    """
    groups = {}
    for j, k in zip(*np.nonzero(support)):
        j, k = int(j), int(k)
        key = (j, k)
        if symmetric:
            if j == 0:
                key = (k, 0)
            elif k != 0 and j > k:
                key = (k, j)
        groups.setdefault(key, []).append((j, k))
    return groups


def _logistic_mle(X, y, cap=30.0, max_iter=100, tol=1e-10):
    """Newton iterations with step halving; stops when ``|eta|`` exceeds ``cap``."""
    b = np.zeros(X.shape[1])
    ybar = np.clip(y.mean(), 1e-12, 1 - 1e-12)
    if np.allclose(X[:, 0], 1.0):
        b[0] = np.log(ybar / (1 - ybar))

    def loss(b):
        eta = X @ b
        return np.mean(np.logaddexp(0.0, eta) - y * eta)

    current = loss(b)
    separated = False
    for _ in range(max_iter):
        eta = X @ b
        if np.abs(eta).max() > cap:
            separated = True
            break
        mu = expit(eta)
        grad = X.T @ (mu - y)
        H = X.T @ (X * (mu * (1 - mu))[:, None])
        H[np.diag_indices_from(H)] += 1e-10 * max(np.trace(H), 1.0)
        step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        while t > 1e-8:
            candidate = b - t * step
            value = loss(candidate)
            if value <= current:
                break
            t /= 2
        b, previous, current = candidate, current, value
        if previous - current < tol * max(1.0, abs(current)):
            break
    if np.abs(X @ b).max() > cap:
        separated = True
    return b, separated


def relax_refit(design: DesignTensor, y, support, family="gaussian"):
    """Unpenalized refit restricted to ``support``; other entries are zero.

    Duplicate columns of the symmetric problem are fitted once and their
    coefficient shared equally across the supported cells.
    """
    support = np.asarray(support, dtype=bool)
    if support.shape != design.shape_B:
        raise ShapeMismatch(f"support has shape {support.shape}, expected {design.shape_B}")
    y = np.asarray(y, dtype=float).ravel()
    if y.size != design.n:
        raise ShapeMismatch("y does not match the design")
    support = support.copy()
    support[0, 0] = True
    groups = _canonical_groups(support, design.symmetric)
    keys = sorted(groups)
    cols = np.array([design.col_index[key] for key in keys], dtype=np.intp)
    X = design.data[:, cols]
    if family == "gaussian":
        if len(keys) > design.n:
            warnings.warn(
                f"{len(keys)} active columns exceed n={design.n}; using the minimum-norm fit",
                UnderdeterminedRefit,
                stacklevel=2,
            )
        coef = np.linalg.lstsq(X, y, rcond=None)[0]
    elif family == "binomial":
        coef, separated = _logistic_mle(X, y)
        if separated:
            warnings.warn("logistic refit separates the data; coefficients capped", SeparationDetected, stacklevel=2)
    else:
        raise ValueError(f"unknown family {family!r}")
    B = np.zeros(design.shape_B)
    for value, key in zip(coef, keys):
        cells = groups[key]
        for cell in cells:
            B[cell] = value / len(cells)
    return B


def oracle_fit(design: DesignTensor, y, true_support, family="gaussian"):
    """Refit on the true support (pass a boolean mask or the true coefficients)."""
    true_support = np.asarray(true_support)
    if true_support.dtype != bool:
        true_support = true_support != 0
    return relax_refit(design, y, true_support, family)


def interaction_mask(B, symmetric):
    """Nonzero interactions: upper triangle (incl. diagonal) of the combined
    matrix when ``symmetric``, else every interior cell."""
    B = np.asarray(B, dtype=float)
    if symmetric:
        _, inter = combine_symmetric(B)
        return np.triu(inter != 0)
    return B[1:, 1:] != 0


def candidate_mask(shape, symmetric):
    p1, p2 = shape[0] - 1, shape[1] - 1
    if symmetric:
        return np.triu(np.ones((p1, p2), dtype=bool))
    return np.ones((p1, p2), dtype=bool)


@dataclass(frozen=True)
class SelectionMetrics:
    ssr: float
    fdr: float = float("nan")
    tpr: float = float("nan")
    fpr: float = float("nan")
    n_interactions: int = 0

    def as_row(self):
        return asdict(self)


def selection_counts(B_est, B_true, symmetric):
    est = interaction_mask(B_est, symmetric)
    true = interaction_mask(B_true, symmetric)
    cand = candidate_mask(np.shape(B_true), symmetric)
    tp = int(np.sum(est & true))
    fp = int(np.sum(est & ~true & cand))
    positives = int(np.sum(true))
    negatives = int(np.sum(cand & ~true))
    return tp, fp, positives, negatives


def selection_metrics(B_est, B_true, symmetric, ssr=float("nan")):
    tp, fp, positives, negatives = selection_counts(B_est, B_true, symmetric)
    return SelectionMetrics(
        ssr=float(ssr),
        fdr=fp / max(1, tp + fp),
        tpr=tp / max(1, positives),
        fpr=fp / max(1, negatives),
        n_interactions=tp + fp,
    )


def _coef(item):
    return item.B_hat if hasattr(item, "B_hat") else np.asarray(item, dtype=float)


def score(path_results, truth=None, eval_design: DesignTensor | None = None, eval_y=None):
    """Per-grid-point evaluation SSR and, with ``truth``, FDR/TPR/FPR.

    ``path_results`` may hold FitResults or plain coefficient matrices.
    """
    if eval_design is None or eval_y is None:
        raise ValueError("score needs an evaluation design and response")
    eval_y = np.asarray(eval_y, dtype=float).ravel()
    if eval_y.size != eval_design.n:
        raise ShapeMismatch("evaluation response does not match the design")
    W = eval_design.matrix()
    out = []
    for item in path_results:
        B = _coef(item)
        if B.shape != eval_design.shape_B:
            raise ShapeMismatch(f"coefficients of shape {B.shape} do not match the design")
        resid = eval_y - W @ B.ravel()
        ssr = float(resid @ resid)
        if truth is None:
            out.append(SelectionMetrics(ssr=ssr, n_interactions=int(interaction_mask(B, eval_design.symmetric).sum())))
        else:
            if np.shape(truth) != B.shape:
                raise ShapeMismatch("truth does not match the coefficient shape")
            out.append(selection_metrics(B, truth, eval_design.symmetric, ssr))
    return out


def roc_curve(metrics):
    """``(fpr, tpr)`` points of a path, sorted by fpr then tpr, with the
    ``(0, 0)`` origin prepended."""
    points = {(0.0, 0.0)}
    points.update((m.fpr, m.tpr) for m in metrics if np.isfinite(m.fpr))
    return sorted(points)


def write_metrics_csv(path, metrics, extra=None):
    """One row per grid point; ``extra`` is a list of dicts merged column-wise."""
    rows = []
    for i, m in enumerate(metrics):
        row = {"index": i}
        if extra is not None:
            row.update(extra[i])
        row.update(m.as_row())
        rows.append(row)
    fields = list(rows[0]) if rows else ["index", "ssr", "fdr", "tpr", "fpr", "n_interactions"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
