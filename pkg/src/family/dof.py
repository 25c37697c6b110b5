"""Degrees-of-freedom estimates for the group-penalized fits.

For ``0.5 ||y - X b||^2 + sum_d lam_d P_d(A_d b)`` with differentiable
``P_d`` on the active set ``A``, the divergence of the fit is

    trace(X_A [X_A' X_A + sum_d lam_d A_d' Hess P_d(A_d b_A) A_d]^{-1} X_A')

The l1 term on interactions has zero Hessian almost everywhere and drops out.
The solver minimizes ``(1/2n)||.||^2 + lambda * P``, so the group weights here
are ``n * lambda``. l-infinity groups are approximated by l-q with a large
even ``q``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .design import DesignTensor
from .errors import SingularInnerMatrix, ZeroVector


def lq_norm(x, q):
    x = np.asarray(x, dtype=float)
    m = np.abs(x).max()
    if m == 0:
        return 0.0
    return float(m * np.sum((x / m) ** q) ** (1.0 / q))


def hessian_lq(x, q=2):
    """Hessian of ``||x||_q`` for even ``q >= 2`` and ``x != 0``.

    Written in terms of ``v = x / ||x||_q`` so large ``q`` does not overflow:
    ``(q - 1) / ||x||_q * diag(v^(q-2)) (I - v (v^(q-1))')``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if q < 2 or q % 2:
        raise ValueError(f"q must be an even integer >= 2, got {q}")
    norm = lq_norm(x, q)
    if norm == 0:
        raise ZeroVector("the l-q Hessian is undefined at 0")
    v = x / norm
    w = v ** (q - 2)
    H = -np.outer(w * v, w * v)
    H[np.diag_indices_from(H)] += w
    H *= (q - 1) / norm
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class ActiveSet:
    """Flattened (row-major) positions of the nonzero coefficients."""

    indices: np.ndarray
    shape: tuple

    @classmethod
    def from_matrix(cls, B, support=None):
        B = np.asarray(B, dtype=float)
        mask = B != 0
        if support is not None:
            mask &= np.asarray(support, dtype=bool)
        return cls(np.flatnonzero(mask.ravel()), B.shape)

    def __len__(self):
        return int(self.indices.size)

    def row_selector(self, j):
        """Positions (within the active set) of row ``j`` of B."""
        ncol = self.shape[1]
        return np.flatnonzero(self.indices // ncol == j)

    def col_selector(self, k):
        ncol = self.shape[1]
        return np.flatnonzero(self.indices % ncol == k)


@dataclass(frozen=True)
class DfEstimate:
    df: float
    active_size: int
    condition: float
    dropped: int = 0

    def __float__(self):
        return self.df


def _coefficients(fit):
    if hasattr(fit, "B_hat"):
        return fit.B_hat, fit.support
    return np.asarray(fit, dtype=float), None


def df_generic(design: DesignTensor, fit, groups, active=None, rcond=1e-12):
    """Divergence estimate for an active-set-restricted penalized fit.

    ``groups`` holds ``(selector, weight, q)`` triples where ``selector``
    indexes into the active set (see ``ActiveSet.row_selector``). Groups
    whose active sub-vector is zero are skipped. Directions in the null space
    of the inner matrix are also null for ``X_A`` and are dropped (a
    pseudo-inverse); the number dropped is reported.
    """
    B, support = _coefficients(fit)
    active = active or ActiveSet.from_matrix(B, support)
    if len(active) == 0:
        return DfEstimate(0.0, 0, 1.0)
    XA = design.matrix()[:, active.indices]
    beta = B.ravel()[active.indices]
    inner = XA.T @ XA
    for selector, weight, q in groups:
        selector = np.asarray(selector, dtype=np.intp)
        if selector.size == 0 or weight == 0:
            continue
        sub = beta[selector]
        if not sub.any():
            continue
        inner[np.ix_(selector, selector)] += weight * hessian_lq(sub, q)
    if not np.all(np.isfinite(inner)):
        raise SingularInnerMatrix("inner matrix has non-finite entries")
    evals, evecs = np.linalg.eigh(inner)
    top = evals[-1]
    if top <= 0:
        raise SingularInnerMatrix("inner matrix is not positive", np.inf)
    keep = evals > rcond * top
    condition = float(top / evals[keep][0])
    proj = XA @ evecs[:, keep]
    df = float(np.sum(np.einsum("ij,ij->j", proj, proj) / evals[keep]))
    return DfEstimate(df, len(active), condition, int((~keep).sum()))


def _group_df(design, fit, lambda1, lambda2, q):
    B, support = _coefficients(fit)
    if lambda1 is None or lambda2 is None:
        spec = fit.spec
        lambda1 = spec.lambda1 if lambda1 is None else lambda1
        lambda2 = spec.lambda2 if lambda2 is None else lambda2
    active = ActiveSet.from_matrix(B, support)
    n = design.n
    groups = [(active.row_selector(j), n * lambda1, q) for j in range(1, design.p1 + 1)]
    groups += [(active.col_selector(k), n * lambda2, q) for k in range(1, design.p2 + 1)]
    return df_generic(design, fit, groups, active=active)


def df_l2(design, fit, lambda1=None, lambda2=None):
    """Estimate for l2 row/column penalties (tuning taken from ``fit.spec`` if omitted)."""
    return _group_df(design, fit, lambda1, lambda2, 2)


def df_linf(design, fit, lambda1=None, lambda2=None, q=500):
    """Estimate for l-infinity penalties, using the l-q Hessian as a proxy."""
    return _group_df(design, fit, lambda1, lambda2, q)


def monte_carlo_df(
    design_or_mean,
    B_true,
    sigma,
    fit_procedure,
    reps=100,
    seed=0,
    return_se=False,
    workers=1,
):
    """Covariance definition of df, ``sum_i Cov(y_i, yhat_i) / sigma^2``.

    Responses are ``W*B_true + sigma * eps`` with the design fixed.
    ``fit_procedure(y)`` returns fitted values. Replicate ``r`` uses its own
    generator spawned from ``seed`` so results do not depend on ``workers``.
    With ``return_se`` the Monte-Carlo standard error is returned too.
    """
    if reps < 10:
        raise ValueError("monte_carlo_df needs at least 10 replicates")
    if isinstance(design_or_mean, DesignTensor):
        mean = design_or_mean.matrix() @ np.asarray(B_true, dtype=float).ravel()
    else:
        mean = np.asarray(design_or_mean, dtype=float).ravel()
    seeds = np.random.SeedSequence(seed).spawn(reps)

    def one(ss):
        rng = np.random.Generator(np.random.Philox(ss))
        y = mean + sigma * rng.standard_normal(mean.size)
        return y, np.asarray(fit_procedure(y), dtype=float)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            pairs = list(pool.map(one, seeds))
    else:
        pairs = [one(ss) for ss in seeds]
    Y = np.stack([p[0] for p in pairs])
    Yhat = np.stack([p[1] for p in pairs])
    Yc = Y - Y.mean(axis=0)
    Hc = Yhat - Yhat.mean(axis=0)
    per_rep = np.einsum("ri,ri->r", Yc, Hc) * reps / (reps - 1) / sigma**2
    df = float(per_rep.mean())
    if return_se:
        return df, float(per_rep.std(ddof=1) / np.sqrt(reps))
    return df
