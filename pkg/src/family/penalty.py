"""Row/column penalties, their dual norms and proximal operators.

Every kernel solves ``argmin_b 0.5 * ||y - b||^2 + lam * P(b)`` exactly. The
``*_rows`` variants apply the same kernel independently to each row of a 2-D
array and are what the ADMM solver calls.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyVector


class PenaltyKind(enum.Enum):
    L1 = "l1"
    GroupL2 = "l2"
    Linf = "linf"
    HybridL1Linf = "hybrid"
    None_ = "none"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown penalty {value!r}; expected one of {names}") from None

    @property
    def groupwise(self):
        """True for kinds that zero whole rows/columns (and so give heredity)."""
        return self in (PenaltyKind.GroupL2, PenaltyKind.Linf, PenaltyKind.HybridL1Linf)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty kinds for rows and columns plus the three tuning parameters.

    ``lambda1`` scales the row penalties, ``lambda2`` the column penalties and
    ``lambda3`` the elementwise l1 penalty on interactions. ``alpha`` and
    ``lam`` are kept when the spec came from ``from_alpha``.
    """

    row_kind: PenaltyKind = PenaltyKind.GroupL2
    col_kind: PenaltyKind = PenaltyKind.GroupL2
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda3: float = 0.0
    alpha: float | None = None
    lam: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "row_kind", PenaltyKind.parse(self.row_kind))
        object.__setattr__(self, "col_kind", PenaltyKind.parse(self.col_kind))
        for name in ("lambda1", "lambda2", "lambda3"):
            value = float(getattr(self, name))
            if not value >= 0 or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite non-negative number, got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_alpha(cls, kind, alpha, lam, p, col_kind=None):
        """``lambda1 = lambda2 = (1 - alpha) * lam * sqrt(p)``, ``lambda3 = alpha * lam``."""
        if not 0 < alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        if lam < 0:
            raise ValueError(f"lam must be non-negative, got {lam}")
        group = (1 - alpha) * lam * math.sqrt(p)
        return cls(
            kind,
            kind if col_kind is None else col_kind,
            group,
            group,
            alpha * lam,
            alpha=float(alpha),
            lam=float(lam),
        )

    def scaled(self, factor):
        """Same spec with every tuning parameter multiplied by ``factor``."""
        return PenaltySpec(
            self.row_kind,
            self.col_kind,
            self.lambda1 * factor,
            self.lambda2 * factor,
            self.lambda3 * factor,
            self.alpha,
            None if self.lam is None else self.lam * factor,
        )

    def to_dict(self):
        return {
            "row_kind": self.row_kind.value,
            "col_kind": self.col_kind.value,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda3": self.lambda3,
            "alpha": self.alpha,
            "lam": self.lam,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["row_kind"], d["col_kind"], d["lambda1"], d["lambda2"], d["lambda3"],
            d.get("alpha"), d.get("lam"),
        )


def _l2_rows(M):
    """Row norms, scaled by the row maximum so tiny entries do not underflow."""
    M = np.atleast_2d(M)
    m = np.abs(M).max(axis=1) if M.shape[1] else np.zeros(M.shape[0])
    safe = np.where(m > 0, m, 1.0)
    S = M / safe[:, None]
    return m * np.sqrt(np.einsum("ij,ij->i", S, S))


def _vector(v):
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise EmptyVector("penalty evaluated on an empty vector")
    return v


def norm_value(kind, v):
    kind = PenaltyKind.parse(kind)
    v = _vector(v)
    a = np.abs(v)
    if kind is PenaltyKind.L1:
        return float(a.sum())
    if kind is PenaltyKind.GroupL2:
        return float(_l2_rows(v[None, :])[0])
    if kind is PenaltyKind.Linf:
        return float(a.max())
    if kind is PenaltyKind.HybridL1Linf:
        return float(max(a[0], a[1:].sum()))
    return 0.0


def dual_norm(kind, v):
    """Dual norm ``sup{z.v : P(z) <= 1}``; for ``None`` the dual is infinite
    unless ``v == 0``."""
    kind = PenaltyKind.parse(kind)
    v = _vector(v)
    a = np.abs(v)
    if kind is PenaltyKind.L1:
        return float(a.max())
    if kind is PenaltyKind.GroupL2:
        return float(_l2_rows(v[None, :])[0])
    if kind is PenaltyKind.Linf:
        return float(a.sum())
    if kind is PenaltyKind.HybridL1Linf:
        return float(a[0] + (a[1:].max() if a.size > 1 else 0.0))
    return 0.0 if not a.any() else math.inf


def zero_check(kind, y, lam):
    """True iff the prox of ``y`` at level ``lam`` is exactly zero."""
    return dual_norm(kind, y) <= lam


def prox_soft_threshold(y, lam):
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - lam, 0.0)


def prox_group_l2(y, lam):
    y = _vector(y)
    return prox_group_l2_rows(y[None, :], lam)[0]


def project_l1_ball(y, radius):
    """Euclidean projection onto ``{u : ||u||_1 <= radius}`` by sorting."""
    y = np.asarray(y, dtype=float).ravel()
    if radius < 0:
        raise ValueError("radius must be non-negative")
    a = np.abs(y)
    if a.sum() <= radius:
        return y.copy()
    if radius == 0:
        return np.zeros_like(y)
    theta = _l1_threshold(a[None, :], np.array([radius]))[0]
    return np.sign(y) * np.maximum(a - theta, 0.0)


def prox_linf(y, lam):
    """Moreau decomposition: ``y - proj_{l1 ball of radius lam}(y)``."""
    y = _vector(y)
    return prox_linf_rows(y[None, :], lam)[0]


def prox_hybrid(y, lam):
    """Prox of ``max(|b_1|, ||b_rest||_1)``; the first entry is the main effect."""
    y = _vector(y)
    return prox_hybrid_rows(y[None, :], lam)[0]


def prox(kind, y, lam):
    kind = PenaltyKind.parse(kind)
    y = _vector(y)
    return prox_rows(kind, y[None, :], lam)[0]


# -- batched kernels -------------------------------------------------------


def prox_group_l2_rows(Y, lam):
    norms = _l2_rows(Y)
    out = np.zeros_like(Y)
    keep = norms > lam
    if keep.any():
        out[keep] = Y[keep] * (1.0 - lam / norms[keep])[:, None]
    return out


def _l1_threshold(A, radius):
    """Soft-threshold level projecting each row of ``A >= 0`` onto its l1 ball.

    Only valid for rows with ``A.sum() > radius``.
    """
    m, q = A.shape
    S = -np.sort(-A, axis=1)
    cs = np.cumsum(S, axis=1) - radius[:, None]
    ks = np.arange(1, q + 1)
    cond = S * ks > cs
    # index 0 always qualifies; rounding can hide it when radius is tiny
    cond[:, 0] = True
    # last index where the sorted value still exceeds the running threshold
    rho = q - 1 - np.argmax(cond[:, ::-1], axis=1)
    return cs[np.arange(m), rho] / (rho + 1)


def prox_linf_rows(Y, lam):
    if lam == 0:
        return Y.copy()
    A = np.abs(Y)
    out = np.zeros_like(Y)
    keep = A.sum(axis=1) > lam
    if keep.any():
        Ak = A[keep]
        theta = _l1_threshold(Ak, np.full(Ak.shape[0], float(lam)))
        out[keep] = np.sign(Y[keep]) * np.minimum(Ak, theta[:, None])
    return out


def hybrid_split(Y, lam):
    """Optimal budget ``lambda_1`` given to the first entry, per row.

    With ``z_i = lam - |y_{i+1}|`` sorted ascending, the minimizer of the
    one-dimensional dual problem is the smallest of
    ``(|y_1| + z_(1) + ... + z_(j)) / (j + 1)``, clamped to ``[0, lam]``.
    """
    a = np.abs(Y[:, 0])
    z = np.sort(lam - np.abs(Y[:, 1:]), axis=1, kind="stable")
    j = np.arange(2, z.shape[1] + 2)
    cand = (a[:, None] + np.cumsum(z, axis=1)) / j
    return np.clip(cand.min(axis=1), 0.0, lam)


def prox_hybrid_rows(Y, lam):
    m, q = Y.shape
    if q == 1:
        return prox_soft_threshold(Y, lam)
    A = np.abs(Y)
    out = np.zeros_like(Y)
    keep = A[:, 0] + A[:, 1:].max(axis=1) > lam
    if keep.any():
        Yk = Y[keep]
        l1 = hybrid_split(Yk, lam)
        U = np.empty_like(Yk)
        U[:, 0] = np.sign(Yk[:, 0]) * np.minimum(np.abs(Yk[:, 0]), l1)
        U[:, 1:] = np.sign(Yk[:, 1:]) * np.minimum(np.abs(Yk[:, 1:]), (lam - l1)[:, None])
        out[keep] = Yk - U
    return out


def prox_rows(kind, Y, lam):
    """Apply the prox of ``kind`` to every row of ``Y`` at level ``lam``."""
    if lam == 0 or kind is PenaltyKind.None_:
        return Y.copy()
    if kind is PenaltyKind.L1:
        return prox_soft_threshold(Y, lam)
    if kind is PenaltyKind.GroupL2:
        return prox_group_l2_rows(Y, lam)
    if kind is PenaltyKind.Linf:
        return prox_linf_rows(Y, lam)
    if kind is PenaltyKind.HybridL1Linf:
        return prox_hybrid_rows(Y, lam)
    raise ValueError(f"no prox for {kind}")


def norm_rows(kind, M):
    """Penalty value of each row of ``M`` (first column is the main effect)."""
    A = np.abs(M)
    if kind is PenaltyKind.L1:
        return A.sum(axis=1)
    if kind is PenaltyKind.GroupL2:
        return _l2_rows(M)
    if kind is PenaltyKind.Linf:
        return A.max(axis=1)
    if kind is PenaltyKind.HybridL1Linf:
        return np.maximum(A[:, 0], A[:, 1:].sum(axis=1))
    return np.zeros(M.shape[0])


def dual_norm_rows(kind, M):
    A = np.abs(M)
    if kind is PenaltyKind.L1:
        return A.max(axis=1)
    if kind is PenaltyKind.GroupL2:
        return _l2_rows(M)
    if kind is PenaltyKind.Linf:
        return A.sum(axis=1)
    if kind is PenaltyKind.HybridL1Linf:
        rest = A[:, 1:].max(axis=1) if M.shape[1] > 1 else 0.0
        return A[:, 0] + rest
    return np.where(A.any(axis=1), np.inf, 0.0)
