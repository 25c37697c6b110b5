"""ADMM solver for the squared-error interaction objective.

The problem is split as ``B = D = E = F``: ``D`` carries the row penalties,
``E`` the column penalties and ``F`` the l1 penalty on interactions. Each
iteration

1. adapts ``rho`` from the previous residuals,
2. solves a ridge-type least squares problem for ``B`` through a cached SVD,
3. applies the row/column/elementwise proximal operators to get ``D, E, F``,
4. takes a dual ascent step on ``Gamma1, Gamma2, Gamma3``.

Coefficient matrices have shape ``(p1 + 1, p2 + 1)``; row 0 and column 0 hold
the intercept and main effects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .design import DesignTensor
from .errors import NotConverged, ShapeMismatch
from .penalty import (
    PenaltyKind,
    PenaltySpec,
    dual_norm_rows,
    norm_rows,
    prox_rows,
    prox_soft_threshold,
)


@dataclass(frozen=True)
class AdmmOptions:
    """Stopping rule and step-size control.

    ``eps_pri``/``eps_dual`` default to ``1e-4 * sqrt((p1+1)(p2+1))`` when
    left as ``None``. ``zero_diagonal`` pins the squared terms ``B[j, j]`` of
    the ``X == Z`` problem to zero. With ``screen_null`` a fit whose
    intercept-only solution passes ``is_null_solution`` returns it directly.
    """

    rho0: float = 1.0
    eps_pri: float | None = None
    eps_dual: float | None = None
    max_iter: int = 10_000
    rho_adapt: bool = True
    tol_support: float = 1e-8
    zero_diagonal: bool = False
    screen_null: bool = True

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        for name in ("eps_pri", "eps_dual"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive")

    def tolerances(self, shape):
        default = 1e-4 * math.sqrt(shape[0] * shape[1])
        return (
            default if self.eps_pri is None else self.eps_pri,
            default if self.eps_dual is None else self.eps_dual,
        )


@dataclass
class AdmmState:
    B: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    Gamma1: np.ndarray
    Gamma2: np.ndarray
    Gamma3: np.ndarray
    rho: float = 1.0
    iter: int = 0
    r_primal: float = math.inf
    s_dual: float = math.inf

    @classmethod
    def zeros(cls, shape, rho=1.0):
        z = lambda: np.zeros(shape)  # noqa: E731
        return cls(z(), z(), z(), z(), z(), z(), z(), rho=rho)

    def copy(self):
        return AdmmState(
            self.B.copy(), self.D.copy(), self.E.copy(), self.F.copy(),
            self.Gamma1.copy(), self.Gamma2.copy(), self.Gamma3.copy(),
            self.rho, self.iter, self.r_primal, self.s_dual,
        )


class FactorCache:
    """Thin SVD of the design for repeated ridge solves.

    ``solve(rhs, shift, scale)`` returns ``(scale * W'W / n + shift * I)^{-1} rhs``
    using ``W = U S V'``:
    ``(rhs - V diag(d / (d + shift)) V' rhs) / shift`` with ``d = scale * s^2 / n``.
    Vectors are in ``B.ravel()`` order.
    """

    def __init__(self, design: DesignTensor, rcond=1e-12):
        W = design.matrix()
        self.n = design.n
        self.shape = design.shape_B
        U, s, Vt = np.linalg.svd(W, full_matrices=False)
        keep = s > rcond * (s[0] if s.size else 0.0)
        self.U = np.ascontiguousarray(U[:, keep])
        self.s = s[keep]
        self.Vt = np.ascontiguousarray(Vt[keep])
        self.V = np.ascontiguousarray(self.Vt.T)
        self.eig = self.s**2 / self.n
        self.rank = int(keep.sum())
        self._W = W

    @property
    def n_columns(self):
        return self.Vt.shape[1]

    def Wt_y(self, y):
        """``W' y / n`` from the factors."""
        return self.V @ (self.s * (self.U.T @ y)) / self.n

    def solve(self, rhs, shift, scale=1.0):
        if not shift > 0:
            raise ValueError("shift must be positive")
        d = scale * self.eig
        coef = (d / (d + shift)) * (self.Vt @ rhs)
        return (rhs - self.V @ coef) / shift

    def reconstruction_error(self):
        W = self._W
        approx = (self.U * self.s) @ self.Vt
        return float(np.linalg.norm(W - approx) / max(np.linalg.norm(W), 1e-300))


@dataclass
class FitResult:
    B_hat: np.ndarray
    support: np.ndarray
    objective: float
    iterations: int
    converged: bool
    r_final: float
    s_final: float
    spec: PenaltySpec
    rho: float = 1.0
    state: AdmmState | None = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_interactions(self):
        return int(self.support[1:, 1:].sum())


def _check(design, y, B=None):
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != design.n:
        raise ShapeMismatch(f"y has length {y.shape[0]}, design has {design.n} rows")
    if B is not None and np.shape(B) != design.shape_B:
        raise ShapeMismatch(f"B has shape {np.shape(B)}, expected {design.shape_B}")
    return y


def penalty_value(B, spec: PenaltySpec):
    """Penalty part of the objective; rows/columns 1.. only."""
    B = np.asarray(B, dtype=float)
    total = 0.0
    if spec.lambda1:
        total += spec.lambda1 * norm_rows(spec.row_kind, B[1:, :]).sum()
    if spec.lambda2:
        total += spec.lambda2 * norm_rows(spec.col_kind, B[:, 1:].T).sum()
    if spec.lambda3:
        total += spec.lambda3 * np.abs(B[1:, 1:]).sum()
    return float(total)


def objective(B, design: DesignTensor, y, spec: PenaltySpec):
    """``(1/2n) ||y - W*B||^2`` plus the row, column and interaction penalties."""
    y = _check(design, y, B)
    resid = y - design.matrix() @ np.asarray(B, dtype=float).ravel()
    return float(resid @ resid / (2 * design.n)) + penalty_value(B, spec)


def weak_objective(BX, BZ, weak_design, y, spec: PenaltySpec):
    """Objective of the weak-heredity formulation (evaluation only).

    ``BX`` is ``p1 x (p2+1)`` (column 0 = X main effects), ``BZ`` is
    ``(p1+1) x p2`` (row 0 = Z main effects). Interactions are ``BX[:, 1:] +
    BZ[1:, :]``.
    """
    p1, p2 = weak_design.p1, weak_design.p2
    BX = np.asarray(BX, dtype=float)
    BZ = np.asarray(BZ, dtype=float)
    if BX.shape != (p1, p2 + 1) or BZ.shape != (p1 + 1, p2):
        raise ShapeMismatch("BX must be p1 x (p2+1) and BZ (p1+1) x p2")
    y = np.asarray(y, dtype=float).ravel()
    resid = y - weak_design.wx @ BX.ravel() - weak_design.wz @ BZ.ravel()
    value = resid @ resid / (2 * y.size)
    value += spec.lambda1 * norm_rows(spec.row_kind, BX).sum()
    value += spec.lambda2 * norm_rows(spec.col_kind, BZ.T).sum()
    value += spec.lambda3 * (np.abs(BX[:, 1:]).sum() + np.abs(BZ[1:, :]).sum())
    return float(value)


# -- ADMM steps ------------------------------------------------------------


def update_rho(state: AdmmState, factor=10.0, scale=2.0):
    r, s = state.r_primal, state.s_dual
    if not (math.isfinite(r) and math.isfinite(s)):
        return state.rho
    if r > factor * s:
        return state.rho * scale
    if factor * r < s:
        return state.rho / scale
    return state.rho


def consensus_rhs(state: AdmmState):
    """``rho (D + E + F) - (Gamma1 + Gamma2 + Gamma3)``, i.e. ``3 rho M``."""
    rho = state.rho
    return rho * (state.D + state.E + state.F) - (state.Gamma1 + state.Gamma2 + state.Gamma3)


def update_B(state: AdmmState, cache: FactorCache, Wty):
    """Exact minimizer of ``(1/2n)||y - W*B||^2 + (3 rho / 2)||M - B||_F^2``.

    ``Wty`` is ``W'y / n`` in ``B.ravel()`` order.
    """
    rhs = Wty + consensus_rhs(state).ravel()
    return cache.solve(rhs, 3.0 * state.rho).reshape(cache.shape)


def update_DE(state: AdmmState, spec: PenaltySpec):
    rho = state.rho
    D = state.B + state.Gamma1 / rho
    D[1:, :] = prox_rows(spec.row_kind, D[1:, :], spec.lambda1 / rho)
    E = state.B + state.Gamma2 / rho
    E[:, 1:] = prox_rows(spec.col_kind, E[:, 1:].T, spec.lambda2 / rho).T
    return D, E


def update_F(state: AdmmState, lambda3, zero_diagonal=False):
    F = state.B + state.Gamma3 / state.rho
    if lambda3:
        F[1:, 1:] = prox_soft_threshold(F[1:, 1:], lambda3 / state.rho)
    if zero_diagonal:
        np.fill_diagonal(F[1:, 1:], 0.0)
    return F


def update_duals(state: AdmmState):
    if not state.rho > 0:
        raise ValueError("rho must be positive")
    rho = state.rho
    return (
        state.Gamma1 + rho * (state.B - state.D),
        state.Gamma2 + rho * (state.B - state.E),
        state.Gamma3 + rho * (state.B - state.F),
    )


def residuals(state: AdmmState, previous: AdmmState):
    """Primal ``||(B|B|B) - (D|E|F)||_F`` and dual ``rho ||Theta - Theta_prev||_F``."""
    B = state.B
    r = math.sqrt(
        _sq(B - state.D) + _sq(B - state.E) + _sq(B - state.F)
    )
    s = state.rho * math.sqrt(
        _sq(state.D - previous.D) + _sq(state.E - previous.E) + _sq(state.F - previous.F)
    )
    return r, s


def _sq(A):
    return float(np.einsum("ij,ij->", A, A))


def _block_mask(M, kind, axis):
    """Which cells a row (axis=1) or column (axis=0) penalty leaves active."""
    if kind is PenaltyKind.None_:
        return np.ones(M.shape, dtype=bool)
    if kind.groupwise:
        nz = M.any(axis=axis, keepdims=True)
        return np.broadcast_to(nz, M.shape)
    return M != 0


def extract_support(state: AdmmState, spec: PenaltySpec, tol_support=1e-8):
    """Support of the fit read off the prox blocks.

    A cell is active when its row of ``D`` and its column of ``E`` are not
    zeroed and, for interactions, ``|F| > tol_support``. For groupwise kinds
    this gives strong heredity by construction. ``L1`` kinds are read
    entrywise.
    """
    shape = state.B.shape
    rows = np.ones(shape, dtype=bool)
    cols = np.ones(shape, dtype=bool)
    rows[1:, :] = _block_mask(state.D[1:, :], spec.row_kind, axis=1)
    cols[:, 1:] = _block_mask(state.E[:, 1:], spec.col_kind, axis=0)
    inter = np.ones(shape, dtype=bool)
    inter[1:, 1:] = np.abs(state.F[1:, 1:]) > tol_support
    support = rows & cols & inter
    support[0, 0] = True
    return support


# -- drivers ---------------------------------------------------------------


def null_result(design, y, intercept, spec, cache, warm=None, opts=None):
    """Intercept-only FitResult when the blockwise check certifies it, else None.

    ``intercept`` is the loss minimizer with every other coefficient at zero;
    at that point the loss gradient is ``-W'(y - mean(y)) / n`` for both the
    squared-error and the logistic loss. The objective is left to the caller.
    """
    shape = design.shape_B
    G = cache.Wt_y(y - y.mean()).reshape(shape)
    if not is_null_solution(G, spec):
        return None
    B = np.zeros(shape)
    B[0, 0] = intercept
    rho = warm.rho if warm is not None else (opts.rho0 if opts else 1.0)
    z = np.zeros(shape)
    state = AdmmState(B, B.copy(), B.copy(), B.copy(), z, z.copy(), z.copy(), rho, 0, 0.0, 0.0)
    support = np.zeros(shape, dtype=bool)
    support[0, 0] = True
    return FitResult(
        B_hat=B.copy(),
        support=support,
        objective=math.nan,
        iterations=0,
        converged=True,
        r_final=0.0,
        s_final=0.0,
        spec=spec,
        rho=rho,
        state=state,
        diagnostics={"null_certificate": True, "rank": cache.rank},
    )


def admm_fit(
    design: DesignTensor,
    y,
    spec: PenaltySpec,
    opts: AdmmOptions | None = None,
    warm: AdmmState | None = None,
    cache: FactorCache | None = None,
    strict=False,
    trace_every=0,
):
    """Fit one penalty setting.

    ``cache`` may be shared across calls on the same design. With
    ``strict=True`` a non-converged fit raises ``NotConverged``; otherwise
    the result has ``converged=False``. ``trace_every > 0`` records the
    objective at ``B`` every that many iterations in ``diagnostics``.
    """
    opts = opts or AdmmOptions()
    y = _check(design, y)
    cache = cache or FactorCache(design)
    shape = design.shape_B
    eps_pri, eps_dual = opts.tolerances(shape)
    Wty = cache.Wt_y(y)
    W = cache._W

    if warm is not None and warm.B.shape != shape:
        raise ShapeMismatch("warm start has the wrong shape")
    if opts.screen_null:
        null = null_result(design, y, y.mean(), spec, cache, warm, opts)
        if null is not None:
            resid = y - y.mean()
            null.objective = float(resid @ resid / (2 * design.n))
            return null
    state = warm.copy() if warm is not None else AdmmState.zeros(shape, opts.rho0)
    state.iter = 0
    has_history = warm is not None and math.isfinite(warm.r_primal)
    lam1, lam2, lam3 = spec.lambda1, spec.lambda2, spec.lambda3
    trace = []
    converged = False
    prev_D, prev_E, prev_F = state.D, state.E, state.F

    for it in range(1, opts.max_iter + 1):
        if opts.rho_adapt and (it > 1 or has_history):
            state.rho = update_rho(state)
        rho = state.rho
        state.B = update_B(state, cache, Wty)
        prev_D, prev_E, prev_F = state.D, state.E, state.F
        state.D, state.E = update_DE(state, spec)
        state.F = update_F(state, lam3, opts.zero_diagonal)
        G1, G2, G3 = update_duals(state)
        state.Gamma1, state.Gamma2, state.Gamma3 = G1, G2, G3
        B = state.B
        r = math.sqrt(_sq(B - state.D) + _sq(B - state.E) + _sq(B - state.F))
        s = rho * math.sqrt(
            _sq(state.D - prev_D) + _sq(state.E - prev_E) + _sq(state.F - prev_F)
        )
        state.r_primal, state.s_dual, state.iter = r, s, it
        if trace_every and it % trace_every == 0:
            resid = y - W @ B.ravel()
            trace.append((it, float(resid @ resid / (2 * design.n)) + penalty_value(B, spec)))
        if r <= eps_pri and s <= eps_dual:
            converged = True
            break

    support = extract_support(state, spec, opts.tol_support)
    B_hat = np.where(support, state.B, 0.0)
    resid = y - W @ B_hat.ravel()
    obj = float(resid @ resid / (2 * design.n)) + penalty_value(B_hat, spec)
    # the dual residual is scaled by the rho in force during the iteration
    diagnostics = {"eps_pri": eps_pri, "eps_dual": eps_dual, "rank": cache.rank, "dual_residual_rho": state.rho}
    if lam1 == lam2 == lam3 == 0 and design.n < cache.n_columns:
        diagnostics["min_norm_interpolant"] = True
    if trace:
        diagnostics["objective_trace"] = trace
    result = FitResult(
        B_hat=B_hat,
        support=support,
        objective=obj,
        iterations=state.iter,
        converged=converged,
        r_final=state.r_primal,
        s_final=state.s_dual,
        spec=spec,
        rho=state.rho,
        state=state,
        diagnostics=diagnostics,
    )
    if strict and not converged:
        raise NotConverged(result)
    return result


def _group_key(spec: PenaltySpec):
    if spec.alpha is not None:
        return (spec.row_kind, spec.col_kind, "alpha", round(spec.alpha, 12))
    total = spec.lambda1 + spec.lambda2 + spec.lambda3
    if total == 0:
        return (spec.row_kind, spec.col_kind, "zero")
    return (
        spec.row_kind,
        spec.col_kind,
        round(spec.lambda1 / total, 12),
        round(spec.lambda2 / total, 12),
    )


def _magnitude(spec: PenaltySpec):
    if spec.lam is not None:
        return spec.lam
    return spec.lambda1 + spec.lambda2 + spec.lambda3


class PathError(RuntimeError):
    def __init__(self, index, spec, cause):
        self.index = index
        self.spec = spec
        super().__init__(f"grid point {index} ({spec}) failed: {cause}")


def fit_path(design, y, spec_grid, opts=None, cache=None, keep_state=False):
    """Fit every spec in ``spec_grid`` with warm starts.

    Specs sharing kinds and ``alpha`` (or the same lambda ratios) form one
    path, fitted from the largest penalty down. Results come back in input
    order. Unless ``keep_state`` is set, the ADMM state is dropped from each
    result once it has served as the next warm start.
    """
    spec_grid = list(spec_grid)
    if not spec_grid:
        raise ValueError("spec_grid is empty")
    y = _check(design, y)
    cache = cache or FactorCache(design)
    groups = {}
    for i, spec in enumerate(spec_grid):
        groups.setdefault(_group_key(spec), []).append(i)
    results = [None] * len(spec_grid)
    for indices in groups.values():
        order = sorted(indices, key=lambda i: -_magnitude(spec_grid[i]))
        warm = None
        for i in order:
            try:
                res = admm_fit(design, y, spec_grid[i], opts, warm=warm, cache=cache)
            except Exception as exc:  # tag the failing grid point
                raise PathError(i, spec_grid[i], exc) from exc
            warm = res.state
            results[i] = res if keep_state else replace(res, state=None)
    return results


# -- tuning grids ----------------------------------------------------------


def null_gradient(design, y, cache=None):
    """``W'(y - mean(y)) / n`` as a coefficient matrix."""
    y = _check(design, y)
    cache = cache or FactorCache(design)
    return cache.Wt_y(y - y.mean()).reshape(design.shape_B)


def is_null_solution(G, spec: PenaltySpec):
    """Blockwise sufficient check that the intercept-only fit is optimal.

    Interactions are first absorbed by the l1 term up to ``lambda3``; what
    remains is split evenly between the row and the column groups, and each
    group is tested against its dual norm.
    """
    inter = G[1:, 1:]
    rest = inter - np.clip(inter, -spec.lambda3, spec.lambda3)
    U = np.empty((G.shape[0] - 1, G.shape[1]))
    U[:, 0] = G[1:, 0]
    U[:, 1:] = rest / 2
    V = np.empty((G.shape[1] - 1, G.shape[0]))
    V[:, 0] = G[0, 1:]
    V[:, 1:] = rest.T / 2
    slack = 1 + 1e-12
    ok_rows = np.all(dual_norm_rows(spec.row_kind, U) <= spec.lambda1 * slack)
    ok_cols = np.all(dual_norm_rows(spec.col_kind, V) <= spec.lambda2 * slack)
    return bool(ok_rows and ok_cols)


def lambda_max(design, y, kind, alpha, p=None, cache=None, rtol=1e-6):
    """Smallest ``lam`` (reparametrized scale) that passes ``is_null_solution``."""
    G = null_gradient(design, y, cache)
    p = p or max(design.p1, design.p2)
    make = lambda lam: PenaltySpec.from_alpha(kind, alpha, lam, p)  # noqa: E731
    hi = 1.0
    while not is_null_solution(G, make(hi)):
        hi *= 2.0
    lo = hi / 2.0
    while lo > 1e-300 and is_null_solution(G, make(lo)):
        hi, lo = lo, lo / 2.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if is_null_solution(G, make(mid)):
            hi = mid
        else:
            lo = mid
    return hi


def alpha_lambda_grid(
    design,
    y,
    kind,
    alphas=None,
    n_lambda=50,
    ratio=1e-3,
    p=None,
    cache=None,
):
    """Reparametrized ``(alpha, lam)`` grid, each alpha with its own log-spaced
    path from ``lambda_max`` down to ``ratio * lambda_max``."""
    if alphas is None:
        alphas = np.linspace(0.05, 0.95, 10)
    p = p or max(design.p1, design.p2)
    cache = cache or FactorCache(design)
    grid = []
    for alpha in alphas:
        top = lambda_max(design, y, kind, float(alpha), p=p, cache=cache)
        for lam in np.geomspace(top, top * ratio, n_lambda):
            grid.append(PenaltySpec.from_alpha(kind, float(alpha), float(lam), p))
    return grid
