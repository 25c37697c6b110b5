"""Logistic loss for binary responses.

The ADMM loop is the squared-error one; only the ``B`` step changes. The
logistic Hessian is bounded by ``W'W / 4``, so each ``B`` step minimizes the
quadratic majorizer

    l(b0)/n + g'(b - b0) + ||W(b - b0)||^2 / (8n) + (3 rho / 2) ||M - b||^2

which is a ridge solve with the same cached SVD (eigenvalues scaled by 1/4).
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
from scipy.special import expit

from .design import DesignTensor
from .errors import NonBinaryResponse, NotConverged
from .penalty import PenaltySpec
from .solver import (
    AdmmOptions,
    AdmmState,
    FactorCache,
    FitResult,
    PathError,
    _check,
    _group_key,
    _magnitude,
    _sq,
    consensus_rhs,
    extract_support,
    is_null_solution,
    null_result,
    penalty_value,
    update_DE,
    update_duals,
    update_F,
    update_rho,
)


def check_binary(y):
    y = np.asarray(y, dtype=float).ravel()
    if not np.all((y == 0) | (y == 1)):
        raise NonBinaryResponse("logistic loss needs a 0/1 response")
    return y


def _loss_eta(eta, y):
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta))


def logistic_loss(B, design: DesignTensor, y):
    """Mean negative Bernoulli log-likelihood ``-(1/n) sum[y eta - log(1 + e^eta)]``."""
    y = check_binary(_check(design, y, B))
    eta = design.matrix() @ np.asarray(B, dtype=float).ravel()
    return _loss_eta(eta, y)


def logistic_grad(B, design: DesignTensor, y):
    y = check_binary(_check(design, y, B))
    W = design.matrix()
    eta = W @ np.asarray(B, dtype=float).ravel()
    return (W.T @ (expit(eta) - y) / design.n).reshape(design.shape_B)


def logistic_objective(B, design, y, spec: PenaltySpec):
    return logistic_loss(B, design, y) + penalty_value(B, spec)


def majorized_B_step(b0, W, y, cache, rho, target_rhs):
    """One minimization of the quadratic majorizer around ``b0``.

    ``target_rhs`` is ``rho (D + E + F) - (Gamma1 + Gamma2 + Gamma3)``
    flattened, i.e. ``3 rho M``.
    """
    n = W.shape[0]
    g = W.T @ (expit(W @ b0) - y) / n
    rhs = -(g + 3.0 * rho * b0 - target_rhs)
    return b0 + cache.solve(rhs, 3.0 * rho, scale=0.25)


def majorizer_gap(b_new, b0, W, y, rho, target_rhs):
    """Surrogate minus true ``B``-step objective at ``b_new`` (should be >= 0)."""
    n = W.shape[0]
    m = target_rhs / (3.0 * rho)
    eta0 = W @ b0
    g = W.T @ (expit(eta0) - y) / n
    step = W @ (b_new - b0)
    prox = 1.5 * rho * np.sum((m - b_new) ** 2)
    surrogate = _loss_eta(eta0, y) + g @ (b_new - b0) + step @ step / (8 * n) + prox
    true = _loss_eta(W @ b_new, y) + prox
    return surrogate - true


def admm_fit_logistic(
    design: DesignTensor,
    y,
    spec: PenaltySpec,
    opts: AdmmOptions | None = None,
    warm: AdmmState | None = None,
    cache: FactorCache | None = None,
    inner_iter=50,
    inner_tol=1e-9,
    strict=False,
):
    """Penalized logistic regression by ADMM with a majorized ``B`` step.

    ``inner_iter`` majorize-minimize steps are taken per outer iteration
    (stopping early once the step is below ``inner_tol``).
    """
    opts = opts or AdmmOptions()
    y = check_binary(_check(design, y))
    cache = cache or FactorCache(design)
    shape = design.shape_B
    eps_pri, eps_dual = opts.tolerances(shape)
    W = cache._W
    if opts.screen_null:
        ybar = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
        intercept = math.log(ybar / (1 - ybar))
        null = null_result(design, y, intercept, spec, cache, warm, opts)
        if null is not None:
            null.objective = _loss_eta(np.full(y.size, intercept), y)
            null.diagnostics["family"] = "binomial"
            return null

    state = warm.copy() if warm is not None else AdmmState.zeros(shape, opts.rho0)
    state.iter = 0
    has_history = warm is not None and math.isfinite(warm.r_primal)
    converged = False
    for it in range(1, opts.max_iter + 1):
        if opts.rho_adapt and (it > 1 or has_history):
            state.rho = update_rho(state)
        rho = state.rho
        target = consensus_rhs(state).ravel()
        b = state.B.ravel()
        for _ in range(inner_iter):
            b_next = majorized_B_step(b, W, y, cache, rho, target)
            done = np.max(np.abs(b_next - b)) <= inner_tol
            b = b_next
            if done:
                break
        state.B = b.reshape(shape)
        prev_D, prev_E, prev_F = state.D, state.E, state.F
        state.D, state.E = update_DE(state, spec)
        state.F = update_F(state, spec.lambda3, opts.zero_diagonal)
        state.Gamma1, state.Gamma2, state.Gamma3 = update_duals(state)
        B = state.B
        r = math.sqrt(_sq(B - state.D) + _sq(B - state.E) + _sq(B - state.F))
        s = rho * math.sqrt(
            _sq(state.D - prev_D) + _sq(state.E - prev_E) + _sq(state.F - prev_F)
        )
        state.r_primal, state.s_dual, state.iter = r, s, it
        if r <= eps_pri and s <= eps_dual:
            converged = True
            break

    support = extract_support(state, spec, opts.tol_support)
    B_hat = np.where(support, state.B, 0.0)
    obj = _loss_eta(W @ B_hat.ravel(), y) + penalty_value(B_hat, spec)
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
        diagnostics={"eps_pri": eps_pri, "eps_dual": eps_dual, "family": "binomial"},
    )
    if strict and not converged:
        raise NotConverged(result)
    return result


def fit_path_logistic(design, y, spec_grid, opts=None, cache=None, **kw):
    """Warm-started logistic fits, mirroring ``solver.fit_path``."""
    spec_grid = list(spec_grid)
    if not spec_grid:
        raise ValueError("spec_grid is empty")
    cache = cache or FactorCache(design)
    groups = {}
    for i, spec in enumerate(spec_grid):
        groups.setdefault(_group_key(spec), []).append(i)
    results = [None] * len(spec_grid)
    for indices in groups.values():
        warm = None
        for i in sorted(indices, key=lambda i: -_magnitude(spec_grid[i])):
            try:
                res = admm_fit_logistic(design, y, spec_grid[i], opts, warm=warm, cache=cache, **kw)
            except NonBinaryResponse:
                raise
            except Exception as exc:
                raise PathError(i, spec_grid[i], exc) from exc
            warm = res.state
            results[i] = replace(res, state=None)
    return results


def lambda_max_logistic(design, y, kind, alpha, p=None, cache=None):
    """Same blockwise zero-check as the squared-error case, at the null logistic fit."""
    y = check_binary(_check(design, y))
    cache = cache or FactorCache(design)
    p = p or max(design.p1, design.p2)
    G = cache.Wt_y(y - y.mean()).reshape(design.shape_B)
    make = lambda lam: PenaltySpec.from_alpha(kind, alpha, lam, p)  # noqa: E731
    hi = 1.0
    while not is_null_solution(G, make(hi)):
        hi *= 2.0
    lo = 0.0
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if is_null_solution(G, make(mid)):
            hi = mid
        else:
            lo = mid
    return hi
