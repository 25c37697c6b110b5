import math

import numpy as np
import pytest

from conftest import make_problem
from family.errors import NotConverged, ShapeMismatch
from family.penalty import PenaltySpec
from family.solver import (
    AdmmOptions,
    AdmmState,
    FactorCache,
    PathError,
    admm_fit,
    alpha_lambda_grid,
    extract_support,
    fit_path,
    is_null_solution,
    lambda_max,
    null_gradient,
    objective,
    update_rho,
)

TIGHT = AdmmOptions(eps_pri=1e-10, eps_dual=1e-10, max_iter=200_000)

# Optimal objectives from an interior-point conic solver (CLARABEL, gap 1e-12)
# on make_problem instances with lambda1=0.3, lambda2=0.2, lambda3=0.1.
CONIC = {
    ("asym", "l2"): 1.5636124625978718,
    ("asym", "linf"): 1.4072169017488945,
    ("asym", "hybrid"): 1.4072169017491412,
    ("sym", "l2"): 1.5487497450090402,
    ("sym", "linf"): 1.2914106605563203,
    ("sym", "hybrid"): 1.2934104646913225,
}
# Same solver, symmetric instance, lambda = (0.3, 0.3, 0.1), diagonal pinned to 0.
CONIC_ZERO_DIAGONAL = 3.8565344169148945


def problems():
    return {"asym": make_problem(n=60, p1=4, p2=3, seed=1), "sym": make_problem(n=60, p1=4, seed=2)}


@pytest.mark.parametrize("name,kind", sorted(CONIC))
def test_matches_conic_solver(name, kind):
    design, y, _ = problems()[name]
    res = admm_fit(design, y, PenaltySpec(kind, kind, 0.3, 0.2, 0.1), TIGHT)
    assert res.converged
    assert res.objective == pytest.approx(CONIC[name, kind], rel=1e-8)


def test_zero_diagonal_matches_conic_solver():
    design, y, _ = problems()["sym"]
    opts = AdmmOptions(eps_pri=1e-10, eps_dual=1e-10, max_iter=200_000, zero_diagonal=True)
    res = admm_fit(design, y, PenaltySpec("l2", "l2", 0.3, 0.3, 0.1), opts)
    assert np.all(np.diag(res.B_hat[1:, 1:]) == 0)
    assert res.objective == pytest.approx(CONIC_ZERO_DIAGONAL, rel=1e-8)


def test_unpenalized_is_least_squares(small_asym):
    design, y, _ = small_asym
    res = admm_fit(design, y, PenaltySpec(), AdmmOptions(eps_pri=1e-9, eps_dual=1e-9))
    W = design.matrix()
    ols = np.linalg.lstsq(W, y, rcond=None)[0]
    np.testing.assert_allclose(W @ res.B_hat.ravel(), W @ ols, atol=1e-5)


def test_objective_of_fit_is_reported(small_asym):
    design, y, _ = small_asym
    spec = PenaltySpec("l2", "l2", 0.1, 0.1, 0.05)
    res = admm_fit(design, y, spec)
    assert res.objective == pytest.approx(objective(res.B_hat, design, y, spec))


def test_factor_cache_solve(small_asym):
    design, y, _ = small_asym
    cache = FactorCache(design)
    assert cache.reconstruction_error() < 1e-12
    W = design.matrix()
    rhs = np.random.default_rng(0).standard_normal(W.shape[1])
    for shift, scale in ((0.7, 1.0), (3.0, 0.25)):
        A = scale * W.T @ W / design.n + shift * np.eye(W.shape[1])
        np.testing.assert_allclose(cache.solve(rhs, shift, scale), np.linalg.solve(A, rhs), atol=1e-10)
    np.testing.assert_allclose(cache.Wt_y(y), W.T @ y / design.n)
    with pytest.raises(ValueError):
        cache.solve(rhs, 0.0)


def test_rho_update_rule():
    state = AdmmState.zeros((2, 2), rho=1.0)
    state.r_primal, state.s_dual = 11.0, 1.0
    assert update_rho(state) == 2.0
    state.r_primal, state.s_dual = 1.0, 11.0
    assert update_rho(state) == 0.5
    state.r_primal, state.s_dual = 1.0, 5.0
    assert update_rho(state) == 1.0


def test_null_fit_at_lambda_max(small_sym):
    design, y, _ = small_sym
    for kind in ("l2", "linf", "hybrid", "l1"):
        top = lambda_max(design, y, kind, 0.5)
        res = admm_fit(design, y, PenaltySpec.from_alpha(kind, 0.5, top, 4))
        assert res.support.sum() == 1
        assert res.B_hat[0, 0] == pytest.approx(y.mean())
        below = admm_fit(design, y, PenaltySpec.from_alpha(kind, 0.5, 0.9 * top, 4), TIGHT)
        assert below.support.sum() > 1


def test_null_screen_agrees_with_admm(small_asym):
    design, y, _ = small_asym
    top = lambda_max(design, y, "l2", 0.3)
    spec = PenaltySpec.from_alpha("l2", 0.3, 1.01 * top, 4)
    raw = admm_fit(design, y, spec, AdmmOptions(eps_pri=1e-10, eps_dual=1e-10, screen_null=False))
    assert np.abs(raw.B_hat[1:, :]).max() < 1e-6
    assert np.abs(raw.B_hat[0, 1:]).max() < 1e-6
    assert is_null_solution(null_gradient(design, y), spec)


def test_support_is_hereditary(small_sym):
    design, y, _ = small_sym
    for kind in ("l2", "linf", "hybrid"):
        for lam in (0.05, 0.2, 0.5):
            res = admm_fit(design, y, PenaltySpec.from_alpha(kind, 0.5, lam, 4))
            S = res.support
            inter = np.argwhere(S[1:, 1:]) + 1
            for j, k in inter:
                assert S[j, 0] and S[0, k]
            np.testing.assert_array_equal(res.B_hat[~S], 0)


def test_path_matches_cold_fits(small_asym):
    design, y, _ = small_asym
    grid = alpha_lambda_grid(design, y, "l2", alphas=[0.3, 0.7], n_lambda=5)
    assert len(grid) == 10
    opts = AdmmOptions(eps_pri=1e-9, eps_dual=1e-9)
    path = fit_path(design, y, grid[::-1], opts)
    for spec, res in zip(grid[::-1], path):
        assert res.spec == spec
        cold = admm_fit(design, y, spec, opts)
        assert res.objective == pytest.approx(cold.objective, rel=1e-6, abs=1e-9)


def test_path_errors_are_tagged(small_asym, monkeypatch):
    design, y, _ = small_asym
    with pytest.raises(ValueError):
        fit_path(design, y, [])
    with pytest.raises(ShapeMismatch):
        fit_path(design, y[:-1], [PenaltySpec()])

    def broken(*args, **kwargs):
        raise FloatingPointError("boom")

    monkeypatch.setattr("family.solver.admm_fit", broken)
    with pytest.raises(PathError) as err:
        fit_path(design, y, [PenaltySpec(lambda1=1.0), PenaltySpec()])
    assert err.value.index == 0


def test_strict_raises_with_partial_result(small_asym):
    design, y, _ = small_asym
    spec = PenaltySpec("l2", "l2", 0.01, 0.01, 0.01)
    opts = AdmmOptions(max_iter=2, eps_pri=1e-12, eps_dual=1e-12)
    res = admm_fit(design, y, spec, opts)
    assert not res.converged and res.iterations == 2
    with pytest.raises(NotConverged) as err:
        admm_fit(design, y, spec, opts, strict=True)
    assert err.value.result.iterations == 2


def test_shape_errors(small_asym):
    design, y, _ = small_asym
    with pytest.raises(ShapeMismatch):
        admm_fit(design, y[:-1], PenaltySpec())
    with pytest.raises(ShapeMismatch):
        admm_fit(design, y, PenaltySpec(), warm=AdmmState.zeros((2, 2)))


def test_options_validation():
    with pytest.raises(ValueError):
        AdmmOptions(rho0=0)
    with pytest.raises(ValueError):
        AdmmOptions(max_iter=0)
    assert AdmmOptions().tolerances((5, 5)) == (pytest.approx(5e-4), pytest.approx(5e-4))


def test_extract_support_l1_is_entrywise(small_asym):
    design, y, _ = small_asym
    res = admm_fit(design, y, PenaltySpec("l1", "l1", 0.05, 0.05, 0.05), TIGHT)
    S = extract_support(res.state, res.spec)
    assert S[0, 0]
    assert np.array_equal(S, res.support)


def test_unpenalized_underdetermined_flags_min_norm():
    design, y, _ = make_problem(n=12, p1=4, p2=3, seed=5)
    res = admm_fit(design, y, PenaltySpec(), AdmmOptions(max_iter=50))
    assert res.diagnostics.get("min_norm_interpolant")
    assert math.isfinite(res.objective)
