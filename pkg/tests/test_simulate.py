import math

import numpy as np
import pytest

from family.design import build_design
from family.errors import InfeasibleScenario
from family.simulate import (
    MethodConfig,
    Scenario,
    TABLE_COLUMNS,
    covariance_matrix,
    gen_coefficients,
    gen_gaussian_data,
    gen_logistic_response,
    gen_response,
    load_scenario,
    make_replicate,
    replicate_streams,
    run_replicates,
    run_scenario,
    save_scenario,
    summarize,
    write_table_csv,
)

QUICK = MethodConfig(alphas=(0.5, 0.8), n_lambda=8)


def small_scenario(**kw):
    base = dict(n_train=80, n_test=80, n_valid=80, p=6, n_true_main=4, n_true_inter=3, seed=5)
    base.update(kw)
    return Scenario(**base)


def test_coefficients_are_hereditary():
    for seed in range(20):
        B = gen_coefficients(Scenario(seed=seed))
        main = B[1:, 0] + B[0, 1:]
        assert np.count_nonzero(main) == 10 and np.all(main[10:] == 0)
        inter = np.triu(B[1:, 1:] + B[1:, 1:].T, 1)
        assert np.count_nonzero(inter) == 15
        for j, k in np.argwhere(inter):
            assert main[j] != 0 and main[k] != 0
        assert set(np.abs(inter[inter != 0])) <= set(range(2, 11, 2))
        assert set(np.abs(main[main != 0])) <= set(range(1, 6))
        np.testing.assert_array_equal(B, B.T)


def test_main_effects_only():
    B = gen_coefficients(Scenario(n_true_inter=0))
    assert not B[1:, 1:].any()


def test_infeasible_scenario():
    with pytest.raises(InfeasibleScenario):
        gen_coefficients(Scenario(p=10, n_true_main=10, n_true_inter=46))
    gen_coefficients(Scenario(p=10, n_true_main=10, n_true_inter=45))


def test_scenario_validation(tmp_path):
    with pytest.raises(ValueError):
        Scenario(covariance="banded")
    with pytest.raises(ValueError):
        Scenario(n_true_main=31)
    with pytest.raises(ValueError):
        Scenario.from_dict({"p": 5, "bogus": 1})
    sc = Scenario(covariance="ar", cov_param=0.5, seed=3)
    path = tmp_path / "s.json"
    save_scenario(sc, path)
    assert load_scenario(path) == sc


def test_covariances():
    assert np.array_equal(covariance_matrix(Scenario(covariance="ar", cov_param=0.0, p=4, n_true_main=2, n_true_inter=1)), np.eye(4))
    assert np.array_equal(covariance_matrix(Scenario(covariance="exchangeable", cov_param=0.0, p=4, n_true_main=2, n_true_inter=1)), np.eye(4))
    S = covariance_matrix(Scenario(covariance="ar", cov_param=0.5, p=3, n_true_main=2, n_true_inter=1))
    np.testing.assert_allclose(S[0], [1, 0.5, 0.25])


def test_identity_sample_covariance():
    sc = Scenario(n_train=10_000, p=5, n_true_main=2, n_true_inter=1)
    X = gen_gaussian_data(sc, "train").X
    assert np.abs(np.cov(X.T) - np.eye(5)).max() < 0.1


def test_exchangeable_sample_covariance():
    sc = Scenario(n_train=20_000, p=4, n_true_main=2, n_true_inter=1, covariance="exchangeable", cov_param=0.4)
    X = gen_gaussian_data(sc, "train").X
    assert np.abs(np.cov(X.T) - covariance_matrix(sc)).max() < 0.05


def test_response_snr_and_reproducibility():
    sc = Scenario()
    B = gen_coefficients(sc)
    snrs = []
    for seed in range(50):
        design = build_design(gen_gaussian_data(sc, "train", replicate_streams(seed)["x_train"]))
        y, sigma = gen_response(design, B, 3.0, seed=seed)
        mu = design.matrix() @ B.ravel()
        snrs.append(np.var(mu) / np.var(y - mu))
    assert 2.5 <= np.mean(snrs) <= 3.5
    y1, _ = gen_response(design, B, seed=7)
    y2, _ = gen_response(design, B, seed=7)
    assert np.array_equal(y1, y2)


def test_zero_signal_uses_unit_sigma():
    sc = Scenario(n_train=50)
    design = build_design(gen_gaussian_data(sc, "train"))
    with pytest.warns(RuntimeWarning):
        _, sigma = gen_response(design, np.zeros(design.shape_B))
    assert sigma == 1.0


def test_logistic_response():
    sc = Scenario(n_train=10_000, p=3, n_true_main=2, n_true_inter=1)
    design = build_design(gen_gaussian_data(sc, "train"))
    y = gen_logistic_response(design, np.zeros(design.shape_B), seed=1)
    assert abs(y.mean() - 0.5) < 3 * 0.5 / math.sqrt(y.size)
    B = np.zeros(design.shape_B)
    B[0, 0] = 1e3
    assert gen_logistic_response(design, B).all()


def test_logistic_response_follows_the_curve():
    sc = Scenario(n_train=20_000, p=3, n_true_main=2, n_true_inter=1)
    design = build_design(gen_gaussian_data(sc, "train"))
    B = np.zeros(design.shape_B)
    B[1, 0] = 1.5
    y = gen_logistic_response(design, B, seed=2)
    eta = design.matrix() @ B.ravel()
    edges = np.quantile(eta, np.linspace(0, 1, 11))
    chi2 = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (eta >= lo) & (eta < hi)
        p = (1 / (1 + np.exp(-eta[sel]))).sum()
        chi2 += (y[sel].sum() - p) ** 2 / (p * (1 - p / sel.sum()))
    # 10 bins; the 0.999 quantile of chi-square(10) is 29.6
    assert chi2 < 29.6


def test_replicate_splits_are_independent():
    data = make_replicate(small_scenario(), 0)
    X = {s: data.designs[s].matrix() for s in ("train", "test", "valid")}
    assert not np.array_equal(X["train"], X["test"])
    other = make_replicate(small_scenario(), 1)
    assert not np.array_equal(other.designs["train"].matrix(), X["train"])


def test_run_scenario_is_deterministic():
    sc = small_scenario()
    a = run_scenario(sc, QUICK, 0)
    b = run_scenario(sc, QUICK, 0)
    assert a == b
    for variant in ("raw", "relaxed"):
        assert a[variant]["relative_ssr"] > 0.5
        assert 0 <= a[variant]["tpr"] <= 1


def test_noiseless_reaches_oracle():
    sc = small_scenario(snr_target=1e12)
    rep = run_scenario(sc, MethodConfig(alphas=(0.3, 0.6, 0.9), n_lambda=20), 0)
    assert abs(rep["relaxed"]["relative_ssr"] - 1.0) < 0.05 or rep["relaxed"]["valid_loss"] < 1e-6


def test_logistic_scenario_runs():
    sc = small_scenario(family="binomial", n_train=150, n_test=150, n_valid=150)
    rep = run_scenario(sc, QUICK, 0)
    assert rep["relaxed"]["valid_loss"] > 0


def test_summary_table(tmp_path):
    reports = run_replicates(small_scenario(), QUICK, replicates=2)
    rows = summarize(reports)
    assert [r["relaxed"] for r in rows] == ["No", "Yes"]
    assert set(rows[0]) == set(TABLE_COLUMNS)
    path = tmp_path / "t.csv"
    write_table_csv(path, rows)
    assert path.read_text().splitlines()[0].split(",") == list(TABLE_COLUMNS)
