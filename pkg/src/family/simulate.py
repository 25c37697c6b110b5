"""Synthetic-data experiments with strong-heredity truths.

Random streams: every replicate owns ``SeedSequence(seed, spawn_key=(r,))``
and spawns named children in the order of ``STREAMS``. Each child drives a
Philox generator, so a replicate gives the same numbers whichever process or
order it runs in.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.special import expit

from .design import Dataset, DesignTensor, build_design, standardize
from .errors import FamilyError, InfeasibleScenario
from .glm import admm_fit_logistic, lambda_max_logistic
from .penalty import PenaltyKind, PenaltySpec
from .postfit import (
    SeparationDetected,
    UnderdeterminedRefit,
    relax_refit,
    selection_metrics,
)
from .solver import AdmmOptions, FactorCache, admm_fit, lambda_max

STREAMS = (
    "coefficients",
    "x_train",
    "x_test",
    "x_valid",
    "noise_train",
    "noise_test",
    "noise_valid",
)
SPLITS = ("train", "test", "valid")
COVARIANCES = ("identity", "ar", "exchangeable")
MAIN_VALUES = tuple(v for v in range(-5, 6) if v)
INTER_VALUES = tuple(v for v in range(-10, 11, 2) if v)
TABLE_COLUMNS = (
    "n_true_inter",
    "method",
    "relaxed",
    "relative_ssr",
    "relative_ssr_se",
    "fdr",
    "fdr_se",
    "tpr",
    "tpr_se",
    "n_interactions",
    "n_interactions_se",
    "replicates",
)


@dataclass(frozen=True)
class Scenario:
    """One simulation setting. ``X == Z`` throughout.

    ``covariance`` is ``identity``, ``ar`` (``Sigma_ij = cov_param^|i-j|``) or
    ``exchangeable`` (``cov_param`` off the diagonal).
    """

    n_train: int = 300
    n_test: int = 300
    n_valid: int = 300
    p: int = 30
    n_true_main: int = 10
    n_true_inter: int = 15
    main_value_set: tuple = MAIN_VALUES
    inter_value_set: tuple = INTER_VALUES
    snr_target: float = 3.0
    covariance: str = "identity"
    cov_param: float = 0.0
    seed: int = 0
    family: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "main_value_set", tuple(float(v) for v in self.main_value_set))
        object.__setattr__(self, "inter_value_set", tuple(float(v) for v in self.inter_value_set))
        for name in ("n_train", "n_test", "n_valid", "p"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.n_true_main <= self.p:
            raise ValueError("n_true_main must lie in [0, p]")
        if self.n_true_inter < 0:
            raise ValueError("n_true_inter must be non-negative")
        if self.covariance not in COVARIANCES:
            raise ValueError(f"unknown covariance {self.covariance!r}; expected one of {', '.join(COVARIANCES)}")
        if self.covariance == "ar" and not -1 < self.cov_param < 1:
            raise ValueError("ar covariance needs |cov_param| < 1")
        if self.covariance == "exchangeable" and not -1 / max(self.p - 1, 1) < self.cov_param < 1:
            raise ValueError("exchangeable covariance parameter out of the positive-definite range")
        if not self.snr_target > 0:
            raise ValueError("snr_target must be positive")
        if self.family not in ("gaussian", "binomial"):
            raise ValueError(f"unknown family {self.family!r}")
        if 0 in self.main_value_set or 0 in self.inter_value_set:
            raise ValueError("value sets must exclude zero")

    def n_split(self, split):
        return {"train": self.n_train, "test": self.n_test, "valid": self.n_valid}[split]

    def to_dict(self):
        d = asdict(self)
        d["main_value_set"] = list(self.main_value_set)
        d["inter_value_set"] = list(self.inter_value_set)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
        return cls(**d)


def load_scenario(path):
    with open(path) as fh:
        return Scenario.from_dict(json.load(fh))


def save_scenario(scenario, path):
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def replicate_streams(seed, replicate=0):
    """Named Philox generators for one replicate."""
    ss = np.random.SeedSequence(seed, spawn_key=(int(replicate),))
    return {
        name: np.random.Generator(np.random.Philox(child))
        for name, child in zip(STREAMS, ss.spawn(len(STREAMS)))
    }


def _rng(rng, seed):
    if rng is not None:
        return rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


# -- generators ------------------------------------------------------------


def gen_coefficients(scenario: Scenario, rng=None):
    """Strong-heredity truth for the ``X == Z`` problem.

    Main effects ``1..n_true_main`` are nonzero; ``n_true_inter`` distinct
    pairs ``j < k`` of active mains get interactions. Each coefficient is
    split evenly over its two duplicate cells (``(j, 0)``/``(0, j)`` and
    ``(j, k)``/``(k, j)``) so ``B`` is symmetric and the combined effects
    equal the drawn values.
    """
    rng = _rng(rng, scenario.seed)
    p, m = scenario.p, scenario.n_true_main
    pairs = [(j, k) for j in range(1, m + 1) for k in range(j + 1, m + 1)]
    if scenario.n_true_inter > len(pairs):
        raise InfeasibleScenario(
            f"{scenario.n_true_inter} interactions requested but only {len(pairs)} "
            f"pairs of the {m} active mains exist"
        )
    B = np.zeros((p + 1, p + 1))
    mains = rng.choice(np.asarray(scenario.main_value_set), size=m)
    B[1 : m + 1, 0] = mains / 2
    B[0, 1 : m + 1] = mains / 2
    if scenario.n_true_inter:
        chosen = rng.choice(len(pairs), size=scenario.n_true_inter, replace=False)
        values = rng.choice(np.asarray(scenario.inter_value_set), size=scenario.n_true_inter)
        for idx, value in zip(np.sort(chosen), values):
            j, k = pairs[idx]
            B[j, k] = B[k, j] = value / 2
    return B


def covariance_matrix(scenario: Scenario):
    p = scenario.p
    if scenario.covariance == "identity":
        return np.eye(p)
    if scenario.covariance == "ar":
        idx = np.arange(p)
        return scenario.cov_param ** np.abs(idx[:, None] - idx[None, :])
    S = np.full((p, p), scenario.cov_param)
    np.fill_diagonal(S, 1.0)
    return S


def gen_gaussian_data(scenario: Scenario, split, rng=None):
    """Rows i.i.d. ``N_p(0, Sigma)``; the response is left at zero."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    rng = _rng(rng, scenario.seed)
    n = scenario.n_split(split)
    E = rng.standard_normal((n, scenario.p))
    if scenario.covariance != "identity":
        E = E @ np.linalg.cholesky(covariance_matrix(scenario)).T
    return Dataset(E, np.zeros(n))


def signal(design: DesignTensor, B_true):
    return design.matrix() @ np.asarray(B_true, dtype=float).ravel()


def gen_response(design: DesignTensor, B_true, snr_target=3.0, seed=0, rng=None, sigma=None):
    """``y = W*B_true + eps`` with ``sigma^2 = var(signal) / snr_target``.

    Pass ``sigma`` to reuse the training noise level on other splits. A
    constant signal gets ``sigma = 1`` with a warning.
    """
    rng = _rng(rng, seed)
    mu = signal(design, B_true)
    if sigma is None:
        var = float(np.var(mu))
        if var > 0:
            sigma = math.sqrt(var / snr_target)
        else:
            warnings.warn("signal has zero variance; using sigma = 1", RuntimeWarning, stacklevel=2)
            sigma = 1.0
    return mu + sigma * rng.standard_normal(mu.size), float(sigma)


def gen_logistic_response(design: DesignTensor, B_true, seed=0, rng=None):
    """Independent ``Bernoulli(expit(W*B_true))`` draws."""
    rng = _rng(rng, seed)
    prob = expit(signal(design, B_true))
    return (rng.random(prob.size) < prob).astype(float)


# -- experiment driver -----------------------------------------------------


@dataclass(frozen=True)
class MethodConfig:
    """Penalty and grid used by ``run_scenario``.

    Squared terms ``B[j, j]`` are excluded by default, matching truths built
    from ``p choose 2`` candidate interactions.
    """

    kind: str = "l2"
    alphas: tuple = tuple(np.round(np.linspace(0.05, 0.95, 10), 10))
    n_lambda: int = 50
    lambda_ratio: float = 1e-3
    standardize: bool = True
    zero_diagonal: bool = True
    eps: float | None = None
    max_iter: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind.parse(self.kind).value)
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not self.alphas or not all(0 < a < 1 for a in self.alphas):
            raise ValueError("alphas must lie in (0, 1)")
        if self.n_lambda < 1:
            raise ValueError("n_lambda must be positive")
        if not 0 < self.lambda_ratio < 1:
            raise ValueError("lambda_ratio must lie in (0, 1)")

    @property
    def name(self):
        return f"FAMILY.{self.kind}"

    def options(self):
        return AdmmOptions(
            eps_pri=self.eps,
            eps_dual=self.eps,
            max_iter=self.max_iter,
            zero_diagonal=self.zero_diagonal,
        )

    def to_dict(self):
        d = asdict(self)
        d["alphas"] = list(self.alphas)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown method keys: {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class ReplicateData:
    B_true: np.ndarray
    designs: dict
    responses: dict
    means: dict
    sigma: float


def make_replicate(scenario: Scenario, replicate=0, standardize_x=True):
    """Truth, the three splits and their responses for one replicate.

    With ``standardize_x`` every split is scaled by the training means and
    standard deviations.
    """
    streams = replicate_streams(scenario.seed, replicate)
    B_true = gen_coefficients(scenario, streams["coefficients"])
    raw = {s: gen_gaussian_data(scenario, s, streams[f"x_{s}"]) for s in SPLITS}
    designs_raw = {s: build_design(raw[s]) for s in SPLITS}
    means = {s: signal(designs_raw[s], B_true) for s in SPLITS}
    responses = {}
    sigma = float("nan")
    if scenario.family == "gaussian":
        y, sigma = gen_response(designs_raw["train"], B_true, scenario.snr_target, rng=streams["noise_train"])
        responses["train"] = y
        for s in ("test", "valid"):
            responses[s], _ = gen_response(designs_raw[s], B_true, rng=streams[f"noise_{s}"], sigma=sigma)
    else:
        for s in SPLITS:
            responses[s] = gen_logistic_response(designs_raw[s], B_true, rng=streams[f"noise_{s}"])
    if standardize_x:
        _, scaler = standardize(raw["train"])
        designs = {s: build_design(scaler.transform(raw[s])) for s in SPLITS}
    else:
        designs = designs_raw
    return ReplicateData(B_true, designs, responses, means, sigma)


def _loss(design, y, B, family):
    eta = design.matrix() @ B.ravel()
    if family == "gaussian":
        r = y - eta
        return float(r @ r)
    # deviance
    return float(2 * np.sum(np.logaddexp(0.0, eta) - y * eta))


def _fit_grid(design, y, method: MethodConfig, family, p):
    """All ``(alpha, lam)`` fits; a failing point is recorded and skipped."""
    cache = FactorCache(design)
    opts = method.options()
    fit = admm_fit if family == "gaussian" else admm_fit_logistic
    fits, errors = [], []
    for alpha in method.alphas:
        if family == "gaussian":
            top = lambda_max(design, y, method.kind, alpha, p=p, cache=cache)
        else:
            top = lambda_max_logistic(design, y, method.kind, alpha, p=p, cache=cache)
        warm = None
        for lam in np.geomspace(top, top * method.lambda_ratio, method.n_lambda):
            spec = PenaltySpec.from_alpha(method.kind, alpha, float(lam), p)
            try:
                res = fit(design, y, spec, opts, warm=warm, cache=cache)
            except (FamilyError, np.linalg.LinAlgError, FloatingPointError) as exc:
                errors.append({"alpha": alpha, "lam": float(lam), "error": repr(exc)})
                warm = None
                continue
            warm = res.state
            res.state = None
            fits.append(res)
    return fits, errors


def _refit(design, y, support, family):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnderdeterminedRefit)
        warnings.simplefilter("ignore", SeparationDetected)
        return relax_refit(design, y, support, family)


def run_scenario(scenario: Scenario, method: MethodConfig | None = None, replicate=0, keep_path=False):
    """One replicate: fit on train, tune on test, report on validation.

    The raw and relaxed variants are tuned separately. Gaussian runs use SSR;
    logistic runs use deviance in its place. ``relative_ssr`` divides the
    validation loss by that of the oracle refit on the true support.
    """
    method = method or MethodConfig()
    family = scenario.family
    data = make_replicate(scenario, replicate, method.standardize)
    train, test, valid = (data.designs[s] for s in SPLITS)
    y_train, y_test, y_valid = (data.responses[s] for s in SPLITS)
    fits, errors = _fit_grid(train, y_train, method, family, scenario.p)
    if not fits:
        raise FamilyError(f"every grid point failed: {errors[:1]}")

    truth_support = data.B_true != 0
    oracle = _refit(train, y_train, truth_support, family)
    oracle_valid = _loss(valid, y_valid, oracle, family)
    if family == "gaussian":
        r = y_valid - data.means["valid"]
        true_valid = float(r @ r)
    else:
        eta = data.means["valid"]
        true_valid = float(2 * np.sum(np.logaddexp(0.0, eta) - y_valid * eta))

    variants = {"raw": [f.B_hat for f in fits]}
    variants["relaxed"] = [_refit(train, y_train, f.support, family) for f in fits]
    report = {
        "replicate": int(replicate),
        "method": method.name,
        "n_true_inter": scenario.n_true_inter,
        "sigma": data.sigma,
        "oracle_valid_loss": oracle_valid,
        "true_model_valid_loss": true_valid,
        "true_model_relative": true_valid / oracle_valid,
        "n_grid": len(fits),
        "n_failed": len(errors),
        "failures": errors,
        "not_converged": int(sum(not f.converged for f in fits)),
    }
    path = []
    for name, coefs in variants.items():
        test_loss = np.array([_loss(test, y_test, B, family) for B in coefs])
        best = int(np.argmin(test_loss))
        B = coefs[best]
        valid_loss = _loss(valid, y_valid, B, family)
        m = selection_metrics(B, data.B_true, symmetric=True, ssr=valid_loss)
        report[name] = {
            "alpha": fits[best].spec.alpha,
            "lam": fits[best].spec.lam,
            "test_loss": float(test_loss[best]),
            "valid_loss": valid_loss,
            "relative_ssr": valid_loss / oracle_valid,
            "fdr": m.fdr,
            "tpr": m.tpr,
            "fpr": m.fpr,
            "n_interactions": m.n_interactions,
        }
        if keep_path:
            for i, (fit, Bi) in enumerate(zip(fits, coefs)):
                mi = selection_metrics(Bi, data.B_true, symmetric=True, ssr=test_loss[i])
                path.append({"variant": name, "alpha": fit.spec.alpha, "lam": fit.spec.lam, **mi.as_row()})
    if keep_path:
        report["path"] = path
    return report


def _run_one(args):
    scenario, method, r, keep_path = args
    return run_scenario(scenario, method, r, keep_path)


def run_replicates(scenario: Scenario, method: MethodConfig | None = None, replicates=20, workers=1, keep_path=False):
    """Replicate reports in replicate order (independent of ``workers``)."""
    method = method or MethodConfig()
    jobs = [(scenario, method, r, keep_path) for r in range(replicates)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(job) for job in jobs]


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), float("nan")
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def summarize(reports):
    """Table-1-style rows: one per relaxation variant, means and standard errors."""
    if not reports:
        raise ValueError("no reports to summarize")
    rows = []
    for variant, relaxed in (("raw", "No"), ("relaxed", "Yes")):
        row = {
            "n_true_inter": reports[0]["n_true_inter"],
            "method": reports[0]["method"],
            "relaxed": relaxed,
        }
        for key in ("relative_ssr", "fdr", "tpr", "n_interactions"):
            row[key], row[f"{key}_se"] = _mean_se([r[variant][key] for r in reports])
        row["replicates"] = len(reports)
        rows.append(row)
    return rows


def write_table_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def benchmark_scenarios(seed=0, n_true_inter=(15, 30, 45)):
    """The three published settings (100 replicates each in the long mode)."""
    return [Scenario(n_true_inter=k, seed=seed) for k in n_true_inter]
