import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from family.errors import EmptyVector
from family.penalty import (
    PenaltyKind,
    PenaltySpec,
    dual_norm,
    dual_norm_rows,
    norm_rows,
    norm_value,
    project_l1_ball,
    prox,
    prox_group_l2,
    prox_hybrid,
    prox_linf,
    prox_rows,
    prox_soft_threshold,
    zero_check,
)

KINDS = ["l1", "l2", "linf", "hybrid"]
vectors = arrays(np.float64, st.integers(1, 8), elements=st.floats(-10, 10, allow_nan=False))
levels = st.floats(0, 10, allow_nan=False)


def prox_objective(kind, y, b, lam):
    return 0.5 * np.sum((y - b) ** 2) + lam * norm_value(kind, b)


def test_soft_threshold_values():
    np.testing.assert_allclose(prox_soft_threshold([3.0, -0.5, -2.0], 1.0), [2.0, 0.0, -1.0])


def test_group_l2_shrinks_toward_zero():
    np.testing.assert_allclose(prox_group_l2([3.0, 4.0], 2.5), [1.5, 2.0])
    np.testing.assert_array_equal(prox_group_l2([3.0, 4.0], 5.0), [0.0, 0.0])


def test_linf_values():
    np.testing.assert_allclose(prox_linf([2.0, 1.0], 0.5), [1.5, 1.0])
    np.testing.assert_allclose(prox_linf([3.0, -3.0, 1.0], 2.0), [2.0, -2.0, 1.0])


def test_l1_ball_projection():
    np.testing.assert_allclose(project_l1_ball([2.0, 1.0], 0.5), [0.5, 0.0])
    np.testing.assert_allclose(project_l1_ball([1.0, 1.0], 1.0), [0.5, 0.5])
    np.testing.assert_array_equal(project_l1_ball([1.0, -2.0], 0.0), [0.0, 0.0])
    np.testing.assert_allclose(project_l1_ball([0.2, -0.1], 1.0), [0.2, -0.1])


def test_hybrid_hand_values():
    # u = (2, 1, 1) - (1/3, ...) from the budget split; verified by a conic solver
    np.testing.assert_allclose(prox_hybrid([3.0, 2.0, 1.0], 2.0), [5 / 3, 4 / 3, 1 / 3], atol=1e-12)
    np.testing.assert_array_equal(prox_hybrid([1.0, 0.5, 0.5], 1.5), [0.0, 0.0, 0.0])


def test_hybrid_length_one_is_soft_threshold():
    np.testing.assert_allclose(prox_hybrid([3.0], 1.0), [2.0])


def test_none_penalty_is_identity():
    y = np.array([1.0, -2.0])
    np.testing.assert_array_equal(prox("none", y, 5.0), y)
    assert dual_norm("none", [0.0, 0.0]) == 0.0
    assert dual_norm("none", [0.0, 1.0]) == math.inf


def test_dual_norm_values():
    v = [3.0, -1.0, 2.0]
    assert dual_norm("l1", v) == 3.0
    assert dual_norm("l2", v) == pytest.approx(math.sqrt(14))
    assert dual_norm("linf", v) == 6.0
    assert dual_norm("hybrid", v) == 5.0


def test_empty_vector_rejected():
    with pytest.raises(EmptyVector):
        prox("l2", [], 1.0)


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown penalty"):
        PenaltyKind.parse("l3")


def test_spec_reparametrization():
    spec = PenaltySpec.from_alpha("l2", 0.25, 2.0, 16)
    assert spec.lambda1 == spec.lambda2 == pytest.approx(0.75 * 2.0 * 4)
    assert spec.lambda3 == pytest.approx(0.5)
    assert PenaltySpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        PenaltySpec.from_alpha("l2", 1.0, 1.0, 4)
    with pytest.raises(ValueError):
        PenaltySpec(lambda1=-1.0)


def test_rows_match_single_vector_kernels():
    rng = np.random.default_rng(3)
    Y = rng.standard_normal((6, 5)) * 3
    for kind in KINDS:
        batched = prox_rows(PenaltyKind.parse(kind), Y, 1.3)
        for i in range(6):
            np.testing.assert_allclose(batched[i], prox(kind, Y[i], 1.3))
        np.testing.assert_allclose(
            norm_rows(PenaltyKind.parse(kind), Y), [norm_value(kind, r) for r in Y]
        )
        np.testing.assert_allclose(
            dual_norm_rows(PenaltyKind.parse(kind), Y), [dual_norm(kind, r) for r in Y]
        )


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=150, deadline=None)
@given(y=vectors, lam=levels)
def test_zero_law(kind, y, lam):
    assert zero_check(kind, y, lam) == (not np.any(prox(kind, y, lam)))


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=100, deadline=None)
@given(y=vectors, lam=levels, seed=st.integers(0, 2**16))
def test_prox_beats_perturbations(kind, y, lam, seed):
    b = prox(kind, y, lam)
    best = prox_objective(kind, y, b, lam)
    rng = np.random.default_rng(seed)
    for scale in (1e-3, 1e-1, 1.0):
        trial = b + scale * rng.standard_normal((20, y.size))
        values = [prox_objective(kind, y, t, lam) for t in trial]
        assert best <= min(values) + 1e-9


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=100, deadline=None)
@given(y=vectors, lam=levels)
def test_moreau_identity(kind, y, lam):
    # y = prox_{lam P}(y) + projection onto the lam-ball of the dual norm
    u = y - prox(kind, y, lam)
    assert dual_norm(kind, u) <= lam * (1 + 1e-9) + 1e-9
