import numpy as np
import pytest

from family.design import (
    Dataset,
    build_design,
    build_weak_design,
    center,
    column_index,
    combine_symmetric,
    predict,
    read_csv,
    standardize,
)
from family.errors import ConstantColumn, NotSymmetricProblem, ShapeMismatch


def test_column_order():
    idx = column_index(2, 3)
    assert idx[0, 0] == 0
    np.testing.assert_array_equal(idx[1:, 0], [1, 2])
    np.testing.assert_array_equal(idx[0, 1:], [3, 4, 5])
    np.testing.assert_array_equal(idx[1:, 1:], [[6, 7, 8], [9, 10, 11]])


def test_design_columns_are_products():
    rng = np.random.default_rng(0)
    X, Z = rng.standard_normal((7, 2)), rng.standard_normal((7, 3))
    d = build_design(Dataset(X, np.zeros(7), Z=Z))
    np.testing.assert_array_equal(d.column(0, 0), np.ones(7))
    np.testing.assert_array_equal(d.column(2, 0), X[:, 1])
    np.testing.assert_array_equal(d.column(0, 3), Z[:, 2])
    np.testing.assert_allclose(d.column(2, 1), X[:, 1] * Z[:, 0])


def test_predict_matches_explicit_sum():
    rng = np.random.default_rng(1)
    X, Z = rng.standard_normal((5, 2)), rng.standard_normal((5, 2))
    d = build_design(Dataset(X, np.zeros(5), Z=Z))
    B = rng.standard_normal((3, 3))
    Xa = np.column_stack([np.ones(5), X])
    Za = np.column_stack([np.ones(5), Z])
    expected = np.einsum("ij,jk,ik->i", Xa, B, Za)
    np.testing.assert_allclose(predict(d, B), expected)
    np.testing.assert_allclose(d.matrix() @ B.ravel(), expected)
    with pytest.raises(ShapeMismatch):
        predict(d, np.zeros((2, 3)))


def test_symmetric_flag_and_checks():
    X = np.arange(12.0).reshape(6, 2)
    assert Dataset(X, np.zeros(6)).symmetric
    assert not Dataset(X, np.zeros(6), Z=X.copy()).symmetric
    with pytest.raises(NotSymmetricProblem):
        Dataset(X, np.zeros(6), Z=X + 1, symmetric=True)
    with pytest.raises(ShapeMismatch):
        Dataset(X, np.zeros(5))
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan, 1.0]]), [0.0])


def test_standardize_and_back():
    rng = np.random.default_rng(2)
    X = rng.normal(3.0, 2.0, (40, 3))
    Z = rng.normal(-1.0, 0.5, (40, 2))
    data = Dataset(X, rng.standard_normal(40), Z=Z)
    std, scaler = standardize(data)
    np.testing.assert_allclose(std.X.mean(0), 0, atol=1e-12)
    np.testing.assert_allclose(std.Z.std(0, ddof=1), 1)
    B = rng.standard_normal((4, 3))
    C = scaler.to_original(B)
    np.testing.assert_allclose(predict(build_design(data), C), predict(build_design(std), B))


def test_constant_column():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    with pytest.raises(ConstantColumn) as err:
        standardize(Dataset(X, np.zeros(5)))
    assert err.value.index == 0


def test_center():
    X = np.arange(10.0).reshape(5, 2)
    np.testing.assert_allclose(center(Dataset(X, np.zeros(5))).X.mean(0), 0)


def test_combine_symmetric():
    B = np.arange(9.0).reshape(3, 3)
    main, inter = combine_symmetric(B)
    np.testing.assert_array_equal(main, [1 + 3, 2 + 6])
    np.testing.assert_array_equal(inter, [[4, 5 + 7], [5 + 7, 8]])
    with pytest.raises(NotSymmetricProblem):
        combine_symmetric(np.zeros((2, 3)))


def test_weak_design_shapes():
    rng = np.random.default_rng(4)
    data = center(Dataset(rng.standard_normal((6, 2)), np.zeros(6), Z=rng.standard_normal((6, 3))))
    w = build_weak_design(data)
    assert w.wx.shape == (6, 2 * 4)
    assert w.wz.shape == (6, 3 * 3)


def test_read_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,y\n1,2,3\n4,5,6\n7,9,9\n")
    data = read_csv(path, "y")
    np.testing.assert_array_equal(data.y, [3, 6, 9])
    assert data.symmetric and data.p1 == 2
    data = read_csv(path, "y", x_columns=["a"], z_columns=["b"])
    assert not data.symmetric
    with pytest.raises(KeyError, match="'q'"):
        read_csv(path, "q")
    path.write_text("a,y\n1,\n")
    with pytest.raises(ValueError, match="missing"):
        read_csv(path, "y")
