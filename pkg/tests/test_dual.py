"""Forward-mode duals against central finite differences."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curveforge import _dual as D


def fd_gradient(f, x, h=1e-6):
    g = np.empty(x.size)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def test_variables_seed_identity():
    d = D.Dual.variables([1.0, 2.0, 3.0])
    assert np.array_equal(d.val, [1.0, 2.0, 3.0])
    assert np.array_equal(d.dot, np.eye(3))
    assert d.nparams == 3


def test_constant_has_zero_derivative():
    c = D.Dual.constant(np.ones((2, 3)), 5)
    assert c.dot.shape == (2, 3, 5)
    assert not c.dot.any()


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=6))
@settings(max_examples=50, deadline=None)
def test_scalar_pipeline_matches_fd(vals):
    x = np.asarray(vals)

    def f(v):
        return float(np.sum(v**2) * np.exp(v[0] / 10.0)
                     + np.sin(v[-1]) - v[1] / (2.0 + np.cos(v[0])))

    d = D.Dual.variables(x)
    out = (d**2.0).sum() * D.exp(d[0] / 10.0) + D.sin(d[-1]) \
        - d[1] / (D.cos(d[0]) + 2.0)
    assert out.val == pytest.approx(f(x), rel=1e-12, abs=1e-12)
    assert np.allclose(out.dot, fd_gradient(f, x), rtol=5e-5, atol=5e-7)


def test_reflected_ndarray_ops_return_duals():
    # regression: ndarray (op) Dual must not broadcast the Dual elementwise
    d = D.Dual.variables([1.0, 2.0, 3.0])
    for out in (np.ones(3) - d, np.ones(3) + d, np.full(3, 2.0) * d,
                6.0 / (d + 1.0)):
        assert isinstance(out, D.Dual)
        assert out.val.shape == (3,)
    diff = np.array([5.0, 6.0, 7.0]) - d
    assert np.array_equal(diff.val, [4.0, 4.0, 4.0])
    assert np.array_equal(diff.dot, -np.eye(3))


def test_cross_and_vdot_match_numpy():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(2, 4, 3))
    da = D.Dual.variables(a.ravel()).reshape(4, 3)
    db = D.Dual.constant(b, da.nparams)
    assert np.allclose(D.cross(da, db).val, np.cross(a, b), atol=1e-15)
    assert np.allclose(D.vdot(da, db).val, np.einsum("ij,ij->i", a, b),
                       atol=1e-15)

    def f(v):
        va = v.reshape(4, 3)
        return float(np.sum(np.cross(va, b) * np.sin(va)))

    out = (D.cross(da, db) * D.sin(da)).sum()
    assert np.allclose(out.dot, fd_gradient(f, a.ravel()), rtol=1e-6,
                       atol=1e-8)


def test_norm_unit_sqrt_consistency():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(5, 3)) + 2.0
    da = D.Dual.variables(a.ravel()).reshape(5, 3)
    n = D.norm(da)
    assert np.allclose(n.val, np.linalg.norm(a, axis=1), atol=1e-15)
    assert np.allclose(D.unit(da).val, a / np.linalg.norm(a, axis=1)[:, None],
                       atol=1e-15)
    # norm == sqrt(vdot) including derivatives
    alt = D.sqrt(D.vdot(da, da))
    assert np.allclose(n.val, alt.val, atol=1e-14)
    assert np.allclose(n.dot, alt.dot, atol=1e-12)


def test_apply_matrix_is_linear_map():
    rng = np.random.default_rng(3)
    mat = rng.normal(size=(7, 4))
    pts = rng.normal(size=(4, 3))
    d = D.Dual.variables(pts.ravel()).reshape(4, 3)
    out = D.apply_matrix(mat, d)
    assert np.allclose(out.val, mat @ pts, atol=1e-14)
    # derivative of a linear map is the map itself
    g = out.dot.reshape(7 * 3, 12)
    expect = np.kron(mat, np.eye(3))
    assert np.allclose(g, expect, atol=1e-14)


def test_stack_and_getitem_round_trip():
    d = D.Dual.variables([1.0, 2.0, 3.0, 4.0])
    s = D.stack([d[0], d[2]], axis=0)
    assert np.array_equal(s.val, [1.0, 3.0])
    assert np.array_equal(s.dot, np.eye(4)[[0, 2]])


def test_value_grad_passthrough_on_plain_arrays():
    x = np.arange(3.0)
    assert np.array_equal(D.value(x), x)
    assert np.allclose(D.cross(x, x + 1.0), np.cross(x, x + 1.0))


def test_scale_matches_mul():
    d = D.Dual.variables([1.0, 2.0])
    s = d[0] * d[1]
    a = D.scale(D.stack([d[0], d[1], d[0]]), s)
    b = D.stack([d[0], d[1], d[0]]) * s
    assert np.allclose(a.val, b.val, atol=1e-15)
    assert np.allclose(a.dot, b.dot, atol=1e-15)
