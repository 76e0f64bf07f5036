"""Kernel contracts, cross-backend agreement, and SU(2) oracles."""

import os
import subprocess
import sys

import numpy as np
import pytest

from curveforge import kernels
from curveforge._kernels_py import hamilton

SIGMA = np.array([[[0, 1], [1, 0]],
                  [[0, -1j], [1j, 0]],
                  [[1, 0], [0, -1]]], dtype=complex)


def random_unit_quats(shape, seed):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=shape + (4,))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_to_su2(q):
    w, v = q[..., 0], q[..., 1:]
    return w[..., None, None] * np.eye(2) \
        - 1j * np.einsum("...i,iab->...ab", v, SIGMA)


def test_hamilton_matches_su2_product():
    a, b = random_unit_quats((2,), seed=0)
    left = quat_to_su2(hamilton(b, a))
    right = quat_to_su2(b) @ quat_to_su2(a)
    assert np.allclose(left, right, atol=1e-15)


def test_quat_chain_matches_matrix_product():
    quats = random_unit_quats((33,), seed=1)
    chained = quat_to_su2(kernels.quat_chain(quats))
    direct = np.eye(2, dtype=complex)
    for q in quats:
        direct = quat_to_su2(q) @ direct
    assert np.allclose(chained, direct, atol=1e-13)
    # unit quaternions compose to a unit quaternion
    assert abs(np.linalg.norm(kernels.quat_chain(quats)) - 1.0) < 1e-13


def test_quat_chain_batch_rows_match_single_chains():
    quats = random_unit_quats((5, 17), seed=2)
    batch = kernels.quat_chain_batch(quats)
    assert batch.shape == (5, 4)
    for r in range(5):
        assert np.allclose(batch[r], kernels.quat_chain(quats[r]),
                           atol=1e-14)


def test_quat_chain_batch_rejects_bad_shape():
    with pytest.raises(ValueError):
        kernels.quat_chain_batch(np.zeros((3, 4)))


def _loss_inputs(seed, grid=41, nparams=6):
    rng = np.random.default_rng(seed)
    base1 = rng.normal(size=(grid, 3)) + np.array([3.0, 0.0, 0.0])
    base2 = rng.normal(size=(grid, 3))
    e1 = rng.normal(size=(grid, 3, nparams))
    e2 = rng.normal(size=(grid, 3, nparams))

    def at(p):
        return base1 + e1 @ p, base2 + e2 @ p

    return at, e1, e2, np.zeros(nparams)


def test_loss_terms_grid_values_against_direct_quadrature():
    at, e1, e2, p = _loss_inputs(seed=3)
    dr, ddr = at(p)
    dx = 1.0 / (dr.shape[0] - 1)
    area, _, t_g, _, smax, _ = kernels.loss_terms_grid(
        dr, ddr, e1, e2, dx, power=32)
    gamma = np.linalg.norm(dr, axis=1)
    w = np.full(gamma.size, dx)
    w[0] = w[-1] = dx / 2
    assert t_g == pytest.approx(w @ gamma, rel=1e-14)
    cross = np.cross(dr, ddr)
    assert np.allclose(area, w @ (cross / gamma[:, None]**2), rtol=1e-13)
    kappa = np.linalg.norm(cross, axis=1) / gamma**3
    assert smax <= kappa.max() * (1 + 1e-12)
    assert smax == pytest.approx(
        (np.mean(kappa**32))**(1 / 32), rel=1e-10)


def test_loss_terms_grid_derivatives_match_fd():
    at, e1, e2, p0 = _loss_inputs(seed=4)
    dx = 0.025
    _, area_dot, _, t_g_dot, _, smax_dot = kernels.loss_terms_grid(
        *at(p0), e1, e2, dx, power=8)

    def outputs(p):
        area, _, t_g, _, smax, _ = kernels.loss_terms_grid(
            *at(p), e1, e2, dx, power=8)
        return np.concatenate([area, [t_g, smax]])

    h = 1e-6
    for i in range(p0.size):
        dp = np.zeros_like(p0)
        dp[i] = h
        fd = (outputs(dp) - outputs(-dp)) / (2 * h)
        got = np.concatenate([area_dot[:, i], [t_g_dot[i], smax_dot[i]]])
        assert np.allclose(got, fd, rtol=2e-6, atol=1e-8)


def test_loss_terms_grid_rejects_odd_power():
    at, e1, e2, p = _loss_inputs(seed=5)
    dr, ddr = at(p)
    with pytest.raises(ValueError):
        kernels.loss_terms_grid(dr, ddr, e1, e2, 0.1, power=3)


def test_backends_agree():
    impls = kernels.backends()
    assert "python" in impls
    if "cython" not in impls:
        pytest.skip("compiled extension not built")
    quats = random_unit_quats((7, 129), seed=6)
    ref = impls["python"].quat_chain_batch(quats)
    alt = impls["cython"].quat_chain_batch(quats)
    assert np.allclose(ref, alt, atol=1e-13)

    at, e1, e2, _ = _loss_inputs(seed=7, grid=101, nparams=9)
    dr, ddr = at(np.zeros(9))
    out_py = impls["python"].loss_terms_grid(dr, ddr, e1, e2, 0.01, 32)
    out_cy = impls["cython"].loss_terms_grid(dr, ddr, e1, e2, 0.01, 32)
    for a, b in zip(out_py, out_cy):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("name", ["python", "cython"])
def test_env_var_selects_backend(name):
    if name not in kernels.backends():
        pytest.skip("compiled extension not built")
    code = ("import curveforge.kernels as k; print(k.backend_name())")
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={**os.environ, "CURVEFORGE_KERNEL": name},
        capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == name


def test_env_var_rejects_unknown_backend():
    code = "import curveforge.kernels"
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={**os.environ, "CURVEFORGE_KERNEL": "fortran"},
        capture_output=True, text=True)
    assert out.returncode != 0
    assert "CURVEFORGE_KERNEL" in out.stderr
