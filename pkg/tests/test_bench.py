"""Brute-force propagation, noise models, filter functions, and CFI."""

import json
import math

import numpy as np
import pytest

from curveforge import bench, frenet, gatemap
from curveforge.bench import (ColoredNoise, StaticNoise, cfi, cfi_infidelity,
                              estimate_psd, filter_function, fir_taps,
                              fit_loglog_slope, generate_colored_noise,
                              mc_infidelity, mc_to_json, overlap_infidelity,
                              overlap_integral, propagate, propagate_path,
                              propagated_tangent, static_sweep, sweep_to_csv,
                              tangent_on_time_grid)
from curveforge.errors import PreconditionError, ValidationError
from curveforge.gatemap import ControlFields, extract_controls
from test_frenet import circle_curve, helix_curve

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def const_fields(omega, phi, delta, t_g, n=33):
    t = np.linspace(0.0, t_g, n)
    return ControlFields(t=t, omega=np.full(n, float(omega)),
                         phi=np.full(n, float(phi)),
                         delta=np.full(n, float(delta)), mode="xy",
                         T_g=t_g, M=0, total_torsion=0.0)


def wiggly_fields(seed=5, n=9, t_g=3.0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, t_g, n)
    return ControlFields(t=t, omega=rng.normal(1.0, 0.4, n),
                         phi=rng.normal(0.0, 1.0, n),
                         delta=rng.normal(0.0, 0.3, n), mode="xy",
                         T_g=t_g, M=0, total_torsion=0.0)


def double_circle():
    # same origin-anchored circle traversed twice at half the radius, so
    # T_g matches the single loop but the filtering index drops by 4
    w = 4.0 * np.pi
    return frenet.AnalyticCurve(
        lambda x: 0.5 * np.stack([np.cos(w * x) - 1.0,
                                  np.sin(w * x),
                                  np.zeros_like(x)], axis=-1),
        [lambda x, k=k: 0.5 * w**k * np.stack(
            [np.cos(w * x + k * np.pi / 2),
             np.sin(w * x + k * np.pi / 2),
             np.zeros_like(x)], axis=-1) for k in (1, 2, 3)])


def dense_oracle(fields, n_steps, eps=0.0, dz=0.0):
    # midpoint-sampled step exponentials via eigendecomposition
    dt = fields.T_g / n_steps
    tm = (np.arange(n_steps) + 0.5) * dt
    om = np.interp(tm, fields.t, fields.omega)
    ph = np.interp(tm, fields.t, fields.phi)
    de = np.interp(tm, fields.t, fields.delta)
    u = np.eye(2, dtype=complex)
    for k in range(n_steps):
        h = (0.5 * (1.0 + eps) * om[k] * (np.cos(ph[k]) * SX
                                          + np.sin(ph[k]) * SY)
             + 0.5 * (de[k] + dz) * SZ)
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(-1.0j * dt * w)) @ v.conj().T @ u
    return u


def test_propagate_zero_fields_is_identity():
    fields = const_fields(0.0, 0.0, 0.0, 2.0)
    u = propagate(fields, n_steps=64)
    assert np.array_equal(u, np.eye(2, dtype=complex))


def test_propagate_constant_x_drive():
    fields = const_fields(1.0, 0.0, 0.0, np.pi)
    u = propagate(fields, n_steps=256)
    assert np.abs(u - (-1.0j) * SX).max() < 1e-12
    m = u @ SX.conj().T
    assert 1.0 - gatemap.gate_fidelity_su2(m) < 1e-12


def test_propagate_matches_dense_exponential_oracle():
    fields = wiggly_fields()
    assert np.abs(propagate(fields, n_steps=512)
                  - dense_oracle(fields, 512)).max() < 1e-12
    noisy = propagate(fields, StaticNoise(0.07, 0.11), n_steps=512)
    assert np.abs(noisy - dense_oracle(fields, 512, 0.07, 0.11)).max() < 1e-12


def test_propagate_second_order_convergence():
    fields = wiggly_fields()
    u_ref = propagate(fields, n_steps=65536)

    def err(n_steps):
        m = propagate(fields, n_steps=n_steps) @ u_ref.conj().T
        return 1.0 - gatemap.gate_fidelity_su2(m)

    # infidelity scales as the squared error: halving the step should
    # shrink it by about 16; demand at least 9
    assert err(512) / err(1024) > 9.0


def test_propagate_step_count_validation():
    fields = const_fields(1.0, 0.0, 0.0, 1.0, n=64)
    with pytest.raises(ValidationError):
        propagate(fields, n_steps=32)


def test_propagate_path_consistency():
    fields = wiggly_fields()
    u = propagate(fields, n_steps=512)
    path = propagate_path(fields, np.array([fields.T_g]), n_steps=512)
    assert np.array_equal(path[0], u)
    out = propagate_path(fields, np.array([0.0, 0.5 * fields.T_g,
                                           fields.T_g]), n_steps=512)
    assert np.array_equal(out[0], np.eye(2, dtype=complex))
    assert out.shape == (3, 2, 2)


def test_propagate_path_validation():
    fields = wiggly_fields()
    with pytest.raises(ValidationError):
        propagate_path(fields, np.array([0.5, 0.4]))
    with pytest.raises(ValidationError):
        propagate_path(fields, np.array([0.5, 2.0 * fields.T_g]))
    with pytest.raises(ValidationError):
        propagate_path(fields, np.array([]))
    with pytest.raises(ValidationError):
        propagate_path(fields, np.array([1.0]),
                       noise=np.zeros(4096))


def test_propagated_tangent_matches_geometry_in_initial_frame():
    # brute force reports the dephasing direction in the initial frame
    # basis (-B0, N0, T0); geometry reports the raw tangent
    fd = frenet.evaluate_frenet(circle_curve(), grid_size=4097)
    fields = extract_controls(fd, mode="xy", n_samples=2049)
    f0 = np.stack([-fd.binormal[0], fd.normal[0], fd.tangent[0]])
    t_p, tang_p = propagated_tangent(fields, n_time=257, n_steps=4096)
    t_g, tang_g = tangent_on_time_grid(fd, n_time=257)
    assert np.abs(t_p - t_g).max() < 1e-12
    assert np.abs(tang_p - tang_g @ f0.T).max() < 1e-10


def test_static_sweep_center_and_direct_values():
    fields = wiggly_fields()
    eps = np.array([-0.05, 0.0, 0.05])
    dzs = np.array([-0.05, 0.0, 0.05]) / fields.T_g
    sweep = static_sweep(fields, None, eps, dzs, n_steps=512,
                         reference="noise_free")
    # center differs from the reference only by quaternion association
    # order; the cancellation-free infidelity resolves that at ~1e-34
    assert sweep.infidelity[1, 1] < 1e-30
    u_ref = propagate(fields, n_steps=512)
    for i in range(3):
        for j in range(3):
            u = propagate(fields, StaticNoise(eps[i], dzs[j]), n_steps=512)
            direct = 1.0 - gatemap.gate_fidelity_su2(u @ u_ref.conj().T)
            if direct > 1e-12:
                assert sweep.infidelity[i, j] == pytest.approx(direct,
                                                               rel=1e-9)


def test_static_sweep_reference_phase_invariance():
    fields = wiggly_fields()
    eps = np.array([-0.03, 0.03])
    dzs = np.array([0.0, 0.02])
    target = propagate(fields, n_steps=512)
    s1 = static_sweep(fields, target, eps, dzs, n_steps=512)
    s2 = static_sweep(fields, np.exp(0.7j) * target, eps, dzs, n_steps=512)
    assert np.allclose(s1.infidelity, s2.infidelity, rtol=1e-12, atol=1e-18)
    with pytest.raises(ValidationError):
        static_sweep(fields, target, eps, dzs, reference="bogus")


def test_sweep_csv_round_trip(tmp_path):
    fields = wiggly_fields()
    sweep = static_sweep(fields, None, np.array([-0.02, 0.02]),
                         np.array([0.0, 0.01, 0.02]), n_steps=512,
                         reference="noise_free")
    path = tmp_path / "sweep.csv"
    sweep_to_csv(path, sweep)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[0] == "epsilon\\delta_z"
    header = np.array([float(v) for v in lines[0].split(",")[1:]])
    assert np.array_equal(header, sweep.delta_zs)
    for i, line in enumerate(lines[1:]):
        row = np.array([float(v) for v in line.split(",")])
        assert row[0] == sweep.epsilons[i]
        assert np.array_equal(row[1:], sweep.infidelity[i])


def test_fit_loglog_slope():
    x = np.geomspace(0.1, 10.0, 40)
    y = 3.0 * x**2.5
    assert fit_loglog_slope(x, y, 0.1, 10.0) == pytest.approx(2.5, abs=1e-12)
    # points outside the window must not affect the fit
    y2 = y.copy()
    y2[x > 5.0] = 1e6
    assert fit_loglog_slope(x, y2, 0.1, 5.0) == pytest.approx(2.5, abs=1e-12)
    with pytest.raises(ValidationError):
        fit_loglog_slope(x, y, 20.0, 30.0)


def test_fir_taps_against_gamma_ratio():
    assert np.array_equal(fir_taps(2, 50), np.ones(50))
    for alpha in (1, 2):
        h = fir_taps(alpha, 60)
        ref = np.array([math.exp(math.lgamma(k + 0.5 * alpha)
                                 - math.lgamma(0.5 * alpha)
                                 - math.lgamma(k + 1))
                        for k in range(60)])
        assert np.abs(h / ref - 1.0).max() < 1e-12


def test_colored_noise_basics():
    t_g = 3.0
    assert np.all(generate_colored_noise(1, 0.0, 512, t_g) == 0.0)
    d1 = generate_colored_noise(1, 0.1, 512, t_g, seed=9)
    d2 = generate_colored_noise(1, 0.1, 512, t_g, seed=9)
    assert np.array_equal(d1, d2)
    assert not np.array_equal(d1, generate_colored_noise(1, 0.1, 512, t_g,
                                                         seed=10))
    # alpha=2 is a random walk: increments are the iid driving noise
    lam, n = 0.05, 4096
    tr = generate_colored_noise(2, lam, n, t_g, seed=3)
    sigma_d = lam * np.sqrt(n) * (2.0 * np.pi / n)
    assert abs(np.diff(tr).std() / sigma_d - 1.0) < 0.05


def test_colored_noise_validation():
    with pytest.raises(ValidationError):
        ColoredNoise(alpha=3, lam=0.1)
    with pytest.raises(ValidationError):
        ColoredNoise(alpha=2, lam=-0.1)
    with pytest.raises(ValidationError):
        generate_colored_noise(1, 0.1, 1000, 1.0)  # not a power of two
    with pytest.raises(ValidationError):
        generate_colored_noise(1, 0.1, 128, 1.0)  # too short


def test_estimate_psd_white_noise_is_flat():
    rng = np.random.default_rng(7)
    s, t_g, n = 0.8, 3.0, 1024
    traces = rng.normal(0.0, s, size=(200, n))
    omega, psd = estimate_psd(traces, t_g)
    expect = s * s * (t_g / n)
    mid = (omega > omega[10]) & (omega < omega[-10])
    assert abs(psd[mid].mean() / expect - 1.0) < 0.05
    assert abs(fit_loglog_slope(omega, psd, omega[5], omega[-5])) < 0.05


def test_mc_zero_noise_and_determinism():
    fields = wiggly_fields()
    quiet = mc_infidelity(fields, ColoredNoise(2, 0.0), 8, seed=1,
                          n_steps=512)
    assert quiet.mean < 1e-30 and quiet.stderr < 1e-30
    noise = ColoredNoise(2, 0.05)
    r1 = mc_infidelity(fields, noise, 16, seed=42, n_steps=512)
    r2 = mc_infidelity(fields, noise, 16, seed=42, n_steps=512)
    assert r1.mean == r2.mean and r1.stderr == r2.stderr
    r3 = mc_infidelity(fields, noise, 16, seed=43, n_steps=512)
    assert r3.mean != r1.mean


def test_mc_validation():
    fields = wiggly_fields()
    with pytest.raises(ValidationError):
        mc_infidelity(fields, ColoredNoise(2, 0.1), 1, seed=0, n_steps=512)
    with pytest.raises(ValidationError):
        mc_infidelity(fields, StaticNoise(0.1, 0.0), 8, seed=0, n_steps=512)
    with pytest.raises(ValidationError):
        mc_infidelity(fields, ColoredNoise(2, 0.1), 8, seed=0, n_steps=512,
                      reference="bogus")
    with pytest.raises(ValidationError):
        mc_infidelity(fields, ColoredNoise(2, 0.1), 8, seed=0, n_steps=512,
                      reference="target")


def test_mc_matches_analytic_dephasing_prediction():
    # two closed constant-speed loops whose filtering indices differ by
    # exactly 4; weak alpha=2 noise, shared seed so the ratio is tight
    fd1 = frenet.evaluate_frenet(circle_curve(), grid_size=4097)
    fd2 = frenet.evaluate_frenet(double_circle(), grid_size=4097)
    assert cfi(fd1) / cfi(fd2) == pytest.approx(4.0, rel=1e-9)
    lam = 0.1 / fd1.T_g
    means = []
    for fd in (fd1, fd2):
        fields = extract_controls(fd, mode="xy", n_samples=2049)
        res = mc_infidelity(fields, ColoredNoise(2, lam), 256, seed=11,
                            n_steps=4096)
        pred = cfi_infidelity(cfi(fd), lam, fd.T_g)
        assert res.mean == pytest.approx(pred, rel=0.25)
        means.append(res.mean)
    assert 3.5 < means[0] / means[1] < 4.5


def test_filter_function_closed_curve_dc_null():
    fd = frenet.evaluate_frenet(circle_curve(), grid_size=4097)
    assert filter_function(fd, 0.0, n_time=4097)[0] < 1e-20


def test_filter_function_straight_segment():
    t_g = 2.0
    fields = const_fields(0.0, 0.0, 0.0, t_g)
    for w in (0.5, 1.35, 3.0):
        got = filter_function(fields, np.array([w]), n_time=2049)[0]
        exact = 2.0 * np.sin(0.5 * w * t_g)**2 / w**2
        assert got == pytest.approx(exact, rel=1e-5)


def test_filter_function_symmetry_and_source_equivalence():
    fd = frenet.evaluate_frenet(circle_curve(), grid_size=4097)
    fields = extract_controls(fd, mode="xy", n_samples=2049)
    om_b = 2.0 * np.pi / fd.T_g
    omega = np.geomspace(0.05 * om_b, 20.0 * om_b, 64)
    f_geo = filter_function(fd, omega, n_time=4097)
    assert np.array_equal(filter_function(fd, -omega, n_time=4097), f_geo)
    # the sources differ by a fixed tangent-frame rotation, which leaves
    # the filter function invariant
    f_prop = filter_function(fields, omega, n_time=4097)
    assert np.abs(f_geo - f_prop).max() < 1e-9 * f_geo.max()


def test_overlap_zero_psd():
    omega = np.geomspace(0.1, 10.0, 32)
    f_values = np.ones(32)
    assert overlap_integral(omega, f_values, np.zeros(32)) == 0.0
    assert overlap_infidelity(omega, f_values, 2, 0.0, 1.0) == 0.0


def test_cfi_circle_value_and_scale_invariance():
    fd = frenet.evaluate_frenet(circle_curve(), grid_size=4097)
    assert cfi(fd) == pytest.approx(1.0 / (2.0 * np.pi**2), rel=1e-9)
    big = frenet.AnalyticCurve(
        lambda x: 10.0 * np.stack([np.cos(2 * np.pi * x) - 1.0,
                                   np.sin(2 * np.pi * x),
                                   np.zeros_like(x)], axis=-1),
        [lambda x, k=k: 10.0 * (2 * np.pi)**k * np.stack(
            [np.cos(2 * np.pi * x + k * np.pi / 2),
             np.sin(2 * np.pi * x + k * np.pi / 2),
             np.zeros_like(x)], axis=-1) for k in (1, 2, 3)])
    fd_big = frenet.evaluate_frenet(big, grid_size=4097)
    assert cfi(fd_big) == pytest.approx(cfi(fd), rel=1e-9)
    with pytest.raises(PreconditionError):
        cfi(frenet.evaluate_frenet(helix_curve(), grid_size=1025))


def test_mc_to_json_keys(tmp_path):
    fields = wiggly_fields()
    res = mc_infidelity(fields, ColoredNoise(2, 0.02), 8, seed=5,
                        n_steps=512)
    path = tmp_path / "mc.json"
    mc_to_json(path, res)
    data = json.loads(path.read_text())
    assert set(data) == {"mean", "stderr", "n", "seed", "alpha", "lambda"}
    assert data["mean"] == res.mean
