"""Independent verification of designed pulses.

Everything here deliberately avoids the frame formalism: pulses are
propagated by brute force as products of exact 2x2 step exponentials of

    H(t) = (1 + eps) * Omega/2 (cos Phi sx + sin Phi sy)
           + (Delta + delta_z(t))/2 sz,

so agreement with the frame-predicted evolution is a genuine cross-check,
not a tautology.  Per-step exponentials are composed as unit quaternions
(exactly unitary); the hot chains run through the kernel backend.

Noise models: static (eps, delta_z) offsets for quasi-static sweeps, and
colored dephasing traces with power spectral density

    S(omega) = lambda^2 T_g / (omega / omega_B)^alpha,   omega_B = 2 pi/T_g,

generated by FIR-filtering white Gaussian noise.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import (DomainError, PreconditionError, ValidationError)
from .frenet import robustness_measures, uniform_time_grid
from .gatemap import ControlFields, PAULI, SIGMA_Z
from ._jsonio import atomic_write_text, dump_json, format_float, write_csv

DEFAULT_STEPS = 4096
_CHUNK_ROWS = 256


@dataclass(frozen=True)
class StaticNoise:
    """Quasi-static drive-amplitude and dephasing offsets."""
    epsilon: float = 0.0
    delta_z: float = 0.0


@dataclass(frozen=True)
class ColoredNoise:
    """Dephasing PSD lambda^2 T_g / (omega/omega_B)^alpha."""
    alpha: int
    lam: float

    def __post_init__(self):
        if self.alpha not in (1, 2):
            raise ValidationError(
                "alpha must be 1 or 2 (other exponents are an extension "
                "point)")
        if self.lam < 0.0:
            raise ValidationError("lambda must be >= 0")


@dataclass(frozen=True)
class SweepResult:
    epsilons: np.ndarray
    delta_zs: np.ndarray
    infidelity: np.ndarray  # (len(epsilons), len(delta_zs))
    reference: str
    n_steps: int


@dataclass(frozen=True)
class McResult:
    mean: float
    stderr: float
    n: int
    seed: int
    alpha: int
    lam: float
    reference: str
    n_steps: int


@dataclass(frozen=True)
class BenchReport:
    static_sweep: Optional[SweepResult] = None
    mc: Optional[McResult] = None
    filter_fn: Optional[tuple] = None
    cfi: Optional[float] = None
    overlap_infidelity: Optional[float] = None


def _as_fields(fields):
    if not isinstance(fields, ControlFields):
        raise ValidationError("expected ControlFields")
    for arr in (fields.t, fields.omega, fields.phi, fields.delta):
        if not np.all(np.isfinite(arr)):
            raise DomainError("control fields contain non-finite samples")
    return fields


def _midpoint_controls(fields, t0, t1, n_steps):
    dt = (t1 - t0) / n_steps
    tm = t0 + (np.arange(n_steps) + 0.5) * dt
    om = np.interp(tm, fields.t, fields.omega)
    ph = np.interp(tm, fields.t, fields.phi)
    de = np.interp(tm, fields.t, fields.delta)
    return om, ph, de, dt


def _quats(om, ph, de, dt, eps=0.0, dz=0.0):
    """Unit quaternions of the per-step exponentials; broadcasts eps/dz."""
    hx = (1.0 + eps) * om * np.cos(ph)
    hy = (1.0 + eps) * om * np.sin(ph)
    hz = de + dz
    hx, hy, hz = np.broadcast_arrays(hx, hy, hz)
    nrm = np.sqrt(hx * hx + hy * hy + hz * hz)
    half = 0.5 * dt * nrm
    f = 0.5 * dt * np.sinc(half / np.pi)
    return np.stack([np.cos(half), f * hx, f * hy, f * hz], axis=-1)


def _quat_to_su2(q):
    """(..., 4) -> (..., 2, 2) with U = w*I - i v.sigma."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    u = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    u[..., 0, 0] = w - 1.0j * z
    u[..., 0, 1] = -y - 1.0j * x
    u[..., 1, 0] = y - 1.0j * x
    u[..., 1, 1] = w + 1.0j * z
    return u


def _resolve_noise(noise, n_steps):
    """-> (eps scalar, dz scalar or (n_steps,) trace)."""
    if noise is None:
        return 0.0, 0.0
    if isinstance(noise, StaticNoise):
        return float(noise.epsilon), float(noise.delta_z)
    dz = np.asarray(noise, dtype=float)
    if dz.shape != (n_steps,):
        raise ValidationError(
            f"sampled delta_z trace must have shape ({n_steps},), "
            f"got {dz.shape}")
    return 0.0, dz


def propagate(fields, noise=None, n_steps=DEFAULT_STEPS):
    """Brute-force propagator over [0, T_g]; exactly unitary by
    construction, second-order accurate in 1/n_steps via midpoint
    sampling of the control fields."""
    fields = _as_fields(fields)
    n_steps = int(n_steps)
    if n_steps < fields.t.size:
        raise ValidationError(
            "n_steps must be at least the number of field samples")
    eps, dz = _resolve_noise(noise, n_steps)
    om, ph, de, dt = _midpoint_controls(fields, 0.0, fields.T_g, n_steps)
    q = kernels.quat_chain(_quats(om, ph, de, dt, eps, dz))
    return _quat_to_su2(q)


def propagate_path(fields, times, noise=None, n_steps=DEFAULT_STEPS):
    """Propagator evaluated exactly at the requested times (ascending,
    within [0, T_g]); step boundaries are aligned with the times so no
    interpolation of the unitary is involved."""
    fields = _as_fields(fields)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValidationError("times must be a nonempty 1-D array")
    if np.any(np.diff(times) <= 0.0):
        raise ValidationError("times must be strictly increasing")
    if times[0] < 0.0 or times[-1] > fields.T_g * (1.0 + 1e-12):
        raise ValidationError("times must lie within [0, T_g]")
    if noise is not None and not isinstance(noise, StaticNoise):
        raise ValidationError("propagate_path supports static noise only")
    eps = 0.0 if noise is None else float(noise.epsilon)
    dzs = 0.0 if noise is None else float(noise.delta_z)

    out = np.empty((times.size, 2, 2), dtype=complex)
    acc = np.array([1.0, 0.0, 0.0, 0.0])
    t_prev = 0.0
    for i, t_i in enumerate(times):
        if t_i > t_prev:
            m = max(1, int(round(n_steps * (t_i - t_prev) / fields.T_g)))
            om, ph, de, dt = _midpoint_controls(fields, t_prev, t_i, m)
            seg = kernels.quat_chain(_quats(om, ph, de, dt, eps, dzs))
            acc = _hamilton1(seg, acc)
            t_prev = t_i
        out[i] = _quat_to_su2(acc)
    return out


def _hamilton1(b, a):
    w = b[0] * a[0] - b[1:] @ a[1:]
    v = b[0] * a[1:] + a[0] * b[1:] + np.cross(b[1:], a[1:])
    return np.concatenate([[w], v])


def propagated_tangent(fields, n_time=2049, noise=None,
                       n_steps=DEFAULT_STEPS):
    """Dephasing-error direction (1/2) tr(sigma_i U^dag sz U) on a uniform
    time grid, from brute-force propagation."""
    times = np.linspace(0.0, fields.T_g, int(n_time))
    us = propagate_path(fields, times[1:], noise=noise, n_steps=n_steps)
    us = np.concatenate([np.eye(2, dtype=complex)[None], us], axis=0)
    conj = np.einsum("kba,bc,kcd->kad", us.conj(), SIGMA_Z, us)
    tang = 0.5 * np.real(np.einsum("kab,iba->ki", conj, PAULI))
    return times, tang


def _infidelities(us, u_ref):
    """Average gate infidelities of a batch against one reference.

    Computed from the error unitary's quaternion split m = w*I - i v.sigma
    as (2/3) |v|^2 / (|v|^2 + |w|^2), which equals 1 - F exactly for
    unitary m but, unlike 1 - (tr(mm+) + |tr m|^2)/6, suffers no
    catastrophic cancellation: values far below 1e-16 stay resolvable.
    """
    m = us @ u_ref.conj().T
    w = 0.5 * (m[..., 0, 0] + m[..., 1, 1])
    x = 0.5j * (m[..., 0, 1] + m[..., 1, 0])
    y = 0.5 * (m[..., 1, 0] - m[..., 0, 1])
    z = 0.5j * (m[..., 0, 0] - m[..., 1, 1])
    vv = np.abs(x)**2 + np.abs(y)**2 + np.abs(z)**2
    return (2.0 / 3.0) * vv / (vv + np.abs(w)**2)


def _worker_count():
    raw = os.environ.get("CURVEFORGE_THREADS", "").strip()
    if not raw:
        return 1
    return max(1, int(raw))


def _chunked_chain(quats_fn, n_rows):
    """Run quats_fn(lo, hi) -> (hi-lo, S, 4) over fixed chunks, chain each,
    and concatenate in chunk order (worker-count independent)."""
    bounds = [(lo, min(lo + _CHUNK_ROWS, n_rows))
              for lo in range(0, n_rows, _CHUNK_ROWS)]

    def run(b):
        lo, hi = b
        return kernels.quat_chain_batch(quats_fn(lo, hi))

    workers = _worker_count()
    if workers == 1 or len(bounds) == 1:
        parts = [run(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    return np.concatenate(parts, axis=0)


def static_sweep(fields, target_unitary, epsilons=None, delta_zs=None,
                 n_steps=DEFAULT_STEPS, reference="target"):
    """Infidelity over a quasi-static (eps, delta_z) grid.

    reference "target": compare against the intended gate (absolute
    infidelity, includes any discretization floor).  reference
    "noise_free": compare against the noise-free propagated unitary on the
    same step grid, isolating the noise contribution (used for slope fits
    far below the discretization floor).
    """
    fields = _as_fields(fields)
    if epsilons is None:
        epsilons = np.linspace(-0.1, 0.1, 41)
    if delta_zs is None:
        delta_zs = np.linspace(-0.5, 0.5, 41) / fields.T_g
    epsilons = np.asarray(epsilons, dtype=float)
    delta_zs = np.asarray(delta_zs, dtype=float)
    if reference not in ("target", "noise_free"):
        raise ValidationError("reference must be 'target' or 'noise_free'")
    if reference == "target":
        u_ref = np.asarray(target_unitary, dtype=complex)
    else:
        u_ref = propagate(fields, None, n_steps)

    om, ph, de, dt = _midpoint_controls(fields, 0.0, fields.T_g, n_steps)
    eps_flat = np.repeat(epsilons, delta_zs.size)[:, None]
    dz_flat = np.tile(delta_zs, epsilons.size)[:, None]

    def quats_fn(lo, hi):
        return _quats(om, ph, de, dt, eps_flat[lo:hi], dz_flat[lo:hi])

    qs = _chunked_chain(quats_fn, eps_flat.shape[0])
    infid = _infidelities(_quat_to_su2(qs), u_ref)
    return SweepResult(epsilons=epsilons, delta_zs=delta_zs,
                       infidelity=infid.reshape(epsilons.size,
                                                delta_zs.size),
                       reference=reference, n_steps=n_steps)


def sweep_to_csv(path, sweep):
    """Matrix CSV: first row delta_z values, first column epsilon values."""
    lines = ["epsilon\\delta_z," + ",".join(format_float(d)
                                            for d in sweep.delta_zs)]
    for i, e in enumerate(sweep.epsilons):
        lines.append(format_float(e) + "," + ",".join(
            format_float(v) for v in sweep.infidelity[i]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def fit_loglog_slope(x, y, lo, hi):
    """Least-squares slope of log y vs log x restricted to x in [lo, hi]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (x >= lo) & (x <= hi) & (y > 0.0)
    if mask.sum() < 2:
        raise ValidationError("need at least two points in the fit window")
    return float(np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)[0])


def fir_taps(alpha, n):
    """Impulse response h[0]=1, h[k] = h[k-1] (alpha/2 + k - 1)/k."""
    k = np.arange(1, n)
    return np.cumprod(np.concatenate([[1.0], (0.5 * alpha + k - 1.0) / k]))


def _colored_batch(alpha, lam, n_samples, t_g, count, rng):
    n = int(n_samples)
    if n < 256 or n & (n - 1):
        raise ValidationError("n_samples must be a power of two >= 256")
    burn = n // 8
    total = n + burn
    sigma_d = lam * np.sqrt(n) * (2.0 * np.pi / n)**(0.5 * alpha)
    white = rng.normal(0.0, sigma_d, size=(count, total))
    if lam == 0.0:
        return white[:, burn:]
    h = fir_taps(alpha, total)
    nfft = 1 << int(np.ceil(np.log2(2 * total - 1)))
    spec = np.fft.rfft(white, nfft) * np.fft.rfft(h, nfft)
    y = np.fft.irfft(spec, nfft)[:, :total]
    return y[:, burn:]


def generate_colored_noise(alpha, lam, n_samples, t_g, seed=0):
    """One dephasing trace delta_z[k], k = 0..n_samples-1, spanning T_g.

    The first n_samples//8 filtered outputs are discarded as transient.
    The driving variance is set so the trace PSD matches
    lambda^2 T_g/(omega/omega_B)^alpha.
    """
    noise = ColoredNoise(alpha=alpha, lam=lam)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return _colored_batch(noise.alpha, noise.lam, n_samples, t_g, 1, rng)[0]


def estimate_psd(traces, t_g):
    """Averaged PSD estimate via first-difference prewhitening.

    Differencing flattens steep spectra, removing the periodogram's
    leakage bias; a Hann window then suppresses the end-jump leakage the
    differencing itself introduces (the raw differenced periodogram is
    inflated by ~|x[m]-x[0]|^2 at low bins).  The known responses of both
    filters are divided back out.  Returns (omega, S) excluding DC.
    """
    traces = np.atleast_2d(np.asarray(traces, dtype=float))
    n = traces.shape[1]
    dt = t_g / n
    diff = np.diff(traces, axis=1)
    m = diff.shape[1]
    window = np.hanning(m)
    spec = np.fft.rfft(diff * window, axis=1)
    peri = dt * np.abs(spec)**2 / np.sum(window**2)
    s_diff = peri.mean(axis=0)
    k = np.arange(s_diff.size)
    omega = 2.0 * np.pi * k / (m * dt)
    gain = 4.0 * np.sin(0.5 * omega[1:] * dt)**2
    return omega[1:], s_diff[1:] / gain


def mc_infidelity(fields, noise, n_realizations, seed,
                  n_steps=DEFAULT_STEPS, reference="noise_free",
                  target_unitary=None, chunk_size=64):
    """Mean infidelity over colored-noise realizations.

    Each realization draws its own counter-based RNG substream (spawned
    from the seed), and the reduction runs over fixed-size chunks in index
    order, so the result is independent of worker count.  Set
    CURVEFORGE_THREADS to parallelize over chunks.
    """
    fields = _as_fields(fields)
    if not isinstance(noise, ColoredNoise):
        raise ValidationError("mc_infidelity needs a ColoredNoise model")
    n_realizations = int(n_realizations)
    if n_realizations < 2:
        raise ValidationError("n_realizations must be >= 2")
    if reference == "noise_free":
        u_ref = propagate(fields, None, n_steps)
    elif reference == "target":
        if target_unitary is None:
            raise ValidationError("reference 'target' needs target_unitary")
        u_ref = np.asarray(target_unitary, dtype=complex)
    else:
        raise ValidationError("reference must be 'noise_free' or 'target'")

    om, ph, de, dt = _midpoint_controls(fields, 0.0, fields.T_g, n_steps)
    children = np.random.SeedSequence(seed).spawn(n_realizations)
    bounds = [(lo, min(lo + chunk_size, n_realizations))
              for lo in range(0, n_realizations, chunk_size)]

    def run(b):
        lo, hi = b
        rows = []
        for i in range(lo, hi):
            rng = np.random.Generator(np.random.Philox(children[i]))
            rows.append(_colored_batch(noise.alpha, noise.lam, n_steps,
                                       fields.T_g, 1, rng)[0])
        dz = np.stack(rows)
        qs = kernels.quat_chain_batch(_quats(om, ph, de, dt, 0.0, dz))
        return _infidelities(_quat_to_su2(qs), u_ref)

    workers = _worker_count()
    if workers == 1 or len(bounds) == 1:
        parts = [run(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    infids = np.concatenate(parts)
    return McResult(mean=float(infids.mean()),
                    stderr=float(infids.std(ddof=1)
                                 / np.sqrt(n_realizations)),
                    n=n_realizations, seed=int(seed), alpha=noise.alpha,
                    lam=noise.lam, reference=reference, n_steps=n_steps)


def mc_to_json(path, result):
    dump_json({"mean": result.mean, "stderr": result.stderr,
               "n": result.n, "seed": result.seed,
               "alpha": result.alpha, "lambda": result.lam}, path)


def tangent_on_time_grid(source, n_time=2049):
    """Tangent samples on a uniform time grid, from geometry (FrenetData)
    or from brute-force propagation (ControlFields)."""
    if isinstance(source, ControlFields):
        return propagated_tangent(source, n_time)
    t_u, _ = uniform_time_grid(source, n_time)
    tang = np.stack([np.interp(t_u, source.t, source.tangent[:, i])
                     for i in range(3)], axis=1)
    return t_u, tang


def filter_function(source, omega, n_time=2049):
    """Dephasing filter function F(omega) = ||int T e^{-i omega t} dt||^2/2."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    t, tang = tangent_on_time_grid(source, n_time)
    w = np.full(t.size, t[1] - t[0])
    w[0] = w[-1] = 0.5 * (t[1] - t[0])
    wt = w[:, None] * tang
    out = np.empty(omega.size)
    block = max(1, 4_000_000 // t.size)  # bound the phase-matrix footprint
    for lo in range(0, omega.size, block):
        phase = np.exp(-1.0j * omega[lo:lo + block, None] * t[None, :])
        out[lo:lo + block] = 0.5 * np.sum(np.abs(phase @ wt)**2, axis=1)
    return out


def default_omega_grid(t_g, n=1024, lo=1e-3, hi=200.0):
    """Log-spaced positive frequencies [lo, hi] in units of 2 pi / T_g."""
    omega_b = 2.0 * np.pi / t_g
    return np.geomspace(lo * omega_b, hi * omega_b, int(n))


def filter_to_csv(path, omega, f_values):
    write_csv(path, "omega,F", [omega, f_values])


def psd_dephasing(omega, alpha, lam, t_g):
    omega_b = 2.0 * np.pi / t_g
    return lam**2 * t_g / (np.abs(omega) / omega_b)**alpha


def overlap_integral(omega, f_values, s_values):
    """(1/6 pi) * full-line integral of S*F, folded onto positive omega."""
    return float(np.trapezoid(np.asarray(s_values) * np.asarray(f_values),
                              omega) / (3.0 * np.pi))


def overlap_infidelity(omega, f_values, alpha, lam, t_g):
    """First-order dephasing infidelity from the PSD-filter overlap."""
    return overlap_integral(omega, f_values,
                            psd_dephasing(omega, alpha, lam, t_g))


def cfi(fd):
    """Curve filtering index (1/T_g^3) int ||r||^2 dt; closed curves only
    (the low-frequency reduction it encodes requires closure)."""
    meas = robustness_measures(fd)
    if meas.closure_gap >= 1e-8:
        raise PreconditionError(
            f"curve is not closed (gap {meas.closure_gap:.3g}); the "
            f"filtering index requires a closed curve")
    return meas.cfi


def cfi_infidelity(cfi_value, lam, t_g):
    """alpha=2 analytic route: I = (T_g lam)^2 (T_g omega_B)^2 CFI / 6."""
    return (t_g * lam)**2 * (2.0 * np.pi)**2 * cfi_value / 6.0
