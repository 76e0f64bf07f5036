"""Continuous Frenet-Serret frames for sampled regular curves.

Time equals arclength: a curve traversed on x in [0, 1] with speed
gamma = ||dr/dx|| has duration T_g = integral of gamma.  The frame here is
the continuous variant: curvature is signed, and the normal/binormal flip
sign after each interior singular point (an inflection where the turning
direction of the tangent reverses) so that the frame never jumps.

At an inflection the standard formulas degenerate; the frame and the torsion
are then computed from the lowest derivative order q with a nonvanishing
r' x d^(q+2)r/dx^(q+2).  The binormal direction is that cross product
normalized, and the torsion is the usual ratio divided by (q+1) (the limit
of the analytic torsion at the inflection; for q=0 it reduces to the regular
formula).
"""

from dataclasses import dataclass, field

import numpy as np

from . import bezier
from .errors import (FrameUndefinedError, RegularityError, ValidationError)

DEFAULT_GRID = 2049
EPS_REGULAR = 1e-9
EPS_INFLECT = 1e-8

# dimensionless angle threshold for the derivative-order scan at inflections
_SCAN_TOL = 1e-6


class AnalyticCurve:
    """Adapter giving closed-form curves the evaluation protocol.

    Parameters
    ----------
    position : callable
        Maps an array of parameters to positions, shape (len(x), 3).
    derivatives : sequence of callables
        derivatives[q-1] evaluates d^q r / dx^q the same way.
    """

    def __init__(self, position, derivatives):
        self._funcs = [position, *derivatives]
        self.max_derivative_order = len(derivatives)

    def derivatives_on_grid(self, xs, max_order):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        if max_order > self.max_derivative_order:
            raise ValidationError(
                f"analytic curve provides derivatives up to order "
                f"{self.max_derivative_order}, requested {max_order}")
        out = np.empty((max_order + 1, xs.size, 3))
        for q in range(max_order + 1):
            out[q] = np.asarray(self._funcs[q](xs), dtype=float).reshape(-1, 3)
        return out


def _as_curve(curve):
    if hasattr(curve, "derivatives_on_grid"):
        return curve
    return bezier.ControlPointSet(np.asarray(curve, dtype=float))


def _derivs_at(curve, x, order):
    """All derivatives 0..order at one parameter, zero-padded beyond the
    curve's polynomial degree."""
    avail = min(order, curve.max_derivative_order)
    d = curve.derivatives_on_grid(np.array([x]), avail)[:, 0, :]
    if avail < order:
        d = np.vstack([d, np.zeros((order - avail, 3))])
    return d


@dataclass(frozen=True)
class InflectionPoint:
    """One detected inflection: location, lowest nonzero order, class."""
    x_s: float
    t_s: float
    l_s: int
    singular: bool
    boundary: bool


@dataclass(frozen=True)
class FrenetData:
    """Frame samples plus the global scalars derived from them."""

    x: np.ndarray
    t: np.ndarray
    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    binormal: np.ndarray
    kappa: np.ndarray
    tau: np.ndarray
    gamma: np.ndarray
    switching_sign: np.ndarray
    T_g: float
    total_torsion: float
    inflections: tuple
    # integrand (r' x r'')/gamma^2 kept for the robustness integrals
    area_integrand: np.ndarray = field(repr=False, default=None)

    @property
    def singular_points(self):
        return [p for p in self.inflections if p.singular and not p.boundary]

    @property
    def M(self):
        return len(self.singular_points)

    @property
    def grid_size(self):
        return self.x.size


@dataclass(frozen=True)
class RobustnessMeasures:
    closure_gap: float
    tangent_area: np.ndarray
    cfi: float


def evaluate_frenet(curve, grid_size=DEFAULT_GRID, eps_regular=EPS_REGULAR,
                    eps_inflect=EPS_INFLECT):
    """Sample the continuous frame of a regular curve on [0, 1].

    Parameters
    ----------
    curve : ControlPointSet, (m, 3) array_like, or AnalyticCurve
    grid_size : int
        Number of uniform parameter samples (>= 9).
    eps_regular : float
        Regularity floor relative to the mean speed.
    eps_inflect : float
        Inflection threshold relative to max ||r' x r''||/gamma^2.

    Returns
    -------
    FrenetData
    """
    curve = _as_curve(curve)
    grid_size = int(grid_size)
    if grid_size < 9:
        raise ValidationError("grid_size must be at least 9")
    xs = np.linspace(0.0, 1.0, grid_size)
    max_order = min(3, curve.max_derivative_order)
    if max_order < 2:
        raise ValidationError("curve must provide at least two derivatives")
    d = curve.derivatives_on_grid(xs, max_order)
    r = d[0]
    r1 = d[1]
    r2 = d[2]
    r3 = d[3] if max_order >= 3 else np.zeros_like(r)

    gamma = np.linalg.norm(r1, axis=1)
    mean_gamma = gamma.mean()
    if mean_gamma <= 0.0 or gamma.min() <= eps_regular * mean_gamma:
        raise RegularityError(
            "curve speed vanishes on the grid; the frame is undefined")

    dx = xs[1] - xs[0]
    t = np.concatenate([[0.0], np.cumsum(0.5 * (gamma[1:] + gamma[:-1]) * dx)])
    T_g = float(t[-1])

    tangent = r1 / gamma[:, None]
    cross = np.cross(r1, r2)
    cnorm = np.linalg.norm(cross, axis=1)
    area_density = cnorm / gamma**2
    scale = area_density.max()
    if scale <= 0.0:
        raise FrameUndefinedError(
            "curvature vanishes identically; no frame exists")
    flagged = area_density < eps_inflect * scale

    kappa_u = cnorm / gamma**3
    binormal_u = np.zeros_like(tangent)
    tau = np.zeros(grid_size)
    regular = ~flagged
    binormal_u[regular] = cross[regular] / cnorm[regular, None]
    tau[regular] = (np.einsum("ij,ij->i", cross[regular], r3[regular])
                    / cnorm[regular]**2)

    orders = np.zeros(grid_size, dtype=int)
    for j in np.nonzero(flagged)[0]:
        b_dir, tau_j, l_s = _inflection_frame(curve, xs[j], r1[j], gamma[j])
        binormal_u[j] = b_dir
        tau[j] = tau_j
        orders[j] = l_s

    # switching sign: flip whenever the unsigned binormal direction reverses
    dots = np.einsum("ij,ij->i", binormal_u[:-1], binormal_u[1:])
    sign = np.ones(grid_size)
    flips = np.nonzero(dots < 0.0)[0] + 1
    for j in flips:
        sign[j:] *= -1.0

    inflections = _collect_inflections(curve, xs, t, flagged, orders, flips,
                                       area_density)

    binormal = sign[:, None] * binormal_u
    normal = np.cross(binormal, tangent)
    kappa = sign * kappa_u
    total_torsion = float(np.trapezoid(tau * gamma, xs))

    return FrenetData(
        x=xs, t=t, position=r, tangent=tangent, normal=normal,
        binormal=binormal, kappa=kappa, tau=tau, gamma=gamma,
        switching_sign=sign, T_g=T_g, total_torsion=total_torsion,
        inflections=tuple(inflections),
        area_integrand=cross / gamma[:, None]**2,
    )


def _inflection_frame(curve, x, r1, gamma_x):
    """Frame direction and torsion at an inflection sample.

    Scans q = 1, 2, ... for the lowest order with r' x d^(q+2)r nonvanishing
    (angle test against gamma * ||d^(q+2)r||); returns the unsigned binormal
    direction, the torsion (ratio divided by q+1), and q.
    """
    limit = max(curve.max_derivative_order, 3)
    for q in range(1, limit - 1):
        d = _derivs_at(curve, x, q + 3)
        hi = d[q + 2]
        hi_norm = np.linalg.norm(hi)
        if hi_norm <= 0.0:
            continue
        c = np.cross(r1, hi)
        cn = np.linalg.norm(c)
        if cn > _SCAN_TOL * gamma_x * hi_norm:
            tau = float(c @ d[q + 3] / cn**2) / (q + 1)
            return c / cn, tau, q
    raise FrameUndefinedError(
        f"all usable derivative orders vanish in the cross product at x={x}")


def _scan_order(curve, x):
    """Lowest q >= 1 with nonvanishing r' x d^(q+2)r at x (for reporting)."""
    d = _derivs_at(curve, x, min(3, curve.max_derivative_order))
    r1 = d[1]
    gamma_x = np.linalg.norm(r1)
    try:
        _, _, l_s = _inflection_frame(curve, x, r1, gamma_x)
    except FrameUndefinedError:
        return 0
    return l_s


def _collect_inflections(curve, xs, t, flagged, orders, flips, area_density):
    """Group flagged samples into runs and merge with between-sample flips."""
    points = []
    flips = set(int(j) for j in flips)
    n = xs.size
    j = 0
    claimed = set()
    while j < n:
        if not flagged[j]:
            j += 1
            continue
        k = j
        while k + 1 < n and flagged[k + 1]:
            k += 1
        # representative node: smallest residual curvature in the run
        rep = j + int(np.argmin(area_density[j:k + 1]))
        boundary = (j == 0) or (k == n - 1)
        run_flips = [f for f in flips if j <= f <= k]
        singular = bool(run_flips) and not boundary
        if boundary and j == 0 and k == n - 1:
            raise FrameUndefinedError("curvature vanishes on the whole grid")
        if boundary:
            rep = 0 if j == 0 else n - 1
        points.append(InflectionPoint(
            x_s=float(xs[rep]), t_s=float(t[rep]), l_s=int(orders[rep]),
            singular=singular, boundary=boundary))
        claimed.update(run_flips)
        j = k + 1
    for f in sorted(flips - claimed):
        if flagged[f] or flagged[f - 1]:
            continue
        a0, a1 = area_density[f - 1], area_density[f]
        w = a1 / (a0 + a1)
        x_s = w * xs[f - 1] + (1.0 - w) * xs[f]
        t_s = w * t[f - 1] + (1.0 - w) * t[f]
        l_s = _scan_order(curve, x_s)
        points.append(InflectionPoint(
            x_s=float(x_s), t_s=float(t_s), l_s=int(l_s) or 1,
            singular=True, boundary=False))
    points.sort(key=lambda p: p.x_s)
    return points


def classify_inflections(fd):
    """Inflection report: one entry per detected inflection point."""
    return [{"x_s": p.x_s, "t_s": p.t_s, "l_s": p.l_s,
             "singular": p.singular, "boundary": p.boundary}
            for p in fd.inflections]


def robustness_measures(fd):
    """Closure gap, tangent-sphere oriented area, and the filtering index."""
    closure_gap = float(np.linalg.norm(fd.position[-1] - fd.position[0]))
    tangent_area = np.trapezoid(fd.area_integrand, fd.x, axis=0)
    r_sq = np.einsum("ij,ij->i", fd.position, fd.position)
    cfi = float(np.trapezoid(r_sq * fd.gamma, fd.x) / fd.T_g**3)
    return RobustnessMeasures(closure_gap=closure_gap,
                              tangent_area=tangent_area, cfi=cfi)


def uniform_time_grid(fd, n_samples):
    """Uniform time grid with matching parameters via arclength inversion."""
    n_samples = int(n_samples)
    if n_samples < 2:
        raise ValidationError("need at least two time samples")
    t_u = np.linspace(0.0, fd.T_g, n_samples)
    x_u = np.interp(t_u, fd.t, fd.x)
    return t_u, x_u


FRENET_CSV_HEADER = ("x,t,rx,ry,rz,Tx,Ty,Tz,Nx,Ny,Nz,Bx,By,Bz,"
                     "kappa,tau,gamma")


def frenet_columns(fd):
    """Column arrays in the CSV export order."""
    return [fd.x, fd.t,
            fd.position[:, 0], fd.position[:, 1], fd.position[:, 2],
            fd.tangent[:, 0], fd.tangent[:, 1], fd.tangent[:, 2],
            fd.normal[:, 0], fd.normal[:, 1], fd.normal[:, 2],
            fd.binormal[:, 0], fd.binormal[:, 1], fd.binormal[:, 2],
            fd.kappa, fd.tau, fd.gamma]


def frenet_scalars(fd):
    """Sidecar scalars for the CSV export."""
    return {
        "T_g": fd.T_g,
        "total_torsion": fd.total_torsion,
        "M": fd.M,
        "singular_points": [
            {"x_s": p.x_s, "t_s": p.t_s, "l_s": p.l_s}
            for p in fd.singular_points],
    }
