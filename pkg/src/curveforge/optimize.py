"""Differentiable losses over the gate-fixed construction, plus Adam.

The construction -> curve-derivative -> loss pipeline is evaluated either on
plain arrays (reporting) or on forward-mode dual numbers carrying one
derivative slot per optimizable parameter (optimization).  Both go through
the same construction code; the grid-stage contraction and the fused loss
kernel do the heavy lifting.
"""

from dataclasses import dataclass

import numpy as np

from . import _dual as D
from . import barq, bezier, frenet, kernels
from .errors import EvaluationError, ValidationError
from ._jsonio import write_csv

OPT_GRID = 513
REPORT_GRID = 2049
DEFAULT_RABI_WEIGHT = 1e-2
SMOOTH_MAX_POWER = 32


@dataclass(frozen=True)
class LossTerm:
    kind: str
    weight: float
    fn: object = None  # kind "custom": callable FrenetData -> scalar

    def __post_init__(self):
        if self.kind not in ("drive", "rabi", "custom"):
            raise ValidationError(f"unknown loss kind {self.kind!r}")
        if not np.isfinite(self.weight) or self.weight < 0.0:
            raise ValidationError("loss weights must be finite and >= 0")
        if self.kind == "custom" and not callable(self.fn):
            raise ValidationError("custom terms need a callable fn")


@dataclass(frozen=True)
class LossSpec:
    terms: tuple
    power: int = SMOOTH_MAX_POWER
    grid_size: int = OPT_GRID
    smooth_max: bool = True  # False: exact max with a subgradient

    def __post_init__(self):
        if not self.terms:
            raise ValidationError("need at least one loss term")
        object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def default(cls, rabi_weight=DEFAULT_RABI_WEIGHT):
        return cls(terms=(LossTerm("drive", 1.0),
                          LossTerm("rabi", rabi_weight)))


def smooth_max(values, power=SMOOTH_MAX_POWER):
    """Power-mean maximum: (mean v^power)^(1/power), factored by max(v)
    for range safety.  Never exceeds max(v); exact when v is constant."""
    v = np.abs(np.asarray(values, dtype=float))
    m = v.max()
    if m <= 0.0:
        return 0.0
    return float(m * np.mean((v / m)**power)**(1.0 / power))


def loss_drive(fd):
    """Squared norm of the oriented tangent-sphere area integral."""
    area = frenet.robustness_measures(fd).tangent_area
    return float(area @ area)


def loss_rabi(fd, power=SMOOTH_MAX_POWER, smooth=True):
    """Duration times (smooth) peak drive amplitude; scale invariant."""
    amp = np.abs(fd.kappa)
    peak = smooth_max(amp, power) if smooth else float(amp.max())
    return fd.T_g * peak


def total_loss(fd, spec):
    total = 0.0
    for term in spec.terms:
        if term.kind == "drive":
            total += term.weight * loss_drive(fd)
        elif term.kind == "rabi":
            total += term.weight * loss_rabi(fd, spec.power, spec.smooth_max)
        else:
            total += term.weight * float(term.fn(fd))
    return total


def _grid_derivatives(config, base, vec, grid_size):
    """First and second curve derivatives on a uniform grid (dual-aware)."""
    pts = barq.control_points_from_vector(config, base, vec)
    n = config.degree
    d1 = (pts[1:] - pts[:-1]) * float(n)
    d2 = (d1[1:] - d1[:-1]) * float(n - 1)
    xs = np.linspace(0.0, 1.0, grid_size)
    b1 = bezier.bernstein_matrix(n - 1, xs)
    b2 = bezier.bernstein_matrix(n - 2, xs)
    dr = D.apply_matrix(b1, d1)
    ddr = D.apply_matrix(b2, d2)
    return dr, ddr, xs[1] - xs[0]


def _exact_max_term(dr, ddr, dr_dot, ddr_dot, dx):
    """T_g * max|kappa| with the subgradient at the arg-max sample."""
    gamma = np.linalg.norm(dr, axis=1)
    gamma_dot = np.einsum("kc,kcp->kp", dr, dr_dot) / gamma[:, None]
    weights = np.full(gamma.size, dx)
    weights[0] = weights[-1] = 0.5 * dx
    t_g = float(weights @ gamma)
    t_g_dot = weights @ gamma_dot
    cross = np.cross(dr, ddr)
    cn = np.linalg.norm(cross, axis=1)
    kappa = cn / gamma**3
    k = int(np.argmax(kappa))
    if cn[k] <= 0.0:
        return t_g * 0.0, t_g_dot * 0.0
    cross_dot_k = (np.cross(dr_dot[k], ddr[k], axisa=0, axisb=0, axisc=0)
                   + np.cross(dr[k], ddr_dot[k], axisa=0, axisb=0, axisc=0))
    kdot = (cross[k] @ cross_dot_k / (cn[k] * gamma[k]**3)
            - 3.0 * kappa[k] * gamma_dot[k] / gamma[k])
    return t_g * kappa[k], t_g_dot * kappa[k] + t_g * kdot


def loss_and_gradient(config, base, vec, spec=None):
    """Total loss, gradient, and per-term values at a parameter vector.

    Returns (total, grad, parts) with parts mapping term kind to its
    unweighted value.  Custom terms are evaluation-only and rejected here.
    """
    spec = LossSpec.default() if spec is None else spec
    if any(t.kind == "custom" for t in spec.terms):
        raise ValidationError(
            "custom terms are evaluation-only; no gradient is available")
    vec = np.asarray(vec, dtype=float)
    dual = D.Dual.variables(vec)
    dr, ddr, dx = _grid_derivatives(config, base, dual, spec.grid_size)
    area, area_dot, t_g, t_g_dot, smax, smax_dot = kernels.loss_terms_grid(
        dr.val, ddr.val, dr.dot, ddr.dot, dx, spec.power)
    parts = {}
    total = 0.0
    grad = np.zeros(vec.size)
    for term in spec.terms:
        if term.kind == "drive":
            value = float(area @ area)
            g = 2.0 * area @ area_dot
        else:
            if spec.smooth_max:
                value = t_g * smax
                g = t_g_dot * smax + t_g * smax_dot
            else:
                value, g = _exact_max_term(dr.val, ddr.val, dr.dot, ddr.dot,
                                           dx)
        parts[term.kind] = value
        total += term.weight * value
        grad += term.weight * g
    if not np.isfinite(total) or not np.all(np.isfinite(grad)):
        raise EvaluationError("loss or gradient is not finite")
    return float(total), grad, parts


def gradient(config, params, spec=None):
    """Gradient of the total loss over the flat parameter vector."""
    _, g, _ = loss_and_gradient(config, params, barq.pack_parameters(params),
                                spec)
    return g


@dataclass(frozen=True)
class AdamParams:
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def _adam_update(m, v, grad, step, hyper):
    """One bias-corrected Adam update; returns (m, v, delta).  `step` is
    1-based."""
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * grad
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * grad * grad
    mh = m / (1.0 - hyper.beta1**step)
    vh = v / (1.0 - hyper.beta2**step)
    return m, v, -hyper.lr * mh / (np.sqrt(vh) + hyper.eps)


def adam_minimize(value_and_grad, x0, steps=1000, hyper=None):
    """Plain Adam over a callable x -> (value, grad); returns the final x."""
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    hyper = AdamParams() if hyper is None else hyper
    x = np.asarray(x0, dtype=float).copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    for t in range(steps):
        _, grad = value_and_grad(x)
        m, v, delta = _adam_update(m, v, np.asarray(grad, dtype=float),
                                   t + 1, hyper)
        x = x + delta
    return x


@dataclass(frozen=True)
class OptimizationTrace:
    """Logged loss values plus parameter snapshots at the logged steps."""

    steps: np.ndarray
    total: np.ndarray
    drive: np.ndarray
    rabi: np.ndarray
    grad_norm: np.ndarray
    vectors: np.ndarray
    final_params: object
    hyper: AdamParams
    aborted: bool = False
    abort_step: int = -1

    def to_csv(self, path):
        write_csv(path, "step,total,drive,rabi,grad_norm",
                  [self.steps, self.total, self.drive, self.rabi,
                   self.grad_norm])


def run_adam(config, params0, spec=None, steps=5000, hyper=None,
             trace_stride=None):
    """Adam with bias correction over the packed parameter vector.

    Deterministic given inputs.  A non-finite loss aborts the run and
    returns the trace accumulated so far (aborted flag set).  Rows are
    logged every `trace_stride` steps (default ~500 rows) plus the final
    state.
    """
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    spec = LossSpec.default() if spec is None else spec
    hyper = AdamParams() if hyper is None else hyper
    stride = max(1, steps // 500) if trace_stride is None \
        else max(1, int(trace_stride))

    vec = barq.pack_parameters(params0)
    m = np.zeros_like(vec)
    v = np.zeros_like(vec)
    rows = []

    def log(step, total, parts, gnorm):
        rows.append((step, total, parts.get("drive", 0.0),
                     parts.get("rabi", 0.0), gnorm, vec.copy()))

    aborted = False
    abort_step = -1
    for t in range(steps):
        try:
            total, grad, parts = loss_and_gradient(config, params0, vec, spec)
        except EvaluationError:
            aborted = True
            abort_step = t
            break
        if t % stride == 0:
            log(t, total, parts, np.abs(grad).max())
        m, v, delta = _adam_update(m, v, grad, t + 1, hyper)
        vec = vec + delta
    if not aborted:
        total, grad, parts = loss_and_gradient(config, params0, vec, spec)
        log(steps, total, parts, np.abs(grad).max())

    steps_arr = np.array([r[0] for r in rows], dtype=float)
    trace = OptimizationTrace(
        steps=steps_arr,
        total=np.array([r[1] for r in rows]),
        drive=np.array([r[2] for r in rows]),
        rabi=np.array([r[3] for r in rows]),
        grad_norm=np.array([r[4] for r in rows]),
        vectors=np.array([r[5] for r in rows]),
        final_params=barq.unpack_parameters(config, params0, vec),
        hyper=hyper, aborted=aborted, abort_step=abort_step)
    return trace


def frenet_of(config, params, grid_size=REPORT_GRID):
    """Reporting-grade frame evaluation of the current design."""
    return frenet.evaluate_frenet(barq.build_control_points(params, config),
                                  grid_size=grid_size)
