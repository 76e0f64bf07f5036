"""Gate-fixed Bézier control-point construction.

Free parameters (a handful of interior "shaping" points plus boundary scale
factors) map to the control points of a closed degree-(N+5) Bézier curve
whose endpoint derivatives encode a target single-qubit gate:

* w_0 = w_n = 0 closes the curve (first-order dephasing robustness).
* w_1, w_2 along a common direction make the curve start colinear, so the
  drive envelope vanishes at t=0; the end triple does the same at t=T_g.
* The end directions are rows of a_i = (R_g R_B(0))_i, which forces the
  final curve frame to equal the target rotation R_g times the initial one,
  up to a z-rotation by the free angle theta_B that total torsion
  compensation later absorbs.
* Interior points pass through verbatim: moving them never changes the
  encoded gate, only the shape (and hence the noise properties).

The assembly is affine in the optimizable parameters and is written against
the forward-mode helpers so the same code path yields exact derivatives.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _dual as D
from .bezier import ControlPointSet
from .errors import DegenerateFrameError, ValidationError
from .gatemap import GateTarget, rotation_z
from ._jsonio import dump_json, load_json

LAMBDA_NAMES = ("lam1p", "lam2", "lam3p", "lam3",
                "lamn3p", "lamn3", "lamn2", "lamn1p")
# names with a positivity constraint (magnitude of an endpoint derivative)
_PLUS = frozenset(("lam1p", "lam3p", "lamn3p", "lamn1p"))

OPTIMIZABLE = "optimizable"


@dataclass(frozen=True)
class BarqConfig:
    """Immutable description of one gate-fixing problem."""

    target: GateTarget
    n_free: int = 10
    theta_B: float = 0.0
    nu: float = 0.25
    pgf_kind: str = "symmetric"
    lambda_overrides: dict = field(default_factory=dict)
    optimize_theta_B: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_free < 4:
            raise ValidationError("n_free must be at least 4 (two points "
                                  "fix the start frame, two shape the curve)")
        if not (self.nu > 0.0):
            raise ValidationError("nu must be positive")
        if self.pgf_kind not in ("symmetric", "general"):
            raise ValidationError(
                f"pgf_kind must be 'symmetric' or 'general', "
                f"got {self.pgf_kind!r}")
        for name, v in self.lambda_overrides.items():
            if name not in LAMBDA_NAMES:
                raise ValidationError(
                    f"unknown lambda name {name!r}; known: {LAMBDA_NAMES}")
            if v == OPTIMIZABLE:
                continue
            v = float(v)
            if name in _PLUS and v <= 0.0:
                raise ValidationError(f"{name} must be strictly positive")
        if self.pgf_kind == "general":
            missing = [n for n in LAMBDA_NAMES
                       if n not in self.lambda_overrides]
            if missing:
                raise ValidationError(
                    f"general construction requires every lambda to be "
                    f"given; missing {missing}")

    @property
    def degree(self):
        return self.n_free + 5

    @property
    def n_points(self):
        return self.n_free + 6


@dataclass(frozen=True)
class _Slot:
    names: tuple
    plus: bool
    init_raw: float


def lambda_plan(config):
    """Resolve each lambda to a static value or an optimizable slot.

    Returns (static: dict name -> float, slots: list of _Slot).  Slot order
    is deterministic: the default tied (lam3, lamn3) slot first, then the
    remaining optimizable names in canonical order.  Positive-constrained
    lambdas use an exponential raw-to-value map.
    """
    status = {}
    if config.pgf_kind == "symmetric":
        for name in LAMBDA_NAMES:
            status[name] = ("static", config.nu)
        status["lam3"] = ("tied", None)
        status["lamn3"] = ("tied", None)
    for name, v in config.lambda_overrides.items():
        status[name] = ("opt", None) if v == OPTIMIZABLE \
            else ("static", float(v))
    static = {}
    slots = []
    tied = tuple(n for n in LAMBDA_NAMES if status[n][0] == "tied")
    if tied:
        slots.append(_Slot(names=tied, plus=False, init_raw=config.nu))
    for name in LAMBDA_NAMES:
        kind, v = status[name]
        if kind == "static":
            static[name] = v
        elif kind == "opt":
            plus = name in _PLUS
            init = np.log(config.nu) if plus else config.nu
            slots.append(_Slot(names=(name,), plus=plus,
                               init_raw=float(init)))
    return static, slots


def raw_parameter_count(config):
    _, slots = lambda_plan(config)
    return len(slots) + (1 if config.optimize_theta_B else 0)


def parameter_count(config):
    """Length of the flat optimization vector."""
    return 3 * (config.n_free - 2) + raw_parameter_count(config)


@dataclass(frozen=True)
class BarqParameters:
    """Current values of everything the optimizer may touch.

    free_points holds p_1..p_N as rows; the first two set the start frame
    and stay fixed, rows 3..N enter the optimization vector.  raw holds the
    unconstrained values for the optimizable lambdas (and theta_B last when
    it is optimized).
    """

    free_points: np.ndarray
    raw: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.free_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 4:
            raise ValidationError(
                f"free_points must be (N >= 4, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("free_points must be finite")
        raw = np.atleast_1d(np.asarray(self.raw, dtype=float))
        pts.setflags(write=False)
        raw.setflags(write=False)
        object.__setattr__(self, "free_points", pts)
        object.__setattr__(self, "raw", raw)

    @property
    def n_free(self):
        return self.free_points.shape[0]


def init_parameters(config, seed=None):
    """Seeded draw: all components uniform on [-1, 1], with the first two
    points redrawn until they give a well-conditioned start frame."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    while True:
        head = rng.uniform(-1.0, 1.0, size=(2, 3))
        norms = np.linalg.norm(head, axis=1)
        if norms.min() < 1e-3:
            continue
        cosang = head[0] @ head[1] / (norms[0] * norms[1])
        if abs(cosang) > 0.999:
            continue
        break
    mids = rng.uniform(-1.0, 1.0, size=(config.n_free - 2, 3))
    _, slots = lambda_plan(config)
    raw = [s.init_raw for s in slots]
    if config.optimize_theta_B:
        raw.append(config.theta_B)
    return BarqParameters(free_points=np.vstack([head, mids]),
                          raw=np.array(raw, dtype=float))


def pack_parameters(params):
    """Flatten to the optimization vector [p3..pN components, raw values]."""
    return np.concatenate([params.free_points[2:].ravel(), params.raw])


def unpack_parameters(config, base, vec):
    """Inverse of pack_parameters; the first two points come from `base`."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (parameter_count(config),):
        raise ValidationError(
            f"expected vector of length {parameter_count(config)}, "
            f"got shape {vec.shape}")
    n_mid = 3 * (config.n_free - 2)
    return BarqParameters(
        free_points=np.vstack([base.free_points[:2],
                               vec[:n_mid].reshape(-1, 3)]),
        raw=vec[n_mid:].copy())


def lambda_values(config, raw):
    """Map raw parameters (plain or dual) to the named lambda values."""
    static, slots = lambda_plan(config)
    values = dict(static)
    for i, slot in enumerate(slots):
        v = D.exp(raw[i]) if slot.plus else raw[i]
        for name in slot.names:
            values[name] = v
    return values


def theta_value(config, raw):
    if config.optimize_theta_B:
        last = (raw.val.shape[0] if isinstance(raw, D.Dual)
                else len(raw)) - 1
        return raw[last]
    return config.theta_B


def initial_frame_rb0(p1, p2):
    """Start-frame rows (-B(0), N(0), T(0)) from the first two directions.

    T(0) is along p1; B(0) is along p1 x p2 (the w_1 x w_3 direction for
    any positive scale factors); N completes the right-handed triple.
    """
    p1 = np.asarray(p1, dtype=float).reshape(3)
    p2 = np.asarray(p2, dtype=float).reshape(3)
    n1 = np.linalg.norm(p1)
    n2 = np.linalg.norm(p2)
    if n1 <= 0.0 or n2 <= 0.0:
        raise DegenerateFrameError("zero-length frame direction")
    t0 = p1 / n1
    b = np.cross(t0, p2 / n2)
    nb = np.linalg.norm(b)
    if nb <= 1e-6:
        raise DegenerateFrameError(
            "p1 and p2 are parallel within 1e-6 rad; the start frame "
            "is undefined")
    b0 = b / nb
    return np.stack([-b0, np.cross(b0, t0), t0])


def gate_rows(config, p1, p2):
    """Rows a_1, a_2, a_3 of R_g R_B(0): the end-frame axes."""
    return config.target.adjoint @ initial_frame_rb0(p1, p2)


def assemble_control_points(config, p1, p2, mids, lam, theta):
    """Control points from resolved ingredients; dual-aware in mids, lam,
    theta.  Returns an (N+6, 3) array (or dual)."""
    p1 = np.asarray(p1, dtype=float).reshape(3)
    p2 = np.asarray(p2, dtype=float).reshape(3)
    p1h = p1 / np.linalg.norm(p1)
    p2h = p2 / np.linalg.norm(p2)
    a = gate_rows(config, p1, p2)
    zero = np.zeros(3)
    sin_t = D.sin(theta)
    cos_t = D.cos(theta)
    end_dir = D.scale(a[0], lam["lamn3p"] * sin_t) \
        - D.scale(a[1], lam["lamn3p"] * cos_t) \
        - D.scale(a[2], lam["lamn3"])
    rows = [zero,
            D.scale(p1h, lam["lam1p"]),
            D.scale(p1h, lam["lam2"]),
            D.scale(p2h, lam["lam3p"]) + D.scale(p1h, lam["lam3"])]
    for i in range(config.n_free - 2):
        rows.append(mids[i])
    rows.extend([end_dir,
                 D.scale(a[2], -lam["lamn2"]),
                 D.scale(a[2], -lam["lamn1p"]),
                 zero])
    return D.stack(rows, axis=0)


def control_points_from_vector(config, base, vec):
    """Control points as a function of the flat vector (vector may be dual).

    `base` supplies the static first two free points.
    """
    n_mid = 3 * (config.n_free - 2)
    mids = vec[:n_mid].reshape(config.n_free - 2, 3) \
        if isinstance(vec, D.Dual) else \
        np.asarray(vec[:n_mid], dtype=float).reshape(-1, 3)
    raw = vec[n_mid:]
    lam = lambda_values(config, raw)
    theta = theta_value(config, raw)
    return assemble_control_points(config, base.free_points[0],
                                   base.free_points[1], mids, lam, theta)


def build_control_points(params, config):
    """ControlPointSet for the current parameter values."""
    pts = control_points_from_vector(config, params, pack_parameters(params))
    return ControlPointSet(D.value(pts))


def effective_theta_b(config, params):
    return float(theta_value(config, params.raw))


def _end_frame_rows(pts):
    n = pts.shape[0] - 1
    w_last = pts[n - 1]
    w_back = pts[n - 3]
    nw = np.linalg.norm(w_last)
    c = np.cross(w_last, w_back)
    nc = np.linalg.norm(c)
    if nw <= 0.0 or nc <= 1e-9 * nw * np.linalg.norm(w_back):
        raise DegenerateFrameError(
            "end control points are colinear; the end frame is undefined")
    bdir = c / nc
    w1h = w_last / nw
    return np.stack([-bdir, np.cross(w1h, bdir), -w1h])


def verify_gate_encoding(points, config, theta_B=None):
    """Max-norm residual between the end frame assembled from the control
    points and the gate-rotated start frame R_Z^T(theta_B) R_g R_B(0).

    Small residual (< 1e-10) certifies that the construction encodes the
    target gate regardless of the interior points.
    """
    pts = points.points if isinstance(points, ControlPointSet) \
        else np.asarray(points, dtype=float)
    theta = config.theta_B if theta_B is None else float(theta_B)
    rb0 = initial_frame_rb0(pts[1], pts[3] - _project(pts[3], pts[1]))
    rb_end = _end_frame_rows(pts)
    target = rotation_z(theta).T @ config.target.adjoint @ rb0
    return float(np.abs(rb_end - target).max())


def _project(v, onto):
    onto_h = onto / np.linalg.norm(onto)
    return (v @ onto_h) * onto_h


def design_to_dict(config, params=None):
    u = config.target.unitary
    reals = []
    for row in range(2):
        for col in range(2):
            reals.extend([float(u[row, col].real), float(u[row, col].imag)])
    out = {
        "target_unitary": reals,
        "gate_name": config.target.name,
        "theta_B": config.theta_B,
        "nu": config.nu,
        "n_free": config.n_free,
        "seed": config.seed,
        "pgf_kind": config.pgf_kind,
        "optimize_theta_B": config.optimize_theta_B,
        "lambda_overrides": dict(config.lambda_overrides),
        "free_points": None if params is None
        else params.free_points.tolist(),
    }
    if params is not None:
        out["raw_values"] = params.raw.tolist()
    return out


def design_from_dict(data):
    reals = np.asarray(data["target_unitary"], dtype=float)
    if reals.shape != (8,):
        raise ValidationError("target_unitary must hold 8 reals "
                              "(row-major re/im pairs)")
    u = (reals[0::2] + 1.0j * reals[1::2]).reshape(2, 2)
    target = GateTarget.from_matrix(u, name=str(data.get("gate_name",
                                                         "custom")))
    config = BarqConfig(
        target=target,
        n_free=int(data.get("n_free", 10)),
        theta_B=float(data.get("theta_B", 0.0)),
        nu=float(data.get("nu", 0.25)),
        pgf_kind=str(data.get("pgf_kind", "symmetric")),
        lambda_overrides=dict(data.get("lambda_overrides") or {}),
        optimize_theta_B=bool(data.get("optimize_theta_B", False)),
        seed=int(data.get("seed", 0)))
    params = None
    if data.get("free_points") is not None:
        pts = np.asarray(data["free_points"], dtype=float)
        if pts.shape != (config.n_free, 3):
            raise ValidationError(
                f"free_points must be ({config.n_free}, 3), got {pts.shape}")
        if data.get("raw_values") is not None:
            raw = np.asarray(data["raw_values"], dtype=float)
            if raw.shape != (raw_parameter_count(config),):
                raise ValidationError("raw_values length does not match "
                                      "the configuration")
        else:
            _, slots = lambda_plan(config)
            raw = [s.init_raw for s in slots]
            if config.optimize_theta_B:
                raw.append(config.theta_B)
            raw = np.array(raw, dtype=float)
        params = BarqParameters(free_points=pts, raw=raw)
    return config, params


def save_design(path, config, params=None):
    dump_json(design_to_dict(config, params), path)


def load_design(path):
    return design_from_dict(load_json(path))
