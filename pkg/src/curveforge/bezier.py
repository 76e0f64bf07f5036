"""Bernstein-basis curves with exact derivatives.

A curve of degree n is defined by n+1 control points in R^3.  Derivatives of
any order are obtained by forward-differencing the control points, never by
numerical differentiation: the q-th derivative is itself a degree n-q curve
over the differenced points, scaled by n!/(n-q)!.
"""

from dataclasses import dataclass, field

import numpy as np

from ._jsonio import dump_json, load_json
from .errors import DomainError, ValidationError

MAX_DEGREE = 64

CURVE_FORMAT = "curveforge/curve-1"


def _as_points(points, min_len=2):
    arr = np.asarray(getattr(points, "points", points), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValidationError(
            f"control points must have shape (m, 3), got {arr.shape}")
    if arr.shape[0] < min_len:
        raise ValidationError(
            f"need at least {min_len} control points, got {arr.shape[0]}")
    if arr.shape[0] - 1 > MAX_DEGREE:
        raise ValidationError(
            f"degree {arr.shape[0] - 1} exceeds the supported maximum "
            f"{MAX_DEGREE}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("control points contain non-finite values")
    return arr


@dataclass(frozen=True)
class ControlPointSet:
    """Ordered control points of a degree-(len-1) curve.

    Parameters
    ----------
    points : (n+1, 3) array_like
        Control points; at least four are required so that the third
        endpoint derivatives used by the gate-encoding constraints exist.
    """

    points: np.ndarray

    def __post_init__(self):
        arr = _as_points(self.points, min_len=4)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def degree(self):
        return self.points.shape[0] - 1

    def derivatives_on_grid(self, xs, max_order):
        return derivatives_on_grid(self.points, xs, max_order)

    @property
    def max_derivative_order(self):
        return self.degree


@dataclass(frozen=True)
class CurveSample:
    """Curve value and derivatives at one parameter value.

    Attributes
    ----------
    x : float
        Parameter in [0, 1].
    value : (3,) ndarray
        Position r(x).
    derivatives : tuple of (3,) ndarray
        d^q r / dx^q for q = 1 .. max_order.
    """

    x: float
    value: np.ndarray
    derivatives: tuple = field(default_factory=tuple)


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("curve parameter must lie in [0, 1]")
    return x


def bernstein_basis(n, x):
    """Evaluate the n+1 Bernstein weights of degree n at parameter x.

    Uses the stable de Casteljau-style recurrence, so the weights are
    nonnegative and sum to one to machine precision.

    Parameters
    ----------
    n : int
        Degree, >= 0.
    x : float
        Parameter in [0, 1].

    Returns
    -------
    (n+1,) ndarray
        Weight j equals C(n, j) x^j (1-x)^(n-j).
    """
    n = int(n)
    if n < 0:
        raise DomainError("degree must be nonnegative")
    if n > MAX_DEGREE:
        raise ValidationError(
            f"degree {n} exceeds the supported maximum {MAX_DEGREE}")
    x = float(_check_x(x))
    w = np.zeros(n + 1)
    w[0] = 1.0
    for k in range(1, n + 1):
        w[1:k + 1] = (1.0 - x) * w[1:k + 1] + x * w[:k]
        w[0] *= 1.0 - x
    return w


def bernstein_matrix(n, xs):
    """Bernstein weights for a whole grid: rows index xs, columns index j."""
    n = int(n)
    if n < 0:
        raise DomainError("degree must be nonnegative")
    xs = np.atleast_1d(_check_x(xs))
    w = np.zeros((xs.size, n + 1))
    w[:, 0] = 1.0
    for k in range(1, n + 1):
        w[:, 1:k + 1] = ((1.0 - xs)[:, None] * w[:, 1:k + 1]
                         + xs[:, None] * w[:, :k])
        w[:, 0] *= 1.0 - xs
    return w


def diff_control_points(points, q):
    """q-th forward differences of the control points with their scale.

    Parameters
    ----------
    points : (n+1, 3) array_like or ControlPointSet
    q : int
        Difference order, 0 <= q <= n.

    Returns
    -------
    (points, factor) : ((n+1-q, 3) ndarray, int)
        Differenced points Delta^q w_j and the exact integer n!/(n-q)!.
    """
    arr = _as_points(points)
    n = arr.shape[0] - 1
    q = int(q)
    if q < 0 or q > n:
        raise DomainError(f"difference order {q} out of range [0, {n}]")
    out = arr
    for _ in range(q):
        out = out[1:] - out[:-1]
    factor = 1
    for k in range(n, n - q, -1):
        factor *= k
    return out, factor


def bezier_eval(points, x, max_order=3):
    """Evaluate the curve and its first max_order derivatives at x.

    Parameters
    ----------
    points : (n+1, 3) array_like or ControlPointSet
    x : float
        Parameter in [0, 1].
    max_order : int
        Highest derivative order, <= n.

    Returns
    -------
    CurveSample
    """
    arr = _as_points(points)
    n = arr.shape[0] - 1
    max_order = int(max_order)
    if max_order < 0 or max_order > n:
        raise DomainError(f"derivative order {max_order} out of range [0, {n}]")
    x = float(_check_x(x))
    value = bernstein_basis(n, x) @ arr
    derivs = []
    for q in range(1, max_order + 1):
        dpts, factor = diff_control_points(arr, q)
        derivs.append(factor * (bernstein_basis(n - q, x) @ dpts))
    return CurveSample(x=x, value=value, derivatives=tuple(derivs))


def derivatives_on_grid(points, xs, max_order):
    """Curve and derivatives on a parameter grid.

    Returns an array of shape (max_order+1, len(xs), 3) whose slice q holds
    d^q r / dx^q at every grid point (q = 0 is the position).
    """
    arr = _as_points(points)
    n = arr.shape[0] - 1
    max_order = int(max_order)
    if max_order < 0 or max_order > n:
        raise DomainError(f"derivative order {max_order} out of range [0, {n}]")
    xs = np.atleast_1d(_check_x(xs))
    out = np.empty((max_order + 1, xs.size, 3))
    for q in range(max_order + 1):
        dpts, factor = diff_control_points(arr, q)
        out[q] = factor * (bernstein_matrix(n - q, xs) @ dpts)
    return out


def save_curve(path, points, metadata=None):
    """Write the interchange JSON document for a curve."""
    arr = _as_points(points)
    doc = {
        "format": CURVE_FORMAT,
        "degree": arr.shape[0] - 1,
        "points": arr,
    }
    if metadata is not None:
        doc["metadata"] = metadata
    dump_json(doc, path)


def load_curve(path):
    """Read a curve interchange document; returns (points, metadata)."""
    doc = load_json(path)
    if not isinstance(doc, dict) or "points" not in doc:
        raise ValidationError(f"{path}: missing 'points' field")
    if doc.get("format", CURVE_FORMAT) != CURVE_FORMAT:
        raise ValidationError(f"{path}: unknown format {doc.get('format')!r}")
    arr = _as_points(doc["points"])
    degree = doc.get("degree")
    if degree is not None and int(degree) != arr.shape[0] - 1:
        raise ValidationError(
            f"{path}: degree field {degree} does not match "
            f"{arr.shape[0] - 1} from the point count")
    return arr, doc.get("metadata")
