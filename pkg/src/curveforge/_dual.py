"""Vectorized forward-mode dual numbers.

A Dual carries a value array of shape S and a derivative array of shape
S + (P,), one trailing slot per independent parameter.  Arithmetic propagates
exact first derivatives through whole grids at once, so a single pipeline pass
yields the loss together with its full gradient.

Module functions (cross, vdot, sin, ...) accept Duals or plain arrays and
dispatch accordingly, which lets the same construction code run with or
without derivative tracking.
"""

import numpy as np


def _v(x):
    return x.val if isinstance(x, Dual) else np.asarray(x, dtype=float)


class Dual:
    __slots__ = ("val", "dot")

    # make ndarray op Dual defer to the reflected methods below instead of
    # broadcasting Dual as an object scalar
    __array_ufunc__ = None

    def __init__(self, val, dot):
        self.val = np.asarray(val, dtype=float)
        self.dot = np.asarray(dot, dtype=float)
        if self.dot.shape[:-1] != self.val.shape:
            # allow broadcast-deferred constants like zeros((P,))
            self.dot = np.broadcast_to(
                self.dot, self.val.shape + (self.dot.shape[-1],)).copy()

    @property
    def nparams(self):
        return self.dot.shape[-1]

    @staticmethod
    def constant(val, nparams):
        val = np.asarray(val, dtype=float)
        return Dual(val, np.zeros(val.shape + (nparams,)))

    @staticmethod
    def variables(val):
        """Seed a 1-D parameter vector: dot is the identity."""
        val = np.asarray(val, dtype=float)
        return Dual(val, np.eye(val.size))

    def __repr__(self):
        return f"Dual(val={self.val!r})"

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.dot + other.dot)
        val = self.val + _v(other)
        return Dual(val, _bview(self.dot, val))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, Dual) else -_v(other))

    def __rsub__(self, other):
        return (-self) + _v(other)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.dot * other.val[..., None]
                        + self.val[..., None] * other.dot)
        v = _v(other)
        return Dual(self.val * v, self.dot * v[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            val = self.val * inv
            return Dual(val, (self.dot - val[..., None] * other.dot)
                        * inv[..., None])
        v = 1.0 / _v(other)
        return Dual(self.val * v, self.dot * v[..., None])

    def __rtruediv__(self, other):
        v = _v(other)
        val = v / self.val
        return Dual(val, -(val / self.val)[..., None] * self.dot)

    def __pow__(self, p):
        p = float(p)
        val = self.val ** p
        return Dual(val, (p * self.val ** (p - 1.0))[..., None] * self.dot)

    def __getitem__(self, idx):
        return Dual(self.val[idx], self.dot[idx])

    def sum(self, axis=None):
        if axis is None:
            return Dual(self.val.sum(), self.dot.reshape(-1, self.nparams).sum(0))
        axis = axis % self.val.ndim
        return Dual(self.val.sum(axis=axis), self.dot.sum(axis=axis))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Dual(self.val.reshape(shape),
                    self.dot.reshape(shape + (self.nparams,)))


def _bview(dot, val):
    # rebroadcast a dot array against a (possibly broadcast) value shape
    return np.broadcast_to(dot, val.shape + (dot.shape[-1],)).copy() \
        if dot.shape[:-1] != val.shape else dot


def stack(items, axis=0):
    if any(isinstance(x, Dual) for x in items):
        nparams = next(x.nparams for x in items if isinstance(x, Dual))
        items = [x if isinstance(x, Dual) else Dual.constant(x, nparams)
                 for x in items]
        return Dual(np.stack([x.val for x in items], axis=axis),
                    np.stack([x.dot for x in items], axis=axis))
    return np.stack([_v(x) for x in items], axis=axis)


def cross(a, b):
    """Cross product along the last value axis (length 3)."""
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return np.cross(a, b)
    if not isinstance(a, Dual):
        a = Dual.constant(a, b.nparams)
    if not isinstance(b, Dual):
        b = Dual.constant(b, a.nparams)
    val = np.cross(a.val, b.val)
    dot = (np.cross(a.dot, b.val[..., None], axisa=-2, axisb=-2, axisc=-2)
           + np.cross(a.val[..., None], b.dot, axisa=-2, axisb=-2, axisc=-2))
    return Dual(val, dot)


def vdot(a, b):
    """Inner product along the last value axis."""
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return np.sum(np.asarray(a) * np.asarray(b), axis=-1)
    return (a * b).sum(axis=-1) if isinstance(a, Dual) else (b * a).sum(axis=-1)


def norm(a):
    return sqrt(vdot(a, a))


def unit(a):
    n = norm(a)
    if isinstance(a, Dual):
        return _divlast(a, n)
    return a / n[..., None]


def _divlast(a, n):
    # divide a (..., 3) dual by a (...,) dual, broadcasting over the last axis
    expanded = Dual(n.val[..., None], n.dot[..., None, :])
    return a / expanded


def scale(vec, s):
    """Multiply a (..., 3) vector by a (...,) scalar, Dual-aware."""
    if isinstance(s, Dual):
        s = Dual(s.val[..., None], s.dot[..., None, :])
        return s * vec if not isinstance(vec, Dual) else vec * s
    s = np.asarray(s, dtype=float)[..., None]
    if isinstance(vec, Dual):
        return Dual(vec.val * s, vec.dot * s[..., None])
    return vec * s


def sqrt(a):
    if isinstance(a, Dual):
        val = np.sqrt(a.val)
        return Dual(val, a.dot / (2.0 * val[..., None]))
    return np.sqrt(a)


def sin(a):
    if isinstance(a, Dual):
        return Dual(np.sin(a.val), np.cos(a.val)[..., None] * a.dot)
    return np.sin(a)


def cos(a):
    if isinstance(a, Dual):
        return Dual(np.cos(a.val), -np.sin(a.val)[..., None] * a.dot)
    return np.cos(a)


def exp(a):
    if isinstance(a, Dual):
        val = np.exp(a.val)
        return Dual(val, val[..., None] * a.dot)
    return np.exp(a)


def apply_matrix(mat, a):
    """Contract a plain matrix with the first axis of a (Dual-aware)."""
    mat = np.asarray(mat, dtype=float)
    if isinstance(a, Dual):
        return Dual(np.tensordot(mat, a.val, axes=(1, 0)),
                    np.tensordot(mat, a.dot, axes=(1, 0)))
    return np.tensordot(mat, a, axes=(1, 0))


def value(a):
    return a.val if isinstance(a, Dual) else np.asarray(a, dtype=float)


def grad(a):
    """Derivative array of a scalar Dual (zeros for plain values)."""
    if isinstance(a, Dual):
        return a.dot
    return None
