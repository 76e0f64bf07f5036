"""Map between curve geometry and single-qubit control.

The dictionary: a resonantly driven qubit with envelope Omega(t), drive phase
Phi(t), and detuning Delta(t) follows a space curve with time as arclength,
Omega = kappa (signed curvature), Phidot - Delta = tau (torsion).  The
noise-free propagator, in the adjoint (rotation) representation, factors into
a z-rotation by the drive phase times the frame rotation, which is what
``predicted_adjoint`` evaluates.  Total torsion compensation picks the
constant detuning that closes the residual phase so the implemented rotation
equals the target exactly.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateFrameError, DomainError, ValidationError
from ._jsonio import dump_json, load_json, read_csv, write_csv
from .frenet import uniform_time_grid

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])
ID2 = np.eye(2, dtype=complex)

_SQ2 = 1.0 / np.sqrt(2.0)
NAMED_GATES = {
    "i": ID2.copy(),
    "x": SIGMA_X.copy(),
    "y": SIGMA_Y.copy(),
    "z": SIGMA_Z.copy(),
    "h": _SQ2 * (SIGMA_X + SIGMA_Z),
    "s": np.array([[1.0, 0.0], [0.0, 1.0j]]),
    "t": np.array([[1.0, 0.0], [0.0, np.exp(0.25j * np.pi)]]),
    "sx": 0.5 * np.array([[1.0 + 1.0j, 1.0 - 1.0j],
                          [1.0 - 1.0j, 1.0 + 1.0j]]),
}


def _check_unitary(u, tol=1e-10):
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise DomainError(f"expected a 2x2 matrix, got shape {u.shape}")
    gap = np.abs(u.conj().T @ u - ID2).max()
    if not np.isfinite(gap) or gap > tol:
        raise DomainError(f"matrix is not unitary (max deviation {gap:.3g})")
    return u


def adjoint_of_su2(u):
    """Rotation matrix R with u (n.sigma) u^dag = (R n).sigma.

    R_ij = Re tr(u^dag sigma_i u sigma_j) / 2.  The global phase of u drops
    out, and the map is a homomorphism into SO(3).
    """
    u = _check_unitary(u)
    conj = np.einsum("ab,ibc,cd->iad", u.conj().T, PAULI, u)
    return 0.5 * np.real(np.einsum("iab,jba->ij", conj, PAULI))


def rotation_z(angle):
    """Rotation by `angle` about z; equals adjoint_of_su2(e^{-i angle Z/2})."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def su2_rotation_z(angle):
    """e^{-i angle sigma_z / 2}."""
    half = 0.5 * angle
    return np.array([[np.exp(-1.0j * half), 0.0],
                     [0.0, np.exp(1.0j * half)]])


@dataclass(frozen=True)
class GateTarget:
    """A single-qubit target unitary plus its adjoint rotation."""

    name: str
    unitary: np.ndarray
    adjoint: np.ndarray

    @classmethod
    def from_matrix(cls, u, name="custom"):
        u = _check_unitary(u).copy()
        u.setflags(write=False)
        adj = adjoint_of_su2(u)
        adj.setflags(write=False)
        return cls(name=name, unitary=u, adjoint=adj)

    @classmethod
    def from_name(cls, name):
        key = str(name).strip().lower()
        aliases = {"id": "i", "identity": "i", "hadamard": "h", "sqrtx": "sx"}
        key = aliases.get(key, key)
        if key not in NAMED_GATES:
            raise ValidationError(
                f"unknown gate {name!r}; known: {sorted(NAMED_GATES)}")
        return cls.from_matrix(NAMED_GATES[key], name=key)


def gate_fidelity_su2(m):
    """Average gate fidelity from m = U U_target^dag (two-level system).

    F = (tr(m m^dag) + |tr m|^2) / 6; exact for any complex m, insensitive
    to the global phase, and equal to 1 iff m is proportional to the
    identity with unit-modulus factor.
    """
    m = np.asarray(m, dtype=complex)
    return float((np.real(np.trace(m @ m.conj().T))
                  + np.abs(np.trace(m))**2) / 6.0)


def gate_fidelity_adjoint(r_target, r):
    """Average gate fidelity from adjoint rotations: (3 + tr(Rg^T R))/6."""
    return float((3.0 + np.trace(np.asarray(r_target).T @ np.asarray(r)))
                 / 6.0)


@dataclass(frozen=True)
class TTCRecord:
    """Detuning choice closing the residual phase of the implemented gate."""
    delta: float
    k_star: int
    T_g_delta: float
    theta_B: float
    M: int
    total_torsion: float


def ttc_detuning(theta_B, M, total_torsion, T_g):
    """Constant detuning with T_g*Delta = theta_B + (2k-M-1)pi - total_torsion
    minimized in magnitude over integer k; a tie at |T_g*Delta| = pi is
    broken toward the positive value."""
    if T_g <= 0.0:
        raise ValidationError("T_g must be positive")
    c = theta_B - (M + 1) * np.pi - total_torsion
    # half-up rounding: an exact |T_g*Delta| = pi tie lands on the + side
    k = int(np.floor(-c / (2.0 * np.pi) + 0.5))
    best = c + 2.0 * np.pi * k
    return TTCRecord(delta=float(best / T_g), k_star=k, T_g_delta=float(best),
                     theta_B=float(theta_B), M=int(M),
                     total_torsion=float(total_torsion))


@dataclass(frozen=True)
class ControlFields:
    """Control samples on a uniform time grid."""

    t: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    delta: np.ndarray
    mode: str
    T_g: float
    M: int
    total_torsion: float
    theta_B: Optional[float] = None
    ttc_record: Optional[TTCRecord] = None
    singular_times: tuple = ()

    @property
    def omega_x(self):
        return self.omega * np.cos(self.phi)

    @property
    def omega_y(self):
        return self.omega * np.sin(self.phi)


def effective_phase(fields):
    """Phase with a +pi step at each singular time; with |Omega| it drives
    the same evolution as the signed envelope with the plain phase."""
    steps = np.zeros_like(fields.phi)
    for t_s in fields.singular_times:
        steps[fields.t >= t_s] += np.pi
    return fields.phi + steps


def drive_phase_on_grid(fd, delta=0.0):
    """Phi on the frame grid: integral of tau dt (+ delta*t), Phi(0)=0."""
    dphi = fd.tau * fd.gamma
    phi = np.concatenate([
        [0.0],
        np.cumsum(0.5 * (dphi[1:] + dphi[:-1]) * np.diff(fd.x))])
    return phi + delta * fd.t


def extract_controls(fd, mode="xy", theta_B=None, n_samples=2049,
                     nonnegative_envelope=False):
    """Resample curvature/torsion into drive fields on a uniform time grid.

    mode "xy": Delta = 0 and Phi = integral of tau.  mode "ttc": constant
    Delta from ttc_detuning (requires theta_B) and Phi = integral of tau
    + Delta t.
    """
    mode = str(mode).strip().lower()
    if mode not in ("xy", "ttc"):
        raise ValidationError(f"mode must be 'xy' or 'ttc', got {mode!r}")
    record = None
    delta = 0.0
    if mode == "ttc":
        if theta_B is None:
            raise ValidationError("TTC mode needs theta_B from a gate design")
        record = ttc_detuning(theta_B, fd.M, fd.total_torsion, fd.T_g)
        delta = record.delta
    phi_grid = drive_phase_on_grid(fd, delta)
    t_u, _ = uniform_time_grid(fd, n_samples)
    omega = np.interp(t_u, fd.t, fd.kappa)
    phi = np.interp(t_u, fd.t, phi_grid)
    singular_times = tuple(p.t_s for p in fd.singular_points)
    fields = ControlFields(
        t=t_u, omega=omega, phi=phi,
        delta=np.full(t_u.size, delta), mode=mode, T_g=fd.T_g,
        M=fd.M, total_torsion=fd.total_torsion,
        theta_B=None if theta_B is None else float(theta_B),
        ttc_record=record, singular_times=singular_times)
    if nonnegative_envelope:
        fields = ControlFields(
            t=t_u, omega=np.abs(omega), phi=effective_phase(fields),
            delta=fields.delta, mode=mode, T_g=fd.T_g, M=fd.M,
            total_torsion=fd.total_torsion, theta_B=fields.theta_B,
            ttc_record=record, singular_times=singular_times)
    return fields


def predicted_adjoint(fd, phi):
    """Frame-predicted adjoint path R(t_k) = R_Z(phi_k) F_k F_0^T.

    `phi` is the drive phase on the frame grid; F has rows (-B, N, T) built
    from the continuous (signed) frame, so R(0) = I and no extra bookkeeping
    for singular points is needed.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != fd.x.shape:
        raise ValidationError("phi must be sampled on the frame grid")
    frames = np.stack([-fd.binormal, fd.normal, fd.tangent], axis=1)
    c, s = np.cos(phi), np.sin(phi)
    zero = np.zeros_like(phi)
    one = np.ones_like(phi)
    rz = np.stack([
        np.stack([c, -s, zero], axis=-1),
        np.stack([s, c, zero], axis=-1),
        np.stack([zero, zero, one], axis=-1)], axis=-2)
    return np.einsum("kab,kbc,dc->kad", rz, frames, frames[0])


def final_adjoint(fd, mode="xy", theta_B=None):
    """Adjoint of the noise-free evolution at T_g for the given mode."""
    delta = 0.0
    if mode == "ttc":
        if theta_B is None:
            raise ValidationError("TTC mode needs theta_B")
        delta = ttc_detuning(theta_B, fd.M, fd.total_torsion, fd.T_g).delta
    phi = drive_phase_on_grid(fd, delta)
    return predicted_adjoint(fd, phi)[-1]


PULSE_CSV_HEADER = "t,omega,phi,delta,omega_x,omega_y"


def save_pulse(path, fields, sidecar_path=None):
    """Write the pulse CSV plus its JSON sidecar (defaults to path + .json)."""
    write_csv(path, PULSE_CSV_HEADER,
              [fields.t, fields.omega, fields.phi, fields.delta,
               fields.omega_x, fields.omega_y])
    rec = fields.ttc_record
    sidecar = {
        "mode": fields.mode,
        "theta_B": fields.theta_B,
        "M": fields.M,
        "total_torsion": fields.total_torsion,
        "T_g_delta": 0.0 if rec is None else rec.T_g_delta,
        "k_star": None if rec is None else rec.k_star,
        "T_g": fields.T_g,
    }
    dump_json(sidecar, str(path) + ".json" if sidecar_path is None
              else sidecar_path)


def load_pulse(path, sidecar_path=None):
    cols = read_csv(path)
    for name in PULSE_CSV_HEADER.split(","):
        if name not in cols:
            raise ValidationError(f"pulse file missing column {name!r}")
    meta = load_json(str(path) + ".json" if sidecar_path is None
                     else sidecar_path)
    rec = None
    if meta.get("k_star") is not None:
        t_g = float(meta["T_g"])
        rec = TTCRecord(
            delta=float(meta["T_g_delta"]) / t_g,
            k_star=int(meta["k_star"]),
            T_g_delta=float(meta["T_g_delta"]),
            theta_B=float(meta["theta_B"]),
            M=int(meta["M"]), total_torsion=float(meta["total_torsion"]))
    return ControlFields(
        t=cols["t"], omega=cols["omega"], phi=cols["phi"],
        delta=cols["delta"], mode=str(meta["mode"]),
        T_g=float(meta["T_g"]), M=int(meta["M"]),
        total_torsion=float(meta["total_torsion"]),
        theta_B=None if meta.get("theta_B") is None
        else float(meta["theta_B"]),
        ttc_record=rec)
