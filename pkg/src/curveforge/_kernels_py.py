"""Reference numpy implementations of the two hot kernels.

The compiled extension (`_kernels_cy`) provides the same functions with the
same contracts; `kernels` picks one at import time.  Keep the math here in
plain vectorized numpy so this file doubles as the readable definition of
what the fast path computes.
"""

import numpy as np

_IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def hamilton(b, a):
    """Quaternion product b*a on trailing axis 4 (w, x, y, z).

    Composition convention matches SU(2): with U = w*I - i(v . sigma),
    U_b U_a has quaternion hamilton(b, a).
    """
    bw, bv = b[..., :1], b[..., 1:]
    aw, av = a[..., :1], a[..., 1:]
    w = bw * aw - np.sum(bv * av, axis=-1, keepdims=True)
    v = bw * av + aw * bv + np.cross(bv, av)
    return np.concatenate([w, v], axis=-1)


def quat_chain_batch(quats):
    """Ordered product q[:, S-1] * ... * q[:, 0] for an (R, S, 4) array.

    Pairwise tree so every level stays vectorized; matmul-associativity
    makes the result identical (up to rounding) to the sequential product.
    """
    q = np.asarray(quats, dtype=float)
    if q.ndim != 3 or q.shape[2] != 4:
        raise ValueError(f"expected (R, S, 4), got {q.shape}")
    while q.shape[1] > 1:
        s = q.shape[1]
        even = q[:, 0:s - 1:2]
        odd = q[:, 1:s:2]
        merged = hamilton(odd, even)
        if s % 2:
            merged = np.concatenate([merged, q[:, s - 1:s]], axis=1)
        q = merged
    return q[:, 0].copy()


def quat_chain(quats):
    """Single-chain variant: (S, 4) -> (4,)."""
    q = np.asarray(quats, dtype=float)
    return quat_chain_batch(q[None])[0]


def loss_terms_grid(dr, ddr, dr_dot, ddr_dot, dx, power=32):
    """Fused loss ingredients plus forward-mode derivatives on a grid.

    Inputs: first and second curve derivatives (G, 3) sampled uniformly in
    the curve parameter with spacing dx, and their parameter-derivatives
    (G, 3, P).  Returns

        area (3,), area_dot (3, P)   -- trapezoid of (dr x ddr) / gamma^2
        t_g, t_g_dot (P,)            -- trapezoid of gamma (total duration)
        smax, smax_dot (P,)          -- power-mean smooth maximum of |kappa|

    The smooth maximum is (mean |kappa|^power)^(1/power), evaluated in a
    max-factored form so large powers stay in range; it never exceeds the
    true maximum and is exact for constant |kappa|.
    """
    dr = np.asarray(dr, dtype=float)
    ddr = np.asarray(ddr, dtype=float)
    dr_dot = np.asarray(dr_dot, dtype=float)
    ddr_dot = np.asarray(ddr_dot, dtype=float)
    g = dr.shape[0]
    if power < 2 or power % 2:
        raise ValueError("power must be an even integer >= 2")

    weights = np.full(g, dx)
    weights[0] = weights[-1] = 0.5 * dx

    gamma = np.linalg.norm(dr, axis=1)
    gamma_dot = np.einsum("kc,kcp->kp", dr, dr_dot) / gamma[:, None]
    t_g = float(weights @ gamma)
    t_g_dot = weights @ gamma_dot

    cross = np.cross(dr, ddr)
    cross_dot = (np.cross(dr_dot, ddr[:, :, None], axisa=1, axisb=1, axisc=1)
                 + np.cross(dr[:, :, None], ddr_dot,
                            axisa=1, axisb=1, axisc=1))
    g2 = gamma**2
    integrand = cross / g2[:, None]
    gg_dot = gamma[:, None] * gamma_dot
    integrand_dot = (cross_dot - 2.0 * integrand[:, :, None]
                     * gg_dot[:, None, :]) / g2[:, None, None]
    area = weights @ integrand
    area_dot = np.einsum("k,kcp->cp", weights, integrand_dot)

    cn = np.linalg.norm(cross, axis=1)
    kappa = cn / gamma**3
    safe = cn > 0.0
    kappa_dot = np.zeros_like(gamma_dot)
    kappa_dot[safe] = (
        np.einsum("kc,kcp->kp", cross[safe], cross_dot[safe])
        / cn[safe, None] / gamma[safe, None]**3
        - 3.0 * kappa[safe, None] * gamma_dot[safe] / gamma[safe, None])

    m = kappa.max()
    nparams = dr_dot.shape[2]
    if m <= 0.0:
        return (area, area_dot, t_g, t_g_dot, 0.0, np.zeros(nparams))
    u = kappa / m
    s_mean = np.mean(u**power)
    smax = m * s_mean**(1.0 / power)
    w_k = u**(power - 1) * s_mean**((1.0 - power) / power) / g
    smax_dot = w_k @ kappa_dot
    return (area, area_dot, t_g, t_g_dot, float(smax), smax_dot)
