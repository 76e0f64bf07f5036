# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; contracts match _kernels_py."""

import numpy as np

from libc.math cimport sqrt, pow


def quat_chain_batch(object quats):
    arr = np.ascontiguousarray(quats, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 4:
        raise ValueError("expected (R, S, 4)")
    cdef double[:, :, ::1] q = arr
    cdef Py_ssize_t R = q.shape[0], S = q.shape[1], r, k
    out = np.empty((R, 4), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double w, x, y, z, aw, ax, ay, az, nw, nx, ny, nz
    for r in range(R):
        w = 1.0
        x = y = z = 0.0
        for k in range(S):
            aw = q[r, k, 0]
            ax = q[r, k, 1]
            ay = q[r, k, 2]
            az = q[r, k, 3]
            nw = aw * w - ax * x - ay * y - az * z
            nx = aw * x + w * ax + ay * z - az * y
            ny = aw * y + w * ay + az * x - ax * z
            nz = aw * z + w * az + ax * y - ay * x
            w = nw
            x = nx
            y = ny
            z = nz
        o[r, 0] = w
        o[r, 1] = x
        o[r, 2] = y
        o[r, 3] = z
    return out


def quat_chain(object quats):
    q = np.ascontiguousarray(quats, dtype=np.float64)
    return quat_chain_batch(q[None])[0]


def loss_terms_grid(object dr_o, object ddr_o, object dr_dot_o,
                    object ddr_dot_o, double dx, int power=32):
    if power < 2 or power % 2:
        raise ValueError("power must be an even integer >= 2")
    cdef double[:, ::1] dr = np.ascontiguousarray(dr_o, dtype=np.float64)
    cdef double[:, ::1] ddr = np.ascontiguousarray(ddr_o, dtype=np.float64)
    cdef double[:, :, ::1] drd = np.ascontiguousarray(dr_dot_o,
                                                      dtype=np.float64)
    cdef double[:, :, ::1] ddrd = np.ascontiguousarray(ddr_dot_o,
                                                       dtype=np.float64)
    cdef Py_ssize_t G = dr.shape[0], P = drd.shape[2], k, p
    area_np = np.zeros(3)
    area_dot_np = np.zeros((3, P))
    tg_dot_np = np.zeros(P)
    kappa_np = np.empty(G)
    kdot_np = np.zeros((G, P))
    smax_dot_np = np.zeros(P)
    cdef double[::1] area = area_np, tg_dot = tg_dot_np, kappa = kappa_np
    cdef double[::1] smax_dot = smax_dot_np
    cdef double[:, ::1] area_dot = area_dot_np, kdot = kdot_np
    cdef double wk, d0, d1, d2, e0, e1, e2, gam, g2, g3
    cdef double c0, c1, c2, cn, kap, m = 0.0, t_g = 0.0
    cdef double dd0, dd1, dd2, ed0, ed1, ed2, gdot, cd0, cd1, cd2
    cdef double sp, u, s_mean, smax, coef, wgt

    for k in range(G):
        wk = dx if 0 < k < G - 1 else 0.5 * dx
        d0 = dr[k, 0]
        d1 = dr[k, 1]
        d2 = dr[k, 2]
        e0 = ddr[k, 0]
        e1 = ddr[k, 1]
        e2 = ddr[k, 2]
        gam = sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        g2 = gam * gam
        g3 = g2 * gam
        c0 = d1 * e2 - d2 * e1
        c1 = d2 * e0 - d0 * e2
        c2 = d0 * e1 - d1 * e0
        cn = sqrt(c0 * c0 + c1 * c1 + c2 * c2)
        t_g += wk * gam
        area[0] += wk * c0 / g2
        area[1] += wk * c1 / g2
        area[2] += wk * c2 / g2
        kap = cn / g3
        kappa[k] = kap
        if kap > m:
            m = kap
        for p in range(P):
            dd0 = drd[k, 0, p]
            dd1 = drd[k, 1, p]
            dd2 = drd[k, 2, p]
            ed0 = ddrd[k, 0, p]
            ed1 = ddrd[k, 1, p]
            ed2 = ddrd[k, 2, p]
            gdot = (d0 * dd0 + d1 * dd1 + d2 * dd2) / gam
            tg_dot[p] += wk * gdot
            cd0 = dd1 * e2 - dd2 * e1 + d1 * ed2 - d2 * ed1
            cd1 = dd2 * e0 - dd0 * e2 + d2 * ed0 - d0 * ed2
            cd2 = dd0 * e1 - dd1 * e0 + d0 * ed1 - d1 * ed0
            area_dot[0, p] += wk * (cd0 - 2.0 * c0 * gdot / gam) / g2
            area_dot[1, p] += wk * (cd1 - 2.0 * c1 * gdot / gam) / g2
            area_dot[2, p] += wk * (cd2 - 2.0 * c2 * gdot / gam) / g2
            if cn > 0.0:
                kdot[k, p] = ((c0 * cd0 + c1 * cd1 + c2 * cd2) / (cn * g3)
                              - 3.0 * kap * gdot / gam)

    if m <= 0.0:
        return (area_np, area_dot_np, t_g, tg_dot_np, 0.0, smax_dot_np)
    sp = 0.0
    for k in range(G):
        sp += pow(kappa[k] / m, power)
    s_mean = sp / G
    smax = m * pow(s_mean, 1.0 / power)
    coef = pow(s_mean, (1.0 - power) / power) / G
    for k in range(G):
        wgt = pow(kappa[k] / m, power - 1) * coef
        if wgt == 0.0:
            continue
        for p in range(P):
            smax_dot[p] += wgt * kdot[k, p]
    return (area_np, area_dot_np, t_g, tg_dot_np, smax, smax_dot_np)
