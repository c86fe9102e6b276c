"""Compiled fixed-step RK4 kernels for the forward model and its adjoint.

The kernels work on plain float arrays; all validation lives in the
calling modules. Failures are reported through the returned step index
instead of exceptions so that the kernels stay nopython-compatible.
"""

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _field(xr, vr, xl, vl, alpha, beta, delta):
    drive = alpha * (vr + vl)
    half = 0.5 * delta
    ar = drive - beta * (1.0 + xr * xr) * vr - xr + half * xr
    al = drive - beta * (1.0 + xl * xl) * vl - xl - half * xl
    return vr, ar, vl, al


@numba.njit(cache=True)
def field(state, alpha, beta, delta):
    out = np.empty(4)
    out[0], out[1], out[2], out[3] = _field(state[0], state[1], state[2], state[3], alpha, beta, delta)
    return out


@numba.njit(cache=True)
def rk4_forward(x0, alpha, beta, delta, dt, n_steps, bound):
    """Integrate the coupled oscillators; return (states, failed_step).

    ``failed_step`` is -1 on success, otherwise the index of the first
    sample whose magnitude exceeded ``bound`` or was not finite. Rows
    after a failure are left as NaN.
    """
    out = np.full((n_steps + 1, 4), np.nan)
    xr, vr, xl, vl = x0[0], x0[1], x0[2], x0[3]
    out[0, 0], out[0, 1], out[0, 2], out[0, 3] = xr, vr, xl, vl
    h2 = 0.5 * dt
    h6 = dt / 6.0
    for i in range(n_steps):
        k1 = _field(xr, vr, xl, vl, alpha, beta, delta)
        k2 = _field(xr + h2 * k1[0], vr + h2 * k1[1], xl + h2 * k1[2], vl + h2 * k1[3], alpha, beta, delta)
        k3 = _field(xr + h2 * k2[0], vr + h2 * k2[1], xl + h2 * k2[2], vl + h2 * k2[3], alpha, beta, delta)
        k4 = _field(xr + dt * k3[0], vr + dt * k3[1], xl + dt * k3[2], vl + dt * k3[3], alpha, beta, delta)
        xr = xr + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        vr = vr + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        xl = xl + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        vl = vl + h6 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        m = max(abs(xr), abs(vr), abs(xl), abs(vl))
        if not (m <= bound):
            return out, i + 1
        out[i + 1, 0], out[i + 1, 1], out[i + 1, 2], out[i + 1, 3] = xr, vr, xl, vl
    return out, -1


@numba.njit(cache=True, inline="always")
def _adj_field(lam, dlam, eta, deta, cr, dr, cl, dl, alpha, force):
    # second-order adjoint pair written as a first-order system:
    # lam'' = dr*lam' - alpha*(lam' + eta') - cr*lam - force
    couple = alpha * (dlam + deta)
    return dlam, dr * dlam - couple - cr * lam - force, deta, dl * deta - couple - cl * eta - force


@numba.njit(cache=True)
def rk4_backward(cr, dr, cl, dl, alpha, force_lo, force_mid, force_hi, dt, bound):
    """Integrate the linear adjoint system from t=T down to t=0.

    Each coefficient argument is a ``(grid, mid)`` pair of arrays with
    shapes ``(n + 1,)`` and ``(n,)``. The per-interval forcing arrays
    ``force_lo/mid/hi`` hold the source term at the left end, midpoint
    and right end of each interval, so sources may jump at grid points.

    Returns ``(values, failed_step)`` where values has shape (n + 1, 4)
    holding (lam, dlam, eta, deta) and terminal values are exactly zero.
    """
    cr_g, cr_m = cr
    dr_g, dr_m = dr
    cl_g, cl_m = cl
    dl_g, dl_m = dl
    n = force_mid.shape[0]
    out = np.full((n + 1, 4), np.nan)
    lam = 0.0
    dlam = 0.0
    eta = 0.0
    deta = 0.0
    out[n, 0], out[n, 1], out[n, 2], out[n, 3] = 0.0, 0.0, 0.0, 0.0
    h = -dt
    h2 = 0.5 * h
    h6 = h / 6.0
    for j in range(n):
        i = n - 1 - j
        # stage 1 at t_{i+1}, stages 2-3 at the midpoint, stage 4 at t_i
        k1 = _adj_field(lam, dlam, eta, deta, cr_g[i + 1], dr_g[i + 1], cl_g[i + 1], dl_g[i + 1], alpha, force_hi[i])
        k2 = _adj_field(lam + h2 * k1[0], dlam + h2 * k1[1], eta + h2 * k1[2], deta + h2 * k1[3],
                        cr_m[i], dr_m[i], cl_m[i], dl_m[i], alpha, force_mid[i])
        k3 = _adj_field(lam + h2 * k2[0], dlam + h2 * k2[1], eta + h2 * k2[2], deta + h2 * k2[3],
                        cr_m[i], dr_m[i], cl_m[i], dl_m[i], alpha, force_mid[i])
        k4 = _adj_field(lam + h * k3[0], dlam + h * k3[1], eta + h * k3[2], deta + h * k3[3],
                        cr_g[i], dr_g[i], cl_g[i], dl_g[i], alpha, force_lo[i])
        lam = lam + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        dlam = dlam + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        eta = eta + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        deta = deta + h6 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        m = max(abs(lam), abs(dlam), abs(eta), abs(deta))
        if not (m <= bound):
            return out, i
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = lam, dlam, eta, deta
    return out, -1
