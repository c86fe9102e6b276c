"""Least-squares residual, adjoint system and parameter gradients.

For the objective ``F = int_0^T R(t)^2 dt`` with
``R = g * vc * d * (2 xi0 + xi_l + xi_r) - u_measured`` the Lagrange
multipliers ``lam`` (right fold) and ``eta`` (left fold) satisfy, with
``s = 2 g vc d R``::

    lam'' - beta (1 + xi_r^2) lam' + alpha (lam' + eta') + (1 - delta/2) lam + s = 0
    eta'' - beta (1 + xi_l^2) eta' + alpha (lam' + eta') + (1 + delta/2) eta + s = 0

and vanish together with their derivatives at ``t = T``. The gradients
then follow from three quadratures, see :func:`gradients`.

``mode="literal"`` instead integrates the reduced pair in which the
first-derivative terms are replaced by ``2 beta xi xi' lam``; its
gradients do not match finite differences and it is kept for
comparison only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._validation import trapezoid_weights
from .exceptions import DivergenceError, DomainError, GridMismatchError
from .glottal import GlottalFlow, PhysicalConstants
from .model import field_array

ADJOINT_MODES = ("consistent", "literal")
ADJOINT_BOUND = 1e12


@dataclass(frozen=True)
class Residual:
    """Pointwise misfit between model and measured flow on the model grid.

    ``window`` holds the first and last grid index of the integration
    range; samples outside it do not enter the objective.
    """

    values: np.ndarray = field(repr=False)
    objective: float
    measured: np.ndarray = field(repr=False)
    gain: float
    dt: float
    window: tuple

    def __post_init__(self):
        if self.objective < 0:
            raise DomainError("objective must be non-negative")


@dataclass(frozen=True)
class AdjointTrajectory:
    """Multipliers ``(lam, lam', eta, eta')`` on the forward grid."""

    dt: float
    values: np.ndarray = field(repr=False)
    mode: str = "consistent"
    algebraic_residual: np.ndarray = field(default=None, repr=False)

    lam = property(lambda self: self.values[:, 0])
    dlam = property(lambda self: self.values[:, 1])
    eta = property(lambda self: self.values[:, 2])
    deta = property(lambda self: self.values[:, 3])

    @property
    def algebraic_residual_max(self):
        """Largest violation of ``beta (1 + xi^2) lam - alpha (lam + eta) = 0`` (either fold)."""
        if self.algebraic_residual is None:
            return float("nan")
        return float(np.max(np.abs(self.algebraic_residual)))


@dataclass(frozen=True)
class Gradient:
    f_alpha: float
    f_beta: float
    f_delta: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise DomainError("gradient is not finite")

    def as_array(self):
        return np.array([self.f_alpha, self.f_beta, self.f_delta])

    @property
    def max_norm(self):
        return float(np.max(np.abs(self.as_array())))


def _window(n, window):
    if window is None:
        return 0, n - 1
    lo, hi = int(window[0]), int(window[1])
    if not 0 <= lo < hi <= n - 1:
        raise DomainError(f"window {window} outside grid of {n} samples")
    return lo, hi


def window_objective(values, dt, window):
    lo, hi = window
    sq = values[lo : hi + 1] ** 2
    return float(np.dot(trapezoid_weights(sq.shape[0], dt), sq))


def _measured_samples(traj, measured):
    if isinstance(measured, GlottalFlow):
        if not measured.on_model_grid or not np.isclose(measured.dt, traj.dt, rtol=1e-12, atol=0.0):
            raise GridMismatchError("measured flow is not sampled on the trajectory grid; resample first")
        u = measured.samples
    else:
        u = np.asarray(measured, dtype=float)
    if u.shape != (len(traj),):
        raise GridMismatchError(f"measured flow has {u.shape[0]} samples, trajectory has {len(traj)}")
    return u


def model_flow(states, k, gain=1.0):
    """``gain * vc * d * (2 xi0 + xi_l + xi_r)`` for an ``(n, 4)`` state array."""
    return gain * k.flow_slope * (2.0 * k.xi0 + states[:, 2] + states[:, 0])


def optimal_gain(traj, measured, k=None, window=None):
    """Closed-form scalar minimising ``int (g u_model - u_measured)^2`` over the window."""
    k = PhysicalConstants() if k is None else k
    u = _measured_samples(traj, measured)
    lo, hi = _window(len(traj), window)
    w = trapezoid_weights(hi - lo + 1, traj.dt)
    um = model_flow(traj.states[lo : hi + 1], k)
    denom = np.dot(w, um * um)
    if denom <= 0.0:
        return 1.0
    return float(np.dot(w, um * u[lo : hi + 1]) / denom)


def residual(traj, measured, k=None, gain=1.0, window=None):
    """Residual ``R`` and trapezoidal objective ``int R^2 dt``.

    Parameters
    ----------
    traj : Trajectory
    measured : GlottalFlow or array
        Must share the trajectory grid (same ``dt`` and length).
    k : PhysicalConstants, optional
    gain : float
        Amplitude calibration applied to the model flow.
    window : (int, int), optional
        First and last grid index of the integration range.

    Raises
    ------
    GridMismatchError
    """
    k = PhysicalConstants() if k is None else k
    u = _measured_samples(traj, measured)
    win = _window(len(traj), window)
    r = model_flow(traj.states, k, gain) - u
    return Residual(r, window_objective(r, traj.dt, win), u, float(gain), traj.dt, win)


def _midpoints(states, derivs, dt):
    # cubic Hermite interpolation from values and slopes at both ends
    return 0.5 * (states[:-1] + states[1:]) + 0.125 * dt * (derivs[:-1] - derivs[1:])


def _midpoint_samples(u):
    """Cubic interpolation of grid samples at the half steps."""
    n = u.shape[0]
    if n < 4:
        return 0.5 * (u[:-1] + u[1:])
    mid = np.empty(n - 1)
    mid[1:-1] = (-u[:-3] + 9.0 * u[1:-2] + 9.0 * u[2:-1] - u[3:]) / 16.0
    mid[0] = (3.0 * u[0] + 6.0 * u[1] - u[2]) / 8.0
    mid[-1] = (-u[-3] + 6.0 * u[-2] + 3.0 * u[-1]) / 8.0
    return mid


def solve_adjoint(traj, res, params, k=None, mode="consistent"):
    """Integrate the adjoint pair backward from ``T`` to ``0`` with RK4.

    Forward states at half steps come from cubic Hermite interpolation,
    so the backward pass keeps fourth-order accuracy on the forward
    grid. The algebraic relations ``beta (1 + xi^2) lam - alpha
    (lam + eta) = 0`` are not imposed; their pointwise values are stored
    in :attr:`AdjointTrajectory.algebraic_residual`.

    Raises
    ------
    GridMismatchError
        If the residual was formed on another grid.
    DivergenceError
        If the multipliers become non-finite.
    """
    if mode not in ADJOINT_MODES:
        raise DomainError(f"mode must be one of {ADJOINT_MODES}, got {mode!r}")
    k = PhysicalConstants() if k is None else k
    n = len(traj) - 1
    if res.values.shape[0] != n + 1 or not np.isclose(res.dt, traj.dt, rtol=1e-12, atol=0.0):
        raise GridMismatchError("residual and trajectory grids differ")
    states = traj.states
    mid = _midpoints(states, field_array(states, params), traj.dt)

    slope2 = 2.0 * res.gain * k.flow_slope
    src_grid = slope2 * res.values
    # interpolating R itself keeps the forcing exactly zero when R is
    src_mid = slope2 * _midpoint_samples(res.values)
    lo, hi = res.window
    mask = np.zeros(n)
    mask[lo:hi] = 1.0
    force_lo = mask * src_grid[:-1]
    force_hi = mask * src_grid[1:]
    force_mid = mask * src_mid

    a, b, d = params.alpha, params.beta, params.delta
    if mode == "consistent":
        def coefs(x):
            ones = np.ones(x.shape[0])
            return ((1.0 - 0.5 * d) * ones, b * (1.0 + x[:, 0] ** 2),
                    (1.0 + 0.5 * d) * ones, b * (1.0 + x[:, 2] ** 2))
        coupling = a
    else:
        def coefs(x):
            zeros = np.zeros(x.shape[0])
            return (2.0 * b * x[:, 0] * x[:, 1] + 1.0 - 0.5 * d, zeros,
                    2.0 * b * x[:, 2] * x[:, 3] + 1.0 + 0.5 * d, zeros)
        coupling = 0.0
    grid_c = coefs(states)
    mid_c = coefs(mid)
    pairs = tuple((np.ascontiguousarray(g), np.ascontiguousarray(m)) for g, m in zip(grid_c, mid_c))
    values, failed = _kernels.rk4_backward(*pairs, coupling, force_lo, force_mid, force_hi, traj.dt, ADJOINT_BOUND)
    if failed >= 0:
        raise DivergenceError("adjoint integration diverged", failed * traj.dt)

    lam, eta = values[:, 0], values[:, 2]
    alg = np.column_stack((
        b * (1.0 + states[:, 0] ** 2) * lam - a * (lam + eta),
        b * (1.0 + states[:, 2] ** 2) * eta - a * (lam + eta),
    ))
    return AdjointTrajectory(traj.dt, values, mode, alg)


def gradients(traj, adj):
    """Partial derivatives of the objective with respect to alpha, beta and delta.

    Trapezoidal quadrature of::

        F_alpha = int -(xi_r' + xi_l') (lam + eta) dt
        F_beta  = int (1 + xi_r^2) xi_r' lam + (1 + xi_l^2) xi_l' eta dt
        F_delta = int (xi_l eta - xi_r lam) / 2 dt
    """
    if adj.values.shape[0] != len(traj) or not np.isclose(adj.dt, traj.dt, rtol=1e-12, atol=0.0):
        raise GridMismatchError("adjoint and trajectory grids differ")
    xr, vr, xl, vl = traj.states.T
    lam, eta = adj.lam, adj.eta
    w = trapezoid_weights(len(traj), traj.dt)
    f_alpha = -np.dot(w, (vr + vl) * (lam + eta))
    f_beta = np.dot(w, (1.0 + xr * xr) * vr * lam + (1.0 + xl * xl) * vl * eta)
    f_delta = 0.5 * np.dot(w, xl * eta - xr * lam)
    return Gradient(float(f_alpha), float(f_beta), float(f_delta))
