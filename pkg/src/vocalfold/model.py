"""Forward simulation of the asymmetric two-fold oscillator model.

The right and left folds are a pair of Van der Pol oscillators driven by
a shared glottal-pressure term::

    xi_r'' = alpha (xi_r' + xi_l') - beta (1 + xi_r**2) xi_r' - xi_r + (delta / 2) xi_r
    xi_l'' = alpha (xi_r' + xi_l') - beta (1 + xi_l**2) xi_l' - xi_l - (delta / 2) xi_l

Time and displacement are dimensionless.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels
from ._validation import check_finite_array, check_scalar
from .exceptions import DivergenceError, DomainError

DEFAULT_DT = 0.01
BLOWUP_BOUND = 1e6

#: parameter set quoted for a normal adult male voice
NORMAL_VOICE = (0.5, 0.32, 0.0)


@dataclass(frozen=True)
class ModelParams:
    """Model coefficients plus the initial fold displacements.

    Construction rejects ``alpha < 0``, ``beta <= 0`` and ``delta``
    outside ``[0, 2]``.
    """

    alpha: float = NORMAL_VOICE[0]
    beta: float = NORMAL_VOICE[1]
    delta: float = NORMAL_VOICE[2]
    c_r: float = 0.1
    c_l: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_scalar(self.alpha, "alpha", low=0.0))
        object.__setattr__(self, "beta", check_scalar(self.beta, "beta", low=0.0, include_low=False))
        object.__setattr__(self, "delta", check_scalar(self.delta, "delta", low=0.0, high=2.0))
        object.__setattr__(self, "c_r", check_scalar(self.c_r, "c_r"))
        object.__setattr__(self, "c_l", check_scalar(self.c_l, "c_l"))

    @property
    def theta(self):
        """The estimable coefficients as an array ``[alpha, beta, delta]``."""
        return np.array([self.alpha, self.beta, self.delta])

    def with_theta(self, theta):
        """Copy with ``(alpha, beta, delta)`` replaced, initial displacements kept."""
        a, b, d = (float(v) for v in theta)
        return ModelParams(a, b, d, self.c_r, self.c_l)

    def initial_state(self):
        return State(self.c_r, 0.0, self.c_l, 0.0)


class State(NamedTuple):
    """Displacement and velocity of the right and left folds."""

    xi_r: float
    dxi_r: float
    xi_l: float
    dxi_l: float


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled solution; row ``k`` of ``states`` is the state at ``k * dt``."""

    dt: float
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        check_scalar(self.dt, "dt", low=0.0, include_low=False)
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[1] != 4 or states.shape[0] < 2:
            raise DomainError(f"states must have shape (n >= 2, 4), got {states.shape}")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return self.states.shape[0]

    @property
    def t(self):
        return self.dt * np.arange(len(self))

    @property
    def t_end(self):
        return self.dt * (len(self) - 1)

    xi_r = property(lambda self: self.states[:, 0])
    dxi_r = property(lambda self: self.states[:, 1])
    xi_l = property(lambda self: self.states[:, 2])
    dxi_l = property(lambda self: self.states[:, 3])

    def derivatives(self, params):
        """Vector field evaluated at every sample, shape ``(n, 4)``."""
        return field_array(self.states, params)

    def to_csv(self, path):
        write_trajectory_csv(self, path)


def field_array(states, params):
    """Vectorised right-hand side for an ``(n, 4)`` array of states."""
    xr, vr, xl, vl = states.T
    drive = params.alpha * (vr + vl)
    half = 0.5 * params.delta
    out = np.empty_like(states)
    out[:, 0] = vr
    out[:, 1] = drive - params.beta * (1.0 + xr * xr) * vr - xr + half * xr
    out[:, 2] = vl
    out[:, 3] = drive - params.beta * (1.0 + xl * xl) * vl - xl - half * xl
    return out


def rhs(state, params):
    """Time derivative ``(xi_r', xi_r'', xi_l', xi_l'')`` at a single state.

    Raises
    ------
    DomainError
        If any state component is not finite.
    """
    x = check_finite_array(state, "state", ndim=1, min_length=4)
    if x.shape[0] != 4:
        raise DomainError(f"state must have 4 components, got {x.shape[0]}")
    vr, ar, vl, al = _kernels._field.py_func(x[0], x[1], x[2], x[3], params.alpha, params.beta, params.delta)
    return State(vr, ar, vl, al)


def n_steps_for(dt, t_end):
    # guard against floor(300 / 0.01) landing on 29999
    return int(np.floor(t_end / dt + 1e-9))


def simulate(params, dt=DEFAULT_DT, t_end=300.0, initial_state=None):
    """Integrate the model with classical fixed-step RK4.

    Parameters
    ----------
    params : ModelParams
    dt : float
        Step size in dimensionless time.
    t_end : float
        Horizon; the result has ``floor(t_end / dt) + 1`` samples.
    initial_state : sequence of 4 floats, optional
        Overrides the default start ``(c_r, 0, c_l, 0)``.

    Raises
    ------
    DivergenceError
        If any component leaves ``[-1e6, 1e6]`` or becomes non-finite.
    """
    dt = check_scalar(dt, "dt", low=0.0, include_low=False)
    t_end = check_scalar(t_end, "t_end", low=dt)
    if initial_state is None:
        initial_state = params.initial_state()
    x0 = check_finite_array(initial_state, "initial_state", ndim=1, min_length=4)
    n = n_steps_for(dt, t_end)
    states, failed = _kernels.rk4_forward(x0, params.alpha, params.beta, params.delta, dt, n, BLOWUP_BOUND)
    if failed >= 0:
        raise DivergenceError("forward simulation diverged", failed * dt)
    return Trajectory(dt, states)


def write_trajectory_csv(traj, path):
    """Write ``t,xi_r,dxi_r,xi_l,dxi_l`` rows at 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "xi_r", "dxi_r", "xi_l", "dxi_l"])
        for t, row in zip(traj.t, traj.states):
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


def read_trajectory_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 5:
        raise DomainError(f"{path}: expected 5 columns, got {data.shape[1]}")
    t = data[:, 0]
    dt = float(t[1] - t[0])
    return Trajectory(dt, data[:, 1:])
