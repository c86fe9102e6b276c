"""Adjoint least-squares fitting of (alpha, beta, delta) to a glottal flow.

Each iteration simulates the model, calibrates the amplitude gain in
closed form, integrates the adjoint system backward and takes a
projected gradient step. Because the gain is re-optimised at every
evaluation, the adjoint gradient is the exact gradient of the profiled
objective ``min_g F(theta, g)``.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_scalar, trapezoid_weights
from .adjoint import ADJOINT_MODES, gradients, model_flow, optimal_gain, residual, solve_adjoint
from .exceptions import ConfigError, DivergenceError, DomainError, NumericalError
from .glottal import GlottalFlow, PhysicalConstants, SampledSignal, estimate_f0, estimate_period
from .model import DEFAULT_DT, NORMAL_VOICE, ModelParams, simulate

log = logging.getLogger(__name__)

#: projection box applied after every update
BOUNDS = ((0.0, 1.0), (0.01, 1.0), (0.0, 2.0))
#: admissible model periods (dimensionless time) for pitch estimation on the model grid
MODEL_PERIOD_BAND = (2.0, 30.0)
MIN_PERIODS = 5
#: bounds of the log time scale and of the phase offset (pitch periods) when the time map is fitted
TIME_MAP_BOUNDS = ((-0.15, 0.15), (-0.5, 0.5))


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings of the iterative fit.

    Step sizes and ``grad_tol`` act on the objective divided by the
    energy of the measured flow inside the fit window, which makes them
    independent of the flow's physical units.
    """

    method: str = "gd"
    trust_radius: float = 0.02
    step_alpha: float = 1e-3
    step_beta: float = 1e-3
    step_delta: float = 1e-3
    max_iter: int = 500
    grad_tol: float = 1e-5
    rel_tol: float = 1e-6
    rel_window: int = 5
    max_halvings: int = 10
    adjoint: str = "consistent"
    transient_fraction: float = 0.25
    max_horizon: float = 200.0
    calibrate_gain: bool = True
    align_rounds: int = 3
    fit_time_scale: bool = True
    continuation: tuple = (0.4,)
    restarts: int = 0
    restart_radius: float = 0.1
    seed: int = 0
    starts: tuple = ()

    def __post_init__(self):
        if self.method not in ("gd", "bfgs"):
            raise ConfigError(f"method must be 'gd' or 'bfgs', got {self.method!r}")
        if self.adjoint not in ADJOINT_MODES:
            raise ConfigError(f"adjoint must be one of {ADJOINT_MODES}, got {self.adjoint!r}")
        object.__setattr__(self, "continuation", tuple(float(c) for c in self.continuation))
        try:
            starts = tuple(tuple(float(v) for v in x) for x in self.starts)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"starts must be a list of (alpha, beta, delta) triples: {exc}") from exc
        if any(len(x) != 3 for x in starts):
            raise ConfigError("each entry of starts must be an (alpha, beta, delta) triple")
        object.__setattr__(self, "starts", starts)
        if any(not 0.0 < c < 1.0 for c in self.continuation) or list(self.continuation) != sorted(self.continuation):
            raise ConfigError(f"continuation must be increasing fractions in (0, 1), got {self.continuation}")
        for name in ("step_alpha", "step_beta", "step_delta", "max_horizon", "trust_radius", "restart_radius"):
            check_scalar(getattr(self, name), name, low=0.0, include_low=False)
        for name in ("grad_tol", "rel_tol"):
            check_scalar(getattr(self, name), name, low=0.0)
        check_scalar(self.transient_fraction, "transient_fraction", low=0.0, high=0.9)
        for name in ("max_iter", "rel_window", "max_halvings", "align_rounds", "restarts", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 0:
                raise ConfigError(f"{name} must be a non-negative integer, got {v!r}")

    @property
    def steps(self):
        return np.array([self.step_alpha, self.step_beta, self.step_delta])


@dataclass
class FitResult:
    """Outcome of :func:`estimate`.

    ``objective_history`` holds raw objective values of the final
    continuation stage; ``gradient_norms`` are max-norms of the
    energy-normalised gradient.
    """

    params: ModelParams
    objective_history: list
    gradient_norms: list
    converged: bool
    reason: str
    time_scale: float
    gain: float
    algebraic_residual_max: float = float("nan")
    trace: list = field(default_factory=list, repr=False)
    window: tuple = (0, 0)
    period: float = float("nan")
    total_iterations: int = 0

    @property
    def objective(self):
        return self.objective_history[-1]

    @property
    def iterations(self):
        return len(self.objective_history) - 1

    def to_dict(self):
        return {
            "alpha": self.params.alpha,
            "beta": self.params.beta,
            "delta": self.params.delta,
            "objective_history": [float(v) for v in self.objective_history],
            "gradient_norms": [float(v) for v in self.gradient_norms],
            "converged": bool(self.converged),
            "reason": self.reason,
            "time_scale": float(self.time_scale),
            "gain": float(self.gain),
            "algebraic_residual_max": _json_float(self.algebraic_residual_max),
        }

    def to_json(self, path=None, indent=2):
        text = json.dumps(self.to_dict(), indent=indent)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def write_trace(self, path):
        """Per-iteration ``iteration,alpha,beta,delta,objective,grad_norm,gain`` CSV."""
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "alpha", "beta", "delta", "objective", "grad_norm", "gain"])
            for i, row in enumerate(self.trace):
                writer.writerow([i] + [f"{v:.17g}" for v in row])


def _json_float(v):
    v = float(v)
    return v if np.isfinite(v) else None


# ------------------------------------------------------------ problems


@dataclass(frozen=True)
class _Resampler:
    """Physically sampled flow read on the model grid under a time map.

    Model time ``t`` corresponds to ``offset + t / scale`` seconds with
    ``scale = scale0 * exp(x[0])`` and ``offset = offset0 + x[1] / f0``.
    """

    spline: CubicSpline
    dspline: CubicSpline
    f0: float
    scale0: float
    offset0: float

    def scale(self, x):
        return self.scale0 * float(np.exp(x[0]))

    def __call__(self, n, dt, x):
        s = self.scale(x)
        t = dt * np.arange(n)
        arg = self.offset0 + x[1] / self.f0 + t / s
        return self.spline(arg), self.dspline(arg), t / s


@dataclass(frozen=True)
class _Problem:
    """Everything that stays fixed during one local fit.

    Either ``measured`` holds samples on the model grid, or ``source``
    resamples a physically sampled flow at every evaluation (the time
    map is then fitted alongside the model parameters).
    """

    n: int
    dt: float
    window: tuple
    energy: float
    k: PhysicalConstants
    init: ModelParams
    cfg: OptimizerConfig
    period: float
    measured: np.ndarray | None = None
    source: _Resampler | None = None

    @property
    def t_end(self):
        return self.dt * (self.n - 1)

    @property
    def bounds(self):
        return BOUNDS + TIME_MAP_BOUNDS if self.source is not None else BOUNDS

    @property
    def steps(self):
        s = self.cfg.steps
        return np.concatenate((s, [s[0], s[0]])) if self.source is not None else s

    def truncated(self, n):
        """Same problem on the first ``n`` grid points."""
        if (n - 1) * self.dt < MIN_PERIODS * self.period:
            raise DomainError(f"measured flow spans fewer than {MIN_PERIODS} pitch periods")
        window = _fit_window(n, self.dt, self.period, self.cfg.transient_fraction)
        measured = None if self.measured is None else self.measured[:n]
        u = measured if measured is not None else self.source(n, self.dt, (0.0, 0.0))[0]
        return replace(self, n=n, window=window, energy=_energy(u, window, self.dt), measured=measured)


def _flow_period(samples, dt):
    return estimate_period(samples, dt, *MODEL_PERIOD_BAND)


def _fit_window(n, dt, period, transient_fraction):
    lo = int(round(transient_fraction * (n - 1)))
    cycles = int(np.floor((n - 1 - lo) * dt / period))
    if cycles < 1:
        return lo, n - 1
    hi = min(n - 1, lo + int(round(cycles * period / dt)))
    return lo, hi


def _energy(u, window, dt):
    lo, hi = window
    energy = float(np.dot(trapezoid_weights(hi - lo + 1, dt), u[lo : hi + 1] ** 2))
    if energy <= 0.0:
        raise DomainError("measured flow has no energy in the fit window")
    return energy


def _grid_problem(u, dt, k, init, cfg, source=None):
    n = u.shape[0]
    period = _flow_period(u, dt)
    if (n - 1) * dt < MIN_PERIODS * period:
        raise DomainError(f"measured flow spans fewer than {MIN_PERIODS} pitch periods")
    window = _fit_window(n, dt, period, cfg.transient_fraction)
    measured = u if source is None else None
    return _Problem(n, dt, window, _energy(u, window, dt), k, init, cfg, period, measured, source)


def _model_period(params, dt, k, cfg):
    horizon = min(cfg.max_horizon, 40.0 * MODEL_PERIOD_BAND[0])
    traj = simulate(params, dt, horizon)
    lo = int(round(cfg.transient_fraction * (len(traj) - 1)))
    return _flow_period(model_flow(traj.states[lo:], k), dt)


def _align(measured, params, dt, k, cfg):
    """Map a physically sampled flow onto the model grid.

    The time scale sends one measured pitch period onto one model period
    at ``params``; the start offset within the first period is chosen by
    maximum correlation with the model flow. Returns the resampler and
    the number of grid points it can serve, leaving room for the time
    map to move inside :data:`TIME_MAP_BOUNDS`.
    """
    f0 = estimate_f0_flow(measured)
    duration = (len(measured) - 1) / measured.sample_rate
    model_period = _model_period(params, dt, k, cfg)
    scale = model_period * f0
    t_sec = np.arange(len(measured)) / measured.sample_rate
    spline = CubicSpline(t_sec, measured.samples)
    slack = np.exp(-TIME_MAP_BOUNDS[0][1])
    usable = (duration - 2.0 / f0) * scale * slack
    n = min(int(np.floor(usable / dt)) + 1, int(np.floor(cfg.max_horizon / dt + 1e-9)) + 1)
    if (n - 1) * dt < MIN_PERIODS * model_period:
        raise DomainError(f"measured flow spans fewer than {MIN_PERIODS} pitch periods")

    traj = simulate(params, dt, (n - 1) * dt)
    model = model_flow(traj.states, k)
    lo = int(round(cfg.transient_fraction * (n - 1)))
    ref = model[lo:] - model[lo:].mean()
    t_model = dt * np.arange(lo, n)
    offsets = (0.5 + np.arange(int(np.ceil(model_period / dt)))) * dt / scale
    scores = []
    for off in offsets:
        seg = spline(off + t_model / scale)
        seg = seg - seg.mean()
        scores.append(np.dot(ref, seg) / (np.linalg.norm(seg) + 1e-300))
    offset = float(offsets[int(np.argmax(scores))]) + 1.0 / f0
    return _Resampler(spline, spline.derivative(), f0, scale, offset), n


def estimate_f0_flow(flow):
    """Pitch of a physically sampled glottal flow in Hz."""
    return estimate_f0(SampledSignal(flow.sample_rate, flow.samples))


def _on_model_grid(measured, dt):
    if measured.on_model_grid:
        if np.isclose(measured.dt, dt, rtol=1e-12, atol=0.0):
            return measured.samples
        t_old = measured.t
        n = int(np.floor(t_old[-1] / dt + 1e-9)) + 1
        return CubicSpline(t_old, measured.samples)(dt * np.arange(n))
    return None


# ------------------------------------------------------------ objective


class _Evaluator:
    """Objective and adjoint gradient at one point of the search space.

    The point is ``(alpha, beta, delta)``, extended by the log time scale
    and the phase offset (in pitch periods) when the time map is fitted.
    """

    def __init__(self, problem):
        self.p = problem
        self.calls = 0

    def __call__(self, x, need_grad=True):
        p = self.p
        self.calls += 1
        params = p.init.with_theta(x[:3])
        traj = simulate(params, p.dt, p.t_end)
        if p.source is None:
            u = p.measured
        else:
            u, du, t_scaled = p.source(p.n, p.dt, x[3:])
        gain = optimal_gain(traj, u, p.k, p.window) if p.cfg.calibrate_gain else 1.0
        res = residual(traj, u, p.k, gain, p.window)
        if not need_grad:
            return res.objective, None, gain, float("nan")
        adj = solve_adjoint(traj, res, params, p.k, p.cfg.adjoint)
        grad = gradients(traj, adj).as_array()
        if p.source is not None:
            lo, hi = p.window
            w = trapezoid_weights(hi - lo + 1, p.dt)
            r2du = 2.0 * res.values[lo : hi + 1] * du[lo : hi + 1]
            g_scale = float(np.dot(w, r2du * t_scaled[lo : hi + 1]))
            g_offset = -float(np.dot(w, r2du)) / p.source.f0
            grad = np.concatenate((grad, [g_scale, g_offset]))
        return res.objective, grad, gain, adj.algebraic_residual_max


def _project(x, bounds):
    return np.array([np.clip(v, lo, hi) for v, (lo, hi) in zip(x, bounds)])


def _descend(evaluate, x0, problem):
    """Projected gradient descent with per-parameter steps and step halving."""
    cfg, energy, bounds = problem.cfg, problem.energy, problem.bounds
    x = _project(x0, bounds)
    f, g, gain, alg = evaluate(x)
    gn = float(np.max(np.abs(g))) / energy
    history, gnorms, trace = [f], [gn], [(*x[:3], f, gn, gain)]
    steps = problem.steps
    scale = 1.0
    reason, converged = "max_iter reached", False
    for _ in range(cfg.max_iter):
        if gnorms[-1] < cfg.grad_tol:
            reason, converged = "gradient below tolerance", True
            break
        if len(history) > cfg.rel_window:
            old = history[-1 - cfg.rel_window]
            if old == 0.0 or (old - history[-1]) / old < cfg.rel_tol:
                reason, converged = "relative objective decrease below tolerance", True
                break
        direction = steps * g / energy
        accepted = False
        trial = min(1.0, 2.0 * scale)
        for _ in range(cfg.max_halvings + 1):
            cand = _project(x - trial * direction, bounds)
            try:
                fc, gc, gainc, algc = evaluate(cand)
            except (DivergenceError, DomainError):
                trial *= 0.5
                continue
            if fc < f:
                accepted = True
                break
            trial *= 0.5
        if not accepted:
            if not np.isfinite(f):
                raise NumericalError("fit failed: objective not finite")
            reason = "no decrease after step halving"
            break
        scale = trial
        x, f, g, gain, alg = cand, fc, gc, gainc, algc
        history.append(f)
        gnorms.append(float(np.max(np.abs(g))) / energy)
        trace.append((*x[:3], f, gnorms[-1], gain))
    return x, history, gnorms, converged, reason, gain, alg, trace


def _quasi_newton(evaluate, x0, problem):
    """Bound-constrained trust-region BFGS on the energy-normalised objective."""
    cfg, energy, bounds = problem.cfg, problem.energy, problem.bounds
    history, gnorms, trace = [], [], []
    state = {}

    def fun(x):
        try:
            f, g, _, _ = evaluate(x)
        except (DivergenceError, DomainError):
            return np.inf, np.zeros(len(x))
        return f / energy, g / energy

    def accept(x):
        # only improvements enter the history, so it stays monotone
        f, g, gain, alg = evaluate(x)
        if history and f >= history[-1]:
            return
        history.append(f)
        gnorms.append(float(np.max(np.abs(g))) / energy)
        trace.append((*x[:3], f, gnorms[-1], gain))
        state.update(x=x, gain=gain, alg=alg)

    def callback(xk, _info=None):
        try:
            accept(_project(xk, bounds))
        except (DivergenceError, DomainError):
            pass
        return False

    x0 = _project(x0, bounds)
    accept(x0)
    if gnorms[0] < cfg.grad_tol:
        return x0, history, gnorms, True, "gradient below tolerance", state["gain"], state["alg"], trace
    lo, hi = zip(*bounds)
    with warnings.catch_warnings():
        # emitted when an accepted step leaves the gradient unchanged
        warnings.filterwarnings("ignore", message="delta_grad == 0.0")
        res = optimize.minimize(
            fun, x0, jac=True, method="trust-constr", hess=optimize.BFGS(),
            bounds=optimize.Bounds(lo, hi), callback=callback,
            options={"maxiter": cfg.max_iter, "initial_tr_radius": cfg.trust_radius,
                     "gtol": cfg.grad_tol, "xtol": 1e-10},
        )
    converged = res.status in (1, 2) or gnorms[-1] < cfg.grad_tol
    reason = "gradient below tolerance" if res.status == 1 else str(res.message)
    return state["x"], history, gnorms, converged, reason, state["gain"], state["alg"], trace


def _stages(problem):
    """Truncated copies of ``problem`` for horizon continuation, shortest first."""
    out = []
    for frac in problem.cfg.continuation:
        try:
            out.append(problem.truncated(int(round(frac * (problem.n - 1))) + 1))
        except DomainError:
            continue
    return out + [problem]


def _run(problem, x0):
    """Local fit, warm-started through progressively longer horizons."""
    solver = _descend if problem.cfg.method == "gd" else _quasi_newton
    x = x0
    iterations = 0
    for stage in _stages(problem):
        out = solver(_Evaluator(stage), x, stage)
        x = out[0]
        iterations += len(out[1]) - 1
    return out, iterations


def _best_of_restarts(problem, x0):
    """Best local fit over ``x0``, the configured extra starts, and seeded restarts.

    Each base point (``x0`` and every entry of ``cfg.starts``) gets
    ``cfg.restarts`` random neighbours; only the model parameters are
    perturbed.
    """
    cfg = problem.cfg
    rng = np.random.default_rng(cfg.seed)
    bases = [np.array(x0, dtype=float)]
    for theta in cfg.starts:
        b = bases[0].copy()
        b[:3] = theta
        bases.append(b)
    best, iterations, failure = None, 0, None
    for base in bases:
        points = [base]
        for _ in range(cfg.restarts):
            p = base.copy()
            p[:3] += rng.uniform(-cfg.restart_radius, cfg.restart_radius, size=3)
            points.append(p)
        for start in points:
            try:
                cand, its = _run(problem, _project(start, problem.bounds))
            except NumericalError as exc:
                failure = exc
                continue
            iterations += its
            if best is None or cand[1][-1] < best[1][-1]:
                best = cand
    if best is None:
        raise failure
    return best, iterations


def estimate(measured, init=None, cfg=None, k=None, dt=DEFAULT_DT):
    """Fit (alpha, beta, delta) to a measured glottal flow.

    Parameters
    ----------
    measured : GlottalFlow
        Either already on the model grid (``dt`` set; used as is) or
        sampled in Hz. A flow in Hz is first rescaled in time so that its
        pitch period matches the model period at ``init`` and shifted to
        the model phase. With ``cfg.fit_time_scale`` the scale and offset
        are then refined jointly with the parameters; otherwise the
        alignment is refreshed from the fitted parameters up to
        ``cfg.align_rounds`` times.
    init : ModelParams, optional
        Starting point, by default the normal-voice reference.
    cfg : OptimizerConfig, optional
    k : PhysicalConstants, optional
    dt : float
        Model step size.

    Returns
    -------
    FitResult

    Raises
    ------
    NoVoicingError
        If no pitch can be found in the measured flow.
    DomainError
        If the flow is shorter than five pitch periods.
    """
    init = ModelParams(*NORMAL_VOICE) if init is None else init
    cfg = OptimizerConfig() if cfg is None else cfg
    k = PhysicalConstants() if k is None else k
    if not isinstance(measured, GlottalFlow):
        raise DomainError("measured must be a GlottalFlow")

    u = _on_model_grid(measured, dt)
    if u is not None:
        u = u[: int(np.floor(cfg.max_horizon / dt + 1e-9)) + 1]
        problem = _grid_problem(u, dt, k, init, cfg)
        return _result(_best_of_restarts(problem, init.theta), init, problem, None)

    if cfg.fit_time_scale:
        source, n = _align(measured, init, dt, k, cfg)
        problem = _grid_problem(source(n, dt, (0.0, 0.0))[0], dt, k, init, cfg, source)
        out = _best_of_restarts(problem, np.concatenate((init.theta, [0.0, 0.0])))
        return _result(out, init, problem, source)

    theta, out, problem, scale = init.theta, None, None, None
    anchor = init
    for _ in range(max(1, cfg.align_rounds)):
        source, n = _align(measured, anchor, dt, k, cfg)
        if scale is not None and abs(source.scale0 - scale) <= 1e-3 * scale:
            break
        scale = source.scale0
        problem = _grid_problem(source(n, dt, (0.0, 0.0))[0], dt, k, init, cfg)
        out = _best_of_restarts(problem, theta if out is None else out[0][0])
        anchor = init.with_theta(out[0][0])
    return _result(out, init, problem, source, fixed_scale=scale)


def _result(out, init, problem, source, fixed_scale=None):
    (x, history, gnorms, converged, reason, gain, alg, trace), iterations = out
    if source is None:
        time_scale = 1.0
    elif fixed_scale is not None:
        time_scale = fixed_scale
    else:
        time_scale = source.scale(x[3:])
    return FitResult(
        params=init.with_theta(x[:3]),
        objective_history=[float(v) for v in history],
        gradient_norms=gnorms,
        converged=converged,
        reason=reason,
        time_scale=float(time_scale),
        gain=float(gain),
        algebraic_residual_max=float(alg),
        trace=trace,
        window=problem.window,
        period=float(problem.period),
        total_iterations=int(iterations),
    )


# ------------------------------------------------------ estimator API


class AdlesEstimator(BaseEstimator):
    """Scikit-learn style wrapper around :func:`estimate`.

    ``fit`` takes a :class:`GlottalFlow` (or a 1-D array interpreted on
    the model grid with spacing ``dt``); fitted attributes are
    ``params_``, ``result_`` and ``measured_``.

    Examples
    --------
    >>> from vocalfold import AdlesEstimator, simulate, ModelParams, flow_from_displacement
    >>> flow = flow_from_displacement(simulate(ModelParams(0.5, 0.32, 0.0), t_end=60.0))
    >>> est = AdlesEstimator(max_iter=5).fit(flow)
    >>> round(est.params_.alpha, 3)
    0.5
    """

    def __init__(self, alpha0=NORMAL_VOICE[0], beta0=NORMAL_VOICE[1], delta0=NORMAL_VOICE[2],
                 c_r=0.1, c_l=0.1, dt=DEFAULT_DT, method="gd", step_size=1e-3, max_iter=500,
                 grad_tol=1e-5, rel_tol=1e-6, adjoint="consistent", transient_fraction=0.25,
                 calibrate_gain=True, constants=None):
        self.alpha0 = alpha0
        self.beta0 = beta0
        self.delta0 = delta0
        self.c_r = c_r
        self.c_l = c_l
        self.dt = dt
        self.method = method
        self.step_size = step_size
        self.max_iter = max_iter
        self.grad_tol = grad_tol
        self.rel_tol = rel_tol
        self.adjoint = adjoint
        self.transient_fraction = transient_fraction
        self.calibrate_gain = calibrate_gain
        self.constants = constants

    def _config(self):
        return OptimizerConfig(
            method=self.method, step_alpha=self.step_size, step_beta=self.step_size,
            step_delta=self.step_size, max_iter=self.max_iter, grad_tol=self.grad_tol,
            rel_tol=self.rel_tol, adjoint=self.adjoint, transient_fraction=self.transient_fraction,
            calibrate_gain=self.calibrate_gain,
        )

    def _as_flow(self, X):
        if isinstance(X, GlottalFlow):
            return X
        return GlottalFlow(np.asarray(X, dtype=float).ravel(), source="measured", dt=self.dt)

    def fit(self, X, y=None):
        flow = self._as_flow(X)
        init = ModelParams(self.alpha0, self.beta0, self.delta0, self.c_r, self.c_l)
        self.result_ = estimate(flow, init, self._config(), self.constants, self.dt)
        self.params_ = self.result_.params
        self.n_iter_ = self.result_.iterations
        return self

    def predict(self, X=None):
        """Calibrated model flow on the model grid of the fit (or of ``X``)."""
        check_is_fitted(self, "result_")
        k = self.constants or PhysicalConstants()
        if X is None:
            n = self.result_.window[1] + 1
        else:
            n = len(self._as_flow(X)) if not isinstance(X, int) else X
        traj = simulate(self.params_, self.dt, (n - 1) * self.dt)
        return model_flow(traj.states, k, self.result_.gain)

    def score(self, X, y=None):
        """Fraction of measured-flow energy explained: ``1 - F / E`` over the fit window."""
        check_is_fitted(self, "result_")
        flow = self._as_flow(X)
        u = _on_model_grid(flow, self.dt)
        if u is None:
            raise DomainError("score needs a flow on the model grid")
        lo, hi = self.result_.window
        pred = self.predict(len(u))
        w = trapezoid_weights(hi - lo + 1, self.dt)
        r = pred[lo : hi + 1] - u[lo : hi + 1]
        return float(1.0 - np.dot(w, r * r) / np.dot(w, u[lo : hi + 1] ** 2))


def config_from_dict(d):
    try:
        return OptimizerConfig(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg):
    return asdict(cfg)


__all__ = [
    "AdlesEstimator",
    "FitResult",
    "OptimizerConfig",
    "estimate",
    "BOUNDS",
]
