import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from vocalfold.adjoint import residual
from vocalfold.config import RunConfig
from vocalfold.estimator import BOUNDS, _project
from vocalfold.glottal import PhysicalConstants, flow_from_displacement
from vocalfold.model import ModelParams, Trajectory, simulate
from vocalfold.pathology import LABELS, Interval, classify_point
from vocalfold.phase import KINDS, AttractorReport, entrainment_ratio

finite = st.floats(-10, 10, allow_nan=False)
unit = st.floats(0.0, 1.0)

reports = st.one_of(
    st.none(),
    st.builds(AttractorReport, st.just("limit-cycle"), st.just(1),
              st.sampled_from([None, (1, 1), (2, 3)])),
    st.builds(AttractorReport, st.just("multi-limit-cycle"), st.integers(2, 6), st.sampled_from([None, (1, 1)])),
    st.builds(AttractorReport, st.sampled_from(["fixed-point", "torus", "chaotic/unclassified", "diverged"])),
)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6))
def test_entrainment_is_reduced_ratio(wr, wl):
    dt = 0.02
    t = dt * np.arange(int(60 * 2 * np.pi / dt))
    traj = Trajectory(dt, np.column_stack((np.sin(wr * t), wr * np.cos(wr * t), np.sin(wl * t), wl * np.cos(wl * t))))
    n, m = entrainment_ratio(traj)
    assert math.gcd(n, m) == 1 and n * wl == m * wr


@settings(max_examples=200)
@given(st.floats(-1, 3, allow_nan=False), st.floats(-1, 2, allow_nan=False), reports)
def test_classifier_is_total(delta, alpha, report):
    c = classify_point(delta, alpha, report)
    assert c.label in LABELS
    assert (c.label == "Unclassified") == (c.matched_region is None)
    if c.matched_region is not None:
        assert c.matched_region.contains(delta, alpha)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3))
def test_projection_lands_in_box_and_is_idempotent(x):
    p = _project(np.array(x), BOUNDS)
    assert all(lo <= v <= hi for v, (lo, hi) in zip(p, BOUNDS))
    assert np.array_equal(_project(p, BOUNDS), p)


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.floats(0.3, 0.7), st.floats(0.1, 0.6), st.floats(0.0, 1.0), st.floats(-2, 2), st.floats(0.2, 3.0))
def test_objective_non_negative_and_zero_only_at_match(a, b, d, offset, gain):
    traj = simulate(ModelParams(a, b, d), t_end=10.0)
    k = PhysicalConstants()
    u = flow_from_displacement(traj, k).samples
    scale = float(np.dot(u, u)) * traj.dt
    assert residual(traj, gain * u, k, gain).objective <= 1e-24 * scale * gain**2
    res = residual(traj, u + offset, k)
    assert res.objective >= 0.0
    if abs(offset) > 1e-3:
        assert res.objective > 0.0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 0.7), st.floats(0.05, 1.0), st.floats(-0.5, 0.5))
def test_symmetric_folds_never_separate(a, b, c):
    traj = simulate(ModelParams(a, b, 0.0, c, c), t_end=100.0)
    assert np.array_equal(traj.xi_r, traj.xi_l)


@given(st.lists(st.tuples(finite, finite, finite, finite), min_size=2, max_size=20), finite, finite)
def test_flow_affine_in_displacements(rows, a, b):
    states = np.array(rows)
    k = PhysicalConstants()
    base = flow_from_displacement(Trajectory(0.01, states), k).samples
    moved = flow_from_displacement(Trajectory(0.01, states + [b, 0, a, 0]), k).samples
    assert np.allclose(moved - base, k.flow_slope * (a + b), atol=1e-12)


@given(st.floats(-1, 1), st.floats(0.01, 1), st.booleans(), st.booleans(), st.floats(-3, 3, allow_nan=False))
def test_interval_distance_zero_inside(lo, width, lo_closed, hi_closed, x):
    iv = Interval(lo, lo + width, lo_closed, hi_closed)
    if x in iv:
        assert iv.distance(x) == 0.0
    elif lo < x < lo + width:
        raise AssertionError("interior point not contained")


@given(st.sampled_from(KINDS), st.integers(1, 5), st.sampled_from([None, (1, 1), (3, 2)]))
def test_report_round_trip(kind, cycles, ent):
    cycles = {"limit-cycle": 1, "multi-limit-cycle": cycles + 1}.get(kind, 0)
    rep = AttractorReport(kind, cycles, ent, (cycles, cycles), (10, 10))
    assert AttractorReport.from_dict(rep.to_dict()) == rep


@settings(max_examples=30)
@given(st.sampled_from(["gd", "bfgs"]), st.integers(0, 5), st.floats(1e-9, 1e-3), st.floats(50, 400),
       st.integers(1, 8))
def test_config_round_trip(method, restarts, tol, horizon, workers):
    cfg = RunConfig().override("optimizer", method=method, restarts=restarts, grad_tol=tol)
    cfg = cfg.override("simulation", horizon=horizon).override("batch", workers=workers)
    import tomli_w

    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    assert RunConfig.from_dict(tomllib.loads(tomli_w.dumps(cfg.to_dict()))) == cfg
