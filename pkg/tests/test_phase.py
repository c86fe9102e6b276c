import math

import numpy as np
import pytest

from conftest import REGIMES, cosine_trajectory
from vocalfold.exceptions import ClassificationError, DomainError, EntrainmentError
from vocalfold.model import ModelParams, Trajectory, simulate
from vocalfold.phase import (
    AttractorReport, SimulationConfig, bifurcation_sweep, classify_attractor, classify_params,
    contiguous_region, entrainment_ratio, poincare_crossings, read_grid_csv,
)


def two_tone(wr, wl, periods=100, dt=0.01, amp_l=1.0):
    t = dt * np.arange(int(periods * 2 * np.pi / dt))
    return Trajectory(dt, np.column_stack((np.sin(wr * t), wr * np.cos(wr * t),
                                           amp_l * np.sin(wl * t), amp_l * wl * np.cos(wl * t))))


def origin(n=3000):
    return Trajectory(0.01, np.zeros((n, 4)))


def crossing_error(dt, direction, base):
    t = np.array([c.t for c in poincare_crossings(cosine_trajectory(dt), settle_fraction=0.0, direction=direction)])
    k = np.round((t - base) / (2 * np.pi))
    return np.max(np.abs(t - base - 2 * np.pi * k)), len(t)


# ------------------------------------------------------------ crossings


def test_origin_has_no_crossings():
    assert poincare_crossings(origin()) == []


def test_cosine_downward_crossings_at_half_pi():
    err, count = crossing_error(0.01, "down", np.pi / 2)
    assert count == 10 and err <= 1e-4


def test_cosine_upward_crossings_at_three_half_pi():
    # velocity cos(t) rises through zero at 3 pi / 2, not at pi / 2
    err, count = crossing_error(0.01, "up", 1.5 * np.pi)
    assert count == 10 and err <= 1e-4


@pytest.mark.parametrize("direction,base", [("up", 1.5 * np.pi), ("down", 0.5 * np.pi)])
def test_crossing_error_shrinks_fourfold(direction, base):
    coarse, _ = crossing_error(0.02, direction, base)
    fine, _ = crossing_error(0.01, direction, base)
    assert coarse / fine >= 4.0


def test_crossing_values_and_direction():
    tr = cosine_trajectory(0.01)
    up = poincare_crossings(tr, settle_fraction=0.0)
    assert all(c.value == pytest.approx(-1.0, abs=1e-4) and c.oscillator == "right" for c in up)
    down = poincare_crossings(tr, "left", settle_fraction=0.0, direction="down")
    assert all(c.value == pytest.approx(1.0, abs=1e-4) for c in down)


def test_symmetric_normal_counts_equal(regime_trajectories):
    traj = regime_trajectories["Normal"]
    assert len(poincare_crossings(traj, "right")) == len(poincare_crossings(traj, "left"))


@pytest.mark.parametrize("kw", [{"oscillator": "middle"}, {"direction": "sideways"}, {"settle_fraction": 1.0}])
def test_crossing_argument_validation(kw):
    with pytest.raises(DomainError):
        poincare_crossings(cosine_trajectory(0.01), **kw)


# ---------------------------------------------------------- entrainment


def test_normal_voice_is_one_to_one(regime_trajectories):
    assert entrainment_ratio(regime_trajectories["Normal"]) == (1, 1)


def test_identical_folds_are_one_to_one():
    assert entrainment_ratio(cosine_trajectory(0.01, periods=40), settle_fraction=0.0) == (1, 1)


def test_toroidal_regime_is_not_one_to_one(regime_trajectories):
    assert entrainment_ratio(regime_trajectories["VocalPalsy"]) != (1, 1)


@pytest.mark.parametrize("wr,wl", [(2, 3), (1, 2), (3, 1), (5, 7), (4, 6)])
def test_locked_tones_give_reduced_ratio(wr, wl):
    g = math.gcd(wr, wl)
    assert entrainment_ratio(two_tone(wr, wl)) == (wr // g, wl // g)


def test_incommensurate_tones_unresolved():
    assert entrainment_ratio(two_tone(1.0, math.sqrt(2.0))) is None


def test_ratio_above_cap_unresolved():
    assert entrainment_ratio(two_tone(1, 17, periods=200), max_component=16) is None


def test_entrainment_needs_crossings():
    with pytest.raises(EntrainmentError):
        entrainment_ratio(origin())


# ------------------------------------------------------- classification


def test_origin_is_fixed_point():
    assert classify_attractor(origin()).kind == "fixed-point"


def test_normal_is_single_one_to_one_cycle(regime_trajectories):
    rep = classify_attractor(regime_trajectories["Normal"])
    assert (rep.kind, rep.cycle_count, rep.entrainment) == ("limit-cycle", 1, (1, 1))


def test_neoplasm_is_single_cycle(regime_trajectories):
    rep = classify_attractor(regime_trajectories["Neoplasm"])
    assert (rep.kind, rep.cycle_count) == ("limit-cycle", 1)


def test_vocal_palsy_is_torus(regime_trajectories):
    assert classify_attractor(regime_trajectories["VocalPalsy"]).kind == "torus"


def test_period_two_orbit_has_two_cycles():
    dt = 0.01
    t = dt * np.arange(int(200 * np.pi / dt))
    x, v = np.sin(t) + 0.3 * np.sin(t / 2), np.cos(t) + 0.15 * np.cos(t / 2)
    rep = classify_attractor(Trajectory(dt, np.column_stack((x, v, x, v))))
    assert (rep.kind, rep.cycle_count, rep.entrainment) == ("multi-limit-cycle", 2, (1, 1))


def test_unlocked_pair_of_cycles_is_torus():
    assert classify_attractor(two_tone(1.0, math.sqrt(2.0))).kind == "torus"


def test_decaying_oscillation_is_fixed_point():
    dt = 0.01
    t = dt * np.arange(30001)
    x = np.exp(-0.02 * t) * np.sin(t)
    v = np.gradient(x, dt)
    assert classify_attractor(Trajectory(dt, np.column_stack((x, v, x, v)))).kind == "fixed-point"


def test_non_finite_trajectory_raises():
    states = np.zeros((100, 4))
    states[50, 0] = np.nan
    with pytest.raises(ClassificationError):
        classify_attractor(Trajectory(0.01, states))


@pytest.mark.parametrize("name", ["Normal", "Neoplasm"])
def test_settle_invariance(regime_trajectories, name):
    a = classify_attractor(regime_trajectories[name], settle_fraction=0.5)
    b = classify_attractor(regime_trajectories[name], settle_fraction=0.75)
    assert (a.kind, a.entrainment) == (b.kind, b.entrainment)


@pytest.mark.parametrize("alpha", [0.3, 0.4, 0.5, 0.6, 0.7])
def test_symmetric_axis_is_one_to_one_cycle(alpha):
    rep = classify_params(ModelParams(alpha, 0.32, 0.0))
    assert (rep.kind, rep.cycle_count, rep.entrainment) == ("limit-cycle", 1, (1, 1))


def test_report_invariants():
    with pytest.raises(DomainError):
        AttractorReport("limit-cycle", 2)
    with pytest.raises(DomainError):
        AttractorReport("multi-limit-cycle", 1)
    with pytest.raises(DomainError):
        AttractorReport("limit-cycle", 1, (2, 2))
    with pytest.raises(DomainError):
        AttractorReport("spiral")


def test_report_dict_round_trip(regime_trajectories):
    rep = classify_attractor(regime_trajectories["Normal"])
    assert AttractorReport.from_dict(rep.to_dict()) == rep


# ---------------------------------------------------------------- sweeps

SMALL = SimulationConfig(horizon=200.0)


def test_small_grid_near_normal_is_one_to_one():
    grid = bifurcation_sweep((0.45, 0.55), (0.0, 0.1), 0.32, (2, 2))
    assert grid.shape == (2, 2) and grid.one_to_one().all()


def test_uncoupled_symmetric_cell_decays():
    grid = bifurcation_sweep((0.0, 0.5), (0.0, 0.2), 0.32, (2, 2), SMALL)
    assert grid.cell(0.0, 0.0).kind == "fixed-point"


def test_sweep_is_deterministic_and_worker_independent():
    a = bifurcation_sweep((0.3, 0.7), (0.0, 1.0), 0.32, (3, 3), SMALL)
    b = bifurcation_sweep((0.3, 0.7), (0.0, 1.0), 0.32, (3, 3), SMALL, workers=3)
    assert a.cells == b.cells


def test_sweep_resumes_from_checkpoint(tmp_path):
    ck = tmp_path / "sweep.partial"
    full = bifurcation_sweep((0.3, 0.7), (0.0, 1.0), 0.32, (3, 3), SMALL, checkpoint=ck)
    lines = ck.read_text().splitlines()
    assert len(lines) == 10
    # four finished cells and a torn fifth line, as left by a crash
    ck.write_text("\n".join(lines[:5]) + "\n" + lines[5][:5])
    resumed = bifurcation_sweep((0.3, 0.7), (0.0, 1.0), 0.32, (3, 3), SMALL, checkpoint=ck)
    assert resumed.cells == full.cells
    assert bifurcation_sweep((0.3, 0.7), (0.0, 1.0), 0.32, (3, 3), SMALL, checkpoint=ck).cells == full.cells


def test_checkpoint_skips_finished_cells(tmp_path, monkeypatch):
    import vocalfold.phase as phase

    ck = tmp_path / "sweep.partial"
    bifurcation_sweep((0.3, 0.7), (0.0, 1.0), 0.32, (2, 2), SMALL, checkpoint=ck)
    calls = []
    monkeypatch.setattr(phase, "classify_params", lambda *a: calls.append(a))
    bifurcation_sweep((0.3, 0.7), (0.0, 1.0), 0.32, (2, 2), SMALL, checkpoint=ck)
    assert calls == []


def test_grid_csv_format_and_round_trip(tmp_path):
    grid = bifurcation_sweep((0.3, 0.7), (0.0, 1.0), 0.32, (2, 3), SMALL)
    path = tmp_path / "grid.csv"
    grid.write(path)
    assert path.read_text().splitlines()[0] == "alpha,delta,kind,n,m,cycle_count"
    assert (tmp_path / "grid.json").exists()
    back = read_grid_csv(path)
    assert np.array_equal(back.alpha_axis, grid.alpha_axis)
    assert [[c.kind for c in r] for r in back.cells] == [[c.kind for c in r] for r in grid.cells]
    grid.write(tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


def test_sweep_rejects_tiny_grid():
    with pytest.raises(DomainError):
        bifurcation_sweep((0.3, 0.7), (0.0, 1.0), 0.32, (1, 4))


def test_contiguous_region():
    mask = np.array([[1, 1, 0], [0, 1, 0], [1, 0, 1]], dtype=bool)
    region = contiguous_region(mask, (0, 0))
    assert region.sum() == 3 and not region[2, 0]
    assert not contiguous_region(mask, (0, 2)).any()
