import json
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.io import wavfile

from conftest import REGIMES
from vocalfold.cli import main
from vocalfold.config import CONFIG_ENV
from vocalfold.glottal import flow_from_displacement, read_flow_csv, write_wav
from vocalfold.model import ModelParams, read_trajectory_csv, simulate
from vocalfold.phase import contiguous_region, read_grid_csv
from vocalfold.synthetic import VOWELS, model_flow_signal, synthesize_vowel

FIT_TOML = '[optimizer]\nmethod = "bfgs"\ngrad_tol = 1e-7\n'


@pytest.fixture(autouse=True)
def _no_env_config(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)


def flow_csv(path, theta, t_end=100.0):
    flow_from_displacement(simulate(ModelParams(*theta), t_end=t_end)).to_csv(path)
    return path


def speech_wav(path, theta=REGIMES["Normal"], f0=120.0):
    src, _ = model_flow_signal(ModelParams(*theta), f0, 16000, 0.5)
    write_wav(path, synthesize_vowel(src.samples, 16000, VOWELS["a"]))
    return path


def off_harmonic_energy(u, dt):
    u = u - u.mean()
    power = np.abs(np.fft.rfft(u * np.hanning(len(u)))) ** 2
    f = np.fft.rfftfreq(len(u), dt)
    f1 = f[np.argmax(power)]
    h = np.round(f / f1)
    near = (h >= 1) & (np.abs(f - h * f1) <= 3 * (f[1] - f[0]))
    return 1.0 - power[near].sum() / power.sum()


# ------------------------------------------------------------- simulate


def test_simulate_symmetric(tmp_path):
    assert main(["simulate", "--alpha", "0.5", "--beta", "0.32", "--delta", "0", "--out", str(tmp_path)]) == 0
    traj = read_trajectory_csv(tmp_path / "trajectory.csv")
    assert np.max(np.abs(traj.xi_r - traj.xi_l)) <= 1e-12
    assert read_flow_csv(tmp_path / "flow.csv").samples.shape == (len(traj),)


def test_simulate_toroidal_flow_has_off_harmonic_energy(tmp_path):
    assert main(["simulate", "--alpha", "0.4", "--delta", "0.85", "--t-end", "600", "--out", str(tmp_path / "t")]) == 0
    assert main(["simulate", "--alpha", "0.5", "--delta", "0", "--t-end", "600", "--out", str(tmp_path / "n")]) == 0
    torus = read_flow_csv(tmp_path / "t" / "flow.csv")
    normal = read_flow_csv(tmp_path / "n" / "flow.csv")
    half = len(torus) // 2
    assert off_harmonic_energy(torus.samples[half:], torus.dt) > 0.01
    assert off_harmonic_energy(normal.samples[half:], normal.dt) < 1e-3


def test_simulate_missing_flag_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--alpha", "0.5", "--out", str(tmp_path)])
    assert info.value.code == 1
    assert "--delta" in capsys.readouterr().err


def test_simulate_invalid_value_is_data_error(tmp_path, capsys):
    assert main(["simulate", "--alpha", "-1", "--delta", "0", "--out", str(tmp_path)]) == 2
    assert "alpha" in capsys.readouterr().err


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


# ------------------------------------------------------------ bifurcate


def test_bifurcate_coarse_grid(tmp_path):
    out = tmp_path / "grid.csv"
    args = ["bifurcate", "--alpha-range", "0.3", "0.7", "--delta-range", "0", "1", "--grid", "8", "8",
            "--workers", "2", "--out", str(out)]
    assert main(args) == 0
    grid = read_grid_csv(out)
    region = contiguous_region(grid.one_to_one(), (int(np.argmin(np.abs(grid.alpha_axis - 0.5))), 0))
    assert region[:, 0].all() and region.sum() >= 16
    assert not (tmp_path / "grid.csv.partial").exists()
    first = out.read_bytes()
    assert main(args) == 0 and out.read_bytes() == first


def test_bifurcate_resume_gives_same_grid(tmp_path):
    base = ["bifurcate", "--alpha-range", "0.3", "0.7", "--delta-range", "0", "1", "--grid", "3", "3"]
    assert main(base + ["--out", str(tmp_path / "full.csv")]) == 0
    ck = tmp_path / "part.partial"
    assert main(base + ["--out", str(tmp_path / "tmp.csv"), "--checkpoint", str(ck)]) == 0
    assert not ck.exists()
    # rebuild an interrupted checkpoint from a sweep killed after a few cells
    from vocalfold.phase import bifurcation_sweep

    bifurcation_sweep((0.3, 0.7), (0.0, 1.0), 0.32, (3, 3), checkpoint=ck)
    lines = ck.read_text().splitlines()
    ck.write_text("\n".join(lines[:4]) + "\n")
    assert main(base + ["--out", str(tmp_path / "resumed.csv"), "--checkpoint", str(ck)]) == 0
    assert (tmp_path / "resumed.csv").read_bytes() == (tmp_path / "full.csv").read_bytes()


# ------------------------------------------------------------- estimate


def test_estimate_flow_round_trip(tmp_path):
    cfg = tmp_path / "fit.toml"
    cfg.write_text(FIT_TOML)
    src = flow_csv(tmp_path / "flow.csv", REGIMES["Neoplasm"])
    out = tmp_path / "fit.json"
    trace = tmp_path / "trace.csv"
    code = main(["estimate", str(src), "--config", str(cfg), "--alpha0", "0.4", "--beta0", "0.3", "--delta0", "0.5",
                 "--out", str(out), "--trace", str(trace)])
    assert code == 0
    fit = json.loads(out.read_text())
    assert abs(fit["alpha"] - 0.35) <= 0.05 and abs(fit["beta"] - 0.32) <= 0.05 and abs(fit["delta"] - 0.6) <= 0.1
    assert trace.read_text().startswith("iteration,")


def test_estimate_silent_wav_is_data_error(tmp_path, capsys):
    wavfile.write(tmp_path / "silence.wav", 16000, np.zeros(16000, dtype=np.int16))
    assert main(["estimate", str(tmp_path / "silence.wav")]) == 2
    assert "NoVoicingError" in capsys.readouterr().err


def test_estimate_normal_vowel_lands_in_normal_box(tmp_path, capsys):
    wav = speech_wav(tmp_path / "a.wav")
    assert main(["estimate", str(wav)]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["delta"] < 0.5 and fit["alpha"] > 0.25


def test_estimate_missing_file(tmp_path):
    assert main(["estimate", str(tmp_path / "none.wav")]) == 2


def test_bad_config_is_usage_error(tmp_path, normal_flow):
    (tmp_path / "bad.toml").write_text("[optimizer]\nsteps = 3\n")
    normal_flow.to_csv(tmp_path / "f.csv")
    assert main(["estimate", str(tmp_path / "f.csv"), "--config", str(tmp_path / "bad.toml")]) == 1


def test_dump_config_round_trips(tmp_path):
    cfg = tmp_path / "in.toml"
    cfg.write_text(FIT_TOML)
    dumped = tmp_path / "eff.toml"
    assert main(["simulate", "--alpha", "0.5", "--delta", "0", "--t-end", "10", "--out", str(tmp_path / "s"),
                 "--config", str(cfg), "--dump-config", str(dumped)]) == 0
    from vocalfold.config import load_config

    assert load_config(dumped) == load_config(cfg)


# ------------------------------------------------------------- classify


@pytest.mark.parametrize("alpha,delta,label", [(0.5, 0.0, "Normal"), (0.35, 0.6, "Neoplasm"), (0.4, 0.85, "VocalPalsy")])
def test_classify_parameters(alpha, delta, label, capsys):
    assert main(["classify", "--alpha", str(alpha), "--delta", str(delta)]) == 0
    assert json.loads(capsys.readouterr().out)["classification"]["label"] == label


def test_classify_fit_json(tmp_path, capsys):
    (tmp_path / "fit.json").write_text(json.dumps({"alpha": 0.5, "beta": 0.32, "delta": 0.1}))
    assert main(["classify", str(tmp_path / "fit.json")]) == 0
    assert json.loads(capsys.readouterr().out)["classification"]["label"] == "Normal"


def test_classify_fit_json_missing_key(tmp_path):
    (tmp_path / "fit.json").write_text(json.dumps({"alpha": 0.5}))
    assert main(["classify", str(tmp_path / "fit.json")]) == 1


def test_classify_needs_input():
    assert main(["classify", "--alpha", "0.5"]) == 1


def test_classify_recording(tmp_path, capsys):
    src = flow_csv(tmp_path / "n.csv", REGIMES["Normal"])
    assert main(["classify", str(src)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["classification"]["label"] == "Normal" and doc["status"] == "ok"


# ---------------------------------------------------------------- batch


def test_batch_empty_directory(tmp_path, caplog):
    (tmp_path / "in").mkdir()
    out = tmp_path / "report.json"
    assert main(["batch", str(tmp_path / "in"), "--out", str(out)]) == 0
    assert json.loads(out.read_text()) == {"files": [], "summary": {}}
    assert "no input files" in caplog.text
    assert (tmp_path / "report.csv").read_text().startswith("path,status,")


def test_batch_missing_directory(tmp_path):
    assert main(["batch", str(tmp_path / "nope"), "--out", str(tmp_path / "r.json")]) == 2


def test_batch_isolates_corrupt_file(tmp_path):
    d = tmp_path / "in"
    d.mkdir()
    for name in ("a", "c"):
        flow_csv(d / f"{name}.csv", REGIMES["Normal"])
    (d / "b.csv").write_text("t,u0\nnot,numbers\n")
    out = tmp_path / "r.json"
    assert main(["batch", str(d), "--pattern", "*.csv", "--workers", "2", "--out", str(out)]) == 0
    files = json.loads(out.read_text())["files"]
    assert [os.path.basename(f["path"]) for f in files] == ["a.csv", "b.csv", "c.csv"]
    assert [f["status"] for f in files] == ["ok", "error", "ok"]
    assert files[1]["error"]


# ------------------------------------------------------------ processes


def run_cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "vocalfold.cli", *args], capture_output=True, text=True,
                          env={**os.environ, **(env or {})})


def test_env_var_config_in_subprocess(tmp_path):
    (tmp_path / "bad.toml").write_text("[nonsense]\n")
    r = run_cli("simulate", "--alpha", "0.5", "--delta", "0", "--out", str(tmp_path / "o"),
                env={CONFIG_ENV: str(tmp_path / "bad.toml")})
    assert r.returncode == 1 and "nonsense" in r.stderr
    r = run_cli("simulate", "--alpha", "0.5", "--delta", "0", "--t-end", "5", "--out", str(tmp_path / "o"))
    assert r.returncode == 0


def test_numerical_failure_exit_code(tmp_path):
    r = run_cli("simulate", "--alpha", "0.5", "--delta", "0", "--c-r", "2", "--c-l", "2", "--dt", "3",
                "--t-end", "600", "--out", str(tmp_path))
    assert r.returncode == 3 and "DivergenceError" in r.stderr
