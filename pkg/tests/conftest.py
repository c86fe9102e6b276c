import numpy as np
import pytest

from vocalfold.glottal import flow_from_displacement
from vocalfold.model import ModelParams, Trajectory, simulate

#: the four reference regimes: normal, neoplasm, phonotrauma, vocal palsy
REGIMES = {
    "Normal": (0.5, 0.32, 0.0),
    "Neoplasm": (0.35, 0.32, 0.6),
    "Phonotrauma": (0.3, 0.32, 0.6),
    "VocalPalsy": (0.4, 0.32, 0.85),
}


def cosine_trajectory(dt, periods=10, phase=0.0):
    """Both folds with xi = sin(t + phase), xi' = cos(t + phase)."""
    t = dt * np.arange(int(round(periods * 2 * np.pi / dt)) + 1)
    x, v = np.sin(t + phase), np.cos(t + phase)
    return Trajectory(dt, np.column_stack((x, v, x, v)))


@pytest.fixture(scope="session")
def normal_params():
    return ModelParams(*REGIMES["Normal"])


@pytest.fixture(scope="session")
def regime_trajectories():
    return {name: simulate(ModelParams(*p), t_end=300.0) for name, p in REGIMES.items()}


@pytest.fixture(scope="session")
def normal_flow(normal_params):
    return flow_from_displacement(simulate(normal_params, t_end=100.0))
