"""Poincare sections, entrainment and attractor classification.

The section is ``xi' = 0`` for each fold, crossed from negative to
positive velocity (the displacement minimum of every loop). Return
values are clustered per fold; a periodic orbit revisits a small set of
clusters cyclically, a torus keeps producing new ones.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_fraction, check_scalar
from .exceptions import ClassificationError, DivergenceError, DomainError, EntrainmentError
from .model import DEFAULT_DT, ModelParams, Trajectory, simulate

log = logging.getLogger(__name__)

KINDS = ("fixed-point", "limit-cycle", "multi-limit-cycle", "torus", "chaotic/unclassified")
DIVERGED = "diverged"
OSCILLATORS = {"right": (0, 1), "left": (2, 3)}

MAX_ENTRAINMENT = 16
MAX_CLUSTERS = 16
PHASE_TOL = 2e-2
DECAY_TOL = 1e-2
AMPLITUDE_FLOOR = 1e-8


@dataclass(frozen=True)
class PoincareCrossing:
    t: float
    value: float
    oscillator: str


@dataclass(frozen=True)
class AttractorReport:
    """Outcome of :func:`classify_attractor`.

    ``entrainment`` is the reduced ``(n, m)`` locking ratio of right to
    left loops, or ``None`` when the folds are not phase locked with
    ``n, m <= 16``. ``crossing_counts`` are the raw section counts in the
    common window.
    """

    kind: str
    cycle_count: int = 0
    entrainment: tuple | None = None
    crossing_clusters: tuple = (0, 0)
    crossing_counts: tuple = (0, 0)

    def __post_init__(self):
        if self.kind not in KINDS + (DIVERGED,):
            raise DomainError(f"unknown attractor kind {self.kind!r}")
        if self.kind == "limit-cycle" and self.cycle_count != 1:
            raise DomainError("a limit cycle has cycle_count 1")
        if self.kind == "multi-limit-cycle" and self.cycle_count < 2:
            raise DomainError("multi-limit-cycle needs cycle_count >= 2")
        if self.entrainment is not None:
            n, m = self.entrainment
            if n < 1 or m < 1 or math.gcd(n, m) != 1:
                raise DomainError(f"entrainment {self.entrainment} is not a reduced positive pair")

    @property
    def periodic(self):
        return self.kind in ("limit-cycle", "multi-limit-cycle")

    @property
    def entrainment_label(self):
        if self.entrainment is None:
            return "unresolved"
        return "{}:{}".format(*self.entrainment)

    def to_dict(self):
        d = asdict(self)
        d["entrainment"] = None if self.entrainment is None else list(self.entrainment)
        d["crossing_clusters"] = list(self.crossing_clusters)
        d["crossing_counts"] = list(self.crossing_counts)
        return d

    @classmethod
    def from_dict(cls, d):
        ent = d.get("entrainment")
        return cls(
            kind=d["kind"],
            cycle_count=int(d.get("cycle_count", 0)),
            entrainment=None if ent is None else (int(ent[0]), int(ent[1])),
            crossing_clusters=tuple(d.get("crossing_clusters", (0, 0))),
            crossing_counts=tuple(d.get("crossing_counts", (0, 0))),
        )


# ------------------------------------------------------------ sections


def _settled(traj, settle_fraction):
    check_fraction(settle_fraction, "settle_fraction")
    if not 0.0 <= settle_fraction < 1.0:
        raise DomainError(f"settle_fraction must lie in [0, 1), got {settle_fraction}")
    n = len(traj)
    start = int(np.floor(settle_fraction * (n - 1)))
    if n - start < 2:
        raise DomainError("trajectory is not longer than the settle window")
    return start


def poincare_crossings(traj, oscillator="right", settle_fraction=0.5, direction="up"):
    """Crossings of ``xi' = 0`` after discarding ``settle_fraction`` of the samples.

    Times and displacement values are linearly interpolated between the
    bracketing samples. ``direction`` is ``"up"`` (negative to positive
    velocity) or ``"down"``.
    """
    if oscillator not in OSCILLATORS:
        raise DomainError(f"oscillator must be 'right' or 'left', got {oscillator!r}")
    if direction not in ("up", "down"):
        raise DomainError(f"direction must be 'up' or 'down', got {direction!r}")
    start = _settled(traj, settle_fraction)
    ix, iv = OSCILLATORS[oscillator]
    x = traj.states[start:, ix]
    v = traj.states[start:, iv]
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise ClassificationError("trajectory contains non-finite states")
    if direction == "up":
        idx = np.nonzero((v[:-1] < 0.0) & (v[1:] >= 0.0))[0]
    else:
        idx = np.nonzero((v[:-1] > 0.0) & (v[1:] <= 0.0))[0]
    frac = v[idx] / (v[idx] - v[idx + 1])
    t = traj.dt * (start + idx + frac)
    vals = x[idx] + frac * (x[idx + 1] - x[idx])
    return [PoincareCrossing(float(a), float(b), oscillator) for a, b in zip(t, vals)]


def _times(crossings):
    return np.array([c.t for c in crossings])


def _common_counts(tr, tl):
    lo, hi = max(tr[0], tl[0]), min(tr[-1], tl[-1])
    n = int(np.count_nonzero((tr >= lo) & (tr <= hi)))
    m = int(np.count_nonzero((tl >= lo) & (tl <= hi)))
    return n, m


def _locking(tr, tl, max_component, phase_tol):
    """Smallest ``(n, m)`` for which left-crossing phases repeat every ``n`` right loops."""
    period = (tr[-1] - tr[0]) / (len(tr) - 1)
    # a left crossing that coincides with a right one (1:m locking) must land
    # in the window that starts there, whatever the rounding
    edge = 0.5 * phase_tol * period
    for n in range(1, max_component + 1):
        windows = len(tr) - n
        if windows < n + 1:
            return None
        offsets = []
        for i in range(windows):
            a, b = tr[i] - edge, tr[i + n] - edge
            offsets.append((tl[(tl >= a) & (tl < b)] - tr[i]) / period)
        m = len(offsets[0])
        if m == 0 or m > max_component or math.gcd(n, m) != 1 or any(len(o) != m for o in offsets):
            continue
        # the pattern repeats after n loops, so window i is compared with window i + n;
        # offsets are in loop units and compared modulo the window length
        span = (tr[n:] - tr[:-n]) / period
        ok = True
        for i in range(windows - n):
            d = np.abs(offsets[i + n] - offsets[i])
            if np.max(np.minimum(d, np.abs(span[i] - d))) > phase_tol:
                ok = False
                break
        if ok:
            return n, m
    return None


def entrainment_ratio(traj, settle_fraction=0.5, max_component=MAX_ENTRAINMENT, phase_tol=PHASE_TOL):
    """Reduced locking ratio ``(n, m)`` of right to left loops, or ``None`` if unresolved.

    The folds are ``n:m`` entrained when the positions of the left
    crossings inside every run of ``n`` consecutive right loops repeat
    (to ``phase_tol`` of the run length) with the same count ``m``.
    Ratios whose reduced components exceed ``max_component`` and
    non-locked (quasi-periodic) motion are reported as ``None``.

    Raises
    ------
    EntrainmentError
        If either fold has fewer than two crossings after settling.
    """
    tr = _times(poincare_crossings(traj, "right", settle_fraction))
    tl = _times(poincare_crossings(traj, "left", settle_fraction))
    if len(tr) < 2 or len(tl) < 2:
        raise EntrainmentError(
            f"entrainment undetermined: {len(tr)} right and {len(tl)} left crossings after settling"
        )
    return _locking(tr, tl, max_component, phase_tol)


# ------------------------------------------------------- classification


def _clusters(values, tol):
    """Single-linkage labels of 1-D values with gap tolerance ``tol``."""
    order = np.argsort(values)
    gaps = np.diff(values[order]) > tol
    sorted_labels = np.concatenate(([0], np.cumsum(gaps)))
    labels = np.empty(len(values), dtype=int)
    labels[order] = sorted_labels
    return labels, int(sorted_labels[-1]) + 1 if len(values) else 0


def _cyclic(labels, max_period):
    for p in range(1, max_period + 1):
        if len(labels) <= p:
            return False
        if np.array_equal(labels[p:], labels[:-p]):
            return True
    return False


def _decaying(x, tol):
    """True if the envelope of ``x`` shrinks steadily over the settled window."""
    e1, e2, e3 = (np.max(np.abs(part)) for part in np.array_split(x, 3))
    if e3 < AMPLITUDE_FLOOR:
        return True
    return bool(e3 < e2 < e1 and e3 < (1.0 - tol) * e1)


def classify_attractor(traj, settle_fraction=0.5, cluster_tol=1e-2):
    """Attractor type, limit-cycle count and entrainment of a settled trajectory.

    Rules, in order:

    * fewer than two section crossings on a fold, or an amplitude
      envelope shrinking towards zero on both folds: ``fixed-point``;
    * more than 16 return-value clusters, or more clusters over the full
      settled window than over its first half: ``torus``;
    * cluster labels repeating cyclically on both folds: a periodic
      orbit with ``cycle_count`` the larger per-fold cluster count,
      provided the folds are phase locked (otherwise ``torus``);
    * otherwise ``chaotic/unclassified``.

    Raises
    ------
    ClassificationError
        If the trajectory contains non-finite states.
    """
    check_scalar(cluster_tol, "cluster_tol", low=0.0, include_low=False)
    if not np.all(np.isfinite(traj.states)):
        bad = int(np.argmax(~np.all(np.isfinite(traj.states), axis=1)))
        raise ClassificationError(f"trajectory diverged at t={bad * traj.dt:.6g}")
    right = poincare_crossings(traj, "right", settle_fraction)
    left = poincare_crossings(traj, "left", settle_fraction)
    if len(right) < 2 or len(left) < 2:
        return AttractorReport("fixed-point", crossing_counts=(len(right), len(left)))
    tr, tl = _times(right), _times(left)
    vr = np.array([c.value for c in right])
    vl = np.array([c.value for c in left])
    counts = _common_counts(tr, tl)
    start = _settled(traj, settle_fraction)
    if _decaying(traj.states[start:, 0], DECAY_TOL) and _decaying(traj.states[start:, 2], DECAY_TOL):
        return AttractorReport("fixed-point", crossing_counts=counts)

    lr, kr = _clusters(vr, cluster_tol)
    ll, kl = _clusters(vl, cluster_tol)
    clusters = (kr, kl)
    _, kr_half = _clusters(vr[: len(vr) // 2], cluster_tol)
    _, kl_half = _clusters(vl[: len(vl) // 2], cluster_tol)
    growing = kr > kr_half or kl > kl_half
    if max(clusters) > MAX_CLUSTERS or growing:
        return AttractorReport("torus", 0, _locking(tr, tl, MAX_ENTRAINMENT, PHASE_TOL), clusters, counts)
    if _cyclic(lr, MAX_CLUSTERS) and _cyclic(ll, MAX_CLUSTERS):
        ent = _locking(tr, tl, MAX_ENTRAINMENT, PHASE_TOL)
        if ent is None:
            # each fold repeats but the pair never locks: quasi-periodic
            return AttractorReport("torus", 0, None, clusters, counts)
        cycles = max(clusters)
        kind = "limit-cycle" if cycles == 1 else "multi-limit-cycle"
        return AttractorReport(kind, cycles, ent, clusters, counts)
    return AttractorReport("chaotic/unclassified", 0, None, clusters, counts)


# ------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SimulationConfig:
    """Per-cell simulation and classification settings of a sweep."""

    dt: float = DEFAULT_DT
    horizon: float = 300.0
    settle_fraction: float = 0.5
    cluster_tol: float = 1e-2
    c_r: float = 0.1
    c_l: float = 0.1

    def __post_init__(self):
        check_scalar(self.dt, "dt", low=0.0, include_low=False)
        check_scalar(self.horizon, "horizon", low=0.0, include_low=False)
        check_scalar(self.cluster_tol, "cluster_tol", low=0.0, include_low=False)
        if not 0.0 <= self.settle_fraction < 1.0:
            raise DomainError(f"settle_fraction must lie in [0, 1), got {self.settle_fraction}")


@dataclass
class BifurcationGrid:
    """Attractor reports on an ``(alpha, delta)`` grid at fixed ``beta``.

    ``cells[i][j]`` belongs to ``alpha_axis[i]`` and ``delta_axis[j]``.
    """

    alpha_axis: np.ndarray
    delta_axis: np.ndarray
    beta: float
    cells: list
    config: SimulationConfig = field(default_factory=SimulationConfig)

    def __post_init__(self):
        self.alpha_axis = np.asarray(self.alpha_axis, dtype=float)
        self.delta_axis = np.asarray(self.delta_axis, dtype=float)
        for name, ax in (("alpha_axis", self.alpha_axis), ("delta_axis", self.delta_axis)):
            if ax.ndim != 1 or ax.size < 2 or np.any(np.diff(ax) <= 0):
                raise DomainError(f"{name} must be strictly increasing with at least 2 samples")
        if len(self.cells) != self.alpha_axis.size or any(len(r) != self.delta_axis.size for r in self.cells):
            raise DomainError("cell array does not match axis lengths")

    @property
    def shape(self):
        return self.alpha_axis.size, self.delta_axis.size

    def kinds(self):
        return np.array([[c.kind for c in row] for row in self.cells], dtype=object)

    def one_to_one(self):
        """Boolean mask of cells with a periodic 1:1 entrained attractor."""
        return np.array([[c.periodic and c.entrainment == (1, 1) for c in row] for row in self.cells])

    def cell(self, alpha, delta):
        """Report of the grid cell nearest to ``(alpha, delta)``."""
        i = int(np.argmin(np.abs(self.alpha_axis - alpha)))
        j = int(np.argmin(np.abs(self.delta_axis - delta)))
        return self.cells[i][j]

    def rows(self):
        for i, a in enumerate(self.alpha_axis):
            for j, d in enumerate(self.delta_axis):
                yield i, j, float(a), float(d), self.cells[i][j]

    def to_csv(self, path):
        """``alpha,delta,kind,n,m,cycle_count`` in grid order; unresolved ratios leave n, m empty."""
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha", "delta", "kind", "n", "m", "cycle_count"])
            for _, _, a, d, c in self.rows():
                writer.writerow(_cell_row(a, d, c))

    def sidecar(self):
        return {
            "alpha_axis": self.alpha_axis.tolist(),
            "delta_axis": self.delta_axis.tolist(),
            "beta": self.beta,
            "config": asdict(self.config),
        }

    def write(self, csv_path, json_path=None):
        """CSV plus JSON sidecar (default: same stem with ``.json``)."""
        csv_path = Path(csv_path)
        self.to_csv(csv_path)
        json_path = csv_path.with_suffix(".json") if json_path is None else Path(json_path)
        json_path.write_text(json.dumps(self.sidecar(), indent=2) + "\n")
        return csv_path, json_path


def _cell_row(a, d, c):
    n, m = ("", "") if c.entrainment is None else c.entrainment
    return [f"{a:.17g}", f"{d:.17g}", c.kind, n, m, c.cycle_count]


def classify_params(params, config=None):
    """Simulate ``params`` and classify; divergence yields a ``diverged`` report."""
    config = SimulationConfig() if config is None else config
    try:
        traj = simulate(params, config.dt, config.horizon)
    except DivergenceError:
        return AttractorReport(DIVERGED)
    return classify_attractor(traj, config.settle_fraction, config.cluster_tol)


def _cell(args):
    i, j, alpha, beta, delta, config = args
    params = ModelParams(alpha, beta, delta, config.c_r, config.c_l)
    return i, j, classify_params(params, config)


_CHECKPOINT_HEADER = ["i", "j", "kind", "cycle_count", "n", "m", "kr", "kl", "cr", "cl"]


def _read_checkpoint(path, shape):
    done = {}
    if path is None or not Path(path).exists():
        return done
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CHECKPOINT_HEADER:
            raise DomainError(f"{path} is not a sweep checkpoint")
        for row in reader:
            if len(row) != len(_CHECKPOINT_HEADER):
                continue  # torn final line of an interrupted run
            i, j = int(row[0]), int(row[1])
            if not (0 <= i < shape[0] and 0 <= j < shape[1]):
                raise DomainError(f"checkpoint cell ({i}, {j}) outside the grid")
            ent = None if row[4] == "" else (int(row[4]), int(row[5]))
            done[(i, j)] = AttractorReport(
                row[2], int(row[3]), ent, (int(row[6]), int(row[7])), (int(row[8]), int(row[9]))
            )
    return done


def _checkpoint_row(i, j, c):
    n, m = ("", "") if c.entrainment is None else c.entrainment
    return [i, j, c.kind, c.cycle_count, n, m, *c.crossing_clusters, *c.crossing_counts]


def bifurcation_sweep(alpha_range, delta_range, beta=0.32, grid_shape=(16, 16), config=None,
                      workers=1, checkpoint=None):
    """Classify every cell of an evenly spaced ``(alpha, delta)`` grid.

    Parameters
    ----------
    alpha_range, delta_range : (float, float)
        Inclusive end points of each axis.
    beta : float
    grid_shape : (int, int)
        Samples along alpha and delta, each at least 2.
    config : SimulationConfig, optional
    workers : int
        Processes used for the cells; results are merged by grid index,
        so the output does not depend on this value.
    checkpoint : path, optional
        File receiving each finished cell as it completes. Cells already
        present are not recomputed, so an interrupted sweep resumes.
    """
    config = SimulationConfig() if config is None else config
    na, nd = (int(v) for v in grid_shape)
    if na < 2 or nd < 2:
        raise DomainError(f"grid_shape must be at least 2x2, got {grid_shape}")
    alphas = np.linspace(*alpha_range, na)
    deltas = np.linspace(*delta_range, nd)
    # validate the corners up front so a bad range fails before any work
    for a in (alphas[0], alphas[-1]):
        for d in (deltas[0], deltas[-1]):
            ModelParams(float(a), beta, float(d), config.c_r, config.c_l)

    cells = [[None] * nd for _ in range(na)]
    done = _read_checkpoint(checkpoint, (na, nd))
    for (i, j), rep in done.items():
        cells[i][j] = rep
    todo = [(i, j, float(alphas[i]), beta, float(deltas[j]), config)
            for i in range(na) for j in range(nd) if cells[i][j] is None]
    if done:
        log.info("resuming sweep: %d of %d cells already done", len(done), na * nd)

    fh = writer = None
    if checkpoint is not None:
        fresh = not Path(checkpoint).exists()
        torn = not fresh and not Path(checkpoint).read_bytes().endswith(b"\n")
        fh = Path(checkpoint).open("a", newline="")
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(_CHECKPOINT_HEADER)
        elif torn:
            fh.write("\r\n")  # keep new rows off the torn line
    try:
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1)) as pool:
                results = pool.map(_cell, todo, chunksize=max(1, len(todo) // (4 * workers)))
                _collect(results, cells, fh, writer)
        else:
            _collect(map(_cell, todo), cells, fh, writer)
    finally:
        if fh is not None:
            fh.close()
    return BifurcationGrid(alphas, deltas, float(beta), cells, config)


def _collect(results, cells, fh, writer):
    for i, j, rep in results:
        cells[i][j] = rep
        if writer is not None:
            writer.writerow(_checkpoint_row(i, j, rep))
            fh.flush()


def read_grid_csv(csv_path, json_path=None):
    """Load a grid written by :meth:`BifurcationGrid.write`."""
    csv_path = Path(csv_path)
    json_path = csv_path.with_suffix(".json") if json_path is None else Path(json_path)
    meta = json.loads(json_path.read_text())
    alphas, deltas = np.array(meta["alpha_axis"]), np.array(meta["delta_axis"])
    cells = [[None] * len(deltas) for _ in alphas]
    with csv_path.open(newline="") as fh:
        for k, row in enumerate(csv.DictReader(fh)):
            i, j = divmod(k, len(deltas))
            ent = None if row["n"] == "" else (int(row["n"]), int(row["m"]))
            cells[i][j] = AttractorReport(row["kind"], int(row["cycle_count"]), ent)
    return BifurcationGrid(alphas, deltas, meta["beta"], cells, SimulationConfig(**meta["config"]))


def contiguous_region(mask, seed):
    """4-connected component of ``mask`` containing index ``seed`` (empty if unset)."""
    mask = np.asarray(mask, dtype=bool)
    out = np.zeros_like(mask)
    if not mask[seed]:
        return out
    stack = [seed]
    while stack:
        i, j = stack.pop()
        if out[i, j] or not mask[i, j]:
            continue
        out[i, j] = True
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < mask.shape[0] and 0 <= b < mask.shape[1] and not out[a, b]:
                stack.append((a, b))
    return out
