"""End-to-end analysis of one recording and batches of recordings.

speech WAV -> inverse filter -> fit -> re-simulation -> attractor -> label
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import RunConfig
from .estimator import FitResult, estimate
from .exceptions import DomainError, VocalFoldError
from .glottal import GlottalFlow, estimate_f0, inverse_filter, load_wav, read_flow_csv
from .pathology import Classification, classify
from .phase import AttractorReport, classify_params

log = logging.getLogger(__name__)

INPUT_KINDS = ("auto", "speech", "flow")


@dataclass
class Analysis:
    """Everything derived from one input file."""

    path: str
    f0: float | None = None
    fit: FitResult | None = None
    report: AttractorReport | None = None
    classification: Classification | None = None
    error: str | None = None
    error_type: str | None = None

    @property
    def ok(self):
        return self.error is None

    @property
    def label(self):
        return None if self.classification is None else self.classification.label

    def to_dict(self):
        d = {"path": self.path, "status": "ok" if self.ok else "error", "f0": self.f0}
        if self.fit is not None:
            d["fit"] = self.fit.to_dict()
        if self.report is not None:
            d["attractor"] = self.report.to_dict()
        if self.classification is not None:
            d["classification"] = self.classification.to_dict()
        if not self.ok:
            d["error"] = self.error
            d["error_type"] = self.error_type
        return d

    def row(self):
        fit, rep = self.fit, self.report
        return {
            "path": self.path,
            "status": "ok" if self.ok else "error",
            "f0": "" if self.f0 is None else f"{self.f0:.6g}",
            "alpha": "" if fit is None else f"{fit.params.alpha:.6g}",
            "beta": "" if fit is None else f"{fit.params.beta:.6g}",
            "delta": "" if fit is None else f"{fit.params.delta:.6g}",
            "objective": "" if fit is None else f"{fit.objective:.6g}",
            "converged": "" if fit is None else str(fit.converged).lower(),
            "kind": "" if rep is None else rep.kind,
            "cycle_count": "" if rep is None else rep.cycle_count,
            "entrainment": "" if rep is None else rep.entrainment_label,
            "label": self.label or "",
            "error": self.error or "",
        }


ROW_FIELDS = tuple(Analysis("").row())


def load_measured(path, kind="auto", config=None):
    """Glottal flow from a file, and the pitch in Hz when the flow is sampled in Hz.

    ``kind="speech"`` inverse-filters a microphone WAV; ``kind="flow"``
    reads a WAV that already holds a glottal flow, or a ``t,u0`` CSV on the
    model grid. ``auto`` picks ``flow`` for CSV files and ``speech``
    otherwise.
    """
    config = RunConfig() if config is None else config
    path = Path(path)
    if kind not in INPUT_KINDS:
        raise DomainError(f"input kind must be one of {INPUT_KINDS}, got {kind!r}")
    if kind == "auto":
        kind = "flow" if path.suffix.lower() == ".csv" else "speech"
    if path.suffix.lower() == ".csv":
        if kind == "speech":
            raise DomainError("speech input must be a WAV file")
        return read_flow_csv(path), None
    sig = load_wav(path)
    if kind == "speech":
        flow = inverse_filter(sig, config.inverse_filter, config.physical)
    else:
        flow = GlottalFlow(sig.samples, source="measured", sample_rate=sig.sample_rate)
    f0 = estimate_f0(sig, config.pitch.fmin, config.pitch.fmax)
    return flow, f0


def fit_flow(flow, config=None):
    config = RunConfig() if config is None else config
    return estimate(flow, config.init.params(config.simulation), config.optimizer, config.physical,
                    config.simulation.dt)


def characterise(params, config=None):
    """Attractor report of ``params`` and its pathology label."""
    config = RunConfig() if config is None else config
    report = classify_params(params, config.simulation)
    return report, classify(params, report, config.regions)


def analyze_file(path, config=None, kind="auto"):
    """Run the full pipeline on one file; failures are captured, not raised."""
    config = RunConfig() if config is None else config
    result = Analysis(str(path))
    try:
        flow, result.f0 = load_measured(path, kind, config)
        result.fit = fit_flow(flow, config)
        result.report, result.classification = characterise(result.fit.params, config)
    except (VocalFoldError, OSError, ValueError) as exc:
        result.error = str(exc)
        result.error_type = type(exc).__name__
        log.warning("%s: %s", path, exc)
    return result


# ------------------------------------------------------------- batches


@dataclass
class BatchReport:
    """One :class:`Analysis` per input, ordered by path, plus label counts."""

    analyses: list = field(default_factory=list)

    @property
    def summary(self):
        counts = Counter(a.label if a.ok else "error" for a in self.analyses)
        return dict(sorted(counts.items()))

    def to_dict(self):
        return {"files": [a.to_dict() for a in self.analyses], "summary": self.summary}

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=ROW_FIELDS)
            writer.writeheader()
            for a in self.analyses:
                writer.writerow(a.row())


def _analyze(args):
    path, config, kind = args
    return analyze_file(path, config, kind)


def run_batch(paths, config=None, kind="auto", workers=None):
    """Analyse every path; the result order follows the sorted paths."""
    config = RunConfig() if config is None else config
    workers = config.batch.workers if workers is None else int(workers)
    paths = sorted(str(p) for p in paths)
    jobs = [(p, config, kind) for p in paths]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            analyses = list(pool.map(_analyze, jobs))
    else:
        analyses = [_analyze(j) for j in jobs]
    return BatchReport(analyses)


def collect_inputs(directory, pattern=None, config=None):
    config = RunConfig() if config is None else config
    directory = Path(directory)
    if not directory.is_dir():
        raise DomainError(f"{directory} is not a directory")
    pattern = config.batch.pattern if pattern is None else pattern
    return sorted(p for p in directory.glob(pattern) if p.is_file())
