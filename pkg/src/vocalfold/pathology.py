"""Voice-pathology regions in the (delta, alpha) plane.

Each region is a box with optional attractor requirements. A point is
labelled by the first region, in table order, whose box contains it and
whose requirements the attractor report meets; regions with more
requirements win over regions with fewer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigError, DomainError
from .model import ModelParams

LABELS = ("Normal", "Neoplasm", "Phonotrauma", "VocalPalsy", "Unclassified")
ENTRAINMENT_FORMS = ("1:1", "non-1:1")
#: projection limits of the fit; a point on them is flagged
PARAM_LIMITS = {"alpha": (0.0, 1.0), "delta": (0.0, 2.0)}


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ConfigError("interval bounds must be finite")
        empty = self.lo > self.hi or (self.lo == self.hi and not (self.lo_closed and self.hi_closed))
        if empty:
            raise ConfigError(f"empty interval {self}")

    def __contains__(self, x):
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return bool(above and below)

    @property
    def width(self):
        return self.hi - self.lo

    def distance(self, x):
        """Distance outside the interval in units of its width (0 inside)."""
        gap = max(self.lo - x, x - self.hi, 0.0)
        return gap / self.width if self.width > 0 else gap

    def overlaps(self, other):
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo < hi:
            return True
        if lo > hi:
            return False
        return lo in self and lo in other

    def __str__(self):
        return "{}{:g}, {:g}{}".format("[" if self.lo_closed else "(", self.lo, self.hi,
                                       "]" if self.hi_closed else ")")


@dataclass(frozen=True)
class AttractorConstraint:
    """Optional requirements on an :class:`AttractorReport`; ``None`` means any."""

    kind: str | None = None
    cycle_count: int | None = None
    entrainment: str | None = None

    def __post_init__(self):
        if self.entrainment is not None and self.entrainment not in ENTRAINMENT_FORMS:
            raise ConfigError(f"entrainment form must be one of {ENTRAINMENT_FORMS}, got {self.entrainment!r}")
        if self.cycle_count is not None and (isinstance(self.cycle_count, bool) or self.cycle_count < 0):
            raise ConfigError(f"cycle_count must be a non-negative integer, got {self.cycle_count!r}")

    @property
    def specificity(self):
        return sum(v is not None for v in (self.kind, self.cycle_count, self.entrainment))

    def matches(self, report):
        if self.specificity == 0:
            return True
        if report is None:
            return False
        if self.kind is not None and report.kind != self.kind:
            return False
        if self.cycle_count is not None and report.cycle_count != self.cycle_count:
            return False
        if self.entrainment == "1:1" and report.entrainment != (1, 1):
            return False
        if self.entrainment == "non-1:1" and (report.entrainment == (1, 1) or report.kind == "fixed-point"):
            return False
        return True


@dataclass(frozen=True)
class PathologyRegion:
    label: str
    delta_box: Interval
    alpha_box: Interval
    required_attractor: AttractorConstraint = field(default_factory=AttractorConstraint)

    def __post_init__(self):
        if self.label not in LABELS[:-1]:
            raise ConfigError(f"label must be one of {LABELS[:-1]}, got {self.label!r}")

    def contains(self, delta, alpha):
        return delta in self.delta_box and alpha in self.alpha_box

    def distance(self, delta, alpha):
        return float(np.hypot(self.delta_box.distance(delta), self.alpha_box.distance(alpha)))

    def to_dict(self):
        d = {
            "label": self.label,
            "delta_min": self.delta_box.lo, "delta_max": self.delta_box.hi,
            "alpha_min": self.alpha_box.lo, "alpha_max": self.alpha_box.hi,
        }
        for axis, box in (("delta", self.delta_box), ("alpha", self.alpha_box)):
            if not box.lo_closed:
                d[f"{axis}_min_open"] = True
            if not box.hi_closed:
                d[f"{axis}_max_open"] = True
        c = self.required_attractor
        attractor = {k: v for k, v in (("kind", c.kind), ("cycle_count", c.cycle_count),
                                       ("entrainment", c.entrainment)) if v is not None}
        if attractor:
            d["attractor"] = attractor
        return d

    @classmethod
    def from_dict(cls, d):
        allowed = {"label", "delta_min", "delta_max", "alpha_min", "alpha_max", "attractor",
                   "delta_min_open", "delta_max_open", "alpha_min_open", "alpha_max_open"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown region keys {sorted(unknown)}")
        try:
            boxes = {
                axis: Interval(float(d[f"{axis}_min"]), float(d[f"{axis}_max"]),
                               not d.get(f"{axis}_min_open", False), not d.get(f"{axis}_max_open", False))
                for axis in ("delta", "alpha")
            }
            attractor = dict(d.get("attractor", {}))
            bad = set(attractor) - {"kind", "cycle_count", "entrainment"}
            if bad:
                raise ConfigError(f"unknown attractor keys {sorted(bad)}")
            return cls(d["label"], boxes["delta"], boxes["alpha"], AttractorConstraint(**attractor))
        except KeyError as exc:
            raise ConfigError(f"region is missing {exc}") from exc


@dataclass(frozen=True)
class Classification:
    label: str
    matched_region: PathologyRegion | None
    attractor_agrees: bool
    distances: dict
    boundary: bool = False

    def to_dict(self):
        return {
            "label": self.label,
            "matched_region": None if self.matched_region is None else self.matched_region.to_dict(),
            "attractor_agrees": self.attractor_agrees,
            "distances": dict(self.distances),
            "boundary": self.boundary,
        }


def default_regions():
    """Built-in table: Normal, Neoplasm, Phonotrauma, VocalPalsy."""
    return (
        PathologyRegion("Normal", Interval(0.0, 0.5, hi_closed=False), Interval(0.25, 1.0, lo_closed=False),
                        AttractorConstraint("limit-cycle", 1, "1:1")),
        PathologyRegion("Neoplasm", Interval(0.5, 0.7), Interval(0.325, 0.45),
                        AttractorConstraint("limit-cycle", 1)),
        PathologyRegion("Phonotrauma", Interval(0.5, 0.7), Interval(0.25, 0.325),
                        AttractorConstraint("multi-limit-cycle", 2)),
        PathologyRegion("VocalPalsy", Interval(0.75, 0.95), Interval(0.35, 0.45),
                        AttractorConstraint("torus", None, "non-1:1")),
    )


def validate_regions(regions):
    """Check label uniqueness and reject overlapping boxes with identical constraints."""
    regions = tuple(regions)
    if not regions:
        raise ConfigError("region table is empty")
    labels = [r.label for r in regions]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate region labels in {labels}")
    for i, a in enumerate(regions):
        for b in regions[i + 1 :]:
            if (a.required_attractor == b.required_attractor and a.delta_box.overlaps(b.delta_box)
                    and a.alpha_box.overlaps(b.alpha_box)):
                raise ConfigError(f"regions {a.label} and {b.label} overlap with identical attractor constraints")
    return regions


def _parse(text, where):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def regions_from_json(source):
    """Region table from a JSON path, string or already-parsed list."""
    if isinstance(source, str) and source.lstrip()[:1] in ("[", "{"):
        data = _parse(source, "region table")
    elif isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"region file {path} not found")
        data = _parse(path.read_text(), str(path))
    else:
        data = source
    if isinstance(data, dict):
        data = data.get("regions", data)
    if not isinstance(data, list):
        raise ConfigError("region table must be a JSON list of regions")
    return validate_regions(PathologyRegion.from_dict(d) for d in data)


def regions_to_json(regions, path=None):
    text = json.dumps([r.to_dict() for r in regions], indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def _on_limits(delta, alpha):
    return alpha in PARAM_LIMITS["alpha"] or delta in PARAM_LIMITS["delta"][1:]


def classify_point(delta, alpha, report=None, regions=None):
    """Label of ``(delta, alpha)`` given an optional attractor report."""
    regions = default_regions() if regions is None else regions
    delta, alpha = float(delta), float(alpha)
    distances = {r.label: (r.distance(delta, alpha) if np.isfinite(delta) and np.isfinite(alpha) else float("inf"))
                 for r in regions}
    if not (np.isfinite(delta) and np.isfinite(alpha)):
        return Classification("Unclassified", None, False, distances)
    boxed = [(i, r) for i, r in enumerate(regions) if r.contains(delta, alpha)]
    matched = [(i, r) for i, r in boxed if r.required_attractor.matches(report)]
    boundary = _on_limits(delta, alpha)
    if not matched:
        return Classification("Unclassified", None, False, distances, boundary)
    _, best = min(matched, key=lambda ir: (-ir[1].required_attractor.specificity, ir[0]))
    return Classification(best.label, best, True, distances, boundary)


def classify(params, report, regions=None):
    """Pathology label of fitted parameters and the re-simulated attractor.

    Only ``delta`` and ``alpha`` enter; ``beta`` is ignored.
    """
    if not isinstance(params, ModelParams):
        raise DomainError("params must be ModelParams")
    return classify_point(params.delta, params.alpha, report, regions)


class PathologyClassifier(ClassifierMixin, BaseEstimator):
    """Scikit-learn style front end of :func:`classify_point`.

    ``X`` holds rows of ``(delta, alpha)``; attractor reports are passed
    alongside to :meth:`predict`. ``fit`` only validates the region table
    (the rule set is fixed, nothing is learned).
    """

    def __init__(self, regions=None):
        self.regions = regions

    def fit(self, X=None, y=None):
        self.regions_ = validate_regions(default_regions() if self.regions is None else self.regions)
        self.classes_ = np.array([r.label for r in self.regions_] + ["Unclassified"])
        return self

    def classify(self, X, reports=None):
        check_is_fitted(self, "regions_")
        X = check_array(X, ensure_all_finite=False)
        if X.shape[1] != 2:
            raise DomainError(f"X must have two columns (delta, alpha), got {X.shape[1]}")
        reports = [None] * len(X) if reports is None else list(reports)
        if len(reports) != len(X):
            raise DomainError("one attractor report per row is required")
        return [classify_point(d, a, rep, self.regions_) for (d, a), rep in zip(X, reports)]

    def predict(self, X, reports=None):
        return np.array([c.label for c in self.classify(X, reports)])


__all__ = [
    "AttractorConstraint",
    "Classification",
    "Interval",
    "PathologyClassifier",
    "PathologyRegion",
    "classify",
    "classify_point",
    "default_regions",
    "regions_from_json",
    "regions_to_json",
    "validate_regions",
]
