import numpy as np
import pytest

from vocalfold.exceptions import ConfigError
from vocalfold.model import ModelParams
from vocalfold.pathology import (
    AttractorConstraint, Interval, PathologyClassifier, PathologyRegion, classify, classify_point,
    default_regions, regions_from_json, regions_to_json, validate_regions,
)
from vocalfold.phase import AttractorReport

ONE = AttractorReport("limit-cycle", 1, (1, 1), (1, 1), (24, 24))
TWO = AttractorReport("multi-limit-cycle", 2, (1, 1), (2, 2), (24, 24))
TORUS = AttractorReport("torus", 0, (2, 3), (20, 20), (24, 36))
TORUS_UNLOCKED = AttractorReport("torus", 0, None, (18, 15), (24, 24))
FIXED = AttractorReport("fixed-point")


@pytest.mark.parametrize("delta,alpha,report,label", [
    (0.3, 0.5, ONE, "Normal"),
    (0.6, 0.3, TWO, "Phonotrauma"),
    (0.6, 0.35, ONE, "Neoplasm"),
    (0.85, 0.4, TORUS, "VocalPalsy"),
    (0.85, 0.4, TORUS_UNLOCKED, "VocalPalsy"),
])
def test_table_anchors(delta, alpha, report, label):
    c = classify_point(delta, alpha, report)
    assert c.label == label and c.attractor_agrees and c.matched_region.label == label


def test_default_table():
    regions = default_regions()
    assert [r.label for r in regions] == ["Normal", "Neoplasm", "Phonotrauma", "VocalPalsy"]
    normal = regions[0]
    assert 0.0 in normal.delta_box and 0.5 not in normal.delta_box
    assert 0.25 not in normal.alpha_box and 1.0 in normal.alpha_box
    neo = regions[1]
    assert (neo.delta_box.lo, neo.delta_box.hi, neo.alpha_box.lo, neo.alpha_box.hi) == (0.5, 0.7, 0.325, 0.45)
    assert neo.required_attractor.cycle_count == 1


def test_cycle_count_flips_the_shared_edge():
    for _ in range(3):
        assert classify_point(0.6, 0.325, ONE).label == "Neoplasm"
        assert classify_point(0.6, 0.325, TWO).label == "Phonotrauma"


def test_wrong_attractor_is_unclassified():
    assert classify_point(0.6, 0.3, FIXED).label == "Unclassified"
    assert classify_point(0.85, 0.4, ONE).label == "Unclassified"
    assert classify_point(0.3, 0.5, None).label == "Unclassified"


def test_outside_every_box():
    c = classify_point(1.5, 0.1, ONE)
    assert c.label == "Unclassified" and c.matched_region is None and not c.attractor_agrees
    assert set(c.distances) == {"Normal", "Neoplasm", "Phonotrauma", "VocalPalsy"}
    assert all(d > 0 for d in c.distances.values())


def test_non_finite_is_unclassified():
    assert classify_point(np.nan, 0.5, ONE).label == "Unclassified"


def test_boundary_flag_at_model_limit():
    assert classify_point(0.1, 1.0, ONE).boundary
    assert not classify_point(0.1, 0.6, ONE).boundary


def test_specific_constraint_beats_unconstrained():
    loose = PathologyRegion("Neoplasm", Interval(0.0, 0.5), Interval(0.3, 0.7))
    strict = PathologyRegion("Normal", Interval(0.0, 0.5), Interval(0.3, 0.7), AttractorConstraint("limit-cycle", 1))
    assert classify_point(0.2, 0.5, ONE, (loose, strict)).label == "Normal"
    assert classify_point(0.2, 0.5, TWO, (loose, strict)).label == "Neoplasm"


def test_overlap_with_identical_constraints_rejected():
    a = PathologyRegion("Normal", Interval(0.0, 0.5), Interval(0.3, 0.7))
    b = PathologyRegion("Neoplasm", Interval(0.4, 0.6), Interval(0.5, 0.9))
    with pytest.raises(ConfigError):
        validate_regions((a, b))


def test_touching_half_open_boxes_do_not_overlap():
    a = PathologyRegion("Normal", Interval(0.0, 0.5, hi_closed=False), Interval(0.3, 0.7))
    b = PathologyRegion("Neoplasm", Interval(0.5, 0.6), Interval(0.3, 0.7))
    assert len(validate_regions((a, b))) == 2


def test_duplicate_labels_rejected():
    r = default_regions()[0]
    with pytest.raises(ConfigError):
        validate_regions((r, r))


@pytest.mark.parametrize("bad", [
    {"label": "Normal", "delta_min": 0, "delta_max": 1, "alpha_min": 0, "alpha_max": 1, "colour": "red"},
    {"label": "Normal", "delta_min": 0, "delta_max": 1, "alpha_min": 0},
    {"label": "Flu", "delta_min": 0, "delta_max": 1, "alpha_min": 0, "alpha_max": 1},
    {"label": "Normal", "delta_min": 1, "delta_max": 0, "alpha_min": 0, "alpha_max": 1},
    {"label": "Normal", "delta_min": 0, "delta_max": 1, "alpha_min": 0, "alpha_max": 1, "attractor": {"shape": 1}},
    {"label": "Normal", "delta_min": 0, "delta_max": 1, "alpha_min": 0, "alpha_max": 1,
     "attractor": {"entrainment": "2:3"}},
])
def test_bad_region_json(bad):
    with pytest.raises(ConfigError):
        regions_from_json([bad])


def test_region_json_round_trip(tmp_path):
    path = tmp_path / "regions.json"
    regions_to_json(default_regions(), path)
    assert regions_from_json(path) == default_regions()
    assert regions_from_json(path.read_text()) == default_regions()


def test_classify_ignores_beta():
    a = classify(ModelParams(0.5, 0.1, 0.3), ONE)
    b = classify(ModelParams(0.5, 0.9, 0.3), ONE)
    assert a.label == b.label == "Normal"


def test_classifier_estimator():
    clf = PathologyClassifier().fit()
    X = np.array([[0.3, 0.5], [0.6, 0.3], [0.6, 0.35], [0.85, 0.4], [1.9, 0.1]])
    labels = clf.predict(X, [ONE, TWO, ONE, TORUS, ONE])
    assert list(labels) == ["Normal", "Phonotrauma", "Neoplasm", "VocalPalsy", "Unclassified"]
    assert "Unclassified" in clf.classes_


def test_classification_to_dict():
    d = classify_point(0.3, 0.5, ONE).to_dict()
    assert d["label"] == "Normal" and d["matched_region"]["label"] == "Normal"
