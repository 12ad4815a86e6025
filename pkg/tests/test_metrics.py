import math
from fractions import Fraction
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fame.errors import ArityError, CoverageError, DegenerateLabelsError, DuplicateIdError, FormatError
from fame.metrics import (ConfigurationGrid, EerResult, ScoreFile, compute_det, compute_eer,
                          det_from_arrays, display_round, eer_from_arrays, format_scores,
                          overall_score, parse_scores)
from fame.trials import GroundTruth

from oracles import brute_force_eer, random_instance


def _files(match, nonmatch):
    scores, labels = {}, {}
    for i, s in enumerate(match):
        scores[f"m{i}"], labels[f"m{i}"] = s, 1
    for i, s in enumerate(nonmatch):
        scores[f"n{i}"], labels[f"n{i}"] = s, 0
    return ScoreFile(scores), GroundTruth(labels)


def test_parse_reference_score_lines():
    assert parse_scores("ysuvkz41 0.9988").scores == {"ysuvkz41": 0.9988}
    assert parse_scores("yx4nfa35 1.5321").scores == {"yx4nfa35": 1.5321}


@pytest.mark.parametrize("text", ["abc NaN", "abc inf", "abc -Infinity", "abc high"])
def test_non_finite_or_non_numeric_scores(text):
    with pytest.raises(FormatError) as err:
        parse_scores(text)
    assert err.value.line == 1


def test_duplicate_scores_rejected():
    with pytest.raises(DuplicateIdError):
        parse_scores("a 1\na 2\n")


def test_score_round_trip():
    text = "ysuvkz41 0.9988\ntog3zj45 0.1146\nky5xfj1d 0.6514\nyx4nfa35 1.5321\nbowsaf5e 1.6578\n"
    assert format_scores(parse_scores(text)) == text


def test_det_perfect_separation():
    det = compute_det(*_files([0.9, 0.8], [0.2, 0.1]))
    assert det.at(0.5) == (0.0, 0.0)


def test_det_all_tied():
    det = compute_det(*_files([0.5, 0.5], [0.5, 0.5]))
    assert det.at(0.5) == (1.0, 0.0)
    assert det.points[-1] == (math.inf, 0.0, 1.0)
    assert det.at(0.6) == (0.0, 1.0)


def test_det_direct_count():
    det = compute_det(*_files([0.9, 0.3], [0.7, 0.1]))
    assert det.at(0.7) == (0.5, 0.5)


def test_det_invariants_on_example():
    det = compute_det(*_files([0.9, 0.8, 0.3], [0.7, 0.2, 0.1]))
    assert np.all(np.diff(det.thresholds) > 0)
    assert det.far[0] == 1.0 and det.frr[-1] == 1.0
    assert len(det) == 7


def test_eer_examples():
    assert compute_eer(*_files([1.0, 0.9], [0.2, 0.1])).eer == 0.0
    assert compute_eer(*_files([0.4] * 3, [0.4] * 5)).eer == 50.0


def test_eer_six_trial_fixture():
    # frozen from oracles.brute_force_eer: exactly 100/3
    assert brute_force_eer([0.9, 0.8, 0.3, 0.7, 0.2, 0.1], [1, 1, 1, 0, 0, 0]) == Fraction(100, 3)
    result = compute_eer(*_files([0.9, 0.8, 0.3], [0.7, 0.2, 0.1]))
    assert result.eer == pytest.approx(100 / 3, abs=1e-12)
    assert result.threshold == 0.7


def test_degenerate_and_coverage_errors():
    with pytest.raises(DegenerateLabelsError):
        compute_eer(ScoreFile({"a": 1.0}), GroundTruth({"a": 1}))
    with pytest.raises(CoverageError) as err:
        compute_eer(ScoreFile({"a": 1.0}), GroundTruth({"a": 1, "b": 0}))
    assert "b" in str(err.value)


def test_extra_scored_ids_ignored_with_count():
    scores, gt = _files([0.9], [0.1])
    scores = ScoreFile(dict(scores.scores, extra=0.5))
    result = compute_eer(scores, gt)
    assert result.eer == 0.0 and result.n_ignored == 1


@pytest.mark.parametrize("values, full, shown", [
    ((29.3, 37.9, 40.4, 25.8), 33.35, "33.4"),
    ((34.5, 43.7, 43.2, 39.6), 40.25, "40.2"),
    ((0, 0, 0, 0), 0.0, "0.0"),
])
def test_overall_score_table_values(values, full, shown):
    assert overall_score(values) == pytest.approx(full, abs=1e-12)
    assert display_round(overall_score(values)) == shown


def test_overall_score_arity():
    with pytest.raises(ArityError):
        overall_score([1.0, 2.0, 3.0])


def test_overall_score_permutation_invariant_exactly():
    values = (29.3, 37.9, 40.4, 25.8)
    results = {overall_score(p) for p in itertools.permutations(values)}
    assert len(results) == 1


@given(st.lists(st.floats(0, 100), min_size=4, max_size=4))
def test_overall_bounds(values):
    o = overall_score(values)
    assert min(values) - 1e-12 <= o <= max(values) + 1e-12


def test_configuration_grid():
    grid = ConfigurationGrid(("English", "Urdu"), {
        ("English", "English"): EerResult(29.3, 0.0), ("English", "Urdu"): EerResult(37.9, 0.0),
        ("Urdu", "English"): EerResult(40.4, 0.0), ("Urdu", "Urdu"): EerResult(25.8, 0.0)})
    assert display_round(grid.overall) == "33.4"
    assert grid.heard("Urdu") == 25.8 and grid.unheard("English") == 37.9
    table = grid.format_table()
    assert "33.4" in table and "Urdu train" in table
    with pytest.raises(ArityError):
        ConfigurationGrid(("English", "Urdu"), {("English", "English"): EerResult(1.0, 0.0)})


def test_oracle_agreement_sample():
    rng = np.random.default_rng(11)
    for _ in range(200):
        scores, labels = random_instance(rng)
        assert eer_from_arrays(scores, labels).eer == pytest.approx(
            float(brute_force_eer(scores, labels)), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.booleans()), min_size=2, max_size=60))
def test_det_monotone_and_bounds(rows):
    labels = [int(b) for _, b in rows]
    if len(set(labels)) < 2:
        labels[0], labels[1] = 0, 1
    scores = [s / 4 for s, _ in rows]
    det = det_from_arrays(scores, labels)
    assert np.all(np.diff(det.thresholds) > 0)
    assert np.all(np.diff(det.far) <= 0) and np.all(np.diff(det.frr) >= 0)
    assert det.far[0] == 1.0 and det.frr[0] == 0.0
    assert det.far[-1] == 0.0 and det.frr[-1] == 1.0
    eer = eer_from_arrays(scores, labels).eer
    assert 0.0 <= eer <= 100.0
    # label-swap duality
    swapped = eer_from_arrays([-s for s in scores], [1 - y for y in labels]).eer
    assert swapped == pytest.approx(eer, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rank_invariance(seed):
    rng = np.random.default_rng(seed)
    scores, labels = random_instance(rng, n_max=80)
    base = eer_from_arrays(scores, labels).eer
    s = np.asarray(scores)
    for g in (lambda x: 3.0 * x - 7.0, np.exp, np.arctan, lambda x: x ** 3 + x):
        assert eer_from_arrays(g(s), labels).eer == base
