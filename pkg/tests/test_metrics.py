import pytest
from hypothesis import given, strategies as st

from botsieve.metrics import EmptyTestSet, evaluate_predictions, f1_score


def test_precision_recall_example():
    # infected class: TP=9, FP=1, FN=0
    y_true = [1] * 9 + [0] * 1 + [0] * 5
    y_pred = [1] * 9 + [1] * 1 + [0] * 5
    m = evaluate_predictions(y_true, y_pred).confusion
    assert (m.tp, m.fp, m.fn) == (9, 1, 0)
    assert m.precision == pytest.approx(0.9)
    assert m.recall == 1.0
    assert m.f1 == pytest.approx(1.8 / 1.9)
    assert round(m.f1, 4) == 0.9474


def test_constant_zero_predictor():
    r = evaluate_predictions([0, 1] * 50, [0] * 100)
    assert r.per_class[1].recall == 0 and r.per_class[1].precision == 0 and r.per_class[1].f1 == 0
    assert r.accuracy == 0.5


def test_perfect_predictions_table():
    y = [0] * 1014 + [1] * 986
    r = evaluate_predictions(y, y)
    assert r.accuracy == 1.0 and r.total == 2000
    assert [r.per_class[c].support for c in (0, 1)] == [1014, 986]
    for c in (0, 1):
        m = r.per_class[c]
        assert m.precision == m.recall == m.f1 == 1.0
    table = r.format_table()
    assert "Precision" in table and "Support" in table and "Accuracy" in table
    assert "1014" in table and "986" in table


def test_empty():
    with pytest.raises(EmptyTestSet):
        evaluate_predictions([], [])


pairs = st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200)


@given(pairs)
def test_accuracy_matches_brute_force(rows):
    y_true, y_pred = zip(*rows)
    r = evaluate_predictions(y_true, y_pred)
    m = r.confusion
    assert r.accuracy == (m.tp + m.tn) / (m.tp + m.tn + m.fp + m.fn)
    assert r.accuracy == sum(a == b for a, b in rows) / len(rows)


@given(pairs)
def test_f1_zero_iff_p_or_r_zero(rows):
    y_true, y_pred = zip(*rows)
    for m in evaluate_predictions(y_true, y_pred).per_class.values():
        assert (m.f1 == 0) == (m.precision == 0 or m.recall == 0)
        if m.f1:
            assert min(m.precision, m.recall) <= m.f1 + 1e-12 <= max(m.precision, m.recall) + 2e-12


def test_f1_score_zero_denominator():
    assert f1_score(0.0, 0.0) == 0.0
