import math

import numpy as np
import pytest

from flipattack import (Dataset, MetricsRecord, StructuralError, ValidationError, emit_metrics_csv,
                        evaluate, fooling_ratio, format_summary, load_metrics_csv, mean_l1_fooled,
                        score)

from conftest import linear_model


@pytest.fixture
def toy():
    m = linear_model([1.0, 0.0])
    X = np.array([[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0], [-2.0, 0.0]])
    return m, X, np.array([1, 1, 0, 0])


class TestScore:
    @pytest.mark.parametrize("fr,d,expected", [(1.0, 0.0, 1.0), (1.0, 0.0012, 0.976286),
                                               (1.0, 0.002, 0.960789)])
    def test_values(self, fr, d, expected):
        assert score(fr, d) == pytest.approx(expected, abs=1e-6)

    def test_sentinel(self):
        assert score(0.0, None) == 0.0
        assert score(1.0, None) == 0.0


class TestFoolingRatio:
    def test_identity(self, toy):
        m, X, y = toy
        assert fooling_ratio(m, X, X, y) == 0.0

    def test_all_flipped(self, toy):
        m, X, y = toy
        assert fooling_ratio(m, X, -X, y) == 1.0

    def test_three_of_four(self, toy):
        m, X, y = toy
        adv = -X
        adv[3] = X[3]
        assert fooling_ratio(m, X, adv, y) == 0.75

    def test_only_correct_rows_count(self, toy):
        m, X, _ = toy
        y = np.array([1, 1, 0, 1])  # row 3 misclassified
        adv = -X
        assert fooling_ratio(m, X, adv, y) == 1.0

    def test_nothing_correct(self, toy):
        m, X, y = toy
        with pytest.raises(ValidationError, match="classifies nothing correctly"):
            fooling_ratio(m, X, X, 1 - y)

    def test_shape_mismatch(self, toy):
        m, X, y = toy
        with pytest.raises(StructuralError):
            fooling_ratio(m, X, X[:2], y)


class TestMeanL1:
    def test_one_row(self):
        x = np.zeros((1, 4))
        adv = np.array([[0.001, -0.002, 0.0, 0.0]])
        assert mean_l1_fooled(x, adv, [True]) == pytest.approx(0.003, abs=1e-15)

    def test_mean_of_two(self):
        x = np.zeros((3, 2))
        adv = np.array([[0.001, 0.0], [0.0, -0.003], [5.0, 5.0]])
        assert mean_l1_fooled(x, adv, [True, True, False]) == pytest.approx(0.002, abs=1e-15)

    def test_none_fooled(self):
        assert mean_l1_fooled(np.zeros((2, 2)), np.ones((2, 2)), [False, False]) is None


class TestEvaluate:
    def test_record(self, toy):
        m, X, y = toy
        adv = X.copy()
        adv[0, 0] = -0.5
        r = evaluate(m, X, adv, y, round=3)
        assert (r.round, r.n_fooled, r.fooling_ratio) == (3, 1, 0.25)
        assert r.mean_l1_fooled == 1.5
        assert r.score == pytest.approx(0.25 * math.exp(-30))

    def test_summary(self, toy):
        m, X, y = toy
        assert format_summary(evaluate(m, X, X, y)) == "FR=0 D=\u2014 S=0"


class TestCsv:
    def test_single_record_round_trip(self, tmp_path):
        rec = MetricsRecord(1, 1.0, 0.002, 0.960789, 500)
        p = tmp_path / "m.csv"
        emit_metrics_csv([rec], p)
        lines = p.read_text().splitlines()
        assert lines[0] == "round,fooling_ratio,mean_l1_fooled,score,n_fooled"
        assert len(lines) == 2
        assert load_metrics_csv(p) == [rec]

    def test_sentinel_round_trip(self, tmp_path):
        recs = [MetricsRecord(1, 0.0, None, 0.0, 0), MetricsRecord(2, 1 / 3, 0.1 + 0.2, 0.7, 3)]
        p = tmp_path / "m.csv"
        emit_metrics_csv(recs, p)
        assert load_metrics_csv(p) == recs

    def test_empty(self, tmp_path):
        with pytest.raises(ValidationError):
            emit_metrics_csv([], tmp_path / "m.csv")

    def test_unwritable(self, tmp_path):
        with pytest.raises(ValidationError):
            emit_metrics_csv([MetricsRecord(1, 0.0, None, 0.0, 0)], tmp_path / "no" / "m.csv")

    def test_bad_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a,b\n")
        with pytest.raises(StructuralError):
            load_metrics_csv(p)
