import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weldparams.evaluation import (Choice, CombinedPredictor, Recommendation, combined_predict, evaluate, mae,
                                   recommend, render_table, report_from_predictions, tolerance_accuracy)
from weldparams.dataset import synthesize

PARAMS = ("energy", "amplitude", "pressure")

# accuracy / MAE per model from the reference four-model comparison
REFERENCE_SCORES = {
    "MLR": {"energy": (0.90, 30.07), "amplitude": (0.70, 10.73), "pressure": (0.50, 0.26)},
    "SVR": {"energy": (0.20, 187.6), "amplitude": (0.80, 9.08), "pressure": (0.40, 0.35)},
    "ANN": {"energy": (0.90, 16.25), "amplitude": (0.40, 15.41), "pressure": (0.40, 0.24)},
    "CNN": {"energy": (1.00, 26.2), "amplitude": (0.60, 11.0), "pressure": (0.30, 0.78)},
}


def fake_report(name, figures, n=10):
    """A report whose scores carry the given (accuracy, mae) per parameter."""
    from weldparams.evaluation import EvalReport, ParamScore

    scores = {p: ParamScore(figures[p][1], figures[p][0], n) for p in PARAMS}
    return EvalReport(name, scores, np.ones((n, 3)), np.ones((n, 3)))


def test_mae_examples():
    assert mae([1, 2, 3], [1, 2, 3]) == 0
    assert mae([1, 3], [2, 5]) == 1.5
    r = np.random.default_rng(0)
    a, b = r.normal(size=10), r.normal(size=10)
    total = 0.0
    for x, y in zip(a, b):
        total += abs(y - x)
    assert mae(a, b) == pytest.approx(total / 10, abs=1e-12)
    with pytest.raises(ValueError):
        mae([1, 2], [1])
    with pytest.raises(ValueError):
        mae([], [])


@pytest.mark.parametrize("real, pred, expected", [
    ([100], [110], 1.0),
    ([100], [115], 1.0),
    ([100], [85], 1.0),
    ([100], [115.0001], 0.0),
    ([200, 400], [230, 520], 0.5),
    ([3.0], [3.45], 1.0),
    ([1.8], [2.07], 1.0),
    ([0.26], [0.299], 1.0),
])
def test_tolerance_accuracy_examples(real, pred, expected):
    assert tolerance_accuracy(real, pred) == expected


def test_tolerance_accuracy_requires_positive_reals():
    with pytest.raises(ValueError):
        tolerance_accuracy([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        tolerance_accuracy([-1.0], [-1.0])


positive = st.floats(0.01, 1e4)


@settings(max_examples=300)
@given(st.lists(st.tuples(positive, st.floats(-1e4, 1e4)), min_size=1, max_size=20), st.floats(0.01, 100))
def test_metric_scaling_laws(pairs, lam):
    real = np.array([p[0] for p in pairs])
    pred = np.array([p[1] for p in pairs])
    assert mae(lam * real, lam * pred) == pytest.approx(lam * mae(real, pred), rel=1e-9, abs=1e-9)
    assert 0.0 <= tolerance_accuracy(real, pred) <= 1.0


@settings(max_examples=300)
@given(st.lists(st.tuples(positive, st.floats(0.5, 1.5)), min_size=1, max_size=20), st.floats(0.01, 100))
def test_accuracy_scale_invariance(pairs, lam):
    real = np.array([p[0] for p in pairs])
    ratio = np.array([p[1] for p in pairs])
    # keep ratios away from the band edges so rescaling cannot flip a rounding decision
    ratio = np.where(np.abs(np.abs(ratio - 1) - 0.15) < 1e-9, 1.0, ratio)
    pred = real * ratio
    assert tolerance_accuracy(lam * real, lam * pred) == tolerance_accuracy(real, pred)


def test_three_record_report():
    real = np.array([[100.0, 50.0, 2.0], [200.0, 60.0, 1.0], [300.0, 80.0, 4.0]])
    pred = np.array([[110.0, 50.0, 2.5], [260.0, 66.0, 1.0], [300.0, 100.0, 3.5]])
    r = report_from_predictions("m", real, pred)
    assert r.scores["energy"].mae == pytest.approx(70 / 3)
    assert r.scores["energy"].accuracy == pytest.approx(2 / 3)
    assert r.scores["amplitude"].mae == pytest.approx(26 / 3)
    assert r.scores["amplitude"].accuracy == pytest.approx(2 / 3)
    assert r.scores["pressure"].mae == pytest.approx(1 / 3)
    assert r.scores["pressure"].accuracy == pytest.approx(2 / 3)  # 25% out, 0% and 12.5% in
    assert r.n == 3
    np.testing.assert_array_equal(r.residuals, pred - real)


class Scaled:
    def __init__(self, factor):
        self.factor = factor

    def predict(self, X):
        return self.truth * self.factor


def test_evaluate_perfect_and_doubled():
    ds = synthesize(15, seed=1)
    m = Scaled(1.0)
    m.truth = ds.Y
    r = evaluate(m, ds, name="perfect")
    assert all(r.scores[p].mae == 0 and r.scores[p].accuracy == 1.0 for p in PARAMS)
    m2 = Scaled(2.0)
    m2.truth = ds.Y
    assert all(evaluate(m2, ds).scores[p].accuracy == 0.0 for p in PARAMS)


def test_reference_scores_give_expected_combination():
    reports = [fake_report(name, figs) for name, figs in REFERENCE_SCORES.items()]
    rec = recommend(reports)
    assert rec.as_tuple() == ("CNN", "SVR", "MLR")
    rng = np.random.default_rng(0)
    for _ in range(20):
        order = rng.permutation(4)
        assert recommend([reports[i] for i in order]).as_tuple() == ("CNN", "SVR", "MLR")


def test_tie_broken_by_mae_then_name():
    reports = [fake_report(n, REFERENCE_SCORES[n]) for n in ("MLR", "ANN")]
    assert recommend(reports).model_for("energy") == "ANN"
    same = {"energy": (0.5, 1.0), "amplitude": (0.5, 1.0), "pressure": (0.5, 1.0)}
    assert recommend([fake_report("b", same), fake_report("a", same)]).as_tuple() == ("a", "a", "a")


def test_single_report_wins_everything():
    assert recommend([fake_report("SVR", REFERENCE_SCORES["SVR"])]).as_tuple() == ("SVR",) * 3


def test_recommend_errors():
    with pytest.raises(ValueError):
        recommend([])
    with pytest.raises(ValueError):
        recommend([fake_report("a", REFERENCE_SCORES["MLR"], n=10), fake_report("b", REFERENCE_SCORES["SVR"], n=9)])


class Const:
    def __init__(self, v):
        self.v = np.asarray(v, dtype=float)

    def predict(self, X):
        return np.tile(self.v, (np.atleast_2d(X).shape[0], 1))


def test_combined_predict():
    models = {"CNN": Const([1, 2, 3]), "SVR": Const([4, 5, 6]), "MLR": Const([7, 8, 9])}
    rec = Recommendation({"energy": Choice("CNN", 1, 0), "amplitude": Choice("SVR", 1, 0),
                          "pressure": Choice("MLR", 1, 0)})
    X = np.ones((2, 16))
    np.testing.assert_array_equal(combined_predict(rec, models, X), [[1, 5, 9]] * 2)
    assert combined_predict(rec, models, X[0]).tolist() == [1, 5, 9]
    same = Recommendation({p: Choice("SVR", 1, 0) for p in PARAMS})
    np.testing.assert_array_equal(CombinedPredictor(same, models).predict(X), models["SVR"].predict(X))
    with pytest.raises(KeyError):
        combined_predict(rec, {"CNN": models["CNN"]}, X)


def test_combined_accuracy_is_per_parameter_max():
    ds = synthesize(20, seed=5)
    r = np.random.default_rng(1)
    models = {f"m{k}": Const(ds.Y.mean(0)) for k in range(3)}
    for k, m in enumerate(models.values()):
        m.predict = (lambda noise: (lambda X: ds.Y * (1 + noise)))(r.normal(0, 0.1 * (k + 1), size=ds.Y.shape))
    reports = [evaluate(m, ds, name) for name, m in models.items()]
    rec = recommend(reports)
    combo = evaluate(CombinedPredictor(rec, models), ds, "combo")
    for p in PARAMS:
        assert combo.scores[p].accuracy == max(rep.scores[p].accuracy for rep in reports)


def test_exports(tmp_path):
    real = np.array([[100.0, 50.0, 2.0], [200.0, 60.0, 1.0]])
    r = report_from_predictions("m", real, real * 1.1)
    r.write_residuals_csv(tmp_path / "res.csv")
    lines = (tmp_path / "res.csv").read_text().splitlines()
    assert lines[0].startswith("record,energy_real,energy_pred,energy_residual")
    assert len(lines) == 3
    r.write_scatter_csv("energy", tmp_path / "sc.csv")
    rows = [l.split(",") for l in (tmp_path / "sc.csv").read_text().splitlines()]
    assert rows[0] == ["real", "pred", "lower", "upper"]
    assert [float(v) for v in rows[1]] == pytest.approx([100, 110, 85, 115])
    table = render_table([r], recommend([r]))
    assert "Energy (Ws)" in table and "Recommended combination" in table
