import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfsc.classifier import (ClassModel, Classifier, decide, explain, model_size_report, predict,
                             render_term)
from rfsc.dataset import NormParams
from rfsc.estimator import FittedModel
from rfsc.features import enumerate_regressors, evaluate_subset

UNIT = NormParams(np.zeros(3), np.ones(3))


def fitted(selected, theta, bias=-1.0):
    theta = np.asarray(theta, dtype=float)
    return FittedModel(tuple(selected), theta, 0.5, 0.9, np.ones(theta.size), True, bias=bias)


def make(models, n_classes, n_features=3):
    rs = enumerate_regressors(n_features, 2)
    cms = tuple(ClassModel(c, tuple(range(n_features)), rs, m) for c, m in models)
    norm = NormParams(np.zeros(n_features), np.ones(n_features))
    return Classifier(cms, norm, tuple(str(c) for c in range(1, n_classes + 1)))


def random_classifier(seed, n_classes=3):
    rng = np.random.default_rng(seed)
    models = []
    for c in range(1, n_classes + 1):
        sel = np.flatnonzero(rng.random(10) < 0.5)
        models.append((c, fitted(sel, rng.normal(size=sel.size))))
    return make(models, n_classes)


def test_decide_examples():
    assert decide(np.array([[0.3]]), 2)[0] == 1
    assert decide(np.array([[0.0]]), 2)[0] == 2
    assert decide(np.array([[0.2, 0.7, -0.1]]), 3)[0] == 2
    assert decide(np.array([[-0.5, -0.2, -0.9]]), 3)[0] == 2
    assert decide(np.array([[0.4, 0.4, 0.1]]), 3)[0] == 1


def test_predict_binary_sign_rule():
    clf = make([(1, fitted([1], [1.0]))], 2)  # score = u1
    assert predict(clf, [0.3, 0.0, 0.0])[0] == 1
    cls, scores = predict(clf, np.array([[0.3, 0, 0], [0.0, 1, 1]]))
    assert cls.tolist() == [1, 2]
    np.testing.assert_allclose(scores[:, 0], [0.3, 0.0])


def test_predict_rejects_wrong_width():
    clf = random_classifier(0)
    with pytest.raises(ValueError):
        predict(clf, np.zeros(4))


def test_predict_normalizes_and_clamps():
    rs = enumerate_regressors(1, 1)
    clf = Classifier((ClassModel(1, (0,), rs, fitted([0, 1], [-0.5, 1.0])),),
                     NormParams(np.array([10.0]), np.array([20.0])), ("a", "b"))
    assert predict(clf, [17.0])[1][0] == pytest.approx(0.2)
    assert predict(clf, [25.0])[1][0] == pytest.approx(0.5)


def test_explain_single_positive_term():
    clf = make([(1, fitted([1], [2.0]))], 2)
    e = explain(clf, np.array([0.5, 0.0, 0.0]), 1)
    assert (e.y_plus, e.y_minus, e.delta) == (1.0, 0.0, 1.0)
    assert e.supporting == [("u1", 1.0)]


def test_explain_balanced_terms_and_zero_case():
    clf = make([(1, fitted([1, 2], [1.0, -1.0]))], 2)
    e = explain(clf, np.array([0.5, 0.5, 0.0]), 1)
    assert (e.y_plus, e.y_minus, e.delta) == (0.5, 0.5, 0.0)
    zero = explain(clf, np.zeros(3), 1)
    assert zero.y_plus == zero.y_minus == zero.delta == 0.0


def test_explain_class_two_negates_binary_model():
    clf = make([(1, fitted([1, 2], [2.0, -1.0]))], 2)
    a, b = explain(clf, np.array([0.5, 0.2, 0]), 1), explain(clf, np.array([0.5, 0.2, 0]), 2)
    assert (b.y_plus, b.y_minus) == (a.y_minus, a.y_plus)
    with pytest.raises(ValueError):
        explain(clf, np.array([0.5, 0.2, 0]), 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_explain_reconstructs_score(seed):
    clf = random_classifier(seed)
    row = np.random.default_rng(seed).random(3)
    _, scores = predict(clf, row)
    for c in (1, 2, 3):
        e = explain(clf, row, c)
        assert e.y_plus >= 0 and e.y_minus >= 0
        assert e.score == pytest.approx(scores[c - 1], abs=1e-12)
        assert sum(v for _, v in e.supporting) == pytest.approx(scores[c - 1], abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_prediction_scale_invariant(seed, factor):
    clf = random_classifier(seed)
    scaled = Classifier(tuple(ClassModel(m.class_index, m.kept_features, m.regressors,
                                         fitted(m.model.selected, factor * m.model.theta))
                              for m in clf.models), clf.norm_params, clf.class_names)
    rows = np.random.default_rng(seed + 1).random((20, 3))
    np.testing.assert_array_equal(predict(clf, rows)[0], predict(scaled, rows)[0])


def test_contributions_match_dot_product():
    clf = random_classifier(3)
    rows = np.random.default_rng(4).random((15, 3))
    for m in clf.models:
        direct = evaluate_subset(m.regressors, m.model.selected, rows) @ m.model.theta
        np.testing.assert_allclose(m.score(rows), direct, atol=1e-12)


def test_round_trip_is_bit_exact(tmp_path):
    clf = random_classifier(5)
    path = tmp_path / "model.json"
    clf.save(path)
    back = Classifier.load(path)
    rows = np.random.default_rng(6).random((50, 3)) * 1.3 - 0.1
    np.testing.assert_array_equal(predict(clf, rows)[1], predict(back, rows)[1])
    assert back.to_dict() == clf.to_dict()


def test_load_rejects_foreign_document():
    with pytest.raises(ValueError):
        Classifier.from_dict({"format": "other"})


def test_classifier_invariants():
    rs = enumerate_regressors(3, 2)
    with pytest.raises(ValueError):
        make([(1, fitted([0], [1.0])), (2, fitted([0], [1.0]))], 2)
    with pytest.raises(ValueError):
        Classifier((ClassModel(1, (0, 1, 2), rs, fitted([len(rs)], [1.0])),), UNIT, ("a", "b"))


def test_empty_model_outputs_bias():
    clf = make([(1, FittedModel((), np.zeros(0), 0.6, 0.6, np.zeros(0), True, bias=1.0))], 2)
    assert (predict(clf, np.zeros((4, 3)))[0] == 1).all()
    e = explain(clf, np.zeros(3), 1)
    assert (e.y_plus, e.y_minus) == (1.0, 0.0)


def test_model_size_report():
    rs = enumerate_regressors(6, 2)
    # 7 regressors over features {0, 1, 2, 3, 4}
    picks = [rs.monomials.index(m) for m in [(0,), (1,), (2,), (3,), (4,), (0, 1), (3, 4)]]
    clf = Classifier((ClassModel(1, tuple(range(6)), rs, fitted(picks, np.ones(7))),),
                     NormParams(np.zeros(6), np.ones(6)), ("a", "b"))
    assert model_size_report(clf) == (5, 7)
    shared = make([(1, fitted([1, 2], [1, 1])), (2, fitted([1, 2], [1, -1])),
                   (3, fitted([4], [1.0]))], 3)
    assert model_size_report(shared) == (2, 3)


def test_render_term():
    assert render_term(()) == "1"
    assert render_term((0, 2)) == "u1*u3"
    assert render_term((1, 1), ["a", "b"]) == "b*b"
