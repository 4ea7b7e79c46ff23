import numpy as np
import pytest
import sklearn.base
from sklearn.exceptions import NotFittedError

import sortad.detector as detector_module
from sortad.detector import SortadDetector
from sortad.evaluation import learn_threshold
from sortad.scoring import FLOOR_SCORE
from sortad.synthetic import gaussian_with_outliers


@pytest.fixture(scope="module")
def toy_data():
    dataset = gaussian_with_outliers(n_normal=300, n_anomaly=15, dim=5, seed=2)
    return dataset


@pytest.fixture(scope="module")
def fitted(toy_data):
    normal = toy_data.features[toy_data.labels == 0]
    det = SortadDetector(n_transformations=4, n_candidates=5, epochs=4, seed=11)
    return det.fit(normal)


def test_sklearn_protocol():
    det = SortadDetector(n_transformations=7, seed=3)
    params = det.get_params()
    assert params["n_transformations"] == 7
    assert params["seed"] == 3
    clone = sklearn.base.clone(det)
    assert clone.get_params() == params
    det.set_params(epochs=2)
    assert det.epochs == 2


def test_unfitted_access_raises(toy_data):
    det = SortadDetector()
    with pytest.raises(NotFittedError):
        det.score_samples(toy_data.features)
    with pytest.raises(NotFittedError):
        det.predict(toy_data.features)


def test_param_validation(toy_data):
    X = toy_data.features
    with pytest.raises(ValueError):
        SortadDetector(scoring="other").fit(X)
    with pytest.raises(ValueError):
        SortadDetector(beta=1.5).fit(X)
    with pytest.raises(ValueError):
        SortadDetector(alert_fraction=0.0).fit(X)
    with pytest.raises(ValueError):
        SortadDetector(r_multiplier=-1.0).fit(X)
    with pytest.raises(ValueError):
        SortadDetector(epsilon=0.7).fit(X)


def test_fit_populates_state(fitted):
    assert fitted.n_features_in_ == 5
    assert fitted.padded_dim_ == 6  # odd width zero-padded
    assert len(fitted.bank_) == 4
    assert fitted.classifier_.layer_dims == [6, 64, 16, 4]
    assert fitted.dirichlet_.n_transformations == 4
    assert np.isfinite(fitted.train_scores_).all()
    assert fitted.threshold_ == learn_threshold(fitted.train_scores_, 0.03)


def test_fit_is_deterministic(toy_data):
    normal = toy_data.features[toy_data.labels == 0]
    a = SortadDetector(n_transformations=3, n_candidates=4, epochs=3, seed=5).fit(normal)
    b = SortadDetector(n_transformations=3, n_candidates=4, epochs=3, seed=5).fit(normal)
    np.testing.assert_array_equal(a.train_scores_, b.train_scores_)
    np.testing.assert_array_equal(
        a.score_samples(toy_data.features), b.score_samples(toy_data.features)
    )
    c = SortadDetector(n_transformations=3, n_candidates=4, epochs=3, seed=6).fit(normal)
    assert not np.array_equal(a.train_scores_, c.train_scores_)


def test_score_report_has_all_methods(fitted, toy_data):
    report = fitted.score_report(toy_data.features)
    n = len(toy_data)
    assert report.summation.shape == report.dirichlet.shape == (n,)
    assert report.modified.shape == (n,) and report.overflow.shape == (n,)
    assert report.method == "modified"
    np.testing.assert_array_equal(report.selected(), report.modified)
    assert np.isfinite(report.summation).all()


def test_scoring_param_routes_score_samples(toy_data, fitted):
    normal = toy_data.features[toy_data.labels == 0]
    det = SortadDetector(
        n_transformations=4, n_candidates=5, epochs=4, seed=11, scoring="summation"
    ).fit(normal)
    report = det.score_report(toy_data.features)
    np.testing.assert_array_equal(det.score_samples(toy_data.features), report.summation)
    # same seed and shape hyperparameters -> identical pipeline up to scoring
    np.testing.assert_array_equal(report.dirichlet, fitted.score_report(toy_data.features).dirichlet)


def test_predict_sign_convention(fitted, toy_data):
    preds = fitted.predict(toy_data.features)
    scores = fitted.score_samples(toy_data.features)
    np.testing.assert_array_equal(preds, np.where(scores <= fitted.threshold_, -1, 1))
    assert set(np.unique(preds)) <= {-1, 1}


def test_detects_planted_outliers(fitted, toy_data):
    scores = fitted.score_samples(toy_data.features)
    anomaly_median = np.median(scores[toy_data.labels == 1])
    normal_median = np.median(scores[toy_data.labels == 0])
    assert anomaly_median < normal_median


def test_width_mismatch_raises(fitted):
    with pytest.raises(ValueError):
        fitted.score_samples(np.zeros((2, 7)))


def test_overflow_rows_get_floor_score(fitted, toy_data, monkeypatch):
    original = detector_module.forward_batch_masked

    def third_row_overflows(spec, xs):
        out, ok = original(spec, xs)
        ok = ok.copy()
        ok[2] = False
        out[2] = 0.0
        return out, ok

    monkeypatch.setattr(detector_module, "forward_batch_masked", third_row_overflows)
    report = fitted.score_report(toy_data.features[:5])
    assert report.overflow[2]
    assert report.modified[2] == FLOOR_SCORE
    assert report.summation[2] == FLOOR_SCORE
    assert not report.overflow[[0, 1, 3, 4]].any()


def test_even_width_input_is_not_padded(toy_data):
    X = toy_data.features[toy_data.labels == 0][:, :4]
    det = SortadDetector(n_transformations=2, n_candidates=3, epochs=2, seed=0).fit(X)
    assert det.padded_dim_ == 4


def test_fit_accepts_sklearn_style_y(toy_data):
    normal = toy_data.features[toy_data.labels == 0]
    det = SortadDetector(n_transformations=2, n_candidates=2, epochs=1, seed=0)
    assert det.fit(normal, y=None) is det
