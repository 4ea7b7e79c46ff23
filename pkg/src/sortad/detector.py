"""End-to-end detector: scale, pad, select transformations, train the
transformation classifier, fit the Dirichlet scoring model, score."""

import numpy as np
from sklearn.base import BaseEstimator

from .classifier import TrainConfig, build_training_set, init_model, predict_proba, train
from .data import RobustScaler, pad_even
from .evaluation import learn_threshold
from .scoring import (
    FLOOR_SCORE,
    ScoreReport,
    dirichlet_scores,
    fit_dirichlet_model,
    modified_scores,
    summation_scores,
)
from .selection import select_transformations
from .transforms import forward_batch_masked
from .validation import as_float_matrix, require_fitted

SCORING_METHODS = ("summation", "dirichlet", "modified")


class SortadDetector(BaseEstimator):
    """Self-supervised anomaly detector for tabular data.

    Training data is robust-scaled, zero-padded to an even width, and run
    through M greedily selected reversible polynomial transformations.  A
    small softmax network learns to tell the transformations apart; its
    probability outputs on (transformed) samples feed Dirichlet-based
    normality scores.  Higher scores mean more normal; ``predict`` flags
    the samples at or below the training-score quantile given by
    ``alert_fraction``.

    Parameters
    ----------
    n_transformations : int
        Number of transformations kept (M).
    n_candidates : int
        Candidate pool size per selection round (K); 1 disables selection.
    beta : float
        Selection trade-off between spread around the own center and
        distance from previous centers.
    max_degree : int
        Largest polynomial degree drawn for transformation terms.
    chain_length : int
        Terms per per-feature polynomial.
    divide_h : int
        Divide-factor pivot h; terms are scaled by 10^-(degree - h).
    epochs, batch_size, learning_rate : training hyperparameters.
    scoring : {"summation", "dirichlet", "modified"}
        Score emitted by score_samples and used by predict.
    r_multiplier : float
        Extra penalty factor on negative deviations in the modified score.
    epsilon : float
        Probability clamp applied before logarithms.
    center_subsample : int or None
        Optional seeded row cap (>= 10000) for selection scoring.
    alert_fraction : float
        Training-quantile used by predict.
    seed : int
        Drives subsampling, candidate generation, and classifier training.
    """

    def __init__(
        self,
        n_transformations=10,
        n_candidates=20,
        beta=0.5,
        max_degree=10,
        chain_length=2,
        divide_h=2,
        epochs=50,
        batch_size=256,
        learning_rate=1e-3,
        scoring="modified",
        r_multiplier=3.0,
        epsilon=1e-12,
        center_subsample=None,
        alert_fraction=0.03,
        seed=0,
    ):
        self.n_transformations = n_transformations
        self.n_candidates = n_candidates
        self.beta = beta
        self.max_degree = max_degree
        self.chain_length = chain_length
        self.divide_h = divide_h
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.scoring = scoring
        self.r_multiplier = r_multiplier
        self.epsilon = epsilon
        self.center_subsample = center_subsample
        self.alert_fraction = alert_fraction
        self.seed = seed

    def _check_params(self):
        if self.scoring not in SCORING_METHODS:
            raise ValueError(
                f"scoring must be one of {SCORING_METHODS}, got {self.scoring!r}"
            )
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if not 0.0 < self.alert_fraction < 1.0:
            raise ValueError(
                f"alert_fraction must be in (0, 1), got {self.alert_fraction}"
            )
        if self.r_multiplier < 0:
            raise ValueError(f"r_multiplier must be >= 0, got {self.r_multiplier}")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must be in (0, 0.5), got {self.epsilon}")

    def fit(self, X, y=None):
        """Fit on (unlabeled) training features; y is ignored."""
        self._check_params()
        X = as_float_matrix(X, "X")
        self.n_features_in_ = X.shape[1]
        rng = np.random.default_rng(self.seed)
        self.scaler_ = RobustScaler().fit(X)
        padded = pad_even(self.scaler_.transform(X))
        self.padded_dim_ = padded.shape[1]
        self.bank_ = select_transformations(
            padded,
            self.n_transformations,
            self.n_candidates,
            rng,
            beta=self.beta,
            max_degree=self.max_degree,
            chain_length=self.chain_length,
            h=self.divide_h,
            center_subsample=self.center_subsample,
        )
        data, labels = build_training_set(self.bank_, padded)
        clf_seed = int(rng.integers(0, 2**31 - 1))
        cfg = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=clf_seed,
        )
        self.classifier_ = train(
            init_model(self.padded_dim_, len(self.bank_), clf_seed), data, labels, cfg
        )
        # the stacked training set is transformation-major, so the flat
        # prediction matrix reshapes directly into the (M, N, M) stack
        train_preds = predict_proba(self.classifier_, data).reshape(
            len(self.bank_), X.shape[0], len(self.bank_)
        )
        self.dirichlet_ = fit_dirichlet_model(
            train_preds, r=self.r_multiplier, epsilon=self.epsilon
        )
        self.train_scores_ = self._scores_from_predictions(train_preds)[self.scoring]
        self.threshold_ = learn_threshold(self.train_scores_, self.alert_fraction)
        return self

    def _scores_from_predictions(self, preds):
        return {
            "summation": summation_scores(preds),
            "dirichlet": dirichlet_scores(self.dirichlet_, preds),
            "modified": modified_scores(self.dirichlet_, preds),
        }

    def _predictions(self, X):
        require_fitted(self, "classifier_")
        X = as_float_matrix(X, "X", allow_empty=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        padded = pad_even(self.scaler_.transform(X))
        m = len(self.bank_)
        preds = np.empty((m, X.shape[0], m))
        overflow = np.zeros(X.shape[0], dtype=bool)
        for idx, spec in enumerate(self.bank_.specs):
            out, ok = forward_batch_masked(spec, padded)
            overflow |= ~ok
            preds[idx] = predict_proba(self.classifier_, out)
        return preds, overflow

    def score_report(self, X):
        """Score with all three methods; overflowing rows get the floor score."""
        preds, overflow = self._predictions(X)
        scores = self._scores_from_predictions(preds)
        for values in scores.values():
            values[overflow] = FLOOR_SCORE
        return ScoreReport(
            summation=scores["summation"],
            dirichlet=scores["dirichlet"],
            modified=scores["modified"],
            overflow=overflow,
            method=self.scoring,
        )

    def score_samples(self, X):
        """Normality scores under the configured scoring method."""
        return self.score_report(X).selected()

    def predict(self, X):
        """+1 for normal, -1 for alerted samples (score <= learned threshold)."""
        require_fitted(self, "threshold_")
        scores = self.score_samples(X)
        return np.where(scores <= self.threshold_, -1, 1)
