"""Threshold-transfer evaluation: alert thresholds learned on training
scores and applied to a labeled evaluation set.

Scores follow the library-wide convention that higher means more normal;
samples scoring at or below the learned threshold are alerted.  VS Random
is the recall achieved in the actually-alerted fraction divided by that
fraction, i.e. the multiple over a random classifier's expected recall.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .validation import as_binary_labels, as_float_vector

DEFAULT_ALERT_FRACTIONS = (0.03, 0.10)


@dataclass
class ThresholdMetrics:
    alert_fraction: float
    threshold: float
    actual_alert_fraction: float
    non_adjusted_recall: float
    vs_random: float
    n: int
    positives: int
    flagged: int
    true_positives: int

    def to_dict(self):
        return {
            "alert_fraction": self.alert_fraction,
            "threshold": self.threshold,
            "actual_alert_fraction": self.actual_alert_fraction,
            "non_adjusted_recall": self.non_adjusted_recall,
            "vs_random": self.vs_random,
            "n": self.n,
            "positives": self.positives,
            "flagged": self.flagged,
            "true_positives": self.true_positives,
        }


@dataclass
class EvalReport:
    roc_auc: float
    thresholds: list = field(default_factory=list)

    def to_dict(self):
        return {
            "roc_auc": self.roc_auc,
            "thresholds": [t.to_dict() for t in self.thresholds],
        }


def learn_threshold(train_scores, p):
    """p-quantile (linear interpolation) of the training normality scores."""
    scores = as_float_vector(train_scores, "train_scores")
    if scores.shape[0] == 0:
        raise ValueError("train_scores must be non-empty")
    if not np.all(np.isfinite(scores)):
        raise ValueError("train_scores must be finite")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    return float(np.quantile(scores, p))


def _flag_counts(scores, labels, threshold):
    flagged_mask = scores <= threshold
    return int(flagged_mask.sum()), int((flagged_mask & (labels == 1)).sum())


def evaluate_at_threshold(test_scores, test_labels, threshold):
    """Alert on score <= threshold; returns (actual_fraction, recall, vs_random).

    vs_random is recall / actual_fraction (a random classifier alerting the
    same fraction q has expected recall q), with the empty-alert case fixed
    at 0.
    """
    scores = as_float_vector(test_scores, "test_scores")
    labels = as_binary_labels(test_labels, scores.shape[0], "test_labels")
    positives = int((labels == 1).sum())
    if positives == 0:
        raise ValueError("test_labels contains no positives")
    flagged, true_positives = _flag_counts(scores, labels, threshold)
    actual_fraction = flagged / scores.shape[0]
    recall = true_positives / positives
    vs_random = recall / actual_fraction if actual_fraction > 0 else 0.0
    return actual_fraction, recall, vs_random


def roc_auc(scores, labels):
    """Probability that a random anomaly scores below a random normal sample,
    ties counted half; computed from rank statistics."""
    scores = as_float_vector(scores, "scores")
    labels = as_binary_labels(labels, scores.shape[0], "labels")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    # anomalies are the positive class and higher score means more normal,
    # so rank on negated scores
    ranks = rankdata(-scores)
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(train_scores, test_scores, test_labels, alert_fractions=DEFAULT_ALERT_FRACTIONS):
    """Full report: ROC AUC plus threshold-transfer metrics per alert fraction."""
    test_scores = as_float_vector(test_scores, "test_scores")
    report = EvalReport(roc_auc=roc_auc(test_scores, test_labels))
    labels = as_binary_labels(test_labels, test_scores.shape[0], "test_labels")
    n = test_scores.shape[0]
    positives = int((labels == 1).sum())
    for p in alert_fractions:
        threshold = learn_threshold(train_scores, p)
        actual_fraction, recall, vs_random = evaluate_at_threshold(
            test_scores, labels, threshold
        )
        flagged, true_positives = _flag_counts(test_scores, labels, threshold)
        report.thresholds.append(
            ThresholdMetrics(
                alert_fraction=float(p),
                threshold=threshold,
                actual_alert_fraction=actual_fraction,
                non_adjusted_recall=recall,
                vs_random=vs_random,
                n=n,
                positives=positives,
                flagged=flagged,
                true_positives=true_positives,
            )
        )
    return report
