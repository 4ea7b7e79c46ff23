"""Normality scores built on the classifier's probability outputs.

For a sample x and the bank's M transformations, the classifier yields M
probability vectors (one per transformed copy of x).  Three scores reduce
them to a scalar where higher means more normal:

* summation: the probability mass assigned to the producing transformation,
  summed over transformations.
* dirichlet: per transformation, the log-density shape term of a Dirichlet
  distribution fitted to the training predictions, summed.
* modified: the dirichlet term per transformation, re-anchored to its
  training mean whenever the fitted concentration dips below 1 (where the
  Dirichlet density rewards extreme corners and would mistake confident
  anomalies for normal samples), with an extra penalty factor R on the
  negative side.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import polygamma, psi
from sklearn.exceptions import ConvergenceWarning

from .validation import as_float_matrix

DEFAULT_EPSILON = 1e-12
DEFAULT_R = 3.0
FIT_TOL = 1e-6
FIT_MAX_ITER = 1000

# Lowest finite score; assigned to rows that overflow a transformation at
# inference time, which is itself strong evidence of abnormality.
FLOOR_SCORE = float(np.finfo(np.float64).min)


@dataclass
class DirichletModel:
    """Per-transformation concentrations and training-mean score terms."""

    alphas: np.ndarray  # (M, M); row m fitted on transformation m's predictions
    train_means: np.ndarray  # (M,); training mean of each dirichlet term
    r: float = DEFAULT_R
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        self.train_means = np.asarray(self.train_means, dtype=float)
        if np.any(self.alphas <= 0):
            raise ValueError("all concentration entries must be > 0")
        if not np.all(np.isfinite(self.train_means)):
            raise ValueError("train_means must be finite")

    @property
    def n_transformations(self):
        return self.alphas.shape[0]


@dataclass
class ScoreReport:
    """All three per-sample scores plus the inference overflow flags."""

    summation: np.ndarray
    dirichlet: np.ndarray
    modified: np.ndarray
    overflow: np.ndarray
    method: str

    def selected(self):
        return getattr(self, self.method)


def _clamp_rows(preds, epsilon):
    clipped = np.clip(preds, epsilon, 1.0 - epsilon)
    return clipped / clipped.sum(axis=1, keepdims=True)


def _inverse_psi(y):
    # Newton refinement of Minka's piecewise initial guess for psi^{-1}.
    x = np.where(y >= -2.22, np.exp(y) + 0.5, -1.0 / (y - psi(1.0)))
    for _ in range(5):
        x = x - (psi(x) - y) / polygamma(1, x)
    return x


def _moment_matching_alpha(preds):
    # First-moment estimate of the concentration vector.  The denominator
    # collapses to zero when rows are (nearly) identical; that input has no
    # interior maximum-likelihood solution, so it is reported as degenerate.
    n, k = preds.shape
    mean = preds.mean(axis=0)
    log_sum = np.log(preds).sum(axis=0)
    denom = n * (mean * np.log(mean)).sum() - (mean * log_sum).sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha_sum = n * (k - 1) * (-psi(1.0)) / denom
    alpha = mean * alpha_sum
    if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
        return mean * k, True  # guarded fallback scale
    return alpha, False


def fit_dirichlet(preds, epsilon=DEFAULT_EPSILON, tol=FIT_TOL, max_iter=FIT_MAX_ITER):
    """Maximum-likelihood Dirichlet concentrations for row-stochastic data.

    Rows are clamped to [epsilon, 1-epsilon] and renormalized, then the
    standard digamma fixed point alpha <- psi^{-1}(psi(sum alpha) + mean log p)
    is iterated from a moment-matching start.  If the iteration fails to
    reach max |delta alpha| / alpha <= tol within max_iter steps (or leaves
    the finite positive domain), the moment-matching estimate is returned
    and a ConvergenceWarning is issued.
    """
    preds = as_float_matrix(preds, "preds")
    if preds.shape[0] < 2:
        raise ValueError("need at least 2 prediction rows to fit")
    preds = _clamp_rows(preds, epsilon)
    mean_log = np.log(preds).mean(axis=0)
    alpha_init, degenerate = _moment_matching_alpha(preds)
    if not degenerate:
        alpha = alpha_init
        for _ in range(max_iter):
            alpha_next = _inverse_psi(psi(alpha.sum()) + mean_log)
            if not np.all(np.isfinite(alpha_next)) or np.any(alpha_next <= 0):
                break
            if np.max(np.abs(alpha_next - alpha) / alpha) <= tol:
                return alpha_next
            alpha = alpha_next
    warnings.warn(
        "Dirichlet fixed point did not converge; returning moment-matching estimate",
        ConvergenceWarning,
    )
    return alpha_init


def dirichlet_term(alpha, pred, epsilon=DEFAULT_EPSILON):
    """sum_j (alpha_j - 1) * log(max(pred_j, epsilon)) for one prediction."""
    alpha = np.asarray(alpha, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if alpha.shape != pred.shape:
        raise ValueError("alpha and pred must have the same shape")
    return float(((alpha - 1.0) * np.log(np.maximum(pred, epsilon))).sum())


def _as_pred_stack(preds):
    stack = np.asarray(preds, dtype=float)
    if stack.ndim != 3:
        raise ValueError(
            "preds must be (M, N, M): one prediction matrix per transformation"
        )
    m = stack.shape[0]
    if stack.shape[2] != m:
        raise ValueError("prediction width must equal the transformation count")
    return stack


def term_matrix(dm, preds):
    """(N, M) matrix of per-transformation dirichlet terms."""
    stack = _as_pred_stack(preds)
    if stack.shape[0] != dm.n_transformations:
        raise ValueError("prediction stack does not match the fitted model")
    cols = [
        np.log(np.maximum(stack[m], dm.epsilon)) @ (dm.alphas[m] - 1.0)
        for m in range(stack.shape[0])
    ]
    return np.column_stack(cols)


def fit_dirichlet_model(train_preds, r=DEFAULT_R, epsilon=DEFAULT_EPSILON):
    """Fit one concentration vector per transformation plus training means."""
    stack = _as_pred_stack(train_preds)
    alphas = np.vstack([fit_dirichlet(stack[m], epsilon=epsilon) for m in range(stack.shape[0])])
    dm = DirichletModel(alphas=alphas, train_means=np.zeros(stack.shape[0]), r=r, epsilon=epsilon)
    dm.train_means = term_matrix(dm, stack).mean(axis=0)
    return dm


def summation_scores(preds):
    """Probability assigned to the producing transformation, summed over M."""
    stack = _as_pred_stack(preds)
    m = stack.shape[0]
    return np.sum([stack[j, :, j] for j in range(m)], axis=0)


def dirichlet_scores(dm, preds):
    """Sum of the per-transformation dirichlet terms."""
    return term_matrix(dm, preds).sum(axis=1)


def modified_scores(dm, preds):
    """Dirichlet score with the below-1-concentration cases re-anchored.

    Per transformation m with term n_m and training mean nbar_m:
    all alpha_m >= 1 -> n_m; otherwise -|n_m - nbar_m| when n_m >= 0 and
    -R * |n_m - nbar_m| when n_m < 0, so larger deviation from the training
    mean always lowers normality.
    """
    terms = term_matrix(dm, preds)
    total = np.zeros(terms.shape[0])
    for m in range(terms.shape[1]):
        n_m = terms[:, m]
        if dm.alphas[m].min() >= 1.0:
            total += n_m
        else:
            deviation = np.abs(n_m - dm.train_means[m])
            total += np.where(n_m >= 0.0, -deviation, -dm.r * deviation)
    return total
