"""Dense softmax network that identifies which transformation produced a sample.

Architecture is fixed at two ReLU hidden layers (64 then 16 units) feeding
an M-way softmax.  Training is plain mini-batch stochastic gradient descent
with Adam-style adaptive moments; everything is seeded so the same data and
config reproduce the same weights bit for bit.
"""

from dataclasses import dataclass

import numpy as np

from .errors import TrainingDivergenceError
from .transforms import forward_batch
from .validation import as_float_matrix

HIDDEN_DIMS = (64, 16)
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


class ClassifierModel:
    """Weight container; layer k maps activations via A @ weights[k] + biases[k]."""

    def __init__(self, weights, biases):
        self.weights = list(weights)
        self.biases = list(biases)
        self.final_epoch_loss = None

    @property
    def layer_dims(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_classes(self):
        return self.weights[-1].shape[1]

    def copy(self):
        dup = ClassifierModel(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )
        dup.final_epoch_loss = self.final_epoch_loss
        return dup


def init_model(input_dim, n_classes, seed, hidden_dims=HIDDEN_DIMS):
    """Glorot-uniform initialized network [input_dim, *hidden_dims, n_classes]."""
    if input_dim < 1 or n_classes < 1:
        raise ValueError("input_dim and n_classes must be >= 1")
    rng = np.random.default_rng([seed, 0])
    dims = [int(input_dim)] + [int(d) for d in hidden_dims] + [int(n_classes)]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ClassifierModel(weights, biases)


def _forward_pass(model, X):
    activations = [X]
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        activations.append(np.maximum(X @ w + b, 0.0))
        X = activations[-1]
    logits = X @ model.weights[-1] + model.biases[-1]
    return activations, logits


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def predict_proba(model, xs):
    """Row-stochastic softmax outputs for a batch of samples."""
    xs = as_float_matrix(xs, "xs", allow_empty=True)
    if xs.shape[1] != model.layer_dims[0]:
        raise ValueError(
            f"expected {model.layer_dims[0]} columns, got {xs.shape[1]}"
        )
    _, logits = _forward_pass(model, xs)
    return np.exp(_log_softmax(logits))


def loss_and_gradients(model, batch, labels):
    """Mean cross-entropy over the batch and exact gradients for all layers."""
    batch = as_float_matrix(batch, "batch")
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (batch.shape[0],):
        raise ValueError("labels length must match the batch row count")
    n = batch.shape[0]
    # overflow here surfaces as a non-finite loss, which train() turns into
    # a typed divergence error; the raw float warnings are just noise
    with np.errstate(over="ignore", invalid="ignore"):
        activations, logits = _forward_pass(model, batch)
        log_probs = _log_softmax(logits)
        loss = float(-log_probs[np.arange(n), labels].mean())

        delta = np.exp(log_probs)
        delta[np.arange(n), labels] -= 1.0
        delta /= n
        grad_w = [None] * len(model.weights)
        grad_b = [None] * len(model.biases)
        for k in range(len(model.weights) - 1, -1, -1):
            grad_w[k] = activations[k].T @ delta
            grad_b[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ model.weights[k].T) * (activations[k] > 0.0)
    return loss, (grad_w, grad_b)


def train(model, data, labels, cfg):
    """Train a copy of the model and return it; the input model is untouched.

    One epoch is one seeded shuffle of the data followed by ceil(rows/batch)
    Adam updates (the final partial batch is included).  A non-finite batch
    loss aborts with the epoch and batch index.  The mean batch loss of the
    last epoch is stored on the returned model as final_epoch_loss.
    """
    data = as_float_matrix(data, "data")
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (data.shape[0],):
        raise ValueError("labels length must match the data row count")
    if labels.min() < 0 or labels.max() >= model.n_classes:
        raise ValueError("labels must lie in [0, n_classes)")
    model = model.copy()
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    m_w = [np.zeros_like(w) for w in model.weights]
    v_w = [np.zeros_like(w) for w in model.weights]
    m_b = [np.zeros_like(b) for b in model.biases]
    v_b = [np.zeros_like(b) for b in model.biases]
    step = 0
    n = data.shape[0]
    final_epoch_loss = None
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            rows = order[start : start + cfg.batch_size]
            loss, (grad_w, grad_b) = loss_and_gradients(model, data[rows], labels[rows])
            if not np.isfinite(loss):
                raise TrainingDivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {batch_idx}",
                    epoch=epoch,
                    batch=batch_idx,
                )
            epoch_loss += loss * len(rows)
            step += 1
            lr_t = cfg.learning_rate * (
                np.sqrt(1.0 - ADAM_BETA2**step) / (1.0 - ADAM_BETA1**step)
            )
            # same stance as loss_and_gradients: a blown-up run is caught by
            # the finite-loss check above, not by float warnings here
            with np.errstate(over="ignore", invalid="ignore"):
                for k in range(len(model.weights)):
                    m_w[k] = ADAM_BETA1 * m_w[k] + (1.0 - ADAM_BETA1) * grad_w[k]
                    v_w[k] = ADAM_BETA2 * v_w[k] + (1.0 - ADAM_BETA2) * grad_w[k] ** 2
                    model.weights[k] -= lr_t * m_w[k] / (np.sqrt(v_w[k]) + ADAM_EPS)
                    m_b[k] = ADAM_BETA1 * m_b[k] + (1.0 - ADAM_BETA1) * grad_b[k]
                    v_b[k] = ADAM_BETA2 * v_b[k] + (1.0 - ADAM_BETA2) * grad_b[k] ** 2
                    model.biases[k] -= lr_t * m_b[k] / (np.sqrt(v_b[k]) + ADAM_EPS)
        final_epoch_loss = epoch_loss / n
    model.final_epoch_loss = final_epoch_loss
    return model


def build_training_set(bank, train):
    """Stack every transformation's output on the training data with labels.

    Returns (M*N, dim) features and the producing transformation's index as
    the label for each row, ordered transformation-major.
    """
    if len(bank) == 0:
        raise ValueError("bank must contain at least one transformation")
    train = as_float_matrix(train, "train", allow_empty=True)
    if train.shape[0] == 0:
        return train.copy(), np.zeros(0, dtype=int)
    blocks = [forward_batch(spec, train) for spec in bank.specs]
    labels = np.repeat(np.arange(len(blocks)), train.shape[0])
    return np.vstack(blocks), labels
