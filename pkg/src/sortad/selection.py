"""Greedy selection of transformations by a triplet-style separation score.

Each selection round draws a pool of candidate transformations, applies
every candidate to the training data, and keeps the one whose output is
compact around its own center while far (in L1) from the centers of all
previously selected transformation outputs and from the untransformed
data itself.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SelectionError, TransformOverflowError
from .transforms import forward_batch, generate_spec
from .validation import as_float_matrix, as_float_vector

MIN_CENTER_SUBSAMPLE = 10_000


@dataclass
class TransformBank:
    """Selected transformations with the centers of their training outputs."""

    specs: list
    centers: list
    beta: float
    round_scores: list = field(default_factory=list)

    def __len__(self):
        return len(self.specs)


def center_of_mass(transformed):
    """Column-wise arithmetic mean of a transformation's output matrix."""
    transformed = as_float_matrix(transformed, "transformed")
    return transformed.mean(axis=0)


def tscore(candidate_out, candidate_center, prev_centers, beta):
    """Separation score for one candidate; higher is better.

    Returns (1-beta) * sum_i min_c ||x_i - c||_1 - beta * sum_i ||x_i - c_m||_1
    where x_i ranges over candidate_out rows, c over prev_centers and c_m is
    the candidate's own center.  L1 distances keep the score robust to
    outlying rows.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    if len(prev_centers) == 0:
        raise ValueError("prev_centers must contain at least one center")
    out = as_float_matrix(candidate_out, "candidate_out")
    center = as_float_vector(candidate_center, "candidate_center")
    if center.shape[0] != out.shape[1]:
        raise ValueError("candidate_center dimension mismatch")
    nearest = None
    for prev in prev_centers:
        prev = as_float_vector(prev, "prev_center")
        if prev.shape[0] != out.shape[1]:
            raise ValueError("prev_centers dimension mismatch")
        dist = np.abs(out - prev).sum(axis=1)
        nearest = dist if nearest is None else np.minimum(nearest, dist)
    outer = nearest.sum()
    inner = np.abs(out - center).sum()
    return float((1.0 - beta) * outer - beta * inner)


def select_transformations(
    train,
    n_select,
    n_candidates,
    rng,
    beta=0.5,
    max_degree=10,
    chain_length=2,
    h=2,
    center_subsample=None,
):
    """Greedily pick n_select transformations out of n_candidates per round.

    Parameters
    ----------
    train : matrix
        Scaled, padded training data (even column count).
    n_select, n_candidates : int
        Number of rounds and pool size per round.
    rng : numpy.random.Generator
        Drives candidate generation (and the optional subsample draw).
    beta : float
        Trade-off between distance from previous centers and own spread.
    center_subsample : int or None
        When set and smaller than the training size, candidates are scored
        (and centers computed) on a seeded uniform subsample of this many
        rows; must be at least 10000 to keep center estimates stable.

    Returns
    -------
    TransformBank with the winners in selection order; round_scores holds
    one (best_tscore, candidates_scored) pair per round.
    """
    train = as_float_matrix(train, "train")
    if n_select < 1:
        raise ValueError("n_select must be >= 1")
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    if center_subsample is not None:
        if center_subsample < MIN_CENTER_SUBSAMPLE:
            raise ValueError(
                f"center_subsample must be >= {MIN_CENTER_SUBSAMPLE}, got {center_subsample}"
            )
        if train.shape[0] > center_subsample:
            idx = rng.choice(train.shape[0], size=center_subsample, replace=False)
            train = train[np.sort(idx)]

    dim = train.shape[1]
    # The untransformed data's center seeds the "previous" list so the first
    # round already rewards moving the data somewhere new.
    centers = [center_of_mass(train)]
    specs = []
    round_scores = []
    for round_idx in range(n_select):
        best_score = None
        best_spec = None
        best_center = None
        scored = 0
        for _ in range(n_candidates):
            spec = generate_spec(
                rng,
                dim,
                max_degree=max_degree,
                chain_length=chain_length,
                h=h,
                spec_id=round_idx,
            )
            try:
                out = forward_batch(spec, train)
            except TransformOverflowError:
                continue  # overflowing candidates are unusable, drop them
            center = out.mean(axis=0)
            score = tscore(out, center, centers, beta)
            scored += 1
            if best_score is None or score > best_score:
                best_score, best_spec, best_center = score, spec, center
        if best_spec is None:
            raise SelectionError(
                f"all {n_candidates} candidates overflowed in round {round_idx}"
            )
        specs.append(best_spec)
        centers.append(best_center)
        round_scores.append((best_score, scored))
    return TransformBank(
        specs=specs, centers=centers[1:], beta=beta, round_scores=round_scores
    )
