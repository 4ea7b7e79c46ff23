import numpy as np
import pytest

import sortad.selection as selection_module
from sortad.errors import SelectionError, TransformOverflowError
from sortad.selection import (
    TransformBank,
    center_of_mass,
    select_transformations,
    tscore,
)
from sortad.transforms import forward_batch, generate_spec


def test_center_of_mass_is_column_mean():
    data = np.array([[1.0, 2.0], [3.0, 6.0]])
    np.testing.assert_array_equal(center_of_mass(data), [2.0, 4.0])


def test_center_of_mass_rejects_empty():
    with pytest.raises(ValueError):
        center_of_mass(np.empty((0, 2)))


def test_tscore_hand_example_single_prev():
    # rows [[1,1],[3,3]], own center [2,2], one previous center at origin:
    # outer = |1|+|1| + |3|+|3| = 8 scaled by (1-beta), inner = 4 scaled by beta
    out = np.array([[1.0, 1.0], [3.0, 3.0]])
    assert tscore(out, [2.0, 2.0], [np.zeros(2)], beta=0.0) == 8.0
    assert tscore(out, [2.0, 2.0], [np.zeros(2)], beta=1.0) == -4.0
    assert tscore(out, [2.0, 2.0], [np.zeros(2)], beta=0.5) == 2.0


def test_tscore_uses_nearest_previous_center():
    out = np.array([[1.0, 1.0], [3.0, 3.0]])
    prev = [np.zeros(2), np.array([3.0, 3.0])]
    # row 0 is closer to origin (2), row 1 sits on the second center (0)
    assert tscore(out, [2.0, 2.0], prev, beta=0.0) == 2.0


def test_tscore_matches_naive_loops():
    rng = np.random.default_rng(5)
    out = rng.normal(size=(30, 4))
    center = out.mean(axis=0)
    prev = [rng.normal(size=4) for _ in range(3)]
    beta = 0.3
    outer = sum(min(np.abs(row - c).sum() for c in prev) for row in out)
    inner = sum(np.abs(row - center).sum() for row in out)
    expected = (1 - beta) * outer - beta * inner
    assert tscore(out, center, prev, beta) == pytest.approx(expected, rel=1e-12)


def test_tscore_validates_inputs():
    out = np.ones((2, 3))
    with pytest.raises(ValueError):
        tscore(out, np.ones(3), [], beta=0.5)
    with pytest.raises(ValueError):
        tscore(out, np.ones(2), [np.ones(3)], beta=0.5)
    with pytest.raises(ValueError):
        tscore(out, np.ones(3), [np.ones(2)], beta=0.5)
    with pytest.raises(ValueError):
        tscore(out, np.ones(3), [np.ones(3)], beta=1.5)


def test_select_transformations_matches_manual_greedy():
    # replay the same rng stream and recompute every round by hand
    rng = np.random.default_rng(42)
    train = np.random.default_rng(1).normal(size=(200, 4))
    bank = select_transformations(train, n_select=3, n_candidates=5, rng=rng)

    replay = np.random.default_rng(42)
    centers = [train.mean(axis=0)]
    for round_idx in range(3):
        best = None
        for _ in range(5):
            spec = generate_spec(replay, 4, spec_id=round_idx)
            out = forward_batch(spec, train)
            score = tscore(out, out.mean(axis=0), centers, 0.5)
            if best is None or score > best[0]:
                best = (score, spec, out.mean(axis=0))
        centers.append(best[2])
        assert bank.specs[round_idx] == best[1]
        assert bank.round_scores[round_idx] == (best[0], 5)
        np.testing.assert_array_equal(bank.centers[round_idx], best[2])


def test_select_transformations_ties_keep_first():
    # two identical candidates: strict > must keep the earlier winner
    calls = []

    def fake_generate(rng, dim, **kwargs):
        rng.integers(10)  # consume state like the real generator would
        calls.append(kwargs["spec_id"])
        return generate_spec(np.random.default_rng(7), dim, spec_id=kwargs["spec_id"])

    train = np.random.default_rng(2).normal(size=(50, 4))
    original = selection_module.generate_spec
    selection_module.generate_spec = fake_generate
    try:
        bank = select_transformations(train, 1, 3, np.random.default_rng(0))
    finally:
        selection_module.generate_spec = original
    assert len(bank) == 1
    assert bank.round_scores[0][1] == 3


def test_select_transformations_is_deterministic():
    train = np.random.default_rng(3).normal(size=(100, 6))
    a = select_transformations(train, 4, 6, np.random.default_rng(11))
    b = select_transformations(train, 4, 6, np.random.default_rng(11))
    assert a.specs == b.specs
    assert a.round_scores == b.round_scores
    for ca, cb in zip(a.centers, b.centers):
        np.testing.assert_array_equal(ca, cb)


def test_select_transformations_spec_ids_are_rounds():
    train = np.random.default_rng(3).normal(size=(60, 4))
    bank = select_transformations(train, 5, 2, np.random.default_rng(9))
    assert [s.id for s in bank.specs] == [0, 1, 2, 3, 4]
    assert len(bank.centers) == 5
    assert all(scored == 2 for _, scored in bank.round_scores)


def test_select_transformations_validates_arguments():
    train = np.zeros((10, 2))
    with pytest.raises(ValueError):
        select_transformations(train, 0, 5, np.random.default_rng(0))
    with pytest.raises(ValueError):
        select_transformations(train, 1, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        select_transformations(train, 1, 5, np.random.default_rng(0), center_subsample=500)


def test_center_subsample_draws_sorted_rows(monkeypatch):
    train = np.random.default_rng(4).normal(size=(12_000, 2))
    seen = {}
    original = selection_module.forward_batch

    def spy(spec, xs):
        seen["rows"] = xs.shape[0]
        return original(spec, xs)

    monkeypatch.setattr(selection_module, "forward_batch", spy)
    select_transformations(
        train, 1, 1, np.random.default_rng(6), center_subsample=10_000
    )
    assert seen["rows"] == 10_000


def test_all_candidates_overflowing_raises(monkeypatch):
    def always_overflow(spec, xs):
        raise TransformOverflowError("boom", spec_id=spec.id)

    monkeypatch.setattr(selection_module, "forward_batch", always_overflow)
    train = np.random.default_rng(4).normal(size=(30, 2))
    with pytest.raises(SelectionError) as excinfo:
        select_transformations(train, 2, 4, np.random.default_rng(0))
    assert "all 4 candidates overflowed in round 0" in str(excinfo.value)


def test_bank_len():
    bank = TransformBank(specs=[1, 2, 3], centers=[None] * 3, beta=0.5)
    assert len(bank) == 3
