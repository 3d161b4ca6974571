from __future__ import annotations

from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

import oracles
from corpus import random_tensor
from mdregularity.regularity import (
    ScaleError,
    check_line_density,
    check_regularity,
    interval_candidates,
    subset_candidates,
    Witness,
    thresholds,
    witness_split,
)
from mdregularity.tensor import BlockRef, Tensor, density


def corner_matrix() -> Tensor:
    arr = np.zeros((4, 4), dtype=int)
    arr[:2, :2] = 1
    return Tensor.from_array(arr)


def test_thresholds_use_ceiling():
    assert thresholds((4, 5), Fraction(1, 2)) == (2, 3)
    assert thresholds((12,), Fraction(9, 20)) == (6,)


@pytest.mark.parametrize("mode", ["exhaustive-subsets", "exhaustive-intervals"])
def test_corner_matrix_witness(mode):
    cert = check_regularity(corner_matrix(), "1/2", mode)
    assert cert.verdict == "irregular"
    assert cert.witness.block == BlockRef.from_sets([[0, 1], [0, 1]])
    assert cert.witness.symbol == "1"
    assert cert.witness.deviation == Fraction(3, 4)
    assert cert.certified


def test_sampled_mode_is_seeded_and_labelled():
    t = corner_matrix()
    a = check_regularity(t, "1/2", "sampled", budget=200, seed=5)
    b = check_regularity(t, "1/2", "sampled", budget=200, seed=5)
    assert a.to_json() == b.to_json()
    assert a.verdict == "irregular"
    regular = check_regularity(Tensor.constant((5, 5)), "1/3", "sampled", budget=50)
    assert regular.regular and not regular.certified
    with pytest.raises(ValueError):
        check_regularity(t, "1/2", "sampled")


def test_constant_and_forced_cases():
    for mode in ("exhaustive-subsets", "exhaustive-intervals"):
        assert check_regularity(Tensor.constant((3, 4, 2), "0"), "1/5", mode).regular
    row = Tensor.from_array([[1, 0, 0, 1, 1]])
    assert check_regularity(row, "9/10", "exhaustive-subsets").regular


def test_scale_cap_raises():
    t = Tensor.constant((30, 30))
    with pytest.raises(ScaleError):
        check_regularity(t, "1/2", "exhaustive-subsets", cap=1000)


def test_candidate_counts():
    assert subset_candidates((4, 4), (2, 2)) > 0
    assert interval_candidates((4,), (2,)) == 6


def _naive_cases():
    rng = np.random.default_rng(101)
    cases = []
    for _ in range(30):
        d = int(rng.choice([1, 2, 2, 3]))
        n_max = {1: 6, 2: 5, 3: 3}[d]
        dims = tuple(int(x) for x in rng.integers(2, n_max + 1, size=d))
        syms = int(rng.integers(2, 4))
        eps = Fraction(int(rng.integers(1, 5)), 10)
        cases.append((random_tensor(rng, dims, syms), eps))
    return cases


@pytest.mark.parametrize("intervals", [False, True])
def test_exhaustive_modes_match_naive_enumeration(intervals):
    mode = "exhaustive-intervals" if intervals else "exhaustive-subsets"
    for t, eps in _naive_cases():
        best = oracles.max_deviation(t.array, t.alphabet.size, eps, intervals=intervals)
        cert = check_regularity(t, eps, mode)
        assert cert.regular == (best <= eps), (t.array.tolist(), eps)
        if not cert.regular:
            assert cert.witness.deviation == best
            w = cert.witness
            assert abs(density(t, w.block, w.symbol) - density(t, None, w.symbol)) == best


def test_interval_regularity_is_weaker_than_subset_regularity():
    rng = np.random.default_rng(7)
    for _ in range(40):
        t = random_tensor(rng, (5, 5), 2)
        if check_regularity(t, "1/3", "exhaustive-subsets").regular:
            assert check_regularity(t, "1/3", "exhaustive-intervals").regular


def test_witness_split_shapes():
    cert = check_regularity(corner_matrix(), "1/2")
    boxes = witness_split(corner_matrix(), cert)
    assert boxes == [
        BlockRef.from_sets([[0, 1], [0, 1]]),
        BlockRef.from_sets([[0, 1], [2, 3]]),
        BlockRef.from_sets([[2, 3], [0, 1]]),
        BlockRef.from_sets([[2, 3], [2, 3]]),
    ]
    full_rows = Witness(BlockRef.from_sets([[0, 1, 2, 3], [0, 1]]), "1", Fraction(1, 4))
    boxes = witness_split(corner_matrix(), replace(cert, witness=full_rows))
    assert boxes == [BlockRef.from_sets([[0, 1, 2, 3], [0, 1]]), BlockRef.from_sets([[0, 1, 2, 3], [2, 3]])]
    with pytest.raises(ValueError):
        witness_split(Tensor.constant((3, 3)), check_regularity(Tensor.constant((3, 3)), "1/2"))


def test_line_density_examples():
    full = BlockRef.full((4, 4))
    assert check_line_density(Tensor.constant((4, 4)), "1/4", "v", full, "1")[0] == 0
    arr = np.ones((4, 4), dtype=int)
    arr[:, 2] = 0
    bad, bound = check_line_density(Tensor.from_array(arr), "1/4", "v", full, "1")
    assert (bad, bound) == (1, 1)
    with pytest.raises(ValueError):
        check_line_density(Tensor.from_array(arr), "1/2", "h", BlockRef.from_sets([[0, 1, 2, 3], [0]]), "1")
    with pytest.raises(Exception):
        check_line_density(Tensor.constant((2, 2, 2)), "1/4", "v", BlockRef.full((2, 2, 2)), "1")


def test_certificate_json_is_exact():
    doc = check_regularity(corner_matrix(), "1/2").to_json()
    assert doc["eps"] == "1/2"
    assert doc["witness"]["deviation"] == "3/4"
