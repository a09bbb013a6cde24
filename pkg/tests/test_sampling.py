import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from typsgd.density import Partition
from typsgd.errors import InvalidArgumentError
from typsgd.sampling import (
    BatchPlan,
    SrsScheme,
    StratifiedScheme,
    batch_space_size,
    default_plan,
    enumerate_batches,
    load_batch_log,
    make_plan,
    save_batch_log,
    srs_batch,
    typicality_batch,
)


def partition_of(n1, n2, scatter_seed=None):
    n = n1 + n2
    if scatter_seed is None:
        h = np.arange(n1)
    else:
        h = np.sort(np.random.default_rng(scatter_seed).choice(n, size=n1, replace=False))
    l = np.setdiff1d(np.arange(n), h)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Partition(h_indices=h, l_indices=l, gamma=n1 / n)


class TestSrs:
    def test_full_draw_is_permutation(self, rng):
        batch = srs_batch(5, 5, rng)
        assert sorted(batch.indices.tolist()) == [0, 1, 2, 3, 4]
        assert batch.stratum_tags == ("none",) * 5

    def test_pair_frequencies(self):
        # every C(4,2) pair should appear with frequency 1/6 +- 3 sigma
        rng = np.random.default_rng(99)
        draws = 60_000
        counts = dict.fromkeys(itertools.combinations(range(4), 2), 0)
        for _ in range(draws):
            counts[tuple(sorted(srs_batch(4, 2, rng).indices))] += 1
        sigma = np.sqrt((1 / 6) * (5 / 6) / draws)
        for pair, count in counts.items():
            assert abs(count / draws - 1 / 6) <= 3 * sigma, pair

    def test_deterministic_sequence(self):
        seqs = []
        for _ in range(2):
            rng = np.random.default_rng(42)
            seqs.append([srs_batch(10, 3, rng).indices.tolist() for _ in range(20)])
        assert seqs[0] == seqs[1]

    def test_oversized_batch(self, rng):
        with pytest.raises(InvalidArgumentError):
            srs_batch(4, 5, rng)


class TestPlans:
    def test_default_plan_splits(self):
        part = partition_of(300, 700)
        plan = default_plan(50, part)
        assert (plan.n1, plan.n2) == (40, 10)
        assert plan.beta == pytest.approx((40 * 1000) / (50 * 300))
        assert plan.pi == pytest.approx(0.05)
        small = default_plan(5, partition_of(10, 10))
        assert (small.n1, small.n2) == (4, 1)

    def test_default_plan_advises_on_infeasible(self):
        part = partition_of(3, 97)
        with pytest.raises(InvalidArgumentError, match="gamma"):
            default_plan(50, part)

    def test_oversampling_constraint(self):
        part = partition_of(4, 4)
        with pytest.raises(InvalidArgumentError, match="oversampling"):
            make_plan(4, 1, part)  # 1/4 < 3/4

    def test_plan_shape_validation(self):
        with pytest.raises(InvalidArgumentError):
            BatchPlan(m=4, n1=0, n2=4, beta=1.0, pi=0.1)
        with pytest.raises(InvalidArgumentError):
            BatchPlan(m=4, n1=4, n2=0, beta=1.0, pi=0.1)
        with pytest.raises(InvalidArgumentError):
            BatchPlan(m=4, n1=2, n2=3, beta=1.0, pi=0.1)

    def test_plan_must_match_partition(self):
        plan = make_plan(4, 2, partition_of(4, 4))
        with pytest.raises(InvalidArgumentError):
            typicality_batch(partition_of(5, 3), plan, np.random.default_rng(0))


class TestTypicality:
    def test_structural_counts(self, rng):
        part = partition_of(2, 2)
        plan = make_plan(2, 1, part)
        for _ in range(20):
            batch = typicality_batch(part, plan, rng)
            assert batch.stratum_tags == ("H", "L")
            assert batch.indices[0] in part.h_indices
            assert batch.indices[1] in part.l_indices

    def test_inclusion_frequencies(self):
        # H members included with probability 2/3, L members with 1/6
        part = partition_of(3, 6, scatter_seed=5)
        plan = make_plan(3, 2, part)
        rng = np.random.default_rng(17)
        draws = 90_000
        counts = np.zeros(9)
        for _ in range(draws):
            counts[typicality_batch(part, plan, rng).indices] += 1
        freq = counts / draws
        for target, members in ((2 / 3, part.h_indices), (1 / 6, part.l_indices)):
            sigma = np.sqrt(target * (1 - target) / draws)
            assert np.all(np.abs(freq[members] - target) <= 3 * sigma)

    def test_no_duplicates_and_exact_counts(self, rng):
        part = partition_of(5, 9, scatter_seed=3)
        plan = make_plan(6, 4, part)
        for _ in range(200):
            batch = typicality_batch(part, plan, rng)
            assert len(set(batch.indices.tolist())) == 6
            assert batch.stratum_tags.count("H") == 4
            assert batch.stratum_tags.count("L") == 2


@given(st.data())
@settings(max_examples=40, deadline=None)
def test_typicality_batch_counts_property(data):
    n1_pop = data.draw(st.integers(2, 6))
    n2_pop = data.draw(st.integers(n1_pop, 8))
    part = partition_of(n1_pop, n2_pop)
    feasible = [
        (m, k)
        for m in range(2, n1_pop + n2_pop + 1)
        for k in range(max(1, m - n2_pop), min(n1_pop, m - 1) + 1)
        if k * n2_pop >= (m - k) * n1_pop
    ]
    m, k = data.draw(st.sampled_from(feasible))
    plan = make_plan(m, k, part)
    batch = typicality_batch(part, plan, np.random.default_rng(data.draw(st.integers(0, 2**32))))
    h_set = set(part.h_indices.tolist())
    tagged_h = {i for i, t in zip(batch.indices.tolist(), batch.stratum_tags) if t == "H"}
    assert len(batch.indices) == m
    assert len(tagged_h) == k and tagged_h <= h_set


class TestSchemes:
    def test_space_sizes(self):
        part = partition_of(3, 4)
        plan = make_plan(3, 2, part)
        assert batch_space_size(SrsScheme(m=2), 7) == 21
        assert batch_space_size(StratifiedScheme(part, plan), 7) == 3 * 4

    def test_enumerate_batches_cover_space(self):
        part = partition_of(3, 4, scatter_seed=11)
        plan = make_plan(3, 2, part)
        batches = [tuple(sorted(b.tolist())) for b in enumerate_batches(StratifiedScheme(part, plan), 7)]
        assert len(batches) == 12
        assert len(set(batches)) == 12
        for b in batches:
            assert len(set(b) & set(part.h_indices.tolist())) == 2


def test_batch_log_round_trip(tmp_path, rng):
    part = partition_of(4, 6)
    plan = make_plan(4, 3, part)
    batches = [(k, typicality_batch(part, plan, rng)) for k in range(5)]
    path = tmp_path / "batches.csv"
    save_batch_log(path, batches)
    loaded = load_batch_log(path)
    assert [(k, b.indices.tolist()) for k, b in batches] == [(k, idx.tolist()) for k, idx in loaded]
