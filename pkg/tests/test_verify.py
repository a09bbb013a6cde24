import numpy as np
import pytest

from typsgd.errors import InvalidArgumentError
from typsgd.sampling import validate_plan
from typsgd.verify import (
    random_gradient_family,
    random_partition,
    random_plan,
    representative_h_instance,
    zero_sum_instance,
)


def test_random_families_are_valid(rng):
    for _ in range(50):
        grads = random_gradient_family(rng)
        part = random_partition(rng, grads.n_samples)
        plan = random_plan(rng, part)
        validate_plan(plan, part)  # raises on any inconsistency
        assert part.n_total == grads.n_samples


def test_zero_sum_instances_have_vanishing_sums(rng):
    for _ in range(20):
        grads, part, plan = zero_sum_instance(rng)
        h = grads.per_sample[part.h_indices]
        l = grads.per_sample[part.l_indices]
        assert np.linalg.norm(h.sum(axis=0)) <= 1e-12
        assert np.linalg.norm(l.sum(axis=0)) <= 1e-12
        assert np.all(grads.reference == 0.0)


def test_representative_instances_satisfy_total_reading(rng):
    for _ in range(20):
        grads, part, plan = representative_h_instance(rng)
        h_sum = grads.per_sample[part.h_indices].sum(axis=0)
        total = grads.per_sample.sum(axis=0)
        assert np.allclose(h_sum, total, atol=1e-10)
        # plan oversamples H at the recommended 80/20 split
        assert plan.n1 * part.n2 >= plan.n2 * part.n1
        assert plan.n1 == round(0.8 * plan.m)


def test_unknown_corruption_target_rejected():
    from typsgd.verify import run_verification

    with pytest.raises(InvalidArgumentError):
        run_verification(seed=0, instances=5, corrupt="no_such_check")
