"""Batch selection: simple random sampling and stratified typicality sampling.

A :class:`BatchPlan` fixes how a batch of size m is split across the
high-representative stratum H (n1 draws) and the remainder L (n2 draws).
Plans must satisfy the oversampling constraint n1/N1 >= n2/N2, which is
checked with exact integer arithmetic. Samplers draw without replacement
through a seeded ``numpy.random.Generator`` and are reproducible from
(seed, call order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from ._csvio import read_rows, write_rows
from .density import Partition
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class BatchPlan:
    """Stratified batch layout: m = n1 + n2 draws, with derived beta and pi.

    ``beta`` = (n1 N) / (m N1) is the bias factor of the unweighted
    stratified mean (beta = 1 recovers proportional weighting of H);
    ``pi`` = m / N is the plain SRS inclusion probability.
    """

    m: int
    n1: int
    n2: int
    beta: float
    pi: float

    def __post_init__(self):
        if self.m < 2:
            raise InvalidArgumentError("batch size m must be >= 2")
        if not 0 < self.n1 < self.m:
            raise InvalidArgumentError(f"n1 must lie strictly inside (0, m); got n1={self.n1}, m={self.m}")
        if self.n1 + self.n2 != self.m:
            raise InvalidArgumentError("n1 + n2 must equal m")


@dataclass(frozen=True)
class Batch:
    """Selected sample ids with their stratum tags ('H', 'L' or 'none')."""

    indices: np.ndarray
    stratum_tags: tuple[str, ...]

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if len(np.unique(idx)) != idx.shape[0]:
            raise InvalidArgumentError("batch indices must be distinct")
        if idx.shape[0] != len(self.stratum_tags):
            raise InvalidArgumentError("stratum_tags must parallel indices")
        object.__setattr__(self, "indices", idx)


def make_plan(m: int, n1: int, partition: Partition) -> BatchPlan:
    """Build and validate a batch plan against a partition."""
    n_total = partition.n_total
    n2 = m - n1
    plan = BatchPlan(m=m, n1=n1, n2=n2, beta=(n1 * n_total) / (m * partition.n1), pi=m / n_total)
    validate_plan(plan, partition)
    return plan


def validate_plan(plan: BatchPlan, partition: Partition) -> None:
    """Check a plan is feasible for a partition and satisfies n1/N1 >= n2/N2."""
    N1, N2 = partition.n1, partition.n2
    if plan.n1 > N1:
        raise InvalidArgumentError(f"plan draws n1={plan.n1} from stratum H of size {N1}")
    if plan.n2 > N2:
        raise InvalidArgumentError(f"plan draws n2={plan.n2} from stratum L of size {N2}")
    # integer cross-multiplication avoids float equality traps
    if plan.n1 * N2 < plan.n2 * N1:
        raise InvalidArgumentError(
            f"oversampling constraint violated: n1/N1 = {plan.n1}/{N1} < n2/N2 = {plan.n2}/{N2}"
        )
    n_total = partition.n_total
    expected_beta = (plan.n1 * n_total) / (plan.m * N1)
    if abs(plan.beta - expected_beta) > 1e-12 or abs(plan.pi - plan.m / n_total) > 1e-12:
        raise InvalidArgumentError("plan beta/pi do not match this partition")


def default_plan(m: int, partition: Partition) -> BatchPlan:
    """The recommended 80/20 split: n1 = round(0.8 m), n2 = m - n1."""
    if m < 5:
        raise InvalidArgumentError("default plan needs m >= 5 so both strata are drawn")
    n1 = int(round(0.8 * m))
    try:
        return make_plan(m, n1, partition)
    except InvalidArgumentError as exc:
        raise InvalidArgumentError(
            f"{exc}; increase the selection rate gamma or reduce the batch size m"
        ) from None


def srs_batch(n_total: int, m: int, rng: np.random.Generator) -> Batch:
    """Uniform m-subset of {0..n_total-1} without replacement."""
    if n_total < 1 or m < 1:
        raise InvalidArgumentError("n_total and m must be >= 1")
    if m > n_total:
        raise InvalidArgumentError(f"batch size {m} exceeds population {n_total}")
    idx = rng.choice(n_total, size=m, replace=False)
    return Batch(indices=idx, stratum_tags=("none",) * m)


def typicality_batch(partition: Partition, plan: BatchPlan, rng: np.random.Generator) -> Batch:
    """Independent SRS draws of n1 from H and n2 from L, concatenated.

    Every H member is included with probability n1/N1 and every L member
    with probability n2/N2.
    """
    validate_plan(plan, partition)
    h_draw = rng.choice(partition.n1, size=plan.n1, replace=False)
    l_draw = rng.choice(partition.n2, size=plan.n2, replace=False)
    idx = np.concatenate([partition.h_indices[h_draw], partition.l_indices[l_draw]])
    return Batch(indices=idx, stratum_tags=("H",) * plan.n1 + ("L",) * plan.n2)


@dataclass(frozen=True)
class SrsScheme:
    """Batch distribution: plain SRS of size m from the whole population."""

    m: int


@dataclass(frozen=True)
class StratifiedScheme:
    """Batch distribution: stratified draws per a validated plan."""

    partition: Partition
    plan: BatchPlan


def draw_batch(scheme, n_total: int, rng: np.random.Generator) -> Batch:
    """Draw one batch from a scheme over a population of ``n_total`` samples."""
    if isinstance(scheme, SrsScheme):
        return srs_batch(n_total, scheme.m, rng)
    if isinstance(scheme, StratifiedScheme):
        if scheme.partition.n_total != n_total:
            raise InvalidArgumentError(
                f"partition covers {scheme.partition.n_total} samples, dataset has {n_total}"
            )
        return typicality_batch(scheme.partition, scheme.plan, rng)
    raise InvalidArgumentError(f"unknown scheme {scheme!r}")


def batch_space_size(scheme, n_total: int) -> int:
    """Number of distinct batches the scheme can produce."""
    if isinstance(scheme, SrsScheme):
        return math.comb(n_total, scheme.m)
    if isinstance(scheme, StratifiedScheme):
        return math.comb(scheme.partition.n1, scheme.plan.n1) * math.comb(
            scheme.partition.n2, scheme.plan.n2
        )
    raise InvalidArgumentError(f"unknown scheme {scheme!r}")


def enumerate_batches(scheme, n_total: int):
    """Yield every possible batch of the scheme (equal probability each)."""
    if isinstance(scheme, SrsScheme):
        for combo in combinations(range(n_total), scheme.m):
            yield np.array(combo, dtype=np.int64)
        return
    if isinstance(scheme, StratifiedScheme):
        part, plan = scheme.partition, scheme.plan
        h_combos = list(combinations(part.h_indices, plan.n1))
        l_combos = list(combinations(part.l_indices, plan.n2))
        for h_c, l_c in product(h_combos, l_combos):
            yield np.array(h_c + l_c, dtype=np.int64)
        return
    raise InvalidArgumentError(f"unknown scheme {scheme!r}")


def save_batch_log(path, batches, config_digest: str = "none", seed=None) -> None:
    """Audit log: one row per iteration, 'iteration,id0,id1,...'."""
    rows = [[k] + list(map(int, b.indices)) for k, b in batches]
    write_rows(path, rows, header=None, config_digest=config_digest, seed=seed)


def load_batch_log(path) -> list[tuple[int, np.ndarray]]:
    _, rows = read_rows(path)
    return [(int(r[0]), np.array([int(c) for c in r[1:]], dtype=np.int64)) for r in rows]
