"""Closed-form gradient-error expectations and their exact oracles.

This module carries the quantitative heart of the package: the expected
squared error of the batch-mean gradient estimator under plain SRS and
under stratified typicality sampling. Each closed form is paired with an
exhaustive enumeration oracle (every possible batch, exact probabilities)
and a Monte-Carlo estimator for populations too large to enumerate.

Two stratified formulas are provided deliberately. The published identity
(`typicality_error_formula_published`) measures H-stratum dispersion about the
reference gradient and L-stratum dispersion about zero; it is exact only
when both stratum gradient sums vanish and the reference is zero. The
finite-population identity (`typicality_error_corrected`) measures each
stratum about its own mean and adds the exact bias of the unweighted
stratified mean; it matches enumeration unconditionally. Reports include
both so the divergence is visible rather than silently resolved.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .density import Partition
from .errors import CapabilityError, InvalidArgumentError
from .models import GradientFamily
from .sampling import (
    BatchPlan,
    SrsScheme,
    StratifiedScheme,
    srs_batch,
    typicality_batch,
    validate_plan,
)

ENUMERATION_BUDGET = 1_000_000


class ErrorComparison(NamedTuple):
    mse_srs: float
    mse_strat: float
    holds: bool
    alpha: float


class RateFactor(NamedTuple):
    factor: float
    noise_terms: float
    m_large_enough: bool


@dataclass(frozen=True)
class ErrorReport:
    """Side-by-side error expectations for one gradient family and plan."""

    mse_srs_formula: float
    mse_strat_published: float
    mse_strat_corrected: float
    s_k_sq: float
    s_h_sq: float
    s_l_sq: float
    bias_sq: float
    mse_enumerated: float | None = None
    mse_monte_carlo: tuple[float, float] | None = None
    alpha: float | None = None

    def to_json(self, **key) -> str:
        record = dict(key)
        for name, value in self.__dict__.items():
            record[name] = value if not isinstance(value, tuple) else list(value)
        return json.dumps(record, sort_keys=True)


def _rows(grads: GradientFamily) -> np.ndarray:
    return grads.per_sample


def _sq_norm(v: np.ndarray) -> float:
    return float(np.dot(v, v))


def dispersion_about_mean(rows: np.ndarray) -> float:
    """Finite-population dispersion sum ||g_i - mean||^2 / (count - 1)."""
    if rows.shape[0] < 2:
        raise InvalidArgumentError("dispersion needs at least 2 rows")
    centered = rows - rows.mean(axis=0)
    return float(np.sum(centered * centered)) / (rows.shape[0] - 1)


def srs_error_formula(grads: GradientFamily, m: int) -> float:
    """Expected squared error of the SRS batch mean: (1 - m/N) S^2 / m.

    The dispersion S^2 is always taken about the per-sample mean; the stored
    reference plays no role here, so the value equals the enumerated error
    only when the reference is that mean.
    """
    rows = _rows(grads)
    n = rows.shape[0]
    if n < 2:
        raise InvalidArgumentError("SRS error formula needs N >= 2")
    if not 1 <= m <= n:
        raise InvalidArgumentError(f"batch size m={m} must lie in [1, N={n}]")
    return (1.0 - m / n) * dispersion_about_mean(rows) / m


def _split_rows(grads: GradientFamily, partition: Partition):
    rows = _rows(grads)
    if rows.shape[0] != partition.n_total:
        raise InvalidArgumentError("gradient family and partition sizes differ")
    return rows[partition.h_indices], rows[partition.l_indices]


def typicality_error_formula_published(grads: GradientFamily, partition: Partition, plan: BatchPlan) -> float:
    """The published stratified error identity, evaluated literally.

    bias term ||(beta - 1) ref||^2, H dispersion about the reference, L
    dispersion about zero. Exact only in the zero-sum-strata regime; see
    the module docstring.
    """
    validate_plan(plan, partition)
    h_rows, l_rows = _split_rows(grads, partition)
    n1_pop, n2_pop = partition.n1, partition.n2
    if n1_pop < 2 or n2_pop < 2:
        raise InvalidArgumentError("the published formula needs N1, N2 >= 2")
    ref = grads.reference
    s_h = float(np.sum((h_rows - ref) ** 2)) / (n1_pop - 1)
    s_l = float(np.sum(l_rows**2)) / (n2_pop - 1)
    bias_sq = (plan.beta - 1.0) ** 2 * _sq_norm(ref)
    m = plan.m
    return (
        bias_sq
        + (1.0 - plan.n1 / n1_pop) * plan.n1 / m**2 * s_h
        + (1.0 - plan.n2 / n2_pop) * plan.n2 / m**2 * s_l
    )


def typicality_error_corrected(grads: GradientFamily, partition: Partition, plan: BatchPlan) -> float:
    """Exact bias^2 + variance of the unweighted stratified batch mean.

    The estimator mean is (1/m)(n1/N1 sum_H + n2/N2 sum_L); each stratum
    contributes SRS-without-replacement variance about its own stratum mean.
    Agrees with enumeration for every gradient family and reference.
    """
    validate_plan(plan, partition)
    h_rows, l_rows = _split_rows(grads, partition)
    n1_pop, n2_pop = partition.n1, partition.n2
    if n1_pop < 2 or n2_pop < 2:
        raise InvalidArgumentError("the corrected identity needs N1, N2 >= 2")
    m = plan.m
    expectation = (plan.n1 / n1_pop * h_rows.sum(axis=0) + plan.n2 / n2_pop * l_rows.sum(axis=0)) / m
    bias_sq = _sq_norm(expectation - grads.reference)
    var = (
        plan.n1 * (1.0 - plan.n1 / n1_pop) * dispersion_about_mean(h_rows)
        + plan.n2 * (1.0 - plan.n2 / n2_pop) * dispersion_about_mean(l_rows)
    ) / m**2
    return bias_sq + var


def _combination_sums(rows: np.ndarray, k: int) -> np.ndarray:
    idx = np.array(list(combinations(range(rows.shape[0]), k)), dtype=np.int32)
    out = np.zeros((idx.shape[0], rows.shape[1]))
    for j in range(k):  # k gathers of (C, d) keep memory flat
        out += rows[idx[:, j]]
    return out


def enumerate_error(grads: GradientFamily, scheme, budget: int = ENUMERATION_BUDGET) -> float:
    """Exact E||batch mean - reference||^2 over every possible batch.

    The ground-truth oracle for all formula checks. Raises CapabilityError
    when the batch space exceeds ``budget``; use :func:`monte_carlo_error`
    in that case.
    """
    rows = _rows(grads)
    ref = grads.reference
    if isinstance(scheme, SrsScheme):
        n, m = rows.shape[0], scheme.m
        if not 1 <= m <= n:
            raise InvalidArgumentError(f"batch size m={m} must lie in [1, N={n}]")
        count = math.comb(n, m)
        if count > budget:
            raise CapabilityError(
                f"{count} batches exceed the enumeration budget {budget}; use monte_carlo_error"
            )
        diffs = _combination_sums(rows, m) / m - ref
        return float(np.mean(np.sum(diffs * diffs, axis=1)))
    if isinstance(scheme, StratifiedScheme):
        partition, plan = scheme.partition, scheme.plan
        validate_plan(plan, partition)
        h_rows, l_rows = _split_rows(grads, partition)
        count = math.comb(partition.n1, plan.n1) * math.comb(partition.n2, plan.n2)
        if count > budget:
            raise CapabilityError(
                f"{count} batches exceed the enumeration budget {budget}; use monte_carlo_error"
            )
        h_sums = _combination_sums(h_rows, plan.n1)
        l_sums = _combination_sums(l_rows, plan.n2)
        total = 0.0
        for h_sum in h_sums:  # chunk over H sub-batches to bound memory
            diffs = (h_sum + l_sums) / plan.m - ref
            total += float(np.sum(diffs * diffs))
        return total / count
    raise InvalidArgumentError(f"unknown scheme {scheme!r}")


def monte_carlo_error(grads: GradientFamily, scheme, draws: int, seed: int) -> tuple[float, float]:
    """Sample mean and standard error of the squared batch-mean error."""
    if draws < 100:
        raise InvalidArgumentError("use at least 100 draws")
    rows = _rows(grads)
    ref = grads.reference
    rng = np.random.default_rng(seed)
    sq_errors = np.empty(draws)
    for t in range(draws):
        if isinstance(scheme, SrsScheme):
            batch = srs_batch(rows.shape[0], scheme.m, rng)
        elif isinstance(scheme, StratifiedScheme):
            batch = typicality_batch(scheme.partition, scheme.plan, rng)
        else:
            raise InvalidArgumentError(f"unknown scheme {scheme!r}")
        diff = rows[batch.indices].mean(axis=0) - ref
        sq_errors[t] = diff @ diff
    se = float(np.std(sq_errors, ddof=1) / math.sqrt(draws))
    return float(np.mean(sq_errors)), se


def convergence_rate_factor(model_spec, partition: Partition, plan: BatchPlan) -> RateFactor:
    """Per-step contraction factor of the stratified scheme's convergence bound.

    factor = 1 - mu/L + (1 - n1/N1) 2 n1 (beta2 + 2) / m^2
                      + (1 - n2/N2) n2 (beta2 + 1) / (2 m^2) + (beta - 1)^2

    Also reports whether the noise terms are small enough (< mu/L) for the
    bound to certify linear convergence.
    """
    if model_spec.lipschitz_L is None or model_spec.strong_convexity_mu is None:
        raise CapabilityError("rate factor needs L and mu")
    if model_spec.growth_bound_beta2 is None:
        raise CapabilityError("rate factor needs a beta2 growth bound")
    validate_plan(plan, partition)
    mu_over_l = model_spec.strong_convexity_mu / model_spec.lipschitz_L
    beta2 = model_spec.growth_bound_beta2
    m = plan.m
    noise = (
        (1.0 - plan.n1 / partition.n1) * 2.0 * plan.n1 * (beta2 + 2.0) / m**2
        + (1.0 - plan.n2 / partition.n2) * plan.n2 * (beta2 + 1.0) / (2.0 * m**2)
        + (plan.beta - 1.0) ** 2
    )
    return RateFactor(factor=1.0 - mu_over_l + noise, noise_terms=noise, m_large_enough=noise < mu_over_l)


def compare_error_expectations(
    grads: GradientFamily,
    partition: Partition,
    plan: BatchPlan,
    budget: int = ENUMERATION_BUDGET,
    mc_draws: int = 100_000,
    seed: int = 0,
) -> ErrorComparison:
    """Compare stratified vs SRS expected squared error on one instance.

    Both expectations are enumerated exactly when affordable, otherwise
    Monte-Carlo estimated. The inequality is reported, never asserted:
    instances violating the representativeness premise can and do fail it.
    alpha = mse_strat / mse_srs, with alpha = 1 by convention when the SRS
    error vanishes.
    """
    validate_plan(plan, partition)

    def expected(scheme):
        try:
            return enumerate_error(grads, scheme, budget=budget)
        except CapabilityError:
            return monte_carlo_error(grads, scheme, draws=mc_draws, seed=seed)[0]

    mse_srs = expected(SrsScheme(m=plan.m))
    mse_strat = expected(StratifiedScheme(partition=partition, plan=plan))
    alpha = 1.0 if mse_srs == 0.0 else mse_strat / mse_srs
    return ErrorComparison(mse_srs=mse_srs, mse_strat=mse_strat, holds=mse_strat <= mse_srs, alpha=alpha)


def optimal_beta(m: int) -> float:
    """The bias factor minimizing the stratified/SRS error ratio, as published.

    beta = 1 / (2 (cbrt(m/4 + sqrt(m^3/27)) + cbrt(m/4 - sqrt(m^3/27))));
    for m >= 2 the second radicand is negative and the real (sign-preserving)
    cube root is used. Tends to 1 from below as m grows.
    """
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    root = math.sqrt(m**3 / 27.0)
    outer = np.cbrt(m / 4.0 + root) + np.cbrt(m / 4.0 - root)
    return float(1.0 / (2.0 * outer))


def build_error_report(
    grads: GradientFamily,
    partition: Partition,
    plan: BatchPlan,
    budget: int = ENUMERATION_BUDGET,
    mc_draws: int = 0,
    seed: int = 0,
) -> ErrorReport:
    """Evaluate every error expectation for one instance, side by side."""
    h_rows, l_rows = _split_rows(grads, partition)
    ref = grads.reference
    stratified = StratifiedScheme(partition=partition, plan=plan)
    enumerated = None
    try:
        enumerated = enumerate_error(grads, stratified, budget=budget)
    except CapabilityError:
        pass
    mc = monte_carlo_error(grads, stratified, draws=mc_draws, seed=seed) if mc_draws else None
    compare = compare_error_expectations(grads, partition, plan, budget=budget, seed=seed)
    return ErrorReport(
        mse_srs_formula=srs_error_formula(grads, plan.m),
        mse_strat_published=typicality_error_formula_published(grads, partition, plan),
        mse_strat_corrected=typicality_error_corrected(grads, partition, plan),
        s_k_sq=dispersion_about_mean(grads.per_sample),
        s_h_sq=float(np.sum((h_rows - ref) ** 2)) / (partition.n1 - 1),
        s_l_sq=float(np.sum(l_rows**2)) / (partition.n2 - 1),
        bias_sq=(plan.beta - 1.0) ** 2 * _sq_norm(ref),
        mse_enumerated=enumerated,
        mse_monte_carlo=mc,
        alpha=compare.alpha,
    )
