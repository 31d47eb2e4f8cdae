"""Log-space numerical kernels for Dirichlet-multinomial network scoring.

Everything is computed and stored in natural-log space; probability-space
products over hundreds of examples underflow float64.  The key quantities:

- multivariate Beta function
      Beta_C(n_1, ..., n_C) = prod_i Gamma(n_i) / Gamma(sum_i n_i)

- the per-variable concentration that makes score-equivalent structures
  score equally:
      alpha_x = alpha / (m_x * |v(parents)|)
  where |v(parents)| is the number of joint parent configurations
  (1 for the empty parent set).

- the marginal likelihood of one variable's data under a symmetric
  Dirichlet(alpha_x) prior on each CPT row:
      sum over observed configs j of
          log Beta_m(n_{.|j} + alpha_x) - log Beta_m(alpha_x, ..., alpha_x)
  Configurations never observed contribute exactly 0.

- the posterior-mean CPT entry
      (n_{i|j} + alpha_x) / (n_{.|j} + m_x * alpha_x)
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .domain import (
    ArcPriorMatrix,
    ConcreteNetwork,
    CountTable,
    DomainSchema,
    Example,
    PriorConfig,
    config_count,
)

NEG_INF = float("-inf")


def log_gamma(z: float) -> float:
    """Natural log of the Gamma function; domain error for z <= 0."""
    if z <= 0:
        raise ValueError(f"log_gamma requires a positive argument, got {z}")
    return math.lgamma(z)


def log_beta_multi(ns) -> float:
    """log of the multivariate Beta function of a vector of positive reals."""
    values = [float(v) for v in ns]
    if any(v <= 0 for v in values):
        raise ValueError(f"log_beta_multi requires positive components, got {values}")
    return sum(math.lgamma(v) for v in values) - math.lgamma(sum(values))


def alpha_for(
    x: int, parent_set, config: PriorConfig, schema: DomainSchema
) -> float:
    """Per-cell Dirichlet concentration for variable x with the given parents."""
    parents = tuple(sorted(parent_set))
    if any(p >= x for p in parents):
        raise ValueError(f"parent set {parents} not a subset of predecessors of {x}")
    return config.alpha / (schema.arity(x) * config_count(schema, parents))


def _log_beta_symmetric(alpha_x: float, m_x: int) -> float:
    return m_x * math.lgamma(alpha_x) - math.lgamma(m_x * alpha_x)


def log_marginal_likelihood(counts: CountTable, alpha_x: float) -> float:
    """Log marginal likelihood of the counts under a symmetric Dirichlet prior.

    Sparse: only configurations with at least one observation contribute.
    """
    if alpha_x <= 0:
        raise ValueError(f"alpha_x must be positive, got {alpha_x}")
    m_x = counts.m_x
    log_beta_prior = _log_beta_symmetric(alpha_x, m_x)
    total = 0.0
    for row in counts.rows.values():
        total += log_beta_multi(row + alpha_x) - log_beta_prior
    return total


def predictive_log_prob(row: np.ndarray, value: int, alpha_x: float, m_x: int) -> float:
    """Log posterior-predictive probability of the next observation.

    ``row`` holds the counts seen so far for one parent configuration.
    This is the single-example factor the marginal likelihood telescopes
    into, so accumulating it example by example reproduces
    ``log_marginal_likelihood`` exactly.
    """
    return math.log((row[value] + alpha_x) / (row.sum() + m_x * alpha_x))


def log_structure_prior(
    x: int, parent_set, priors: ArcPriorMatrix, schema: DomainSchema
) -> float:
    """Log prior of a parent set as an independent product over potential arcs.

    Returns -inf exactly when the set includes a forbidden (prior-0) arc or
    excludes a mandatory (prior-1) arc.
    """
    parents = frozenset(parent_set)
    if any(p >= x for p in parents):
        raise ValueError(f"parent set {sorted(parents)} not a subset of predecessors of {x}")
    total = 0.0
    for y in schema.predecessors(x):
        p = priors.prior(y, x)
        if y in parents:
            if p == 0.0:
                return NEG_INF
            total += math.log(p)
        else:
            if p == 1.0:
                return NEG_INF
            total += math.log1p(-p)
    return total


def posterior_mean_row(
    counts: CountTable, config: tuple[int, ...], alpha_x: float
) -> np.ndarray:
    """Posterior-mean probability vector for one parent configuration."""
    row = counts.row(config)
    return (row + alpha_x) / (row.sum() + counts.m_x * alpha_x)


def expected_theta(
    counts: CountTable,
    alpha_x: float,
    m_x: int,
    parent_arities: tuple[int, ...],
) -> np.ndarray:
    """Dense posterior-mean CPT over every parent configuration.

    Rows follow the mixed-radix enumeration of ``config_index`` (first
    parent most significant).  Unobserved configurations get the uniform
    prior mean.  Every entry is strictly inside (0, 1) and each row sums
    to 1 up to float rounding.
    """
    if alpha_x <= 0:
        raise ValueError(f"alpha_x must be positive, got {alpha_x}")
    n_configs = math.prod(parent_arities) if parent_arities else 1
    table = np.empty((n_configs, m_x), dtype=float)
    for idx, cfg in enumerate(itertools.product(*(range(a) for a in parent_arities))):
        table[idx] = posterior_mean_row(counts, cfg, alpha_x)
    return table


def joint_log_likelihood(network: ConcreteNetwork, example: Example) -> float:
    """Log probability of a complete assignment under a concrete network.

    A zero CPT entry yields -inf rather than an error.
    """
    network.schema.validate_example(example)
    total = 0.0
    for x in range(len(network.schema)):
        p = network.theta(x, example)
        if p <= 0.0:
            return NEG_INF
        total += math.log(p)
    return total


def log_sum_exp(values) -> float:
    """log(sum(exp(values))) guarding against underflow; -inf for empty input."""
    arr = [v for v in values if v != NEG_INF]
    if not arr:
        return NEG_INF
    top = max(arr)
    return top + math.log(sum(math.exp(v - top) for v in arr))
