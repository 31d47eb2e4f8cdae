"""Brute-force reference implementations for small problems.

These enumerate what the engine approximates: exact normalized parent-set
posteriors, exact arc posteriors, the materialized full joint, and a 1-d
quadrature marginal.  Hard size guards fail fast instead of degrading;
nothing here is meant to run on large inputs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .domain import (
    ArcPriorMatrix,
    ConcreteNetwork,
    CountTable,
    DomainSchema,
    Example,
    PriorConfig,
    project,
)
from .kernels import (
    alpha_for,
    log_marginal_likelihood,
    log_structure_prior,
    log_sum_exp,
)

MAX_CANDIDATES = 15
MAX_JOINT_STATES = 2**20


class OracleSizeError(ValueError):
    """Input exceeds the brute-force guards."""


@dataclass(frozen=True)
class ExactPosterior:
    """Exact posterior over all feasible parent sets of one variable.

    ``log_scores`` holds unnormalized log(prior * marginal likelihood) per
    parent set (keyed by frozenset of variable positions, mandatory parents
    included); ``posterior`` the normalized probabilities.
    """

    x: int
    log_scores: dict[frozenset[int], float]
    posterior: dict[frozenset[int], float]

    def arc_mass(self, y: int) -> float:
        return sum(p for s, p in self.posterior.items() if y in s)

    def map_set(self) -> frozenset[int]:
        return max(self.posterior, key=lambda s: (self.posterior[s], -len(s)))


def _counts_for(
    x: int, parents: tuple[int, ...], data: list[Example], schema: DomainSchema
) -> CountTable:
    counts = CountTable(schema.arity(x))
    for example in data:
        counts.increment(project(example, parents), example[x])
    return counts


def exhaustive_posterior(
    x: int,
    data: list[Example],
    priors: ArcPriorMatrix,
    config: PriorConfig,
    schema: DomainSchema,
) -> ExactPosterior:
    """Enumerate every feasible parent set of x and normalize exactly.

    Feasible sets are all unions of the mandatory parents with subsets of
    the uncertain candidates; sets containing a forbidden arc or missing a
    mandatory one have probability exactly 0 and are omitted.
    """
    mandatory = priors.mandatory_parents(x, schema)
    candidates = priors.candidate_parents(x, schema)
    if len(candidates) > MAX_CANDIDATES:
        raise OracleSizeError(
            f"{len(candidates)} candidate parents exceeds the {MAX_CANDIDATES}-candidate guard"
        )
    log_scores: dict[frozenset[int], float] = {}
    for r in range(len(candidates) + 1):
        for chosen in itertools.combinations(candidates, r):
            parents = tuple(sorted(mandatory + chosen))
            key = frozenset(parents)
            alpha_x = alpha_for(x, parents, config, schema)
            counts = _counts_for(x, parents, data, schema)
            log_scores[key] = log_structure_prior(x, parents, priors, schema) + (
                log_marginal_likelihood(counts, alpha_x)
            )
    norm = log_sum_exp(log_scores.values())
    posterior = {s: math.exp(v - norm) for s, v in log_scores.items()}
    return ExactPosterior(x=x, log_scores=log_scores, posterior=posterior)


def exhaustive_arc_posterior(
    y: int,
    x: int,
    data: list[Example],
    priors: ArcPriorMatrix,
    config: PriorConfig,
    schema: DomainSchema,
) -> float:
    """Exact probability that y is a parent of x: total mass of sets containing y."""
    if y >= x:
        raise ValueError(f"({y}, {x}): parent must precede child")
    return exhaustive_posterior(x, data, priors, config, schema).arc_mass(y)


def full_joint_enumeration(network: ConcreteNetwork) -> dict[Example, float]:
    """Materialize the joint distribution by multiplying CPT entries per assignment."""
    schema = network.schema
    arities = [schema.arity(x) for x in range(len(schema))]
    if math.prod(arities) > MAX_JOINT_STATES:
        raise OracleSizeError(f"joint has more than {MAX_JOINT_STATES} states")
    table: dict[Example, float] = {}
    for assignment in itertools.product(*(range(a) for a in arities)):
        p = 1.0
        for x in range(len(schema)):
            p *= network.theta(x, assignment)
        table[assignment] = p
    return table


def quadrature_marginal_1d(
    log_likelihood,
    log_prior_density,
    grid: np.ndarray,
) -> float:
    """Log of the trapezoid-rule integral of likelihood * prior over a 1-d grid.

    Computed stably by factoring out the max log-integrand.  Refine the grid
    until doubling it no longer moves the result.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-d array with at least two points")
    log_f = np.array([log_likelihood(t) + log_prior_density(t) for t in grid])
    top = float(np.max(log_f))
    if top == float("-inf"):
        return float("-inf")
    return top + math.log(np.trapezoid(np.exp(log_f - top), grid))
