"""Forward sampling from a concrete network.

Variables are drawn in schema order, so every parent is realized before
its children.  One uniform variate is consumed per variable per example
from a PCG64 generator, making output reproducible across platforms for
a fixed seed.
"""

from __future__ import annotations

import numpy as np

from .domain import ConcreteNetwork, Example, config_index


def forward_sample(network: ConcreteNetwork, n: int, seed: int) -> list[Example]:
    if n < 0:
        raise ValueError(f"sample count must be nonnegative, got {n}")
    rng = np.random.default_rng(seed)
    schema = network.schema
    cumulative = [np.cumsum(t, axis=1) for t in network.tables]
    examples: list[Example] = []
    values = [0] * len(schema)
    for _ in range(n):
        for x in range(len(schema)):
            row = config_index(values, network.parents[x], schema)
            values[x] = int(
                np.searchsorted(cumulative[x][row], rng.random(), side="right")
            )
            # guard against cumulative rounding just below 1.0
            if values[x] >= schema.arity(x):
                values[x] = schema.arity(x) - 1
        examples.append(tuple(values))
    return examples
