"""Domain types shared across the package.

A problem domain is a fixed, totally ordered list of discrete variables.
The list position of a variable defines the ordering used everywhere:
a variable may only draw parents from variables at strictly smaller
positions.  Expert knowledge enters as per-arc prior probabilities
(0 = forbidden, 1 = mandatory, anything in between = uncertain).

Examples are plain tuples of value indices, one per variable in schema
order.  Sufficient statistics live in sparse ``CountTable`` objects keyed
by parent-configuration tuples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

Example = tuple[int, ...]


class ConfigurationError(ValueError):
    """A schema, prior matrix, or parameter set is internally inconsistent."""


class ExampleError(ValueError):
    """An example does not conform to the schema (missing/out-of-range value)."""


@dataclass(frozen=True)
class VariableSpec:
    """A named discrete variable with an ordered list of value labels."""

    name: str
    values: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        if not self.name or not self.name.replace("_", "a").isalnum():
            raise ConfigurationError(f"variable name {self.name!r} is not an identifier")
        if len(self.values) < 2:
            raise ConfigurationError(f"variable {self.name!r} needs at least 2 values")
        if len(set(self.values)) != len(self.values):
            raise ConfigurationError(f"variable {self.name!r} has duplicate value labels")

    @property
    def arity(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DomainSchema:
    """Ordered variables; list position is the total ordering on variables."""

    variables: tuple[VariableSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ConfigurationError("variable names must be unique")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self) -> int:
        return len(self.variables)

    def position(self, name: str) -> int:
        try:
            return self._index[name]  # type: ignore[attr-defined]
        except KeyError:
            raise ConfigurationError(f"unknown variable {name!r}") from None

    def arity(self, x: int) -> int:
        return self.variables[x].arity

    def name(self, x: int) -> str:
        return self.variables[x].name

    def predecessors(self, x: int) -> range:
        """Variables allowed to be parents of ``x`` (all earlier positions)."""
        return range(x)

    def validate_example(self, example: Example) -> None:
        if len(example) != len(self.variables):
            raise ExampleError(
                f"example has {len(example)} values, schema has {len(self.variables)}"
            )
        for x, value in enumerate(example):
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ExampleError(f"value for {self.name(x)!r} is not an index: {value!r}")
            if not 0 <= value < self.arity(x):
                raise ExampleError(
                    f"value index {value} out of range for {self.name(x)!r} "
                    f"(arity {self.arity(x)})"
                )


@dataclass(frozen=True)
class PriorConfig:
    """Global Dirichlet concentration; split per variable and parent set."""

    alpha: float = 1.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class ArcPriorMatrix:
    """Expert belief that y is a parent of x, for pairs with y before x.

    Pairs absent from ``entries`` take ``default_prior``.  Probability 1
    makes the arc mandatory, 0 forbids it; anything strictly between
    leaves the arc's status to be learned.
    """

    entries: dict[tuple[int, int], float] = field(default_factory=dict)
    default_prior: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.default_prior <= 1.0:
            raise ConfigurationError(f"default prior {self.default_prior} outside [0,1]")
        for (y, x), p in self.entries.items():
            if y >= x:
                raise ConfigurationError(
                    f"arc prior for ({y}, {x}) violates the variable ordering"
                )
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"arc prior {p} for ({y}, {x}) outside [0,1]")

    def prior(self, y: int, x: int) -> float:
        if y >= x:
            raise ConfigurationError(f"({y}, {x}): parent must precede child")
        return self.entries.get((y, x), self.default_prior)

    def mandatory_parents(self, x: int, schema: DomainSchema) -> tuple[int, ...]:
        return tuple(y for y in schema.predecessors(x) if self.prior(y, x) == 1.0)

    def candidate_parents(self, x: int, schema: DomainSchema) -> tuple[int, ...]:
        return tuple(y for y in schema.predecessors(x) if 0.0 < self.prior(y, x) < 1.0)


class CountTable:
    """Sparse per-parent-configuration counts for one variable.

    Rows are created on first increment; configurations never observed
    are absent and implicitly all-zero.  ``total`` is the number of
    examples the table has absorbed.  All configurations must have the
    same length (the table belongs to one parent set).
    """

    __slots__ = ("m_x", "rows", "total", "config_len")

    def __init__(self, m_x: int):
        self.m_x = m_x
        self.rows: dict[tuple[int, ...], np.ndarray] = {}
        self.total = 0
        self.config_len: int | None = None

    def increment(self, config: tuple[int, ...], value: int) -> None:
        if self.config_len is None:
            self.config_len = len(config)
        elif len(config) != self.config_len:
            raise ValueError(
                f"configuration {config} has {len(config)} values; this table "
                f"is conditioned on {self.config_len} parents"
            )
        row = self.rows.get(config)
        if row is None:
            row = np.zeros(self.m_x, dtype=np.int64)
            self.rows[config] = row
        row[value] += 1
        self.total += 1

    def row(self, config: tuple[int, ...]) -> np.ndarray:
        row = self.rows.get(config)
        if row is None:
            return np.zeros(self.m_x, dtype=np.int64)
        return row

    def row_total(self, config: tuple[int, ...]) -> int:
        row = self.rows.get(config)
        return 0 if row is None else int(row.sum())

    def copy(self) -> "CountTable":
        fresh = CountTable(self.m_x)
        fresh.rows = {cfg: row.copy() for cfg, row in self.rows.items()}
        fresh.total = self.total
        fresh.config_len = self.config_len
        return fresh

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CountTable):
            return NotImplemented
        if self.m_x != other.m_x or self.total != other.total:
            return False
        if self.rows.keys() != other.rows.keys():
            return False
        return all(np.array_equal(self.rows[c], other.rows[c]) for c in self.rows)


def project(example: Example, parents: tuple[int, ...]) -> tuple[int, ...]:
    """Restrict an example to the given parent positions."""
    return tuple(example[p] for p in parents)


def config_count(schema: DomainSchema, parents: tuple[int, ...]) -> int:
    """Number of joint configurations of a parent set (1 for the empty set)."""
    return prod(schema.arity(p) for p in parents)


def config_index(example: Example, parents: tuple[int, ...], schema: DomainSchema) -> int:
    """Mixed-radix row index of an example's parent configuration.

    Configurations are enumerated with the first parent most significant,
    matching ``itertools.product(*(range(arity) for parent in parents))``.
    """
    idx = 0
    for p in parents:
        idx = idx * schema.arity(p) + example[p]
    return idx


@dataclass
class ConcreteNetwork:
    """One fully specified network: a parent set and a dense CPT per variable.

    ``tables[x]`` has one row per configuration of ``parents[x]`` (in the
    ``config_index`` enumeration order) and one column per value of x.
    """

    schema: DomainSchema
    parents: tuple[tuple[int, ...], ...]
    tables: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        n = len(self.schema)
        if len(self.parents) != n or len(self.tables) != n:
            raise ConfigurationError("parents/tables must cover every variable")
        for x, (ps, table) in enumerate(zip(self.parents, self.tables)):
            if any(p >= x for p in ps):
                raise ConfigurationError(f"parent set of {self.schema.name(x)!r} violates ordering")
            if tuple(sorted(ps)) != tuple(ps):
                raise ConfigurationError(f"parents of {self.schema.name(x)!r} must be sorted")
            expected = (config_count(self.schema, ps), self.schema.arity(x))
            if table.shape != expected:
                raise ConfigurationError(
                    f"CPT for {self.schema.name(x)!r} has shape {table.shape}, expected {expected}"
                )
            if np.any(table < 0) or np.any(np.abs(table.sum(axis=1) - 1.0) > 1e-9):
                raise ConfigurationError(f"CPT rows for {self.schema.name(x)!r} are not distributions")

    def theta(self, x: int, example: Example) -> float:
        """Probability of the example's value of x given its parent values."""
        row = config_index(example, self.parents[x], self.schema)
        return float(self.tables[x][row, example[x]])
