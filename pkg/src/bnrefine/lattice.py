"""Per-variable lattice of candidate parent sets.

Each stored node is one candidate parent set for the variable, keyed by a
bitset over the variable's *uncertain* predecessors (mandatory parents are
implicit in every node and excluded from the key, so every stored node has
a finite structure prior).  A node carries its sufficient statistics, its
log prior and log marginal likelihood, a lifecycle status, and links to
stored neighbours one element away.

Lifecycle:

- alive:  currently a reasonable parent set; included in posteriors.
- asleep: shelved for now, revivable when the score landscape shifts.
- dead:   permanently pruned; absorbing, never expanded or revived.

Independently of status, a node is *open* while it still awaits child
expansion during search, and closed otherwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import prod

from .domain import (
    ArcPriorMatrix,
    ConfigurationError,
    CountTable,
    DomainSchema,
    PriorConfig,
)
from .kernels import NEG_INF, alpha_for, log_structure_prior


class LatticeStateError(RuntimeError):
    """An operation violates the node lifecycle (e.g. reviving a dead node)."""


class NodeStatus(enum.Enum):
    ALIVE = "alive"
    ASLEEP = "asleep"
    DEAD = "dead"


class ExpansionFlag(enum.Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass
class LatticeNode:
    key: int                      # bitset over the lattice's candidate parents
    parents: tuple[int, ...]      # full parent set: mandatory + chosen, sorted
    alpha_x: float
    counts: CountTable
    log_prior: float
    log_ml: float = 0.0
    status: NodeStatus = NodeStatus.ASLEEP
    expansion: ExpansionFlag = ExpansionFlag.CLOSED
    expanded: bool = False        # children generated at least once
    synced_through: int = 0       # examples absorbed into counts/log_ml
    sub_links: set[int] = field(default_factory=set)
    super_links: set[int] = field(default_factory=set)
    model_ml: dict[str, float] = field(default_factory=dict)
    model_synced: dict[str, int] = field(default_factory=dict)
    model_params: dict[str, list[float]] = field(default_factory=dict)

    @property
    def log_score(self) -> float:
        return self.log_prior + self.log_ml


@dataclass
class ParentLattice:
    x: int
    candidates: tuple[int, ...]   # uncertain predecessors, ascending position
    mandatory: tuple[int, ...]    # prior-1 predecessors, ascending position
    parent_arities_mandatory: int
    nodes: dict[int, LatticeNode] = field(default_factory=dict)
    best_log_score: float = NEG_INF
    last_refine_n: int = 0

    @property
    def root(self) -> LatticeNode:
        return self.nodes[0]

    def parents_of_key(self, key: int) -> tuple[int, ...]:
        chosen = tuple(c for i, c in enumerate(self.candidates) if key >> i & 1)
        return tuple(sorted(self.mandatory + chosen))

    def candidate_bit(self, y: int) -> int:
        return self.candidates.index(y)

    def alive_nodes(self) -> list[LatticeNode]:
        return [n for n in self.nodes.values() if n.status is NodeStatus.ALIVE]

    def recompute_best(self) -> None:
        self.best_log_score = max(
            (n.log_score for n in self.nodes.values() if n.status is NodeStatus.ALIVE),
            default=NEG_INF,
        )


def new_lattice(
    x: int, schema: DomainSchema, priors: ArcPriorMatrix, config: PriorConfig
) -> ParentLattice:
    """Fresh lattice holding only its root: the mandatory parents, alive and open.

    The root carries no data yet (log marginal likelihood 0) and its log
    prior already accounts for every uncertain predecessor being excluded.
    """
    mandatory = priors.mandatory_parents(x, schema)
    candidates = priors.candidate_parents(x, schema)
    lattice = ParentLattice(
        x=x,
        candidates=candidates,
        mandatory=mandatory,
        parent_arities_mandatory=prod(schema.arity(p) for p in mandatory),
    )
    root_prior = log_structure_prior(x, mandatory, priors, schema)
    if root_prior == NEG_INF:
        raise ConfigurationError(
            f"contradictory hard arcs leave no feasible parent set for {schema.name(x)!r}"
        )
    root = LatticeNode(
        key=0,
        parents=mandatory,
        alpha_x=alpha_for(x, mandatory, config, schema),
        counts=CountTable(schema.arity(x)),
        log_prior=root_prior,
        status=NodeStatus.ALIVE,
        expansion=ExpansionFlag.OPEN,
    )
    lattice.nodes[0] = root
    lattice.best_log_score = root.log_score
    return lattice


def children_of(lattice: ParentLattice, node: LatticeNode) -> list[int]:
    """Keys of all one-parent extensions of a stored node, by ascending position."""
    if lattice.nodes.get(node.key) is not node:
        raise LatticeStateError("node is not stored in this lattice")
    return [
        node.key | (1 << i)
        for i in range(len(lattice.candidates))
        if not node.key >> i & 1
    ]


def insert_node(
    lattice: ParentLattice,
    key: int,
    counts: CountTable,
    log_prior: float,
    log_ml: float,
    synced_through: int,
    alpha_x: float,
) -> LatticeNode:
    """Store a node and wire subset/superset links; idempotent on duplicates."""
    existing = lattice.nodes.get(key)
    if existing is not None:
        return existing
    node = LatticeNode(
        key=key,
        parents=lattice.parents_of_key(key),
        alpha_x=alpha_x,
        counts=counts,
        log_prior=log_prior,
        log_ml=log_ml,
        synced_through=synced_through,
    )
    lattice.nodes[key] = node
    for i in range(len(lattice.candidates)):
        bit = 1 << i
        if key & bit:
            sub = lattice.nodes.get(key ^ bit)
            if sub is not None:
                node.sub_links.add(sub.key)
                sub.super_links.add(key)
        else:
            sup = lattice.nodes.get(key | bit)
            if sup is not None:
                node.super_links.add(sup.key)
                sup.sub_links.add(key)
    return node


def alive_leaves(lattice: ParentLattice) -> list[LatticeNode]:
    """Alive nodes with no alive strict superset stored anywhere in the lattice.

    Checked against all stored alive nodes, not only linked neighbours: a
    superset can be stored before the intermediate sets that would link it.
    """
    alive = lattice.alive_nodes()
    keys = [n.key for n in alive]
    return [
        n
        for n in alive
        if not any(k != n.key and k & n.key == n.key for k in keys)
    ]


def set_status(lattice: ParentLattice, node: LatticeNode, status: NodeStatus) -> None:
    """Change a node's lifecycle status; dead is absorbing and forces closed."""
    if lattice.nodes.get(node.key) is not node:
        raise LatticeStateError("node is not stored in this lattice")
    if node.status is NodeStatus.DEAD and status is not NodeStatus.DEAD:
        raise LatticeStateError(
            f"node {node.key:#x} is dead; dead nodes are never revived"
        )
    changed = node.status is not status
    node.status = status
    if status is NodeStatus.DEAD:
        node.expansion = ExpansionFlag.CLOSED
    if changed:
        lattice.recompute_best()


def stored_node_count(lattice: ParentLattice) -> int:
    return len(lattice.nodes)
