"""Observation ingestion and the any-time beam search over parent lattices.

The combined network holds one parent lattice per variable plus the full
example log.  Two kinds of update:

- ``observe``: cheap per-example parameter update.  Every alive node's
  counts absorb the example and its log marginal likelihood grows by the
  log posterior-predictive factor (with pre-increment counts), which makes
  streaming exactly equivalent to batch rescoring.  Asleep and closed
  nodes are left stale and replayed lazily from the example log.

- ``refine``: beam search per variable, driven by three thresholds
  relative to the best score found (1 > c_alive >= d_open >= e_dead > 0):
  nodes within a factor c_alive of the best are alive, nodes within
  d_open stay on the expansion queue, nodes below e_dead whose sample
  mass clears ``dead_kappa * m_x * |v(parents)|`` are killed for good.
  A hysteresis factor keeps freshly admitted nodes from flapping: a node
  is admitted at the plain threshold but demoted only after falling below
  threshold * hysteresis.

The search is resumable: stopping after any expansion budget and calling
``refine`` again converges to the state a single uninterrupted call
produces, because expansion order depends only on stored scores (popping
by score, ties broken by ascending parent-set key) and the open flags
persist on the nodes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .domain import (
    ArcPriorMatrix,
    ConcreteNetwork,
    ConfigurationError,
    CountTable,
    DomainSchema,
    Example,
    PriorConfig,
    config_count,
    project,
)
from .kernels import (
    NEG_INF,
    alpha_for,
    expected_theta,
    log_structure_prior,
    predictive_log_prob,
)
from .lattice import (
    ExpansionFlag,
    LatticeNode,
    LatticeStateError,
    NodeStatus,
    ParentLattice,
    children_of,
    insert_node,
    new_lattice,
    set_status,
)

SCORING_MODELS = ("table", "noisy-or", "logistic")


@dataclass(frozen=True)
class SearchParams:
    """Beam-search thresholds and limits; defaults favour a narrow search."""

    c_alive: float = 0.1
    d_open: float = 0.01
    e_dead: float = 0.001
    hysteresis: float = 0.5
    dead_kappa: float = 5.0
    budget: int | None = None

    def __post_init__(self) -> None:
        # ties are allowed so fully permissive searches can set all three equal
        if not (1.0 > self.c_alive >= self.d_open >= self.e_dead > 0.0):
            raise ConfigurationError(
                "thresholds must satisfy 1 > c_alive >= d_open >= e_dead > 0, got "
                f"{self.c_alive}, {self.d_open}, {self.e_dead}"
            )
        if not 0.0 < self.hysteresis <= 1.0:
            raise ConfigurationError(f"hysteresis must be in (0, 1], got {self.hysteresis}")
        # dead_kappa = 0 is permitted but unsafe: nodes may die on no evidence.
        if self.dead_kappa < 0:
            raise ConfigurationError(f"dead_kappa must be nonnegative, got {self.dead_kappa}")
        if self.budget is not None and self.budget < 0:
            raise ConfigurationError(f"budget must be nonnegative, got {self.budget}")

    @property
    def log_c(self) -> float:
        return math.log(self.c_alive)

    @property
    def log_d(self) -> float:
        return math.log(self.d_open)

    @property
    def log_e(self) -> float:
        return math.log(self.e_dead)

    @property
    def log_h(self) -> float:
        return math.log(self.hysteresis)


@dataclass
class CombinedNetwork:
    """All parent lattices plus the retained example log and global priors."""

    schema: DomainSchema
    priors: ArcPriorMatrix
    config: PriorConfig
    lattices: list[ParentLattice]
    example_log: list[Example] = field(default_factory=list)
    scoring_model: str = "table"

    @property
    def n_total(self) -> int:
        return len(self.example_log)


@dataclass
class SearchReport:
    expansions: int = 0
    nodes_created: int = 0
    nodes_killed: int = 0
    exhausted: bool = True
    best_scores: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class NetworkStats:
    stored: dict[str, int]
    alive: dict[str, int]
    dead: dict[str, int]
    open: dict[str, int]

    @property
    def total_stored(self) -> int:
        return sum(self.stored.values())


def init(
    schema: DomainSchema, priors: ArcPriorMatrix, config: PriorConfig
) -> CombinedNetwork:
    """Network primed with the expert's arc beliefs: one root-only lattice per variable."""
    return CombinedNetwork(
        schema=schema,
        priors=priors,
        config=config,
        lattices=[new_lattice(x, schema, priors, config) for x in range(len(schema))],
    )


def observe(net: CombinedNetwork, example: Example) -> None:
    """Absorb one fully specified example into every alive node.

    Rejects invalid examples before touching any state.  Counts and
    log marginal likelihoods of alive nodes are updated in place; other
    nodes catch up lazily via ``sync_node``.
    """
    example = tuple(example)
    net.schema.validate_example(example)
    net.example_log.append(example)
    n = net.n_total
    for lattice in net.lattices:
        m_x = lattice.root.counts.m_x
        value = example[lattice.x]
        for node in lattice.nodes.values():
            if node.status is not NodeStatus.ALIVE:
                continue
            cfg = project(example, node.parents)
            node.log_ml += predictive_log_prob(node.counts.row(cfg), value, node.alpha_x, m_x)
            node.counts.increment(cfg, value)
            node.synced_through = n
        lattice.recompute_best()


def observe_batch(net: CombinedNetwork, examples) -> None:
    """Absorb a sequence of examples one at a time (atomic per example)."""
    for example in examples:
        observe(net, example)


def sync_node(net: CombinedNetwork, lattice: ParentLattice, node: LatticeNode) -> None:
    """Replay the example log from the node's sync point to the present."""
    m_x = node.counts.m_x
    x = lattice.x
    for t in range(node.synced_through, net.n_total):
        example = net.example_log[t]
        cfg = project(example, node.parents)
        node.log_ml += predictive_log_prob(node.counts.row(cfg), example[x], node.alpha_x, m_x)
        node.counts.increment(cfg, example[x])
    node.synced_through = net.n_total


def dead_condition(node: LatticeNode, schema: DomainSchema, x: int, dead_kappa: float) -> bool:
    """Whether the node has seen enough data for a kill decision to be stable.

    True once the absorbed sample mass reaches dead_kappa * m_x * |v(parents)|.
    """
    threshold = dead_kappa * schema.arity(x) * config_count(schema, node.parents)
    return node.counts.total >= threshold


def _node_score(net: CombinedNetwork, lattice: ParentLattice, node: LatticeNode) -> float:
    """The score everything ranks by: log prior plus the active model's marginal."""
    if net.scoring_model == "table":
        return node.log_score
    from . import localmodels  # deferred: localmodels imports engine helpers

    localmodels.ensure_model_score(net, lattice, node, net.scoring_model)
    return node.log_prior + node.model_ml[net.scoring_model]


def _scored_best(net: CombinedNetwork, lattice: ParentLattice) -> float:
    return max(
        (
            _node_score(net, lattice, n)
            for n in lattice.nodes.values()
            if n.status is NodeStatus.ALIVE
        ),
        default=NEG_INF,
    )


def _best_over_live(net: CombinedNetwork, lattice: ParentLattice) -> float:
    """Best score over every node still in play (anything not dead)."""
    return max(
        (
            _node_score(net, lattice, n)
            for n in lattice.nodes.values()
            if n.status is not NodeStatus.DEAD
        ),
        default=NEG_INF,
    )


def _kill(lattice: ParentLattice, node: LatticeNode) -> None:
    set_status(lattice, node, NodeStatus.DEAD)


def _rethreshold_lattice(
    net: CombinedNetwork,
    lattice: ParentLattice,
    best: float,
    params: SearchParams,
) -> None:
    """Recompute statuses and open flags of non-dead nodes against ``best``.

    Admission uses the plain thresholds (boundary inclusive); demotion of a
    currently alive/open node additionally requires falling below threshold
    times the hysteresis factor.
    """
    for node in sorted(lattice.nodes.values(), key=lambda n: n.key):
        if node.status is NodeStatus.DEAD:
            continue
        score = _node_score(net, lattice, node)
        if score < params.log_e + best and dead_condition(
            node, net.schema, lattice.x, params.dead_kappa
        ):
            _kill(lattice, node)
            continue
        if score >= params.log_c + best:
            node.status = NodeStatus.ALIVE
        elif node.status is NodeStatus.ALIVE and score >= params.log_c + params.log_h + best:
            pass  # hysteresis: admitted nodes survive small dips
        else:
            node.status = NodeStatus.ASLEEP
        if node.expanded:
            node.expansion = ExpansionFlag.CLOSED
        elif score >= params.log_d + best:
            node.expansion = ExpansionFlag.OPEN
        elif node.expansion is ExpansionFlag.OPEN and score >= params.log_d + params.log_h + best:
            pass
        else:
            node.expansion = ExpansionFlag.CLOSED
    lattice.recompute_best()


def rethreshold(net: CombinedNetwork, params: SearchParams) -> None:
    """Re-aim every lattice's statuses at its current best score."""
    for lattice in net.lattices:
        _rethreshold_lattice(net, lattice, _best_over_live(net, lattice), params)


def _create_child(
    net: CombinedNetwork, lattice: ParentLattice, key: int
) -> LatticeNode:
    x = lattice.x
    parents = lattice.parents_of_key(key)
    node = insert_node(
        lattice,
        key,
        counts=CountTable(net.schema.arity(x)),
        log_prior=log_structure_prior(x, parents, net.priors, net.schema),
        log_ml=0.0,
        synced_through=0,
        alpha_x=alpha_for(x, parents, net.config, net.schema),
    )
    sync_node(net, lattice, node)
    return node


def _mark_fresh_child(
    net: CombinedNetwork,
    lattice: ParentLattice,
    node: LatticeNode,
    score: float,
    best: float,
    params: SearchParams,
    queue: list[tuple[float, int]],
) -> None:
    if score < params.log_e + best and dead_condition(
        node, net.schema, lattice.x, params.dead_kappa
    ):
        _kill(lattice, node)
        return
    node.status = NodeStatus.ALIVE if score >= params.log_c + best else NodeStatus.ASLEEP
    if score >= params.log_d + best:
        node.expansion = ExpansionFlag.OPEN
        heapq.heappush(queue, (-score, node.key))
    else:
        node.expansion = ExpansionFlag.CLOSED
    lattice.recompute_best()


def _refine_lattice(
    net: CombinedNetwork,
    lattice: ParentLattice,
    params: SearchParams,
    budget_left: int | None,
    report: SearchReport,
) -> int | None:
    """Drain one lattice's open queue; returns the remaining budget."""
    if lattice.last_refine_n != net.n_total:
        # New data arrived since the last search touched this lattice:
        # catch stale nodes up, then re-aim every status at the new best.
        for node in lattice.nodes.values():
            if node.status is not NodeStatus.DEAD:
                sync_node(net, lattice, node)
        _rethreshold_lattice(net, lattice, _best_over_live(net, lattice), params)
        lattice.last_refine_n = net.n_total

    queue = [
        (-_node_score(net, lattice, n), n.key)
        for n in lattice.nodes.values()
        if n.expansion is ExpansionFlag.OPEN
    ]
    heapq.heapify(queue)
    best = _scored_best(net, lattice)
    while queue:
        if budget_left is not None and budget_left <= 0:
            report.exhausted = False
            return 0
        _, key = heapq.heappop(queue)
        node = lattice.nodes[key]
        if node.expansion is not ExpansionFlag.OPEN:
            continue  # closed by a rethreshold while queued
        if node.status is NodeStatus.DEAD:
            raise LatticeStateError(f"dead node {key:#x} found on the open queue")
        node.expansion = ExpansionFlag.CLOSED
        score = _node_score(net, lattice, node)
        if score < params.log_e + best and dead_condition(
            node, net.schema, lattice.x, params.dead_kappa
        ):
            _kill(lattice, node)
            continue
        if score < params.log_d + best:
            continue  # out of the beam for now; stays asleep unless alive
        node.expanded = True
        report.expansions += 1
        if budget_left is not None:
            budget_left -= 1
        fresh: list[LatticeNode] = []
        scores: dict[int, float] = {}
        for child_key in children_of(lattice, node):
            child = lattice.nodes.get(child_key)
            if child is None:
                child = _create_child(net, lattice, child_key)
                fresh.append(child)
                report.nodes_created += 1
            scores[child_key] = _node_score(net, lattice, child)
        top = max(scores.values(), default=NEG_INF)
        if top > best:
            best = top
            _rethreshold_lattice(net, lattice, best, params)
            # re-seed the queue: the rethreshold may have opened or closed nodes
            queue = [
                (-_node_score(net, lattice, n), n.key)
                for n in lattice.nodes.values()
                if n.expansion is ExpansionFlag.OPEN
            ]
            heapq.heapify(queue)
        for child in fresh:
            _mark_fresh_child(net, lattice, child, scores[child.key], best, params, queue)
    return budget_left


def refine(net: CombinedNetwork, params: SearchParams) -> SearchReport:
    """Run the beam search over every lattice, respecting the expansion budget.

    Any-time: with a finite budget the call stops mid-search and a later
    call picks up exactly where it left off.
    """
    report = SearchReport()
    if params.budget == 0:
        # a zero budget is a pure no-op, not even parameter syncing
        report.exhausted = False
        for lattice in net.lattices:
            report.best_scores[net.schema.name(lattice.x)] = lattice.best_log_score
        return report
    budget_left: int | None = params.budget
    killed_before = {lat.x: sum(1 for n in lat.nodes.values() if n.status is NodeStatus.DEAD)
                     for lat in net.lattices}
    for lattice in net.lattices:
        budget_left = _refine_lattice(net, lattice, params, budget_left, report)
        if budget_left == 0 and not report.exhausted:
            break
    for lattice in net.lattices:
        dead = sum(1 for n in lattice.nodes.values() if n.status is NodeStatus.DEAD)
        report.nodes_killed += dead - killed_before[lattice.x]
        report.best_scores[net.schema.name(lattice.x)] = lattice.best_log_score
    return report


def best_network(net: CombinedNetwork) -> ConcreteNetwork:
    """Point estimate: each variable's top-scoring alive parent set with its
    posterior-mean CPT.  Ties break deterministically toward the smaller key."""
    parents: list[tuple[int, ...]] = []
    tables = []
    for lattice in net.lattices:
        alive = lattice.alive_nodes()
        if not alive:
            raise LatticeStateError(
                f"no alive parent set for {net.schema.name(lattice.x)!r}"
            )
        node = min(alive, key=lambda n: (-_node_score(net, lattice, n), n.key))
        if node.synced_through != net.n_total:
            sync_node(net, lattice, node)
        parent_arities = tuple(net.schema.arity(p) for p in node.parents)
        parents.append(node.parents)
        tables.append(
            expected_theta(node.counts, node.alpha_x, net.schema.arity(lattice.x), parent_arities)
        )
    return ConcreteNetwork(schema=net.schema, parents=tuple(parents), tables=tuple(tables))


def network_stats(net: CombinedNetwork) -> NetworkStats:
    stored: dict[str, int] = {}
    alive: dict[str, int] = {}
    dead: dict[str, int] = {}
    open_: dict[str, int] = {}
    for lattice in net.lattices:
        name = net.schema.name(lattice.x)
        stored[name] = len(lattice.nodes)
        alive[name] = sum(1 for n in lattice.nodes.values() if n.status is NodeStatus.ALIVE)
        dead[name] = sum(1 for n in lattice.nodes.values() if n.status is NodeStatus.DEAD)
        open_[name] = sum(
            1 for n in lattice.nodes.values() if n.expansion is ExpansionFlag.OPEN
        )
    return NetworkStats(stored=stored, alive=alive, dead=dead, open=open_)
