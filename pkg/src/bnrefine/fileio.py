"""File formats: network specs, CSV datasets, session snapshots, networks.

All structured files are JSON with a ``format`` tag and integer ``version``
so stale or foreign files fail cleanly.  Serialization is canonical
(sorted keys, sorted node lists, no whitespace variation): the same
in-memory state always produces the same bytes, and floats round-trip
exactly through their shortest decimal form.

The network spec is the textual equivalent of the expert's annotated
graph: the variable ordering, the value labels, and one prior probability
per arc (1 mandatory, 0 forbidden, in between uncertain).

CSV datasets carry one header row of variable names (any column order)
and value labels as cells; parsing is strict, rejecting the whole file on
the first unknown label or missing cell, with row/column diagnostics.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

import numpy as np

from .domain import (
    ArcPriorMatrix,
    ConcreteNetwork,
    DomainSchema,
    Example,
    PriorConfig,
    VariableSpec,
)
from .engine import SCORING_MODELS, CombinedNetwork
from .lattice import (
    CountTable,
    ExpansionFlag,
    LatticeNode,
    NodeStatus,
    ParentLattice,
    new_lattice,
)

SPEC_FORMAT = "bnrefine-spec"
SESSION_FORMAT = "bnrefine-session"
NETWORK_FORMAT = "bnrefine-network"
SMOOTHED_FORMAT = "bnrefine-smoothed"
FORMAT_VERSION = 1


class SpecFormatError(ValueError):
    """A network spec document is malformed; message carries the location."""


class SessionFormatError(ValueError):
    """A session/network file is missing, corrupt, or from another version."""


class CsvFormatError(ValueError):
    """A data file does not match the schema; message carries row/column."""


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bnrefine-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(document: dict) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":")) + "\n"


# -- network spec --------------------------------------------------------


def parse_spec(text: str) -> tuple[DomainSchema, ArcPriorMatrix, PriorConfig]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecFormatError(f"not valid JSON: {err}") from None
    if not isinstance(doc, dict) or doc.get("format") != SPEC_FORMAT:
        raise SpecFormatError(f"missing format tag {SPEC_FORMAT!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise SpecFormatError(f"unsupported spec version {doc.get('version')!r}")

    raw_vars = doc.get("variables")
    if not isinstance(raw_vars, list) or not raw_vars:
        raise SpecFormatError("variables: must be a non-empty list")
    specs = []
    for i, entry in enumerate(raw_vars):
        where = f"variables[{i}]"
        if not isinstance(entry, dict) or "name" not in entry or "values" not in entry:
            raise SpecFormatError(f"{where}: needs 'name' and 'values'")
        try:
            specs.append(VariableSpec(entry["name"], tuple(entry["values"])))
        except ValueError as err:
            raise SpecFormatError(f"{where}: {err}") from None
    try:
        schema = DomainSchema(tuple(specs))
    except ValueError as err:
        raise SpecFormatError(f"variables: {err}") from None

    default_prior = doc.get("default_prior", 0.5)
    alpha = doc.get("alpha", 1.0)
    entries: dict[tuple[int, int], float] = {}
    for i, arc in enumerate(doc.get("arcs", [])):
        where = f"arcs[{i}]"
        if not isinstance(arc, dict) or not {"from", "to", "prior"} <= arc.keys():
            raise SpecFormatError(f"{where}: needs 'from', 'to', 'prior'")
        try:
            y = schema.position(arc["from"])
            x = schema.position(arc["to"])
        except ValueError as err:
            raise SpecFormatError(f"{where}: {err}") from None
        if y >= x:
            raise SpecFormatError(
                f"{where}: {arc['from']!r} does not precede {arc['to']!r} in the ordering"
            )
        p = arc["prior"]
        if not isinstance(p, (int, float)) or not 0.0 <= p <= 1.0:
            raise SpecFormatError(f"{where}: prior {p!r} outside [0,1]")
        if (y, x) in entries:
            raise SpecFormatError(f"{where}: duplicate arc {arc['from']}->{arc['to']}")
        entries[(y, x)] = float(p)
    try:
        priors = ArcPriorMatrix(entries=entries, default_prior=float(default_prior))
        config = PriorConfig(alpha=float(alpha))
    except ValueError as err:
        raise SpecFormatError(str(err)) from None
    return schema, priors, config


def print_spec(schema: DomainSchema, priors: ArcPriorMatrix, config: PriorConfig) -> str:
    doc = {
        "format": SPEC_FORMAT,
        "version": FORMAT_VERSION,
        "alpha": config.alpha,
        "default_prior": priors.default_prior,
        "variables": [
            {"name": v.name, "values": list(v.values)} for v in schema.variables
        ],
        "arcs": [
            {"from": schema.name(y), "to": schema.name(x), "prior": p}
            for (y, x), p in sorted(priors.entries.items())
        ],
    }
    return _dump(doc)


def load_spec(path: str) -> tuple[DomainSchema, ArcPriorMatrix, PriorConfig]:
    with open(path, encoding="utf-8") as handle:
        return parse_spec(handle.read())


def save_spec(path: str, schema: DomainSchema, priors: ArcPriorMatrix, config: PriorConfig) -> None:
    _atomic_write(path, print_spec(schema, priors, config))


# -- CSV datasets ---------------------------------------------------------


def parse_csv(text: str, schema: DomainSchema) -> list[Example]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError("empty file: missing header row") from None
    names = {v.name for v in schema.variables}
    if set(header) != names or len(header) != len(names):
        raise CsvFormatError(
            f"header {header!r} does not match schema variables {sorted(names)!r}"
        )
    columns = [schema.position(name) for name in header]
    value_index = [
        {label: i for i, label in enumerate(v.values)} for v in schema.variables
    ]
    examples: list[Example] = []
    for row_number, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise CsvFormatError(f"row {row_number}: expected {len(header)} cells, got {len(row)}")
        values = [0] * len(schema)
        for cell, x in zip(row, columns):
            if cell == "":
                raise CsvFormatError(
                    f"row {row_number}, column {schema.name(x)!r}: missing value"
                )
            try:
                values[x] = value_index[x][cell]
            except KeyError:
                raise CsvFormatError(
                    f"row {row_number}, column {schema.name(x)!r}: unknown label {cell!r}"
                ) from None
        examples.append(tuple(values))
    return examples


def load_csv(path: str, schema: DomainSchema) -> list[Example]:
    with open(path, encoding="utf-8", newline="") as handle:
        return parse_csv(handle.read(), schema)


def write_csv(path: str, examples, schema: DomainSchema) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([v.name for v in schema.variables])
    for example in examples:
        writer.writerow(
            [schema.variables[x].values[v] for x, v in enumerate(example)]
        )
    _atomic_write(path, buffer.getvalue())


# -- session snapshots ----------------------------------------------------


def _counts_to_doc(counts: CountTable) -> dict[str, list[int]]:
    return {
        ",".join(str(v) for v in cfg): [int(c) for c in row]
        for cfg, row in sorted(counts.rows.items())
    }


def _counts_from_doc(doc: dict, m_x: int) -> CountTable:
    counts = CountTable(m_x)
    for cfg_text, row in doc.items():
        cfg = tuple(int(v) for v in cfg_text.split(",")) if cfg_text else ()
        arr = np.array(row, dtype=np.int64)
        counts.rows[cfg] = arr
        counts.total += int(arr.sum())
        counts.config_len = len(cfg)
    return counts


def _node_to_doc(node: LatticeNode) -> dict:
    return {
        "key": node.key,
        "log_prior": node.log_prior,
        "log_ml": node.log_ml,
        "status": node.status.value,
        "open": node.expansion is ExpansionFlag.OPEN,
        "expanded": node.expanded,
        "synced_through": node.synced_through,
        "counts": _counts_to_doc(node.counts),
        "model_ml": dict(sorted(node.model_ml.items())),
        "model_synced": dict(sorted(node.model_synced.items())),
        "model_params": {k: list(v) for k, v in sorted(node.model_params.items())},
    }


def session_to_document(net: CombinedNetwork) -> dict:
    return {
        "format": SESSION_FORMAT,
        "version": FORMAT_VERSION,
        "spec": json.loads(print_spec(net.schema, net.priors, net.config)),
        "scoring_model": net.scoring_model,
        "example_log": [list(example) for example in net.example_log],
        "lattices": [
            {
                "x": lattice.x,
                "last_refine_n": lattice.last_refine_n,
                "nodes": [
                    _node_to_doc(lattice.nodes[key]) for key in sorted(lattice.nodes)
                ],
            }
            for lattice in net.lattices
        ],
    }


def session_from_document(doc: dict) -> CombinedNetwork:
    if not isinstance(doc, dict) or doc.get("format") != SESSION_FORMAT:
        raise SessionFormatError(f"missing format tag {SESSION_FORMAT!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise SessionFormatError(f"unsupported session version {doc.get('version')!r}")
    try:
        schema, priors, config = parse_spec(json.dumps(doc["spec"]))
        scoring_model = doc["scoring_model"]
        if scoring_model not in SCORING_MODELS:
            raise SessionFormatError(f"unknown scoring model {scoring_model!r}")
        example_log = [tuple(int(v) for v in row) for row in doc["example_log"]]
        for example in example_log:
            schema.validate_example(example)
        lattices = []
        for lattice_doc in doc["lattices"]:
            x = lattice_doc["x"]
            lattice = new_lattice(x, schema, priors, config)
            lattice.nodes.clear()
            lattice.last_refine_n = int(lattice_doc["last_refine_n"])
            for node_doc in lattice_doc["nodes"]:
                node = _node_from_doc(node_doc, lattice, schema, config)
                lattice.nodes[node.key] = node
            _rewire_links(lattice)
            lattice.recompute_best()
            lattices.append(lattice)
        if [lat.x for lat in lattices] != list(range(len(schema))):
            raise SessionFormatError("lattices do not cover the schema variables")
        net = CombinedNetwork(
            schema=schema,
            priors=priors,
            config=config,
            lattices=lattices,
            example_log=example_log,
            scoring_model=scoring_model,
        )
        for lattice in net.lattices:
            for node in lattice.nodes.values():
                if node.synced_through > net.n_total:
                    raise SessionFormatError("node synced beyond the example log")
        return net
    except SessionFormatError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise SessionFormatError(f"malformed session document: {err}") from None


def _node_from_doc(
    doc: dict, lattice: ParentLattice, schema: DomainSchema, config: PriorConfig
) -> LatticeNode:
    from .kernels import alpha_for

    key = int(doc["key"])
    parents = lattice.parents_of_key(key)
    node = LatticeNode(
        key=key,
        parents=parents,
        alpha_x=alpha_for(lattice.x, parents, config, schema),
        counts=_counts_from_doc(doc["counts"], schema.arity(lattice.x)),
        log_prior=float(doc["log_prior"]),
        log_ml=float(doc["log_ml"]),
        status=NodeStatus(doc["status"]),
        expansion=ExpansionFlag.OPEN if doc["open"] else ExpansionFlag.CLOSED,
        expanded=bool(doc["expanded"]),
        synced_through=int(doc["synced_through"]),
    )
    node.model_ml = {str(k): float(v) for k, v in doc["model_ml"].items()}
    node.model_synced = {str(k): int(v) for k, v in doc["model_synced"].items()}
    node.model_params = {str(k): [float(v) for v in vs] for k, vs in doc["model_params"].items()}
    return node


def _rewire_links(lattice: ParentLattice) -> None:
    for key, node in lattice.nodes.items():
        node.sub_links.clear()
        node.super_links.clear()
    for key, node in lattice.nodes.items():
        for i in range(len(lattice.candidates)):
            bit = 1 << i
            if key & bit and (key ^ bit) in lattice.nodes:
                node.sub_links.add(key ^ bit)
            elif not key & bit and (key | bit) in lattice.nodes:
                node.super_links.add(key | bit)


def serialize_session(net: CombinedNetwork) -> str:
    return _dump(session_to_document(net))


def save_session(path: str, net: CombinedNetwork) -> None:
    _atomic_write(path, serialize_session(net))


def load_session(path: str) -> CombinedNetwork:
    try:
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
    except (OSError, json.JSONDecodeError) as err:
        raise SessionFormatError(f"cannot read session {path!r}: {err}") from None
    return session_from_document(doc)


# -- concrete networks ----------------------------------------------------


def network_to_document(network: ConcreteNetwork) -> dict:
    schema = network.schema
    return {
        "format": NETWORK_FORMAT,
        "version": FORMAT_VERSION,
        "variables": [
            {"name": v.name, "values": list(v.values)} for v in schema.variables
        ],
        "parents": [
            [schema.name(p) for p in parents] for parents in network.parents
        ],
        "tables": [[list(row) for row in table] for table in network.tables],
    }


def network_from_document(doc: dict) -> ConcreteNetwork:
    if not isinstance(doc, dict) or doc.get("format") != NETWORK_FORMAT:
        raise SessionFormatError(f"missing format tag {NETWORK_FORMAT!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise SessionFormatError(f"unsupported network version {doc.get('version')!r}")
    try:
        schema = DomainSchema(
            tuple(VariableSpec(v["name"], tuple(v["values"])) for v in doc["variables"])
        )
        parents = tuple(
            tuple(schema.position(name) for name in names) for names in doc["parents"]
        )
        tables = tuple(np.array(t, dtype=float) for t in doc["tables"])
        return ConcreteNetwork(schema=schema, parents=parents, tables=tables)
    except (KeyError, TypeError, ValueError) as err:
        raise SessionFormatError(f"malformed network document: {err}") from None


def save_network(path: str, network: ConcreteNetwork) -> None:
    _atomic_write(path, _dump(network_to_document(network)))


def load_network(path: str) -> ConcreteNetwork:
    try:
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
    except (OSError, json.JSONDecodeError) as err:
        raise SessionFormatError(f"cannot read network {path!r}: {err}") from None
    return network_from_document(doc)


def smoothed_to_document(smoothed) -> dict:
    schema = smoothed.schema
    return {
        "format": SMOOTHED_FORMAT,
        "version": FORMAT_VERSION,
        "seed": smoothed.seed,
        "variables": [
            {
                "name": schema.name(x),
                "leaf": [schema.name(p) for p in var.leaf],
                "mass": var.mass,
                "arc_probs": {schema.name(y): p for y, p in sorted(var.arc_probs.items())},
                "table": [list(row) for row in var.table],
            }
            for x, var in enumerate(smoothed.variables)
        ],
    }


def save_smoothed(path: str, smoothed) -> None:
    _atomic_write(path, _dump(smoothed_to_document(smoothed)))
