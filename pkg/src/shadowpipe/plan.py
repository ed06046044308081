"""Declarative pipeline plans.

A plan is a JSON document ``{"nodes": [...], "outputs": [...]}`` where each
node is ``{"id": str, "kind": str, "params": {...}, "inputs": [str, ...]}``.
This module parses and validates plans, assigns content fingerprints used as
cache keys, diffs plan versions, and applies patches.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, replace

__all__ = [
    "OperatorNode",
    "PipelinePlan",
    "PlanDiff",
    "PlanPatch",
    "PlanError",
    "parse_plan",
    "plan_from_doc",
    "serialize_plan",
    "fingerprint_plan",
    "diff_plans",
    "apply_patch",
    "KIND_SPECS",
]


class PlanError(ValueError):
    """Invalid plan document or patch."""


# kind -> (required params, optional params, number of inputs)
KIND_SPECS: dict[str, tuple[frozenset[str], frozenset[str], int]] = {
    "csv_source": (frozenset({"path", "id_column"}), frozenset(), 0),
    "filter_in": (frozenset({"column", "values"}), frozenset(), 1),
    "join": (frozenset({"on"}), frozenset(), 2),
    "weak_label_regex": (
        frozenset({"text_column", "positive_patterns", "negative_override_patterns", "output_column"}),
        frozenset({"label_overrides"}),
        1,
    ),
    "embed": (frozenset({"text_column", "dim", "output_column"}), frozenset(), 1),
    "vector_store_build": (frozenset({"vector_column", "metadata_columns"}), frozenset(), 1),
    "rag_classify": (frozenset({"k", "text_column", "vector_column", "output_column"}), frozenset(), 2),
    "mlp_train": (
        frozenset({"vector_column", "label_column", "hidden_units", "epochs", "learning_rate", "seed"}),
        frozenset(),
        1,
    ),
    "mlp_predict": (frozenset({"model_input", "output_column"}), frozenset(), 2),
    "label_binarize": (frozenset({"column", "positive_value", "output_column"}), frozenset(), 1),
    "score_accuracy": (frozenset({"pred_column", "true_column"}), frozenset(), 1),
    "translate": (frozenset({"text_column", "languages"}), frozenset(), 1),
    "spellcheck": (frozenset({"text_column"}), frozenset(), 1),
}


@dataclass(frozen=True)
class OperatorNode:
    id: str
    kind: str
    params: dict
    inputs: tuple[str, ...]

    def to_doc(self) -> dict:
        return {"id": self.id, "kind": self.kind,
                "params": copy.deepcopy(self.params), "inputs": list(self.inputs)}


@dataclass(frozen=True)
class PipelinePlan:
    nodes: tuple[OperatorNode, ...]
    outputs: tuple[str, ...]

    def node(self, node_id: str) -> OperatorNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise PlanError(f"unknown node id {node_id!r}")

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def consumers(self, node_id: str) -> list[OperatorNode]:
        return [n for n in self.nodes if node_id in n.inputs]

    def topo_order(self) -> list[OperatorNode]:
        return _topo_sort(self.nodes)

    def nodes_of_kind(self, kind: str) -> list[OperatorNode]:
        return [n for n in self.nodes if n.kind == kind]

    def to_doc(self) -> dict:
        return {"nodes": [n.to_doc() for n in self.nodes], "outputs": list(self.outputs)}


def _topo_sort(nodes: tuple[OperatorNode, ...]) -> list[OperatorNode]:
    by_id = {n.id: n for n in nodes}
    done: dict[str, bool] = {}
    order: list[OperatorNode] = []
    in_progress: set[str] = set()

    def visit(node_id: str, stack: list[str]) -> None:
        if done.get(node_id):
            return
        if node_id in in_progress:
            cycle = stack[stack.index(node_id):] + [node_id]
            raise PlanError(f"cycle detected through nodes: {', '.join(cycle)}")
        in_progress.add(node_id)
        for up in by_id[node_id].inputs:
            visit(up, stack + [node_id])
        in_progress.discard(node_id)
        done[node_id] = True
        order.append(by_id[node_id])

    for n in nodes:
        visit(n.id, [])
    return order


def _validate_structure(plan: PipelinePlan) -> None:
    ids = [n.id for n in plan.nodes]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise PlanError(f"duplicate node ids: {', '.join(dupes)}")
    id_set = set(ids)
    for n in plan.nodes:
        if n.kind not in KIND_SPECS:
            raise PlanError(f"node {n.id!r}: unknown kind {n.kind!r}")
        required, optional, arity = KIND_SPECS[n.kind]
        missing = required - n.params.keys()
        if missing:
            raise PlanError(f"node {n.id!r}: missing params {sorted(missing)} for kind {n.kind}")
        unknown = n.params.keys() - required - optional
        if unknown:
            raise PlanError(f"node {n.id!r}: unknown params {sorted(unknown)} for kind {n.kind}")
        if len(n.inputs) != arity:
            raise PlanError(f"node {n.id!r}: kind {n.kind} takes {arity} inputs, got {len(n.inputs)}")
        for up in n.inputs:
            if up not in id_set:
                raise PlanError(f"node {n.id!r}: unknown input id {up!r}")
    _topo_sort(plan.nodes)
    if not plan.outputs:
        raise PlanError("plan declares no outputs")
    for out in plan.outputs:
        if out not in id_set:
            raise PlanError(f"unknown output id {out!r}")
    if not any(plan.node(o).kind == "score_accuracy" for o in plan.outputs):
        raise PlanError("outputs must include a score_accuracy node")
    _check_connected(plan)


def _check_connected(plan: PipelinePlan) -> None:
    if not plan.nodes:
        raise PlanError("empty plan")
    neighbors: dict[str, set[str]] = {n.id: set() for n in plan.nodes}
    for n in plan.nodes:
        for up in n.inputs:
            neighbors[n.id].add(up)
            neighbors[up].add(n.id)
    seen = {plan.nodes[0].id}
    frontier = [plan.nodes[0].id]
    while frontier:
        cur = frontier.pop()
        for nxt in neighbors[cur]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    if len(seen) != len(plan.nodes):
        missing = sorted(n.id for n in plan.nodes if n.id not in seen)
        raise PlanError(f"plan is not a single connected DAG; disconnected: {', '.join(missing)}")


# Schema propagation. Types are "str" | "int" | "float" | "vec"; stores and
# models are opaque pseudo-schemas.
_STORE = "__store__"
_MODEL = "__model__"


def _require(schema, node: OperatorNode, column: str, what: str = "column") -> None:
    if not isinstance(schema, dict):
        raise PlanError(f"node {node.id!r}: input is not a relation")
    if column not in schema:
        raise PlanError(f"node {node.id!r}: unknown {what} {column!r}")


def _propagate_schema(plan: PipelinePlan, source_schemas: dict[str, dict[str, str]]) -> dict[str, object]:
    out: dict[str, object] = {}
    for n in plan.topo_order():
        ins = [out[i] for i in n.inputs]
        p = n.params
        if n.kind == "csv_source":
            if p["path"] not in source_schemas:
                raise PlanError(f"node {n.id!r}: unknown source path {p['path']!r}")
            schema = dict(source_schemas[p["path"]])
            _require(schema, n, p["id_column"], "id_column")
            out[n.id] = schema
        elif n.kind == "filter_in":
            _require(ins[0], n, p["column"])
            out[n.id] = dict(ins[0])
        elif n.kind == "join":
            left, right = ins
            _require(left, n, p["on"], "join key")
            _require(right, n, p["on"], "join key")
            clash = (left.keys() & right.keys()) - {p["on"]}
            if clash:
                raise PlanError(f"node {n.id!r}: column name clash in join: {sorted(clash)}")
            merged = dict(left)
            merged.update({k: v for k, v in right.items() if k != p["on"]})
            out[n.id] = merged
        elif n.kind == "weak_label_regex":
            _require(ins[0], n, p["text_column"])
            s = dict(ins[0])
            s[p["output_column"]] = "int"
            out[n.id] = s
        elif n.kind == "embed":
            _require(ins[0], n, p["text_column"])
            if not isinstance(p["dim"], int) or p["dim"] <= 0:
                raise PlanError(f"node {n.id!r}: dim must be a positive integer")
            s = dict(ins[0])
            s[p["output_column"]] = "vec"
            out[n.id] = s
        elif n.kind == "vector_store_build":
            _require(ins[0], n, p["vector_column"])
            for c in p["metadata_columns"]:
                _require(ins[0], n, c, "metadata column")
            if not p["metadata_columns"]:
                raise PlanError(f"node {n.id!r}: metadata_columns must not be empty")
            out[n.id] = _STORE
        elif n.kind == "rag_classify":
            if ins[1] is not _STORE:
                raise PlanError(f"node {n.id!r}: second input must be a vector_store_build node")
            _require(ins[0], n, p["text_column"])
            _require(ins[0], n, p["vector_column"])
            if not isinstance(p["k"], int) or p["k"] < 1:
                raise PlanError(f"node {n.id!r}: k must be >= 1")
            s = dict(ins[0])
            s[p["output_column"]] = "int"
            out[n.id] = s
        elif n.kind == "mlp_train":
            _require(ins[0], n, p["vector_column"])
            _require(ins[0], n, p["label_column"])
            out[n.id] = _MODEL
        elif n.kind == "mlp_predict":
            if p["model_input"] not in n.inputs:
                raise PlanError(f"node {n.id!r}: model_input must name one of its inputs")
            model_pos = n.inputs.index(p["model_input"])
            if ins[model_pos] is not _MODEL:
                raise PlanError(f"node {n.id!r}: model_input does not produce a model")
            data = ins[1 - model_pos]
            if not isinstance(data, dict):
                raise PlanError(f"node {n.id!r}: data input is not a relation")
            s = dict(data)
            s[p["output_column"]] = "int"
            out[n.id] = s
        elif n.kind == "label_binarize":
            _require(ins[0], n, p["column"])
            s = dict(ins[0])
            s[p["output_column"]] = "int"
            out[n.id] = s
        elif n.kind == "score_accuracy":
            _require(ins[0], n, p["pred_column"])
            _require(ins[0], n, p["true_column"])
            out[n.id] = {"accuracy": "float", "correct": "int", "total": "int"}
        elif n.kind in ("translate", "spellcheck"):
            _require(ins[0], n, p["text_column"])
            if n.kind == "translate":
                _require(ins[0], n, "language")
            out[n.id] = dict(ins[0])
        else:  # pragma: no cover - kinds are exhausted above
            raise PlanError(f"node {n.id!r}: unhandled kind {n.kind}")
    return out


def plan_from_doc(doc: dict, source_schemas: dict[str, dict[str, str]] | None = None) -> PipelinePlan:
    if not isinstance(doc, dict) or "nodes" not in doc or "outputs" not in doc:
        raise PlanError('plan document must be an object with "nodes" and "outputs"')
    nodes = []
    for nd in doc["nodes"]:
        try:
            nodes.append(
                OperatorNode(
                    id=str(nd["id"]),
                    kind=str(nd["kind"]),
                    params=copy.deepcopy(dict(nd.get("params", {}))),
                    inputs=tuple(str(i) for i in nd.get("inputs", [])),
                )
            )
        except (KeyError, TypeError) as e:
            raise PlanError(f"malformed node entry: {nd!r} ({e})") from e
    plan = PipelinePlan(tuple(nodes), tuple(str(o) for o in doc["outputs"]))
    _validate_structure(plan)
    if source_schemas is not None:
        _propagate_schema(plan, source_schemas)
    return plan


def parse_plan(text: str, source_schemas: dict[str, dict[str, str]] | None = None) -> PipelinePlan:
    """Parse and validate a plan document. Schema checks run when the source
    schemas (csv path -> column -> type) are supplied."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise PlanError(f"syntax error at line {e.lineno} column {e.colno}: {e.msg}") from e
    return plan_from_doc(doc, source_schemas)


def validate_against(plan: PipelinePlan, source_schemas: dict[str, dict[str, str]]) -> None:
    _propagate_schema(plan, source_schemas)


def _canonical(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def serialize_plan(plan: PipelinePlan) -> str:
    """Canonical serialization; parse(serialize(plan)) == plan."""
    return _canonical(plan.to_doc())


def fingerprint_plan(plan: PipelinePlan) -> dict[str, str]:
    """Stable per-node content hashes: a node's fingerprint covers its kind,
    canonicalized params, and the fingerprints of its inputs in order."""
    fps: dict[str, str] = {}
    for n in plan.topo_order():
        payload = _canonical([n.kind, n.params, [fps[i] for i in n.inputs]])
        fps[n.id] = hashlib.blake2b(payload.encode("utf-8"), digest_size=16).hexdigest()
    return fps


def plan_fingerprint(plan: PipelinePlan) -> str:
    fps = fingerprint_plan(plan)
    payload = _canonical([[fps[o] for o in plan.outputs], sorted(fps.values())])
    return hashlib.blake2b(payload.encode("utf-8"), digest_size=16).hexdigest()


@dataclass(frozen=True)
class PlanDiff:
    changed: frozenset[str]
    added: frozenset[str]
    removed: frozenset[str]
    single_operator_change: bool

    @property
    def empty(self) -> bool:
        return not (self.changed or self.added or self.removed)


def diff_plans(old: PipelinePlan, new: PipelinePlan) -> PlanDiff:
    old_by_id = {n.id: n for n in old.nodes}
    new_by_id = {n.id: n for n in new.nodes}
    added = frozenset(new_by_id.keys() - old_by_id.keys())
    removed = frozenset(old_by_id.keys() - new_by_id.keys())
    changed = frozenset(
        i for i in old_by_id.keys() & new_by_id.keys() if old_by_id[i] != new_by_id[i]
    )
    single = False
    if len(changed) == 1 and not added and not removed:
        (cid,) = changed
        o, n = old_by_id[cid], new_by_id[cid]
        single = o.kind == n.kind and o.inputs == n.inputs and o.params != n.params
    return PlanDiff(changed, added, removed, single)


@dataclass(frozen=True)
class PlanPatch:
    """A machine-applicable plan edit: param updates on a target node and/or
    a new node spliced in after an upstream node."""

    target_node: str
    param_updates: dict = field(default_factory=dict)
    insert_after: tuple[OperatorNode, str] | None = None

    def to_doc(self) -> dict:
        doc: dict = {"target_node": self.target_node, "param_updates": self.param_updates}
        if self.insert_after is not None:
            node, upstream = self.insert_after
            doc["insert_after"] = {"node": node.to_doc(), "upstream": upstream}
        else:
            doc["insert_after"] = None
        return doc

    @staticmethod
    def from_doc(doc: dict) -> "PlanPatch":
        ins = doc.get("insert_after")
        insert_after = None
        if ins is not None:
            nd = ins["node"]
            insert_after = (
                OperatorNode(nd["id"], nd["kind"], dict(nd.get("params", {})), tuple(nd.get("inputs", []))),
                ins["upstream"],
            )
        return PlanPatch(doc["target_node"], dict(doc.get("param_updates", {})), insert_after)


def apply_patch(plan: PipelinePlan, patch: PlanPatch,
                source_schemas: dict[str, dict[str, str]] | None = None) -> PipelinePlan:
    """Return a new plan with the patch applied; the input is unmodified."""
    if not plan.has_node(patch.target_node):
        raise PlanError(f"patch targets unknown node {patch.target_node!r}")
    nodes = list(plan.nodes)
    if patch.param_updates:
        for i, n in enumerate(nodes):
            if n.id == patch.target_node:
                params = dict(n.params)
                params.update(patch.param_updates)
                nodes[i] = replace(n, params=params)
    if patch.insert_after is not None:
        new_node, upstream = patch.insert_after
        if not plan.has_node(upstream):
            raise PlanError(f"patch inserts after unknown node {upstream!r}")
        if plan.has_node(new_node.id):
            raise PlanError(f"inserted node id {new_node.id!r} already exists")
        rewired = []
        for n in nodes:
            if upstream in n.inputs:
                n = replace(n, inputs=tuple(new_node.id if i == upstream else i for i in n.inputs))
            rewired.append(n)
        nodes = rewired
        nodes.append(replace(new_node, inputs=(upstream,)))
    patched = PipelinePlan(tuple(nodes), plan.outputs)
    _validate_structure(patched)
    if source_schemas is not None:
        _propagate_schema(patched, source_schemas)
    return patched
