"""Accounting for simulated external calls.

Embedding, LLM inference, translation, spell-checking, and model training
stand in for remote APIs: every call is logged with the artificial latency
it would cost, and the engine only sleeps those latencies when benchmarking
(or when a service opts in).
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass

CALL_KINDS = ("embed", "llm_infer", "translate", "spellcheck", "mlp_train")


@dataclass(frozen=True)
class LatencyConfig:
    """Artificial per-call delays in milliseconds."""

    embed_per_row: float = 2.0
    llm_per_row: float = 30.0
    translate_per_row: float = 20.0
    spellcheck_per_row: float = 10.0
    mlp_train_flat: float = 500.0

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be >= 0")

    def per_row(self, kind: str) -> float:
        return {
            "embed": self.embed_per_row,
            "llm_infer": self.llm_per_row,
            "translate": self.translate_per_row,
            "spellcheck": self.spellcheck_per_row,
            "mlp_train": self.mlp_train_flat,
        }[kind]


@dataclass(frozen=True)
class Invocation:
    kind: str
    node_id: str
    row_id: str
    ms: float


class InvocationLog:
    """Append-only record of simulated external calls within one run."""

    def __init__(self, latency: LatencyConfig | None = None, sleep: bool = False) -> None:
        self.latency = latency or LatencyConfig()
        self.sleep = sleep
        self.records: list[Invocation] = []

    def record_rows(self, kind: str, node_id: str, row_ids) -> None:
        ms = self.latency.per_row(kind)
        batch = [Invocation(kind, node_id, rid, ms) for rid in row_ids]
        if not batch:
            return
        self.records.extend(batch)
        if self.sleep:
            time.sleep(ms * len(batch) / 1000.0)

    def record_flat(self, kind: str, node_id: str) -> None:
        ms = self.latency.per_row(kind)
        self.records.append(Invocation(kind, node_id, "*", ms))
        if self.sleep:
            time.sleep(ms / 1000.0)

    def count(self, kind: str | None = None) -> int:
        if kind is None:
            return len(self.records)
        return sum(1 for r in self.records if r.kind == kind)

    def row_ids(self, kind: str) -> set[str]:
        return {r.row_id for r in self.records if r.kind == kind}

    def total_ms(self) -> float:
        return sum(r.ms for r in self.records)

    def by_node(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for r in self.records:
            out.setdefault(r.node_id, {}).setdefault(r.kind, 0)
            out[r.node_id][r.kind] += 1
        return out

    def sorted_records(self) -> list[Invocation]:
        return sorted(self.records, key=lambda r: (r.node_id, r.row_id, r.kind))


def canonical_input_hash(payload) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.blake2b(text.encode("utf-8"), digest_size=16).hexdigest()


class ReplayCache:
    """Persistent map from (call kind, canonical input hash) to output so
    simulated API answers survive across processes. Replayed calls still log
    their invocation and artificial latency."""

    def __init__(self) -> None:
        self._data: dict[str, dict[str, object]] = {k: {} for k in CALL_KINDS}
        self.hits = 0
        self.misses = 0

    def lookup(self, kind: str, payload):
        key = canonical_input_hash(payload)
        bucket = self._data.setdefault(kind, {})
        if key in bucket:
            self.hits += 1
            return True, bucket[key]
        self.misses += 1
        return False, None

    def store(self, kind: str, payload, output) -> None:
        self._data.setdefault(kind, {})[canonical_input_hash(payload)] = output

    def to_doc(self) -> dict:
        return {k: dict(v) for k, v in self._data.items()}

    @staticmethod
    def from_doc(doc: dict) -> "ReplayCache":
        cache = ReplayCache()
        for kind, bucket in doc.items():
            cache._data[kind] = dict(bucket)
        return cache

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_doc(), f, sort_keys=True)

    @staticmethod
    def load(path) -> "ReplayCache":
        with open(path, encoding="utf-8") as f:
            return ReplayCache.from_doc(json.load(f))
