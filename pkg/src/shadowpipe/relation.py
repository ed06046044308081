"""Columnar relations with stable row identifiers.

Every intermediate the engine materializes is a Relation. Row identifiers
are strings of the form ``tag:00042`` for source tables and
``left_id|right_id`` for join outputs, so they sort deterministically and
survive serialization.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

# Lineage of one operator output: output row id -> one set of contributing
# row ids per input relation (in input order). Sources map to an empty tuple.
LineageMap = dict[str, tuple[frozenset[str], ...]]


class RelationError(ValueError):
    pass


def source_row_id(tag: str, index: int) -> str:
    return f"{tag}:{index:05d}"


def join_row_id(left_id: str, right_id: str) -> str:
    return f"{left_id}|{right_id}"


@dataclass(frozen=True)
class Relation:
    """Immutable columnar table. Vector cells are tuples of floats so plain
    value equality works for delta detection and caching."""

    columns: dict[str, list]
    row_ids: list[str]
    _index: dict[str, int] = field(init=False, repr=False, compare=False, hash=False, default=None)

    def __post_init__(self) -> None:
        for name, values in self.columns.items():
            if len(values) != len(self.row_ids):
                raise RelationError(
                    f"column {name!r}: {len(values)} values for {len(self.row_ids)} rows"
                )
        if len(set(self.row_ids)) != len(self.row_ids):
            raise RelationError("duplicate row ids")

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    @property
    def column_names(self) -> list[str]:
        return list(self.columns)

    def index_of(self, row_id: str) -> int:
        idx = object.__getattribute__(self, "_index")
        if idx is None:
            idx = {rid: i for i, rid in enumerate(self.row_ids)}
            object.__setattr__(self, "_index", idx)
        return idx[row_id]

    def has_row(self, row_id: str) -> bool:
        try:
            self.index_of(row_id)
            return True
        except KeyError:
            return False

    def value(self, column: str, row_id: str):
        return self.columns[column][self.index_of(row_id)]

    def row(self, i: int) -> dict:
        return {name: values[i] for name, values in self.columns.items()}

    def row_by_id(self, row_id: str) -> dict:
        return self.row(self.index_of(row_id))

    def with_column(self, name: str, values: list) -> Relation:
        cols = dict(self.columns)
        cols[name] = list(values)
        return Relation(cols, list(self.row_ids))

    def take(self, indices: list[int]) -> Relation:
        cols = {name: [values[i] for i in indices] for name, values in self.columns.items()}
        return Relation(cols, [self.row_ids[i] for i in indices])

    def take_ids(self, row_ids: list[str]) -> Relation:
        return self.take([self.index_of(r) for r in row_ids])

    def rows_equal(self, i: int, other: Relation, j: int) -> bool:
        if self.column_names != other.column_names:
            return False
        return all(self.columns[c][i] == other.columns[c][j] for c in self.columns)


def identity_lineage(out_ids: list[str], in_ids: list[str]) -> LineageMap:
    return {o: (frozenset((i,)),) for o, i in zip(out_ids, in_ids)}


def _parse_column(raw: list[str]) -> list:
    try:
        return [int(v) for v in raw]
    except ValueError:
        pass
    try:
        return [float(v) for v in raw]
    except ValueError:
        return raw


def read_csv(path: str | Path, tag: str) -> Relation:
    """Read a UTF-8 CSV with header into a Relation, inferring int/float
    columns. Row ids are ``tag:index`` in file order."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise RelationError(f"{path}: empty file, expected a header row")
    header, body = rows[0], rows[1:]
    columns: dict[str, list] = {}
    for c, name in enumerate(header):
        columns[name] = _parse_column([r[c] for r in body])
    return Relation(columns, [source_row_id(tag, i) for i in range(len(body))])


def write_csv(rel: Relation, path: str | Path, column_order: list[str] | None = None) -> None:
    names = column_order or rel.column_names
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(names)
        for i in range(rel.n_rows):
            w.writerow([rel.columns[n][i] for n in names])
