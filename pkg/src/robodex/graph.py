"""Embedded persistent property graph.

Typed nodes and edges live in plain dictionaries with two indexes: label to
node ids, and (label, normalized name) to node id. Entity identity across the
catalog is (label, normalized name), so two datasets that mention the same
robot model share one node. Persistence is a single snapshot file with a
trailing checksum; queries are plain scans over the indexes, which is plenty
below ~10^4 nodes.
"""
from __future__ import annotations

import hashlib
import json
import re
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .datamodel import DATASET, DataModelSchema, builtin_schema
from .errors import (
    CorruptStoreError,
    DatasetNotFoundError,
    StoreIoError,
    UnknownLabelError,
)

Scalar = str | int | float | bool

_WS = re.compile(r"\s+")

SNAPSHOT_FORMAT = "robodex-graph"
SNAPSHOT_VERSION = 1


def normalize_name(name: str) -> str:
    """Identity form of an entity name: trimmed, single-spaced, case-folded."""
    return _WS.sub(" ", name.strip()).casefold()


def normalize_token_value(value: str) -> str:
    """Zero-pad-insensitive form for numeric-looking token values ('01' == '1')."""
    text = str(value)
    if text.isdigit():
        return text.lstrip("0") or "0"
    return text


@dataclass
class Node:
    id: int
    label: str
    properties: dict[str, Scalar]

    @property
    def name(self) -> str | None:
        value = self.properties.get("name")
        return value if isinstance(value, str) else None


@dataclass(frozen=True)
class Edge:
    id: int
    edge_type: str
    source: int
    target: int


@dataclass
class DatasetProfile:
    doi: str
    title: str
    properties: dict[str, Scalar]
    groups: list[tuple[str, list[str]]]  # (edge type, sorted entity names)

    def to_json_dict(self) -> dict:
        return {
            "doi": self.doi,
            "title": self.title,
            "properties": self.properties,
            "groups": [{"edge_type": et, "entities": names} for et, names in self.groups],
        }


@dataclass
class ComparisonRow:
    facet: str
    cells: tuple[tuple[str, ...], ...]  # aligned with ComparisonTable.dois
    same: bool


@dataclass
class ComparisonTable:
    dois: tuple[str, ...]
    facets: tuple[str, ...]
    rows: list[ComparisonRow]

    def to_json_dict(self) -> dict:
        return {
            "dois": list(self.dois),
            "facets": list(self.facets),
            "rows": [
                {
                    "facet": row.facet,
                    "cells": {doi: list(cell) for doi, cell in zip(self.dois, row.cells)},
                    "same": row.same,
                }
                for row in self.rows
            ],
        }


class _RWLock:
    """Many readers or one writer; the writer may re-enter its own lock."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers: dict[int, int] = {}
        self._writer: int | None = None
        self._depth = 0

    @contextmanager
    def read(self):
        me = threading.get_ident()
        with self._cond:
            while self._writer is not None and self._writer != me:
                self._cond.wait()
            self._readers[me] = self._readers.get(me, 0) + 1
        try:
            yield
        finally:
            with self._cond:
                self._readers[me] -= 1
                if not self._readers[me]:
                    del self._readers[me]
                self._cond.notify_all()

    @contextmanager
    def write(self):
        me = threading.get_ident()
        with self._cond:
            if self._writer == me:
                self._depth += 1
            else:
                while self._writer is not None or any(t != me for t in self._readers):
                    self._cond.wait()
                self._writer = me
                self._depth = 1
        try:
            yield
        finally:
            with self._cond:
                self._depth -= 1
                if self._depth == 0:
                    self._writer = None
                self._cond.notify_all()


class PropertyGraph:
    """In-memory labeled property graph bound to a data-model schema."""

    def __init__(self, schema: DataModelSchema | None = None):
        self.schema = schema or builtin_schema()
        self._nodes: dict[int, Node] = {}
        self._edges: dict[int, Edge] = {}
        self._by_label: dict[str, set[int]] = {}
        self._by_name: dict[tuple[str, str], int] = {}
        self._edge_keys: dict[tuple[str, int, int], int] = {}
        self._out: dict[int, set[int]] = {}
        self._in: dict[int, set[int]] = {}
        self._next_node_id = 1
        self._next_edge_id = 1
        self._lock = _RWLock()

    # -- locking hooks (used by ingest pipelines for multi-step transactions) --

    def reading(self):
        return self._lock.read()

    def writing(self):
        return self._lock.write()

    # -- basic accessors -------------------------------------------------------

    def nodes(self) -> Iterator[Node]:
        return iter(list(self._nodes.values()))

    def edges(self) -> Iterator[Edge]:
        return iter(list(self._edges.values()))

    def node_by_id(self, node_id: int) -> Node | None:
        return self._nodes.get(node_id)

    def node_by_name(self, label: str, name: str) -> Node | None:
        node_id = self._by_name.get((label, normalize_name(name)))
        return self._nodes.get(node_id) if node_id is not None else None

    def nodes_with_label(self, label: str) -> list[Node]:
        return [self._nodes[i] for i in sorted(self._by_label.get(label, ()))]

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    # -- mutations ---------------------------------------------------------------

    def add_node(self, label: str, properties: Mapping[str, Scalar]) -> Node:
        """Insert a node. The label must exist in the schema; a `name` property
        enters the identity index and must not collide within its label."""
        with self._lock.write():
            if not self.schema.has_node_label(label):
                raise UnknownLabelError(f"unknown node label {label!r}")
            props = _checked_properties(properties)
            name = props.get("name")
            key = (label, normalize_name(name)) if isinstance(name, str) else None
            if key is not None and key in self._by_name:
                raise ValueError(f"node ({label}, {name!r}) already exists")
            node = Node(self._next_node_id, label, props)
            self._next_node_id += 1
            self._nodes[node.id] = node
            self._by_label.setdefault(label, set()).add(node.id)
            if key is not None:
                self._by_name[key] = node.id
            self._out.setdefault(node.id, set())
            self._in.setdefault(node.id, set())
            return _copy(node)

    def update_node(self, node_id: int, properties: Mapping[str, Scalar]) -> Node:
        """Merge properties into an existing node (name changes re-key the index)."""
        with self._lock.write():
            node = self._nodes.get(node_id)
            if node is None:
                raise KeyError(f"no node {node_id}")
            props = _checked_properties(properties)
            new_name = props.get("name", node.properties.get("name"))
            old_name = node.properties.get("name")
            if isinstance(old_name, str) and new_name != old_name:
                del self._by_name[(node.label, normalize_name(old_name))]
            if isinstance(new_name, str) and new_name != old_name:
                key = (node.label, normalize_name(new_name))
                if key in self._by_name and self._by_name[key] != node_id:
                    raise ValueError(f"node ({node.label}, {new_name!r}) already exists")
                self._by_name[key] = node_id
            node.properties.update(props)
            return _copy(node)

    def get_or_create_node(self, label: str, name: str, properties: Mapping[str, Scalar] | None = None) -> tuple[Node, bool]:
        """Fetch the node identified by (label, normalized name), creating it if
        absent. Returns (node, created)."""
        with self._lock.write():
            existing = self.node_by_name(label, name)
            if existing is not None:
                if properties:
                    return self.update_node(existing.id, properties), False
                return _copy(existing), False
            props = dict(properties or {})
            props.setdefault("name", name)
            return self.add_node(label, props), True

    def add_edge(self, edge_type: str, source: int, target: int) -> tuple[Edge, bool]:
        """Insert an edge unless (type, source, target) already exists.
        Returns (edge, created)."""
        with self._lock.write():
            decl = self.schema.edge(edge_type)
            if decl is None:
                raise UnknownLabelError(f"unknown edge type {edge_type!r}")
            src = self._nodes.get(source)
            dst = self._nodes.get(target)
            if src is None or dst is None:
                raise KeyError(f"edge {edge_type} references missing node")
            key = (edge_type, source, target)
            if key in self._edge_keys:
                return self._edges[self._edge_keys[key]], False
            edge = Edge(self._next_edge_id, edge_type, source, target)
            self._next_edge_id += 1
            self._edges[edge.id] = edge
            self._edge_keys[key] = edge.id
            self._out[source].add(edge.id)
            self._in[target].add(edge.id)
            return edge, True

    # -- queries -------------------------------------------------------------------

    def dataset_node(self, doi: str) -> Node | None:
        return self.node_by_name(DATASET, doi)

    def list_datasets(self) -> list[Node]:
        with self._lock.read():
            datasets = [_copy(n) for n in self.nodes_with_label(DATASET)]
        return sorted(datasets, key=lambda n: str(n.properties.get("doi", "")))

    def find_dataset_links(self, label: str, name: str) -> list[tuple[Node, str]]:
        """(dataset, edge type) for every edge tying a dataset to (label, name)."""
        with self._lock.read():
            if not self.schema.has_node_label(label):
                raise UnknownLabelError(f"unknown node label {label!r}")
            entity = self.node_by_name(label, name)
            if entity is None:
                return []
            links: dict[tuple[int, str], Node] = {}
            for edge_id in self._in.get(entity.id, ()) | self._out.get(entity.id, ()):
                edge = self._edges[edge_id]
                other = edge.source if edge.target == entity.id else edge.target
                neighbor = self._nodes[other]
                if neighbor.label == DATASET:
                    links[(neighbor.id, edge.edge_type)] = neighbor
            found = [(_copy(node), et) for (_, et), node in links.items()]
        return sorted(found, key=lambda pair: (str(pair[0].properties.get("doi", "")), pair[1]))

    def find_datasets_by(self, label: str, name: str) -> list[Node]:
        """Datasets connected by any edge to the entity (label, name), DOI order."""
        seen: set[int] = set()
        found = []
        for node, _ in self.find_dataset_links(label, name):
            if node.id not in seen:
                seen.add(node.id)
                found.append(node)
        return found

    def dataset_profile(self, doi: str) -> DatasetProfile:
        """One-hop neighborhood of a dataset grouped by edge type, deterministic."""
        with self._lock.read():
            dataset = self.dataset_node(doi)
            if dataset is None:
                raise DatasetNotFoundError([doi])
            grouped: dict[str, list[str]] = {}
            for edge_id in sorted(self._out.get(dataset.id, ())):
                edge = self._edges[edge_id]
                neighbor = self._nodes[edge.target]
                grouped.setdefault(edge.edge_type, []).append(_display_name(neighbor))
            groups = [(et, sorted(names)) for et, names in sorted(grouped.items())]
            return DatasetProfile(
                doi=str(dataset.properties.get("doi", doi)),
                title=str(dataset.properties.get("title", "")),
                properties=dict(dataset.properties),
                groups=groups,
            )

    def compare(self, dois: Iterable[str], facets: Iterable[str] | None = None) -> ComparisonTable:
        """Facet-by-facet comparison of two or more datasets.

        Rows are edge types, columns datasets, cells the sorted entity names
        reachable over that edge type; a row is flagged `same` when every
        column holds the identical set. All unresolved DOIs are reported
        together so the caller can name the datasets precisely.
        """
        doi_list = tuple(dois)
        if len(doi_list) < 2:
            raise ValueError("compare needs at least two datasets")
        with self._lock.read():
            missing = [d for d in doi_list if self.dataset_node(d) is None]
            if missing:
                raise DatasetNotFoundError(missing)
            if facets is None:
                facet_list = tuple(self.schema.edge_type_names())
            else:
                facet_list = tuple(facets)
                for facet in facet_list:
                    if not self.schema.has_edge_type(facet):
                        raise UnknownLabelError(f"unknown edge type {facet!r}")
            per_dataset: list[dict[str, set[str]]] = []
            for doi in doi_list:
                dataset = self.dataset_node(doi)
                cells: dict[str, set[str]] = {}
                for edge_id in self._out.get(dataset.id, ()):
                    edge = self._edges[edge_id]
                    cells.setdefault(edge.edge_type, set()).add(_display_name(self._nodes[edge.target]))
                per_dataset.append(cells)
            rows = []
            for facet in facet_list:
                cells = tuple(tuple(sorted(c.get(facet, set()))) for c in per_dataset)
                rows.append(ComparisonRow(facet=facet, cells=cells, same=len(set(cells)) == 1))
        return ComparisonTable(dois=doi_list, facets=facet_list, rows=rows)

    def locate_files(self, doi: str, filters: Mapping[str, str] | None = None) -> list[Node]:
        """Data files of a dataset whose properties satisfy every filter.

        Numeric-looking values compare zero-pad-insensitively, so session "1"
        matches a stored "01". Results sort by path.
        """
        filters = dict(filters or {})
        with self._lock.read():
            dataset = self.dataset_node(doi)
            if dataset is None:
                raise DatasetNotFoundError([doi])
            found = []
            for edge_id in self._out.get(dataset.id, ()):
                edge = self._edges[edge_id]
                if edge.edge_type != "containsFile":
                    continue
                node = self._nodes[edge.target]
                if all(
                    key in node.properties
                    and normalize_token_value(str(node.properties[key])) == normalize_token_value(value)
                    for key, value in filters.items()
                ):
                    found.append(_copy(node))
        return sorted(found, key=lambda n: str(n.properties.get("path", "")))

    # -- integrity ---------------------------------------------------------------

    def audit_indexes(self) -> list[str]:
        """Cross-check every index against the node and edge tables."""
        problems = []
        with self._lock.read():
            for label, ids in self._by_label.items():
                for node_id in ids:
                    node = self._nodes.get(node_id)
                    if node is None or node.label != label:
                        problems.append(f"label index {label!r} points at bad node {node_id}")
            labelled = {i for ids in self._by_label.values() for i in ids}
            if labelled != set(self._nodes):
                problems.append("label index does not cover the node table")
            for (label, norm), node_id in self._by_name.items():
                node = self._nodes.get(node_id)
                if node is None or node.label != label or normalize_name(node.name or "") != norm:
                    problems.append(f"name index ({label}, {norm!r}) inconsistent")
            named = {
                (n.label, normalize_name(n.name))
                for n in self._nodes.values()
                if n.name is not None
            }
            if named != set(self._by_name):
                problems.append("name index does not cover named nodes")
            for key, edge_id in self._edge_keys.items():
                edge = self._edges.get(edge_id)
                if edge is None or (edge.edge_type, edge.source, edge.target) != key:
                    problems.append(f"edge key index {key} inconsistent")
            if len(self._edge_keys) != len(self._edges):
                problems.append("duplicate (type, source, target) edges present")
            for edge in self._edges.values():
                if edge.source not in self._nodes or edge.target not in self._nodes:
                    problems.append(f"edge {edge.id} dangles")
                if edge.id not in self._out.get(edge.source, set()):
                    problems.append(f"edge {edge.id} missing from out-adjacency")
                if edge.id not in self._in.get(edge.target, set()):
                    problems.append(f"edge {edge.id} missing from in-adjacency")
            adjacency = {i for s in self._out.values() for i in s} | {i for s in self._in.values() for i in s}
            if adjacency != set(self._edges):
                problems.append("adjacency sets do not match the edge table")
        return problems

    # -- serialization ------------------------------------------------------------

    def canonical_node_rows(self) -> list[dict]:
        return [
            {"id": n.id, "label": n.label, "properties": dict(sorted(n.properties.items()))}
            for n in sorted(self._nodes.values(), key=lambda n: n.id)
        ]

    def canonical_edge_rows(self) -> list[dict]:
        return [
            {"id": e.id, "edge_type": e.edge_type, "source": e.source, "target": e.target}
            for e in sorted(self._edges.values(), key=lambda e: (e.edge_type, e.source, e.target))
        ]

    def canonical_json(self) -> str:
        """Canonical serialization: nodes by id, edges by (type, source, target)."""
        with self._lock.read():
            doc = {"nodes": self.canonical_node_rows(), "edges": self.canonical_edge_rows()}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def save(self, location) -> None:
        """Write the snapshot: header line, node table, edge table, checksum."""
        with self._lock.read():
            header = json.dumps(
                {
                    "format": SNAPSHOT_FORMAT,
                    "snapshot_version": SNAPSHOT_VERSION,
                    "nodes": len(self._nodes),
                    "edges": len(self._edges),
                    "next_node_id": self._next_node_id,
                    "next_edge_id": self._next_edge_id,
                    "schema": json.loads(self.schema.to_canonical_json()),
                },
                sort_keys=True,
                separators=(",", ":"),
            )
            node_table = json.dumps(self.canonical_node_rows(), sort_keys=True, separators=(",", ":"))
            edge_table = json.dumps(self.canonical_edge_rows(), sort_keys=True, separators=(",", ":"))
        body = "\n".join([header, node_table, edge_table])
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        try:
            with open(location, "w", encoding="utf-8") as fh:
                fh.write(body + "\n" + json.dumps({"sha256": digest}) + "\n")
        except OSError as exc:
            raise StoreIoError(f"cannot write snapshot {location}: {exc}") from exc

    @classmethod
    def load(cls, location) -> "PropertyGraph":
        try:
            with open(location, "r", encoding="utf-8") as fh:
                text = fh.read()
        except FileNotFoundError:
            raise
        except OSError as exc:
            raise StoreIoError(f"cannot read snapshot {location}: {exc}") from exc
        lines = text.splitlines()
        if len(lines) != 4:
            raise CorruptStoreError(f"snapshot {location} is truncated or padded")
        body = "\n".join(lines[:3])
        try:
            trailer = json.loads(lines[3])
        except json.JSONDecodeError as exc:
            raise CorruptStoreError(f"snapshot {location} has a malformed trailer") from exc
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        if trailer.get("sha256") != digest:
            raise CorruptStoreError(f"snapshot {location} failed its checksum")
        try:
            header = json.loads(lines[0])
            node_rows = json.loads(lines[1])
            edge_rows = json.loads(lines[2])
        except json.JSONDecodeError as exc:
            raise CorruptStoreError(f"snapshot {location} has malformed tables") from exc
        if header.get("format") != SNAPSHOT_FORMAT:
            raise CorruptStoreError(f"snapshot {location} is not a graph snapshot")
        graph = cls(schema=_schema_from_json(header.get("schema")))
        for row in node_rows:
            node = Node(int(row["id"]), row["label"], dict(row["properties"]))
            graph._nodes[node.id] = node
            graph._by_label.setdefault(node.label, set()).add(node.id)
            if node.name is not None:
                graph._by_name[(node.label, normalize_name(node.name))] = node.id
            graph._out.setdefault(node.id, set())
            graph._in.setdefault(node.id, set())
        for row in edge_rows:
            edge = Edge(int(row["id"]), row["edge_type"], int(row["source"]), int(row["target"]))
            if edge.source not in graph._nodes or edge.target not in graph._nodes:
                raise CorruptStoreError(f"snapshot {location} contains a dangling edge {edge.id}")
            graph._edges[edge.id] = edge
            graph._edge_keys[(edge.edge_type, edge.source, edge.target)] = edge.id
            graph._out[edge.source].add(edge.id)
            graph._in[edge.target].add(edge.id)
        graph._next_node_id = int(header.get("next_node_id", max(graph._nodes, default=0) + 1))
        graph._next_edge_id = int(header.get("next_edge_id", max(graph._edges, default=0) + 1))
        return graph


def _display_name(node: Node) -> str:
    # files display as their relative path; their name carries the dataset scope
    path = node.properties.get("path")
    if isinstance(path, str):
        return path
    if node.name is not None:
        return node.name
    return f"{node.label}#{node.id}"


def _copy(node: Node) -> Node:
    return Node(node.id, node.label, dict(node.properties))


def _checked_properties(properties: Mapping[str, Scalar]) -> dict[str, Scalar]:
    props = {}
    for key, value in properties.items():
        if not isinstance(key, str):
            raise TypeError(f"property names must be strings, got {key!r}")
        if not isinstance(value, (str, int, float, bool)):
            raise TypeError(f"property {key!r} must be a scalar, got {type(value).__name__}")
        props[key] = value
    return props


def _schema_from_json(doc: dict | None) -> DataModelSchema:
    from .datamodel import LabelKind, LabelStatus, PropertyKind, PropertySpec, SchemaLabel

    if not doc:
        return builtin_schema()
    labels = []
    edges = []
    for entry in doc.get("labels", []):
        label = SchemaLabel(
            name=entry["name"],
            kind=LabelKind(entry["kind"]),
            status=LabelStatus(entry["status"]),
            properties=tuple(
                PropertySpec(p["name"], PropertyKind(p["kind"]), p["required"])
                for p in entry.get("properties", [])
            ),
            source_labels=frozenset(entry.get("source_labels", [])),
            target_labels=frozenset(entry.get("target_labels", [])),
        )
        (labels if label.kind is LabelKind.NODE else edges).append(label)
    return DataModelSchema(version=int(doc.get("version", 1)), labels=tuple(labels), edge_types=tuple(edges))
