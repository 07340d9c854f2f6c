"""Hierarchical data model for human-robot-interaction datasets.

Node labels and edge types form a versioned, immutable schema. New kinds of
content enter as *provisional* labels and can later be promoted to core once
they stabilize; promotion never tightens constraints, so anything valid before
a promotion stays valid after it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable

from .errors import DuplicateLabelError, LabelNotFoundError, NotProvisionalError

if TYPE_CHECKING:  # pragma: no cover
    from .graph import PropertyGraph


class LabelKind(str, Enum):
    NODE = "NodeLabel"
    EDGE = "EdgeType"


class LabelStatus(str, Enum):
    CORE = "Core"
    PROVISIONAL = "Provisional"


class PropertyKind(str, Enum):
    STRING = "string"
    INTEGER = "integer"
    FLOAT = "float"
    BOOLEAN = "boolean"

    def accepts(self, value: object) -> bool:
        if self is PropertyKind.BOOLEAN:
            return isinstance(value, bool)
        if self is PropertyKind.INTEGER:
            return isinstance(value, int) and not isinstance(value, bool)
        if self is PropertyKind.FLOAT:
            return isinstance(value, (int, float)) and not isinstance(value, bool)
        return isinstance(value, str)


@dataclass(frozen=True)
class PropertySpec:
    name: str
    kind: PropertyKind = PropertyKind.STRING
    required: bool = False


@dataclass(frozen=True)
class SchemaLabel:
    """One declared node label or edge type.

    Edge types carry the sets of labels allowed at their endpoints; node
    labels leave both sets empty. Properties not listed here are permitted
    (the list constrains, it does not close the world).
    """

    name: str
    kind: LabelKind
    status: LabelStatus = LabelStatus.CORE
    properties: tuple[PropertySpec, ...] = ()
    source_labels: frozenset[str] = frozenset()
    target_labels: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise ValueError("label name must be non-empty")
        if self.kind is LabelKind.EDGE and (not self.source_labels or not self.target_labels):
            raise ValueError(f"edge type {self.name!r} needs non-empty endpoint sets")
        if self.kind is LabelKind.NODE and (self.source_labels or self.target_labels):
            raise ValueError(f"node label {self.name!r} must not declare endpoints")


def node_label(name: str, *props: PropertySpec, status: LabelStatus = LabelStatus.CORE) -> SchemaLabel:
    return SchemaLabel(name=name, kind=LabelKind.NODE, status=status, properties=tuple(props))


def edge_type(
    name: str,
    sources: Iterable[str],
    targets: Iterable[str],
    status: LabelStatus = LabelStatus.CORE,
) -> SchemaLabel:
    return SchemaLabel(
        name=name,
        kind=LabelKind.EDGE,
        status=status,
        source_labels=frozenset(sources),
        target_labels=frozenset(targets),
    )


@dataclass(frozen=True)
class DataModelSchema:
    """Immutable, versioned set of node labels and edge types.

    Every mutation helper returns a fresh schema whose version is exactly one
    higher. Construction checks closure: each edge endpoint label must be a
    declared node label.
    """

    version: int
    labels: tuple[SchemaLabel, ...]
    edge_types: tuple[SchemaLabel, ...]
    _nodes_by_name: dict = field(init=False, repr=False, compare=False, hash=False, default=None)
    _edges_by_name: dict = field(init=False, repr=False, compare=False, hash=False, default=None)

    def __post_init__(self):
        nodes = {}
        for lbl in self.labels:
            if lbl.kind is not LabelKind.NODE:
                raise ValueError(f"{lbl.name!r} in labels is not a node label")
            if lbl.name in nodes:
                raise DuplicateLabelError(f"duplicate node label {lbl.name!r}")
            nodes[lbl.name] = lbl
        edges = {}
        for et in self.edge_types:
            if et.kind is not LabelKind.EDGE:
                raise ValueError(f"{et.name!r} in edge_types is not an edge type")
            if et.name in edges:
                raise DuplicateLabelError(f"duplicate edge type {et.name!r}")
            for endpoint in et.source_labels | et.target_labels:
                if endpoint not in nodes:
                    raise ValueError(f"edge type {et.name!r} references unknown label {endpoint!r}")
            edges[et.name] = et
        object.__setattr__(self, "_nodes_by_name", nodes)
        object.__setattr__(self, "_edges_by_name", edges)

    # -- lookups ------------------------------------------------------------

    def node(self, name: str) -> SchemaLabel | None:
        return self._nodes_by_name.get(name)

    def edge(self, name: str) -> SchemaLabel | None:
        return self._edges_by_name.get(name)

    def has_node_label(self, name: str) -> bool:
        return name in self._nodes_by_name

    def has_edge_type(self, name: str) -> bool:
        return name in self._edges_by_name

    def node_label_names(self) -> list[str]:
        return sorted(self._nodes_by_name)

    def edge_type_names(self) -> list[str]:
        return sorted(self._edges_by_name)

    # -- mutations (return new schemas) ---------------------------------------

    def add_provisional(self, label: SchemaLabel) -> "DataModelSchema":
        """Register an emerging label at provisional status.

        Raises DuplicateLabelError when a label of the same kind already uses
        the name, regardless of status.
        """
        existing = self.node(label.name) if label.kind is LabelKind.NODE else self.edge(label.name)
        if existing is not None:
            raise DuplicateLabelError(f"{label.kind.value} {label.name!r} already declared")
        provisional = SchemaLabel(
            name=label.name,
            kind=label.kind,
            status=LabelStatus.PROVISIONAL,
            properties=label.properties,
            source_labels=label.source_labels,
            target_labels=label.target_labels,
        )
        if label.kind is LabelKind.NODE:
            return DataModelSchema(self.version + 1, self.labels + (provisional,), self.edge_types)
        return DataModelSchema(self.version + 1, self.labels, self.edge_types + (provisional,))

    def promote(self, name: str) -> "DataModelSchema":
        """Graduate a provisional label to core. The reverse move does not exist."""
        target = self.node(name) or self.edge(name)
        if target is None:
            raise LabelNotFoundError(f"no label named {name!r}")
        if target.status is not LabelStatus.PROVISIONAL:
            raise NotProvisionalError(f"{name!r} is already core")
        promoted = SchemaLabel(
            name=target.name,
            kind=target.kind,
            status=LabelStatus.CORE,
            properties=target.properties,
            source_labels=target.source_labels,
            target_labels=target.target_labels,
        )
        if target.kind is LabelKind.NODE:
            labels = tuple(promoted if l.name == name else l for l in self.labels)
            return DataModelSchema(self.version + 1, labels, self.edge_types)
        edges = tuple(promoted if e.name == name else e for e in self.edge_types)
        return DataModelSchema(self.version + 1, self.labels, edges)

    # -- serialization --------------------------------------------------------

    def to_canonical_json(self) -> str:
        """Canonical JSON document (sorted keys) for documentation export."""
        entries = []
        for lbl in sorted(self.labels + self.edge_types, key=lambda l: (l.kind.value, l.name)):
            entries.append(
                {
                    "name": lbl.name,
                    "kind": lbl.kind.value,
                    "status": lbl.status.value,
                    "properties": [
                        {"name": p.name, "kind": p.kind.value, "required": p.required}
                        for p in sorted(lbl.properties, key=lambda p: p.name)
                    ],
                    "source_labels": sorted(lbl.source_labels),
                    "target_labels": sorted(lbl.target_labels),
                }
            )
        return json.dumps({"version": self.version, "labels": entries}, sort_keys=True, indent=2)


# -- validation -----------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str  # unknown-label | unknown-edge-type | endpoint-violation | missing-property | property-kind
    subject: str  # node or edge id
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)


def validate(schema: DataModelSchema, graph: "PropertyGraph") -> ValidationReport:
    """Check every node and edge of a graph against the schema.

    Violations are data, not exceptions: unknown labels, edges whose endpoint
    labels fall outside the declared source/target sets, and missing or
    mistyped required properties are all collected into the report.
    """
    violations: list[Violation] = []
    for node in graph.nodes():
        decl = schema.node(node.label)
        if decl is None:
            violations.append(Violation("unknown-label", str(node.id), f"label {node.label!r} not in schema"))
            continue
        for spec in decl.properties:
            if spec.name not in node.properties:
                if spec.required:
                    violations.append(
                        Violation("missing-property", str(node.id), f"{node.label} requires {spec.name!r}")
                    )
            elif not spec.kind.accepts(node.properties[spec.name]):
                violations.append(
                    Violation(
                        "property-kind",
                        str(node.id),
                        f"{node.label}.{spec.name} should be {spec.kind.value}",
                    )
                )
    for edge in graph.edges():
        decl = schema.edge(edge.edge_type)
        if decl is None:
            violations.append(
                Violation("unknown-edge-type", str(edge.id), f"edge type {edge.edge_type!r} not in schema")
            )
            continue
        src = graph.node_by_id(edge.source)
        dst = graph.node_by_id(edge.target)
        problems = []
        if src is not None and src.label not in decl.source_labels:
            problems.append(f"cannot start at {src.label}")
        if dst is not None and dst.label not in decl.target_labels:
            problems.append(f"cannot end at {dst.label}")
        if problems:  # one violation per offending edge
            violations.append(
                Violation(
                    "endpoint-violation",
                    str(edge.id),
                    f"{edge.edge_type} " + " and ".join(problems),
                )
            )
    return ValidationReport(tuple(violations))


# -- builtin schema ---------------------------------------------------------------

DATASET = "Dataset"
DATA_FILE = "DataFile"
EXPERIMENT_SESSION = "ExperimentSession"

_BUILTIN_NODE_LABELS = (
    node_label(
        DATASET,
        PropertySpec("doi", PropertyKind.STRING, required=True),
        PropertySpec("title", PropertyKind.STRING, required=True),
    ),
    node_label("Lab"),
    node_label("Publication"),
    node_label("Robot"),
    node_label("RobotModel"),
    node_label("Sensor"),
    node_label("ControlMode"),
    node_label("ResearchMethod"),
    node_label("ExperimentLocation"),
    node_label("ExperimentSetting"),
    node_label(EXPERIMENT_SESSION),
    node_label("ExperimentCondition"),
    node_label("ParticipantGroup"),
    node_label("Instrument"),
    node_label(DATA_FILE, PropertySpec("path", PropertyKind.STRING, required=True)),
    node_label("QualityStatement"),
    node_label("EthicsApproval"),
)

# Sensor, control, and condition edges also accept Dataset as a source:
# flat repository metadata describes them at dataset level, while data
# reports may attach them to a specific robot or session.
_BUILTIN_EDGE_TYPES = (
    edge_type("usesModel", {DATASET}, {"RobotModel"}),
    edge_type("hasRobot", {DATASET}, {"Robot"}),
    edge_type("hasSensor", {"Robot", DATASET}, {"Sensor"}),
    edge_type("usesControl", {"Robot", DATASET}, {"ControlMode"}),
    edge_type("usesMethod", {DATASET}, {"ResearchMethod"}),
    edge_type("conductedAt", {DATASET}, {"ExperimentLocation"}),
    edge_type("hasSetting", {DATASET}, {"ExperimentSetting"}),
    edge_type("hasSession", {DATASET}, {EXPERIMENT_SESSION}),
    edge_type("hasCondition", {EXPERIMENT_SESSION, DATASET}, {"ExperimentCondition"}),
    edge_type("involves", {DATASET}, {"ParticipantGroup"}),
    edge_type("usesInstrument", {DATASET}, {"Instrument"}),
    edge_type("containsFile", {DATASET}, {DATA_FILE}),
    edge_type("describedBy", {DATASET}, {"Publication"}),
    edge_type("producedBy", {DATASET}, {"Lab"}),
    edge_type("approvedBy", {DATASET}, {"EthicsApproval"}),
    edge_type("hasQuality", {DATASET}, {"QualityStatement"}),
    edge_type("partOfSession", {DATA_FILE}, {EXPERIMENT_SESSION}),
)


def builtin_schema() -> DataModelSchema:
    """The core robotics data model, version 1."""
    return DataModelSchema(version=1, labels=_BUILTIN_NODE_LABELS, edge_types=_BUILTIN_EDGE_TYPES)
