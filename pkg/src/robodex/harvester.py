"""Repository metadata harvesting and knowledge-graph population.

Fetches the JSON metadata export of a published dataset, flattens it into a
canonical record, mines entity mentions out of the flattened key/value fields
with keyword rules, and upserts everything into the property graph. Entity
nodes are shared across datasets by (label, normalized name); re-ingesting a
record is a no-op.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import httpx

from .datamodel import DATASET, DataModelSchema
from .errors import (
    MalformedResponseError,
    MissingIdentifierError,
    MissingTitleError,
    NetworkError,
    RecordNotFoundError,
    SchemaViolationError,
)
from .graph import PropertyGraph, normalize_name

logger = logging.getLogger(__name__)

EXPORT_PATH = "/api/datasets/export"


@dataclass(frozen=True)
class FileEntry:
    path: str
    size: int | None = None
    content_type: str | None = None
    url: str | None = None
    checksum: str | None = None


@dataclass
class MetadataRecord:
    """Repository-independent description of one published dataset."""

    doi: str
    title: str
    description: str = ""
    authors: list[str] = field(default_factory=list)
    subjects: list[str] = field(default_factory=list)
    license: str | None = None
    publication_date: str | None = None
    repository_url: str | None = None
    files: list[FileEntry] = field(default_factory=list)
    kv_fields: list[tuple[str, str]] = field(default_factory=list)

    def to_canonical_json(self) -> str:
        doc = {
            "doi": self.doi,
            "title": self.title,
            "description": self.description,
            "authors": self.authors,
            "subjects": self.subjects,
            "license": self.license,
            "publication_date": self.publication_date,
            "repository_url": self.repository_url,
            "files": [
                {
                    "path": f.path,
                    "size": f.size,
                    "content_type": f.content_type,
                    "url": f.url,
                    "checksum": f.checksum,
                }
                for f in self.files
            ],
            "kv_fields": [[k, v] for k, v in self.kv_fields],
        }
        return json.dumps(doc, sort_keys=True, ensure_ascii=False)

    def as_text(self) -> str:
        """Plain-text rendering used for chunking and retrieval."""
        lines = [self.title, self.description]
        lines += [f"{key}: {value}" for key, value in self.kv_fields]
        return "\n".join(line for line in lines if line)


class ValueSource(str, Enum):
    AFTER_COLON = "AfterColon"
    WHOLE_FIELD = "WholeField"


@dataclass(frozen=True)
class KeywordRule:
    """Maps a key phrase found in metadata field names to a node proposal."""

    pattern: str
    target_label: str
    edge_type: str
    value_source: ValueSource = ValueSource.AFTER_COLON


def file_node_name(doi: str, path: str) -> str:
    """Identity string for a DataFile node, scoped to its dataset."""
    return f"{doi}!{path}"


class Proposal(NamedTuple):
    label: str
    properties: dict
    edge_type: str


class EdgeProposal(NamedTuple):
    source: tuple[str, str]  # (label, name)
    edge_type: str
    target: tuple[str, str]


@dataclass
class UpsertSummary:
    nodes_created: int = 0
    nodes_reused: int = 0
    edges_created: int = 0
    edges_reused: int = 0

    def merge(self, other: "UpsertSummary") -> "UpsertSummary":
        return UpsertSummary(
            self.nodes_created + other.nodes_created,
            self.nodes_reused + other.nodes_reused,
            self.edges_created + other.edges_created,
            self.edges_reused + other.edges_reused,
        )

    def to_json_dict(self) -> dict:
        return {
            "nodes_created": self.nodes_created,
            "nodes_reused": self.nodes_reused,
            "edges_created": self.edges_created,
            "edges_reused": self.edges_reused,
        }


# Ordered longest-phrase-first so "robot model" wins over "robot".
def builtin_rules() -> list[KeywordRule]:
    return [
        KeywordRule("robot model", "RobotModel", "usesModel"),
        KeywordRule("experiment session", "ExperimentSession", "hasSession"),
        KeywordRule("robot", "Robot", "hasRobot"),
        KeywordRule("participant", "ParticipantGroup", "involves"),
        KeywordRule("interview", "Instrument", "usesInstrument"),
        KeywordRule("survey", "Instrument", "usesInstrument"),
        KeywordRule("condition", "ExperimentCondition", "hasCondition"),
        KeywordRule("sensor", "Sensor", "hasSensor"),
        KeywordRule("location", "ExperimentLocation", "conductedAt"),
        KeywordRule("method", "ResearchMethod", "usesMethod"),
    ]


def validate_rules(rules: Sequence[KeywordRule], schema: DataModelSchema) -> None:
    for rule in rules:
        if not schema.has_node_label(rule.target_label):
            raise SchemaViolationError(f"rule {rule.pattern!r} targets unknown label {rule.target_label!r}")
        if not schema.has_edge_type(rule.edge_type):
            raise SchemaViolationError(f"rule {rule.pattern!r} uses unknown edge type {rule.edge_type!r}")


# -- fetching ----------------------------------------------------------------------

def fetch_record(repo_base: str, doi: str, timeout: float = 15.0) -> dict:
    """Download the latest published metadata export for a DOI.

    Speaks the repository export endpoint
    ``GET {repo_base}/api/datasets/export?exporter=ddi&persistentId={doi}``.
    """
    if not (doi.startswith("doi:") or doi.startswith("10.")):
        raise ValueError(f"not a well-formed persistent identifier: {doi!r}")
    url = repo_base.rstrip("/") + EXPORT_PATH
    try:
        response = httpx.get(url, params={"exporter": "ddi", "persistentId": doi}, timeout=timeout)
    except httpx.HTTPError as exc:
        raise NetworkError(f"cannot reach {url}: {exc}") from exc
    if response.status_code == 404:
        raise RecordNotFoundError(f"repository does not know {doi}")
    if response.status_code >= 400:
        raise NetworkError(f"{url} answered {response.status_code}")
    try:
        return response.json()
    except (json.JSONDecodeError, ValueError) as exc:
        raise MalformedResponseError(f"non-JSON reply for {doi}") from exc


# -- parsing -------------------------------------------------------------------------

def parse_ddi(document: dict | str, repo_base: str | None = None) -> MetadataRecord:
    """Flatten a repository JSON export into a canonical MetadataRecord.

    Every field of every typed metadata block lands in ``kv_fields`` in
    document order; blocks the parser does not recognize are kept, never
    dropped. File paths are normalized to relative '/'-separated form.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MalformedResponseError("metadata export is not JSON") from exc
    if not isinstance(document, dict):
        raise MalformedResponseError("metadata export must be a JSON object")

    data = document.get("data", document)
    version = data.get("datasetVersion", data)

    doi = _extract_doi(data)
    if not doi:
        raise MissingIdentifierError("metadata export has no persistent identifier")

    kv_fields: list[tuple[str, str]] = []
    blocks = version.get("metadataBlocks", {})
    for block in blocks.values():
        for fld in block.get("fields", []):
            _flatten_field(fld.get("typeName", "field"), fld.get("value"), kv_fields)
    for key, value in data.items():
        if key in ("datasetVersion", "metadataBlocks") or not isinstance(value, (str, int, float, bool)):
            continue
        if key in ("protocol", "authority", "identifier", "persistentUrl", "publicationDate"):
            continue
        kv_fields.append((key, str(value)))

    fields_by_name = {k: v for k, v in kv_fields}
    title = fields_by_name.get("title") or data.get("title")
    if not title:
        raise MissingTitleError(f"{doi} has no title")

    description = fields_by_name.get("dsDescriptionValue", "") or data.get("description", "")
    authors = [v for k, v in kv_fields if k == "authorName"]
    if not authors and isinstance(data.get("authors"), list):
        authors = [str(a) for a in data["authors"]]
    subjects = [v for k, v in kv_fields if k in ("subject", "keywordValue")]

    license_field = version.get("license") or data.get("license")
    if isinstance(license_field, dict):
        license_field = license_field.get("name") or license_field.get("label")

    files = [
        _parse_file(raw, repo_base)
        for raw in version.get("files", data.get("files", []))
    ]

    return MetadataRecord(
        doi=doi,
        title=str(title),
        description=str(description),
        authors=authors,
        subjects=subjects,
        license=str(license_field) if license_field else None,
        publication_date=data.get("publicationDate") or version.get("releaseTime"),
        repository_url=data.get("persistentUrl") or data.get("repository_url"),
        files=files,
        kv_fields=kv_fields,
    )


def _extract_doi(data: dict) -> str | None:
    protocol, authority, identifier = data.get("protocol"), data.get("authority"), data.get("identifier")
    if protocol and authority and identifier:
        return f"{protocol}:{authority}/{identifier}"
    for key in ("doi", "persistentId", "global_id"):
        if data.get(key):
            return str(data[key])
    url = data.get("persistentUrl", "")
    match = re.search(r"(10\.[0-9.]+/\S+)", url)
    if match:
        return "doi:" + match.group(1)
    return None


def _flatten_field(name: str, value, out: list[tuple[str, str]]) -> None:
    if value is None:
        return
    if isinstance(value, (str, int, float, bool)):
        out.append((name, str(value)))
    elif isinstance(value, list):
        for item in value:
            _flatten_field(name, item, out)
    elif isinstance(value, dict):
        # compound field: each subfield is {typeName, value, ...} or a bare value
        for sub_name, sub in value.items():
            if isinstance(sub, dict) and "value" in sub:
                _flatten_field(sub.get("typeName", sub_name), sub["value"], out)
            else:
                _flatten_field(sub_name, sub, out)


def _parse_file(raw: dict, repo_base: str | None) -> FileEntry:
    data_file = raw.get("dataFile", raw)
    name = data_file.get("filename") or raw.get("label") or ""
    directory = raw.get("directoryLabel") or ""
    path = _normalize_path(f"{directory}/{name}" if directory else name)
    checksum = data_file.get("checksum")
    if isinstance(checksum, dict):
        checksum = f"{checksum.get('type', 'MD5')}:{checksum.get('value', '')}"
    url = data_file.get("accessUrl") or raw.get("accessUrl")
    if not url and data_file.get("id") is not None and repo_base:
        url = f"{repo_base.rstrip('/')}/api/access/datafile/{data_file['id']}"
    size = data_file.get("filesize", raw.get("size"))
    return FileEntry(
        path=path,
        size=int(size) if size is not None else None,
        content_type=data_file.get("contentType") or raw.get("content_type"),
        url=url,
        checksum=checksum,
    )


def _normalize_path(path: str) -> str:
    cleaned = path.replace("\\", "/").lstrip("/")
    segments = [s for s in cleaned.split("/") if s not in ("", ".")]
    if ".." in segments:
        raise MalformedResponseError(f"file path escapes the dataset root: {path!r}")
    if not segments:
        raise MalformedResponseError(f"file entry has no usable path: {path!r}")
    return "/".join(segments)


# -- entity extraction -----------------------------------------------------------------

_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


def _singular(word: str) -> str:
    # light plural folding: "sessions" ~ "session"; leaves "class"-like words alone
    if len(word) > 3 and word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def _normalize_key(key: str) -> str:
    # "robotModel", "Robot Model", and "Robot Models" all read as "robot model"
    spaced = _CAMEL.sub(" ", key)
    words = normalize_name(re.sub(r"[^0-9A-Za-z]+", " ", spaced)).split()
    return " ".join(_singular(w) for w in words)


def _rule_matches(rule: KeywordRule, key: str) -> bool:
    normalized = f" {_normalize_key(key)} "
    phrase = " ".join(_singular(w) for w in normalize_name(rule.pattern).split())
    return f" {phrase} " in normalized


def partition_fields(
    fields: Sequence[tuple[str, str]], rules: Sequence[KeywordRule]
) -> tuple[list[tuple[tuple[str, str], KeywordRule, str]], list[tuple[str, str]]]:
    """Split fields into (field, rule, extracted name) matches and the unmatched rest.

    A field only counts as matched when a rule applies *and* a non-empty name
    comes out of it; everything else must be preserved verbatim downstream.
    """
    matched = []
    unmatched = []
    for key, value in fields:
        rule = next((r for r in rules if _rule_matches(r, key)), None)
        name = None
        if rule is not None:
            if rule.value_source is ValueSource.AFTER_COLON:
                name = value.strip()
            else:
                name = f"{key}: {value}".strip() if value.strip() else key.strip()
        if rule is not None and name:
            matched.append(((key, value), rule, name))
        else:
            unmatched.append((key, value))
    return matched, unmatched


def extract_entities(
    record: MetadataRecord,
    report=None,
    rules: Sequence[KeywordRule] | None = None,
    schema: DataModelSchema | None = None,
) -> list[Proposal]:
    """Mine node proposals from a record's fields (and a report's, if given).

    Output order follows input order; proposals that agree on
    (label, normalized name) collapse to the first occurrence.
    """
    rules = list(rules) if rules is not None else builtin_rules()
    if schema is not None:
        validate_rules(rules, schema)
    fields = list(record.kv_fields)
    if report is not None:
        for section in report.sections:
            fields.extend(section.pairs)
    matched, _ = partition_fields(fields, rules)
    proposals: list[Proposal] = []
    seen: set[tuple[str, str]] = set()
    for _, rule, name in matched:
        identity = (rule.target_label, normalize_name(name))
        if identity in seen:
            continue
        seen.add(identity)
        proposals.append(Proposal(rule.target_label, {"name": name}, rule.edge_type))
    return proposals


def unmatched_fields(
    record: MetadataRecord, rules: Sequence[KeywordRule] | None = None
) -> list[tuple[str, str]]:
    rules = list(rules) if rules is not None else builtin_rules()
    _, unmatched = partition_fields(record.kv_fields, rules)
    return unmatched


# -- graph upserts ------------------------------------------------------------------------

def upsert_dataset(
    graph: PropertyGraph,
    record: MetadataRecord,
    entities: Sequence[Proposal | EdgeProposal] = (),
    unmapped: Sequence[tuple[str, str]] | None = None,
) -> UpsertSummary:
    """Insert or refresh a dataset, its files, and its extracted entities.

    The dataset node is keyed by DOI; entity nodes by (label, normalized
    name), shared across datasets. Edges are deduplicated, so running the
    same upsert twice reports everything as reused.
    """
    node_proposals = [p for p in entities if isinstance(p, Proposal)]
    edge_proposals = [p for p in entities if isinstance(p, EdgeProposal)]
    summary = UpsertSummary()
    with graph.writing():
        _check_proposals(graph.schema, node_proposals, edge_proposals)
        props: dict = {
            "name": record.doi,
            "doi": record.doi,
            "title": record.title,
            "description": record.description,
            "authors": json.dumps(record.authors, ensure_ascii=False),
            "subjects": json.dumps(record.subjects, ensure_ascii=False),
        }
        if record.license:
            props["license"] = record.license
        if record.publication_date:
            props["publication_date"] = record.publication_date
        if record.repository_url:
            props["repository_url"] = record.repository_url
        if unmapped is not None:
            props["unmapped_fields"] = json.dumps([[k, v] for k, v in unmapped], ensure_ascii=False)
        dataset, created = graph.get_or_create_node(DATASET, record.doi, props)
        _count(summary, created)

        for entry in record.files:
            # file identity is per dataset: sizes, checksums, and URLs are
            # dataset facts, so a shared path like README.md must not merge
            scoped = file_node_name(record.doi, entry.path)
            file_props: dict = {"name": scoped, "path": entry.path}
            if entry.size is not None:
                file_props["size"] = entry.size
            if entry.content_type:
                file_props["content_type"] = entry.content_type
            if entry.url:
                file_props["url"] = entry.url
            if entry.checksum:
                file_props["checksum"] = entry.checksum
            node, created = graph.get_or_create_node("DataFile", scoped, file_props)
            _count(summary, created)
            _, created = graph.add_edge("containsFile", dataset.id, node.id)
            _count_edge(summary, created)

        _apply_proposals(graph, dataset.id, node_proposals, edge_proposals, summary)
    logger.info("upserted %s: %s", record.doi, summary.to_json_dict())
    return summary


def _apply_proposals(graph, dataset_id, node_proposals, edge_proposals, summary) -> None:
    for proposal in node_proposals:
        name = proposal.properties.get("name")
        node, created = graph.get_or_create_node(proposal.label, name, proposal.properties)
        _count(summary, created)
        _, created = graph.add_edge(proposal.edge_type, dataset_id, node.id)
        _count_edge(summary, created)
    for link in edge_proposals:
        src = graph.node_by_name(*link.source)
        dst = graph.node_by_name(*link.target)
        if src is None or dst is None:
            raise SchemaViolationError(f"link {link.edge_type} references an unknown node: {link}")
        _, created = graph.add_edge(link.edge_type, src.id, dst.id)
        _count_edge(summary, created)


def _check_proposals(
    schema: DataModelSchema,
    node_proposals: Sequence[Proposal],
    edge_proposals: Sequence[EdgeProposal],
) -> None:
    for proposal in node_proposals:
        if not schema.has_node_label(proposal.label):
            raise SchemaViolationError(f"unknown label {proposal.label!r}")
        decl = schema.edge(proposal.edge_type)
        if decl is None:
            raise SchemaViolationError(f"unknown edge type {proposal.edge_type!r}")
        if DATASET not in decl.source_labels or proposal.label not in decl.target_labels:
            raise SchemaViolationError(
                f"{proposal.edge_type} does not connect Dataset to {proposal.label}"
            )
        if not proposal.properties.get("name"):
            raise SchemaViolationError(f"proposal for {proposal.label!r} has no name")
    for link in edge_proposals:
        decl = schema.edge(link.edge_type)
        if decl is None:
            raise SchemaViolationError(f"unknown edge type {link.edge_type!r}")
        if link.source[0] not in decl.source_labels or link.target[0] not in decl.target_labels:
            raise SchemaViolationError(
                f"{link.edge_type} does not connect {link.source[0]} to {link.target[0]}"
            )


def _count(summary: UpsertSummary, created: bool) -> None:
    if created:
        summary.nodes_created += 1
    else:
        summary.nodes_reused += 1


def _count_edge(summary: UpsertSummary, created: bool) -> None:
    if created:
        summary.edges_created += 1
    else:
        summary.edges_reused += 1


def ingest_record(
    graph: PropertyGraph,
    record: MetadataRecord,
    report=None,
    rules: Sequence[KeywordRule] | None = None,
) -> UpsertSummary:
    """Full ingest: schema extension for provisional report sections, entity
    extraction, dataset/file/entity upsert, and file classification."""
    from .reports import report_to_graph, schema_extension_for

    rules = list(rules) if rules is not None else builtin_rules()
    with graph.writing():
        if report is not None:
            graph.schema = schema_extension_for(report, graph.schema)
        validate_rules(rules, graph.schema)
        proposals: list[Proposal | EdgeProposal] = list(
            extract_entities(record, report=None, rules=rules)
        )
        if report is not None:
            proposals.extend(report_to_graph(report, None, record.files, rules=rules, doi=record.doi))
        summary = upsert_dataset(
            graph, record, proposals, unmapped=unmatched_fields(record, rules)
        )
        if report is not None:
            dataset = graph.dataset_node(record.doi)
            graph.update_node(dataset.id, {"has_report": True})
    return summary


def apply_report(
    graph: PropertyGraph,
    doi: str,
    report,
    rules: Sequence[KeywordRule] | None = None,
) -> UpsertSummary:
    """Apply a data report to an already-harvested dataset.

    File classification runs over the dataset's existing DataFile nodes (a
    report on its own lists no files).
    """
    from .errors import DatasetNotFoundError
    from .reports import report_to_graph, schema_extension_for

    rules = list(rules) if rules is not None else builtin_rules()
    summary = UpsertSummary()
    with graph.writing():
        dataset = graph.dataset_node(doi)
        if dataset is None:
            raise DatasetNotFoundError([doi])
        graph.schema = schema_extension_for(report, graph.schema)
        validate_rules(rules, graph.schema)
        paths = [str(n.properties.get("path", "")) for n in graph.locate_files(doi)]
        proposals = report_to_graph(report, None, paths, rules=rules, doi=doi)
        node_proposals = [p for p in proposals if isinstance(p, Proposal)]
        edge_proposals = [p for p in proposals if isinstance(p, EdgeProposal)]
        _check_proposals(graph.schema, node_proposals, edge_proposals)
        _apply_proposals(graph, dataset.id, node_proposals, edge_proposals, summary)
        graph.update_node(dataset.id, {"has_report": True})
    return summary
