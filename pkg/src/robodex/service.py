"""HTTP service tying harvesting, the graph, and grounded answering together.

JSON-over-HTTP with a small route set: session-scoped conversational queries,
harvest/ingest, catalog browsing, comparison, file location, download
manifests (JSON or rendered as a portable shell script), and a FAIR audit per
dataset. Errors are always {error_code, message, details}. DOIs contain
slashes, so dataset routes accept the raw DOI in the path and dispatch on the
trailing segment.
"""
from __future__ import annotations

import datetime as _dt
import logging
import secrets
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from . import datamodel
from .config import ServiceConfig
from .errors import (
    AmbiguousComparisonError,
    DatasetNotFoundError,
    MalformedResponseError,
    MissingIdentifierError,
    MissingTitleError,
    NetworkError,
    ProviderError,
    RecordNotFoundError,
    RobodexError,
    SchemaViolationError,
    SessionNotFoundError,
    UnknownLabelError,
)
from .graph import Node, PropertyGraph
from .harvester import builtin_rules, fetch_record, ingest_record, parse_ddi
from .reports import parse_report
from .retrieval import (
    AnswerMode,
    HashingEmbeddingProvider,
    HttpCompletionProvider,
    HttpEmbeddingProvider,
    Providers,
    RetrievalIndex,
    SourceKind,
    answer,
    chunk_document,
    embed_and_index,
)

logger = logging.getLogger(__name__)

_STATUS = {
    AmbiguousComparisonError: (422, "AmbiguousComparison"),
    SessionNotFoundError: (404, "SessionNotFound"),
    DatasetNotFoundError: (404, "DatasetNotFound"),
    RecordNotFoundError: (404, "NotFound"),
    NetworkError: (502, "NetworkError"),
    MalformedResponseError: (502, "MalformedResponse"),
    ProviderError: (502, "ProviderError"),
    SchemaViolationError: (409, "SchemaViolation"),
    UnknownLabelError: (422, "UnknownLabel"),
    MissingIdentifierError: (422, "MissingIdentifier"),
    MissingTitleError: (422, "MissingTitle"),
}


@dataclass
class Message:
    role: str  # "user" | "system"
    text: str
    sources: list = field(default_factory=list)


@dataclass
class Session:
    id: str
    created_at: str
    messages: list[Message] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "session_id": self.id,
            "created_at": self.created_at,
            "messages": [
                {"role": m.role, "text": m.text, "sources": m.sources} for m in self.messages
            ],
        }


class SessionStore:
    """Isolated append-only message logs keyed by opaque session ids."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self) -> Session:
        with self._lock:
            session = Session(id=secrets.token_hex(16), created_at=_now())
            self._sessions[session.id] = session
            return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFoundError(f"unknown session {session_id}")
        return session

    def append(self, session_id: str, *messages: Message) -> None:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise SessionNotFoundError(f"unknown session {session_id}")
            session.messages.extend(messages)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class ServiceState:
    """Everything one running service instance owns."""

    def __init__(self, config: ServiceConfig | None = None, graph: PropertyGraph | None = None):
        self.config = config or ServiceConfig()
        if graph is not None:
            self.graph = graph
        elif self.config.store_path:
            try:
                self.graph = PropertyGraph.load(self.config.store_path)
            except RobodexError:
                self.graph = PropertyGraph()
            except FileNotFoundError:
                self.graph = PropertyGraph()
        else:
            self.graph = PropertyGraph()
        self.index = RetrievalIndex(self.config.embedding_dimension)
        embedding = (
            HttpEmbeddingProvider(self.config.embedding_endpoint, self.config.embedding_dimension)
            if self.config.embedding_endpoint
            else HashingEmbeddingProvider(self.config.embedding_dimension)
        )
        completion = (
            HttpCompletionProvider(self.config.completion_endpoint)
            if self.config.completion_endpoint
            else None
        )
        self.providers = Providers(embedding=embedding, completion=completion)
        self.sessions = SessionStore()
        self.rules = builtin_rules() + self.config.extra_rules()

    def persist(self) -> None:
        if self.config.store_path:
            self.graph.save(self.config.store_path)

    def index_text(self, doc, source_kind: SourceKind, doi: str) -> None:
        chunks = chunk_document(
            doc, source_kind, doi, window=self.config.chunk_tokens, overlap=self.config.chunk_overlap
        )
        embed_and_index(self.index, chunks, self.providers.embedding)


def create_app(state: ServiceState | None = None) -> FastAPI:
    state = state or ServiceState()
    app = FastAPI(title="robodex", version="0.1.0")
    app.state.robodex = state

    @app.exception_handler(RobodexError)
    async def _robodex_error(_request: Request, exc: RobodexError):
        status, code = 500, "InternalError"
        for klass, (st, cd) in _STATUS.items():
            if isinstance(exc, klass):
                status, code = st, cd
                break
        details = {}
        if isinstance(exc, DatasetNotFoundError):
            details["missing"] = exc.missing
        if isinstance(exc, AmbiguousComparisonError):
            details["hint"] = "name the specific datasets (titles or DOIs) you want compared"
        return JSONResponse(
            status_code=status,
            content={"error_code": code, "message": str(exc), "details": details},
        )

    @app.exception_handler(ValueError)
    async def _value_error(_request: Request, exc: ValueError):
        return JSONResponse(
            status_code=422,
            content={"error_code": "InvalidRequest", "message": str(exc), "details": {}},
        )

    # -- sessions ---------------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session():
        session = state.sessions.create()
        return {"session_id": session.id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return state.sessions.get(session_id).to_json_dict()

    @app.post("/sessions/{session_id}/query")
    def run_query(session_id: str, body: dict):
        state.sessions.get(session_id)
        text = (body or {}).get("text", "")
        if not isinstance(text, str) or not text.strip():
            raise ValueError("query text is required")
        mode_name = (body or {}).get("mode", AnswerMode.GROUNDED.value)
        try:
            mode = AnswerMode(mode_name)
        except ValueError:
            raise ValueError(f"mode must be one of {[m.value for m in AnswerMode]}")
        result = answer(
            text,
            state.graph,
            state.index,
            state.providers,
            mode=mode,
            top_k=state.config.top_k,
        )
        payload = result.to_json_dict()
        # only successful exchanges enter the log; failed ones leave it unchanged
        state.sessions.append(
            session_id,
            Message(role="user", text=text),
            Message(role="system", text=result.text, sources=payload["sources"]),
        )
        return payload

    # -- harvest ------------------------------------------------------------------

    @app.post("/harvest")
    def harvest(body: dict):
        repo = (body or {}).get("repo")
        doi = (body or {}).get("doi")
        if not repo or not doi:
            raise ValueError("repo and doi are required")
        raw = fetch_record(repo, doi)
        record = parse_ddi(raw, repo_base=repo)
        report = None
        report_raw = (body or {}).get("report") or (body or {}).get("report_text")
        if report_raw:
            report_text = report_raw
            if "\n" not in report_raw and not report_raw.startswith("## "):
                with open(report_raw, "r", encoding="utf-8") as fh:
                    report_text = fh.read()
            report = parse_report(report_text)
        summary = ingest_record(state.graph, record, report=report, rules=state.rules)
        state.index_text(record.as_text(), SourceKind.METADATA_RECORD, record.doi)
        if report is not None:
            state.index_text(report, SourceKind.DATA_REPORT, record.doi)
        state.persist()
        status = 201 if summary.nodes_created > 0 else 200
        return JSONResponse(status_code=status, content=summary.to_json_dict())

    # -- catalog ---------------------------------------------------------------------

    @app.get("/datasets")
    def list_datasets():
        return [
            {"doi": str(n.properties.get("doi", "")), "title": str(n.properties.get("title", ""))}
            for n in state.graph.list_datasets()
        ]

    @app.post("/compare")
    def compare(body: dict):
        dois = (body or {}).get("dois") or []
        if not isinstance(dois, list) or len(dois) < 2:
            raise ValueError("compare needs a 'dois' list with at least two entries")
        facets = (body or {}).get("facets")
        table = state.graph.compare(dois, facets)
        return table.to_json_dict()

    @app.get("/datasets/{rest:path}")
    def dataset_routes(rest: str, request: Request):
        if not rest:
            return list_datasets()
        if rest.endswith("/files"):
            doi = rest[: -len("/files")]
            filters = dict(request.query_params)
            files = state.graph.locate_files(doi, filters)
            return [_file_json(node) for node in files]
        if rest.endswith("/manifest"):
            doi = rest[: -len("/manifest")]
            params = dict(request.query_params)
            render = params.pop("format", "json")
            manifest = build_manifest(state.graph, doi, params)
            if render == "script":
                return PlainTextResponse(render_manifest_script(manifest))
            return manifest.to_json_dict()
        return state.graph.dataset_profile(rest).to_json_dict()

    # -- source inspection ---------------------------------------------------------------

    @app.get("/chunks/{chunk_id:path}")
    def get_chunk(chunk_id: str):
        chunk = state.index.chunk(chunk_id)
        if chunk is None:
            return JSONResponse(
                status_code=404,
                content={
                    "error_code": "ChunkNotFound",
                    "message": f"no chunk {chunk_id}",
                    "details": {},
                },
            )
        return {
            "id": chunk.id,
            "source_doi": chunk.source_doi,
            "source_kind": chunk.source_kind.value,
            "section": chunk.section,
            "text": chunk.text,
        }

    # -- audit --------------------------------------------------------------------------

    @app.get("/audit/{doi:path}")
    def audit(doi: str):
        return fair_audit(state.graph, doi).to_json_dict()

    return app


def _file_json(node: Node) -> dict:
    return {key: value for key, value in sorted(node.properties.items()) if key != "name"}


# -- download manifests ------------------------------------------------------------------

@dataclass
class ManifestEntry:
    path: str
    size: int | None
    url: str
    checksum: str


@dataclass
class DownloadManifest:
    doi: str
    entries: list[ManifestEntry]
    generated_at: str

    def to_json_dict(self) -> dict:
        return {
            "doi": self.doi,
            "generated_at": self.generated_at,
            "entries": [
                {"path": e.path, "size": e.size, "url": e.url, "checksum": e.checksum}
                for e in self.entries
            ],
        }


def build_manifest(graph: PropertyGraph, doi: str, filters: dict | None = None) -> DownloadManifest:
    """Manifest entries are exactly the locate_files result for the filters."""
    files = graph.locate_files(doi, filters or {})
    entries = []
    for node in files:
        size = node.properties.get("size")
        entries.append(
            ManifestEntry(
                path=str(node.properties.get("path", "")),
                size=int(size) if size is not None else None,
                url=str(node.properties.get("url", "") or "-"),
                checksum=str(node.properties.get("checksum", "") or "-"),
            )
        )
    return DownloadManifest(doi=doi, entries=entries, generated_at=_now())


_CHECKSUM_TOOLS = {"MD5": "md5sum", "SHA-1": "sha1sum", "SHA1": "sha1sum", "SHA-256": "sha256sum", "SHA256": "sha256sum"}


def render_manifest_script(manifest: DownloadManifest) -> str:
    """POSIX shell rendering: one fetch line per entry plus checksum checks."""
    lines = [
        "#!/bin/sh",
        f"# download script for {manifest.doi}",
        f"# generated {manifest.generated_at}",
        "set -eu",
        "",
    ]
    directories = sorted({e.path.rsplit("/", 1)[0] for e in manifest.entries if "/" in e.path})
    for directory in directories:
        lines.append(f"mkdir -p '{directory}'")
    if directories:
        lines.append("")
    for entry in manifest.entries:
        if entry.url == "-":
            lines.append(f"# no access URL recorded for {entry.path}")
            continue
        lines.append(f"curl -L --fail -o '{entry.path}' '{entry.url}'")
    checks = []
    for entry in manifest.entries:
        if entry.checksum == "-":
            continue
        algo, _, value = entry.checksum.partition(":")
        tool = _CHECKSUM_TOOLS.get(algo.upper())
        if tool and value:
            checks.append(f"echo '{value}  {entry.path}' | {tool} -c -")
    if checks:
        lines.append("")
        lines.extend(checks)
    lines.append("")
    return "\n".join(lines)


# -- FAIR audit ------------------------------------------------------------------------------

@dataclass
class FairCheck:
    principle: str  # F | A | I | R
    name: str
    passed: bool
    detail: str


@dataclass
class FairAudit:
    doi: str
    checks: list[FairCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json_dict(self) -> dict:
        return {
            "doi": self.doi,
            "passed": self.passed,
            "checks": [
                {"principle": c.principle, "name": c.name, "passed": c.passed, "detail": c.detail}
                for c in self.checks
            ],
        }


def fair_audit(graph: PropertyGraph, doi: str) -> FairAudit:
    """Findable / Accessible / Interoperable / Reusable checks for one dataset."""
    dataset = graph.dataset_node(doi)
    if dataset is None:
        raise DatasetNotFoundError([doi])
    checks: list[FairCheck] = []

    recorded_doi = str(dataset.properties.get("doi", "")).strip()
    checks.append(
        FairCheck("F", "persistent-identifier", bool(recorded_doi), f"doi={recorded_doi or '(none)'}")
    )
    title = str(dataset.properties.get("title", "")).strip()
    checks.append(FairCheck("F", "title-present", bool(title), f"title={title or '(none)'}"))

    files = graph.locate_files(doi)
    missing_urls = [
        str(f.properties.get("path", "")) for f in files if not f.properties.get("url")
    ]
    checks.append(
        FairCheck(
            "A",
            "file-access-urls",
            not missing_urls,
            f"{len(files) - len(missing_urls)}/{len(files)} files have access URLs"
            if files
            else "no files listed",
        )
    )

    subgraph = _dataset_subgraph(graph, doi)
    report = datamodel.validate(graph.schema, subgraph)
    checks.append(
        FairCheck(
            "I",
            "schema-conformance",
            report.ok,
            "conforms to the shared data model" if report.ok else f"{len(report)} violation(s)",
        )
    )

    license_value = str(dataset.properties.get("license", "")).strip()
    checks.append(FairCheck("R", "license-present", bool(license_value), f"license={license_value or '(none)'}"))
    has_report = bool(dataset.properties.get("has_report", False))
    checks.append(
        FairCheck("R", "data-report-ingested", has_report, "data report ingested" if has_report else "no data report")
    )
    profile = graph.dataset_profile(doi)
    publications = dict(profile.groups).get("describedBy", [])
    checks.append(
        FairCheck(
            "R",
            "publication-linked",
            bool(publications),
            f"{len(publications)} linked publication(s)",
        )
    )
    return FairAudit(doi=doi, checks=checks)


def _dataset_subgraph(graph: PropertyGraph, doi: str) -> PropertyGraph:
    """Copy of the dataset's one-hop neighborhood, for conformance checking."""
    dataset = graph.dataset_node(doi)
    sub = PropertyGraph(schema=graph.schema)
    ids: dict[int, int] = {}

    def _copy_node(node):
        if node.id not in ids:
            ids[node.id] = sub.add_node(node.label, dict(node.properties)).id

    _copy_node(dataset)
    members = {dataset.id}
    for edge in graph.edges():
        if edge.source == dataset.id or edge.target == dataset.id:
            members.add(edge.source)
            members.add(edge.target)
    for node_id in sorted(members):
        node = graph.node_by_id(node_id)
        if node is not None:
            _copy_node(node)
    for edge in graph.edges():
        if edge.source in members and edge.target in members:
            sub.add_edge(edge.edge_type, ids[edge.source], ids[edge.target])
    return sub
