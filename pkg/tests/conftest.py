"""Shared fixtures: the two-dataset corpus, a mock repository server, and
ready-made graphs."""
from __future__ import annotations

import http.server
import json
import threading
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

import pytest

from robodex.graph import PropertyGraph
from robodex.harvester import KeywordRule, builtin_rules, ingest_record, parse_ddi
from robodex.reports import parse_report

FIXTURES = Path(__file__).parent / "fixtures"

DOI_A = "doi:10.5072/FK2/SPOTCD"
DOI_B = "doi:10.5072/FK2/HALLWY"
TITLE_A = "Spot Courtyard Delivery Study"
TITLE_B = "Hallway Guidance Robot Study"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def fixture_json(name: str) -> dict:
    return json.loads(fixture_text(name))


def corpus_rules() -> list[KeywordRule]:
    """Builtin rules plus the catalog's configured extensions."""
    return builtin_rules() + [
        KeywordRule("control", "ControlMode", "usesControl"),
        KeywordRule("publication", "Publication", "describedBy"),
        KeywordRule("irb", "EthicsApproval", "approvedBy"),
    ]


def build_corpus_graph() -> PropertyGraph:
    graph = PropertyGraph()
    rules = corpus_rules()
    for ddi, report in (
        ("ddi_spotcd.json", "report_spotcd.md"),
        ("ddi_hallwy.json", "report_hallwy.md"),
    ):
        record = parse_ddi(fixture_json(ddi))
        ingest_record(graph, record, report=parse_report(fixture_text(report)), rules=rules)
    return graph


@pytest.fixture(scope="session")
def corpus_graph() -> PropertyGraph:
    return build_corpus_graph()


@pytest.fixture()
def fresh_corpus_graph() -> PropertyGraph:
    return build_corpus_graph()


class _RepoHandler(http.server.BaseHTTPRequestHandler):
    routes: dict[str, bytes] = {}

    def log_message(self, *args):  # quiet
        pass

    def do_GET(self):
        parts = urlsplit(self.path)
        if parts.path != "/api/datasets/export":
            self.send_error(404)
            return
        params = parse_qs(parts.query)
        doi = (params.get("persistentId") or [""])[0]
        body = self.routes.get(doi)
        if body is None:
            self.send_error(404)
            return
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture(scope="session")
def mock_repo():
    """Local repository endpoint serving the fixture exports."""
    handler = type("Handler", (_RepoHandler,), {})
    handler.routes = {
        DOI_A: fixture_text("ddi_spotcd.json").encode("utf-8"),
        DOI_B: fixture_text("ddi_hallwy.json").encode("utf-8"),
        "doi:10.5072/FK2/BROKEN": b"<html>not json</html>",
    }
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()


class _ProviderHandler(http.server.BaseHTTPRequestHandler):
    """Mock embedding + completion provider: hashing vectors, echoed prompts."""

    def log_message(self, *args):
        pass

    def do_POST(self):
        from robodex.retrieval import HashingEmbeddingProvider

        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self.send_error(400)
            return
        if self.path == "/embed":
            reply = {"vectors": HashingEmbeddingProvider(256).embed(body.get("texts", []))}
        elif self.path == "/complete":
            reply = {"text": body.get("prompt", "")}
        else:
            self.send_error(404)
            return
        data = json.dumps(reply).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture(scope="session")
def mock_providers():
    """Local provider endpoint speaking the /embed and /complete wire formats."""
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _ProviderHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()


def service_config(**overrides):
    from robodex.config import ServiceConfig

    overrides.setdefault(
        "keyword_rules",
        [
            {"pattern": "control", "target_label": "ControlMode", "edge_type": "usesControl"},
            {"pattern": "publication", "target_label": "Publication", "edge_type": "describedBy"},
            {"pattern": "irb", "target_label": "EthicsApproval", "edge_type": "approvedBy"},
        ],
    )
    return ServiceConfig(**overrides)
