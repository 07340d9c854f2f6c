"""Walkthrough: the HTTP service end to end on one machine.

Starts the catalog service plus a mock repository and a mock provider on
local ports, harvests the fixture corpus over HTTP, and exercises every
route: sessions, queries, comparison, file location, download manifests,
and the FAIR audit.
Run from the repository root:  python demos/05_service_walkthrough.py
"""
import http.server
import json
import socket
import threading
import time
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

import httpx
import uvicorn

from robodex.config import ServiceConfig
from robodex.retrieval import HashingEmbeddingProvider
from robodex.service import ServiceState, create_app

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
DOI_A = "doi:10.5072/FK2/SPOTCD"
DOI_B = "doi:10.5072/FK2/HALLWY"


def free_port() -> int:
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        return probe.getsockname()[1]


# ------------------------------------------------------------------
# 1. A stand-in repository serving the fixture metadata exports, and a
#    stand-in provider speaking the /embed and /complete wire formats.
# ------------------------------------------------------------------
class RepoHandler(http.server.BaseHTTPRequestHandler):
    exports = {
        DOI_A: (FIXTURES / "ddi_spotcd.json").read_bytes(),
        DOI_B: (FIXTURES / "ddi_hallwy.json").read_bytes(),
    }

    def log_message(self, *args):
        pass

    def do_GET(self):
        parts = urlsplit(self.path)
        doi = (parse_qs(parts.query).get("persistentId") or [""])[0]
        body = self.exports.get(doi)
        if parts.path != "/api/datasets/export" or body is None:
            self.send_error(404)
            return
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)


class ProviderHandler(http.server.BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers.get("Content-Length", 0))) or b"{}")
        if self.path == "/embed":
            reply = {"vectors": HashingEmbeddingProvider(256).embed(body.get("texts", []))}
        elif self.path == "/complete":
            reply = {"text": "Summarized from context:\n" + body.get("prompt", "")[:400]}
        else:
            self.send_error(404)
            return
        data = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(data)


repo_server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), RepoHandler)
provider_server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), ProviderHandler)
for server in (repo_server, provider_server):
    threading.Thread(target=server.serve_forever, daemon=True).start()
repo = f"http://127.0.0.1:{repo_server.server_address[1]}"
providers = f"http://127.0.0.1:{provider_server.server_address[1]}"

# ------------------------------------------------------------------
# 2. The catalog service itself.
# ------------------------------------------------------------------
config = ServiceConfig(
    embedding_endpoint=providers,
    completion_endpoint=providers,
    keyword_rules=[
        {"pattern": "control", "target_label": "ControlMode", "edge_type": "usesControl"},
        {"pattern": "publication", "target_label": "Publication", "edge_type": "describedBy"},
        {"pattern": "irb", "target_label": "EthicsApproval", "edge_type": "approvedBy"},
    ],
)
port = free_port()
server = uvicorn.Server(uvicorn.Config(create_app(ServiceState(config)), host="127.0.0.1", port=port, log_level="error"))
threading.Thread(target=server.run, daemon=True).start()
while not server.started:
    time.sleep(0.02)
base = f"http://127.0.0.1:{port}"
print(f"service listening on {base}")

with httpx.Client(base_url=base, timeout=30.0) as client:
    # harvest both datasets over HTTP, with their data reports
    for doi, report in ((DOI_A, "report_spotcd.md"), (DOI_B, "report_hallwy.md")):
        response = client.post("/harvest", json={"repo": repo, "doi": doi, "report": str(FIXTURES / report)})
        print(f"harvest {doi}: HTTP {response.status_code} {response.json()}")

    print("\ncatalog:", [d["title"] for d in client.get("/datasets").json()])

    # conversational session with cited sources
    session = client.post("/sessions").json()["session_id"]
    reply = client.post(f"/sessions/{session}/query", json={"text": "Which datasets use Boston Dynamics Spot?"}).json()
    print(f"\nQ: Which datasets use Boston Dynamics Spot?\nA: {reply['answer']}")
    print("sources:", reply["sources"])

    vague = client.post(f"/sessions/{session}/query", json={"text": "What is the robot model difference?"})
    print(f"\nvague comparison -> HTTP {vague.status_code}: {vague.json()['details']['hint']}")

    table = client.post("/compare", json={"dois": [DOI_A, DOI_B], "facets": ["usesControl", "usesModel"]}).json()
    for row in table["rows"]:
        print(f"compare {row['facet']:<12} same={row['same']} {row['cells']}")

    files = client.get(f"/datasets/{DOI_A}/files", params={"modality": "video", "session": "1"}).json()
    print("\nsession-1 videos:", [f["path"] for f in files])

    script = client.get(f"/datasets/{DOI_A}/manifest", params={"modality": "video", "format": "script"}).text
    print("\ndownload script (first lines):")
    print("\n".join(script.splitlines()[:8]))

    audit = client.get(f"/audit/{DOI_A}").json()
    print(f"\nFAIR audit for {DOI_A}: {'PASS' if audit['passed'] else 'FAIL'}")
    for check in audit["checks"]:
        print(f"  [{check['principle']}] {check['name']:<22} {'ok' if check['passed'] else 'FAIL'} — {check['detail']}")

    # LLM mode: the mock provider echoes the grounded context it was given
    llm = client.post(f"/sessions/{session}/query", json={"text": "Does the Spot Courtyard Delivery Study include LiDAR?", "mode": "LLM"}).json()
    print("\nLLM-mode answer (mock provider):", llm["answer"].splitlines()[0])

server.should_exit = True
repo_server.shutdown()
provider_server.shutdown()
print("\ndone.")
