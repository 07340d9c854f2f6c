"""Walkthrough: retrieval-backed, source-cited question answering.

Run from the repository root:  python demos/03_grounded_answers.py
"""
import json
from pathlib import Path

from robodex import (
    AnswerMode,
    HashingEmbeddingProvider,
    KeywordRule,
    Providers,
    RetrievalIndex,
    SourceKind,
    answer,
    builtin_rules,
    chunk_document,
    embed_and_index,
    ingest_record,
    parse_ddi,
    parse_intent,
    parse_report,
    retrieve,
)
from robodex.errors import AmbiguousComparisonError
from robodex.graph import PropertyGraph

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

rules = builtin_rules() + [KeywordRule("control", "ControlMode", "usesControl")]
graph = PropertyGraph()
provider = HashingEmbeddingProvider()  # deterministic: no model, no network
index = RetrievalIndex(provider.dimension)

for ddi_name, report_name in (("ddi_spotcd.json", "report_spotcd.md"), ("ddi_hallwy.json", "report_hallwy.md")):
    record = parse_ddi(json.loads((FIXTURES / ddi_name).read_text()))
    report = parse_report((FIXTURES / report_name).read_text())
    ingest_record(graph, record, report=report, rules=rules)
    embed_and_index(index, chunk_document(report, SourceKind.DATA_REPORT, record.doi), provider)
    embed_and_index(index, chunk_document(record.as_text(), SourceKind.METADATA_RECORD, record.doi), provider)

print(f"index holds {len(index)} chunks")

# ------------------------------------------------------------------
# 1. Intent parsing is rule-based and resolves names against the catalog.
# ------------------------------------------------------------------
for query in (
    "Which datasets use Boston Dynamics Spot?",
    "What kind of robot is used in the Spot Courtyard Delivery Study?",
    "Point to all video files for session 1 in the Spot Courtyard Delivery Study",
):
    intent = parse_intent(query, graph)
    print(f"\n{query}\n  -> {intent.to_json_dict()}")

# A comparison without named datasets is rejected, never guessed.
try:
    parse_intent("What is the robot model difference?", graph)
except AmbiguousComparisonError as exc:
    print(f"\nvague comparison rejected: {exc}")

# ------------------------------------------------------------------
# 2. Grounded answers: graph facts for structured intents; every
#    answer carries its sources.
# ------------------------------------------------------------------
providers = Providers(provider)
for query in (
    "Which datasets use Boston Dynamics Spot?",
    "Compare the Spot Courtyard Delivery Study and the Hallway Guidance Robot Study in terms of control.",
):
    result = answer(query, graph, index, providers, mode=AnswerMode.GROUNDED)
    print(f"\nQ: {query}\nA: {result.text}")
    for source in result.sources:
        print(f"   source: {source.render()}")

# ------------------------------------------------------------------
# 3. Free-form questions fall back to the best chunks.
# ------------------------------------------------------------------
hits = retrieve(index, "consent and signage for pedestrians", provider, k=3)
print("\ntop chunks for a free-form query:")
for chunk, score in hits:
    print(f"  {score:+.3f} {chunk.id}")
result = answer("How was consent handled for pedestrians?", graph, index, providers)
print(f"A: {result.text[:160]}...")
print(f"   cited chunks: {[s.chunk_id for s in result.sources]}")
