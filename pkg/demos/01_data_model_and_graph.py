"""Walkthrough: the robotics data model and the embedded property graph.

Run from the repository root:  python demos/01_data_model_and_graph.py
"""
from robodex import builtin_schema, node_label, edge_type, validate
from robodex.graph import PropertyGraph

# ------------------------------------------------------------------
# 1. The built-in schema: node labels, typed edges, required properties
# ------------------------------------------------------------------
schema = builtin_schema()
print(f"schema version {schema.version}")
print("node labels:", ", ".join(schema.node_label_names()))
print("edge types: ", ", ".join(schema.edge_type_names()))

uses_model = schema.edge("usesModel")
print(f"\nusesModel: {sorted(uses_model.source_labels)} -> {sorted(uses_model.target_labels)}")

# ------------------------------------------------------------------
# 2. Emerging metadata enters as provisional labels and gets promoted
#    once it stabilizes; every mutation returns a new schema version.
# ------------------------------------------------------------------
schema = schema.add_provisional(node_label("PhysiologicalSignal"))
schema = schema.add_provisional(edge_type("hasSignal", {"Dataset"}, {"PhysiologicalSignal"}))
print(f"\nafter two provisional additions: version {schema.version}")
print("status:", schema.node("PhysiologicalSignal").status.value)

schema = schema.promote("PhysiologicalSignal")
print("after promotion:", schema.node("PhysiologicalSignal").status.value, f"(version {schema.version})")

# ------------------------------------------------------------------
# 3. Graph content validates against the schema; violations are data,
#    not exceptions, so a report can list everything at once.
# ------------------------------------------------------------------
graph = PropertyGraph(schema=schema)
dataset = graph.add_node("Dataset", {"name": "doi:10.5072/DEMO/1", "doi": "doi:10.5072/DEMO/1", "title": "Demo"})
spot = graph.add_node("RobotModel", {"name": "Boston Dynamics Spot"})
graph.add_edge("usesModel", dataset.id, spot.id)
print("\nconforming graph:", "clean" if validate(schema, graph).ok else "violations!")

sloppy = PropertyGraph(schema=schema)
sloppy.add_node("Dataset", {"name": "doi:10.5072/DEMO/2", "title": "No DOI recorded"})
report = validate(schema, sloppy)
for violation in report.violations:
    print(f"violation: {violation.kind}: {violation.detail}")

# ------------------------------------------------------------------
# 4. Persistence: one snapshot file with a trailing checksum.
# ------------------------------------------------------------------
import tempfile, pathlib

with tempfile.TemporaryDirectory() as tmp:
    snapshot = pathlib.Path(tmp) / "demo.graph"
    graph.save(snapshot)
    reloaded = PropertyGraph.load(snapshot)
    print("\nround trip canonical-equal:", reloaded.canonical_json() == graph.canonical_json())
