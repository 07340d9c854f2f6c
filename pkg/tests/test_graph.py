import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robodex.errors import CorruptStoreError, DatasetNotFoundError, UnknownLabelError
from robodex.graph import PropertyGraph, normalize_name

ENTITY_LABELS = ["RobotModel", "Sensor", "ControlMode", "ResearchMethod", "ExperimentLocation"]
ENTITY_EDGE = {
    "RobotModel": "usesModel",
    "Sensor": "hasSensor",
    "ControlMode": "usesControl",
    "ResearchMethod": "usesMethod",
    "ExperimentLocation": "conductedAt",
}
NAME_POOL = [
    "Boston Dynamics Spot", "Clearpath Jackal", "Unitree Go1", "3D LiDAR", "RGB camera",
    "IMU", "joystick teleoperation", "autonomous navigation", "field experiment",
    "observational study", "courtyard", "hallway", "lobby", "Stereo  Camera",
]
MODALITIES = ["video", "audio", "pose", "lidar"]


def random_graph(seed: int, max_datasets: int = 8) -> PropertyGraph:
    """Randomized catalog graph; up to ~500 nodes at the default sizes."""
    rng = random.Random(seed)
    graph = PropertyGraph()
    n_datasets = rng.randint(1, max_datasets)
    for d in range(n_datasets):
        doi = f"doi:10.5072/RND/{seed}-{d}"
        ds = graph.add_node(
            "Dataset", {"name": doi, "doi": doi, "title": f"Randomized Study {seed}-{d}"}
        )
        for _ in range(rng.randint(0, 6)):
            label = rng.choice(ENTITY_LABELS)
            name = rng.choice(NAME_POOL)
            node, _ = graph.get_or_create_node(label, name)
            graph.add_edge(ENTITY_EDGE[label], ds.id, node.id)
        for f in range(rng.randint(0, 40)):
            session = rng.choice(["1", "01", "2", "02", "10"])
            modality = rng.choice(MODALITIES)
            path = f"data/d{d}_f{f:02d}_{modality}.bin"
            props = {"name": f"{doi}!{path}", "path": path, "modality": modality}
            if rng.random() < 0.8:
                props["session"] = session
            node = graph.add_node("DataFile", props)
            graph.add_edge("containsFile", ds.id, node.id)
    # a few orphan entities
    for _ in range(rng.randint(0, 3)):
        graph.get_or_create_node(rng.choice(ENTITY_LABELS), rng.choice(NAME_POOL) + " orphan")
    return graph


# -- independent oracles (plain scans over the public iterators) ---------------------

def brute_find_datasets(graph: PropertyGraph, label: str, name: str) -> list[str]:
    def norm(s):
        return " ".join(s.split()).casefold()

    nodes = {n.id: n for n in graph.nodes()}
    targets = {i for i, n in nodes.items() if n.label == label and n.name and norm(n.name) == norm(name)}
    dois = set()
    for edge in graph.edges():
        for a, b in ((edge.source, edge.target), (edge.target, edge.source)):
            if a in targets and nodes[b].label == "Dataset":
                dois.add(str(nodes[b].properties["doi"]))
    return sorted(dois)


def brute_locate(graph: PropertyGraph, doi: str, filters: dict) -> list[str]:
    def norm(v):
        v = str(v)
        return (v.lstrip("0") or "0") if v.isdigit() else v

    nodes = {n.id: n for n in graph.nodes()}
    dataset_ids = {
        i for i, n in nodes.items() if n.label == "Dataset" and str(n.properties.get("doi")) == doi
    }
    paths = []
    for edge in graph.edges():
        if edge.edge_type == "containsFile" and edge.source in dataset_ids:
            node = nodes[edge.target]
            if all(k in node.properties and norm(node.properties[k]) == norm(v) for k, v in filters.items()):
                paths.append(str(node.properties["path"]))
    return sorted(paths)


# -- oracle agreement ------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(12))
def test_find_datasets_matches_brute_force(seed):
    graph = random_graph(seed)
    for label in ENTITY_LABELS:
        for name in NAME_POOL:
            got = [str(n.properties["doi"]) for n in graph.find_datasets_by(label, name)]
            assert got == brute_find_datasets(graph, label, name)


@pytest.mark.parametrize("seed", range(12))
def test_locate_files_matches_brute_force(seed):
    graph = random_graph(seed)
    filter_cases = [
        {},
        {"modality": "video"},
        {"session": "1"},
        {"session": "01"},
        {"modality": "audio", "session": "2"},
        {"weather": "rain"},
    ]
    for node in graph.list_datasets():
        doi = str(node.properties["doi"])
        for filters in filter_cases:
            got = [str(f.properties["path"]) for f in graph.locate_files(doi, filters)]
            assert got == brute_locate(graph, doi, filters)


def test_zero_pad_matching(corpus_graph):
    ones = graph_paths(corpus_graph, {"session": "1"})
    zero_ones = graph_paths(corpus_graph, {"session": "01"})
    assert ones == zero_ones and ones


def graph_paths(graph, filters):
    return [
        str(f.properties["path"])
        for f in graph.locate_files("doi:10.5072/FK2/SPOTCD", filters)
    ]


# -- queries -----------------------------------------------------------------------------

def test_find_datasets_empty_graph():
    assert PropertyGraph().find_datasets_by("RobotModel", "Boston Dynamics Spot") == []


def test_find_datasets_unknown_label():
    with pytest.raises(UnknownLabelError):
        PropertyGraph().find_datasets_by("Spaceship", "x")


def test_find_datasets_normalizes_names(corpus_graph):
    found = corpus_graph.find_datasets_by("RobotModel", "  boston   DYNAMICS spot ")
    assert [n.properties["doi"] for n in found] == ["doi:10.5072/FK2/SPOTCD"]


def test_profile_deterministic_and_grouped(corpus_graph):
    profile = corpus_graph.dataset_profile("doi:10.5072/FK2/SPOTCD")
    assert dict(profile.groups)["usesModel"] == ["Boston Dynamics Spot"]
    edge_names = [et for et, _ in profile.groups]
    assert edge_names == sorted(edge_names)
    for _, names in profile.groups:
        assert names == sorted(names)


def test_profile_missing_doi(corpus_graph):
    with pytest.raises(DatasetNotFoundError):
        corpus_graph.dataset_profile("doi:10.5072/FK2/NOPE")


def test_profile_no_edges():
    graph = PropertyGraph()
    graph.add_node("Dataset", {"name": "doi:10.1/L", "doi": "doi:10.1/L", "title": "Lonely"})
    assert graph.dataset_profile("doi:10.1/L").groups == []


def test_compare_self_all_same(corpus_graph):
    table = corpus_graph.compare(["doi:10.5072/FK2/SPOTCD", "doi:10.5072/FK2/SPOTCD"])
    assert table.rows and all(row.same for row in table.rows)


def test_compare_missing_lists_all(corpus_graph):
    with pytest.raises(DatasetNotFoundError) as err:
        corpus_graph.compare(["doi:10.5072/FK2/SPOTCD", "doi:missing", "doi:also-missing"])
    assert err.value.missing == ["doi:missing", "doi:also-missing"]


def test_compare_requires_two(corpus_graph):
    with pytest.raises(ValueError):
        corpus_graph.compare(["doi:10.5072/FK2/SPOTCD"])


def test_compare_symmetry(corpus_graph):
    a, b = "doi:10.5072/FK2/SPOTCD", "doi:10.5072/FK2/HALLWY"
    forward = corpus_graph.compare([a, b])
    backward = corpus_graph.compare([b, a])
    for row_f, row_b in zip(forward.rows, backward.rows):
        assert row_f.facet == row_b.facet
        assert row_f.same == row_b.same
        assert row_f.cells == tuple(reversed(row_b.cells))


def test_compare_unknown_facet(corpus_graph):
    with pytest.raises(UnknownLabelError):
        corpus_graph.compare(["doi:10.5072/FK2/SPOTCD", "doi:10.5072/FK2/HALLWY"], ["flies"])


def test_locate_files_missing_dataset():
    with pytest.raises(DatasetNotFoundError):
        PropertyGraph().locate_files("doi:none")


# -- persistence -----------------------------------------------------------------------

def test_round_trip_byte_identical(tmp_path, fresh_corpus_graph):
    location = tmp_path / "graph.snapshot"
    fresh_corpus_graph.save(location)
    loaded = PropertyGraph.load(location)
    assert loaded.canonical_json() == fresh_corpus_graph.canonical_json()
    again = tmp_path / "again.snapshot"
    loaded.save(again)
    assert again.read_bytes() == location.read_bytes()


def test_round_trip_empty(tmp_path):
    location = tmp_path / "empty.snapshot"
    PropertyGraph().save(location)
    loaded = PropertyGraph.load(location)
    assert len(loaded) == 0 and loaded.edge_count == 0


def test_schema_survives_round_trip(tmp_path, fresh_corpus_graph):
    location = tmp_path / "graph.snapshot"
    fresh_corpus_graph.save(location)
    loaded = PropertyGraph.load(location)
    # the hallway report added provisional StressSignals labels
    assert loaded.schema.has_node_label("StressSignals")
    assert loaded.schema.has_edge_type("hasStressSignals")


def test_load_truncated_is_corrupt(tmp_path, fresh_corpus_graph):
    location = tmp_path / "graph.snapshot"
    fresh_corpus_graph.save(location)
    text = location.read_text()
    location.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptStoreError):
        PropertyGraph.load(location)


def test_load_bit_flip_is_corrupt(tmp_path, fresh_corpus_graph):
    location = tmp_path / "graph.snapshot"
    fresh_corpus_graph.save(location)
    lines = location.read_text().splitlines()
    lines[1] = lines[1].replace("Spot", "Spoof", 1)
    location.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorruptStoreError):
        PropertyGraph.load(location)


def test_canonical_ordering():
    graph = PropertyGraph()
    ds = graph.add_node("Dataset", {"name": "doi:10.1/X", "doi": "doi:10.1/X", "title": "X"})
    b = graph.add_node("Sensor", {"name": "b"})
    a = graph.add_node("Sensor", {"name": "a"})
    graph.add_edge("hasSensor", ds.id, b.id)
    graph.add_edge("hasSensor", ds.id, a.id)
    doc = json.loads(graph.canonical_json())
    ids = [row["id"] for row in doc["nodes"]]
    assert ids == sorted(ids)
    edge_keys = [(r["edge_type"], r["source"], r["target"]) for r in doc["edges"]]
    assert edge_keys == sorted(edge_keys)


# -- integrity under random operation sequences ---------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_index_audit_after_random_ops(seed):
    graph = random_graph(seed, max_datasets=4)
    rng = random.Random(seed + 1)
    nodes = [n.id for n in graph.nodes()]
    for _ in range(20):
        op = rng.choice(["entity", "edge", "update"])
        if op == "entity":
            node, _ = graph.get_or_create_node(rng.choice(ENTITY_LABELS), rng.choice(NAME_POOL))
            nodes.append(node.id)
        elif op == "edge" and nodes:
            datasets = graph.nodes_with_label("Dataset")
            if datasets:
                ds = rng.choice(datasets)
                label = rng.choice(ENTITY_LABELS)
                node, _ = graph.get_or_create_node(label, rng.choice(NAME_POOL))
                graph.add_edge(ENTITY_EDGE[label], ds.id, node.id)
        elif op == "update" and nodes:
            graph.update_node(rng.choice(nodes), {"note": f"n{rng.randint(0, 9)}"})
    assert graph.audit_indexes() == []
    for edge in graph.edges():
        assert graph.node_by_id(edge.source) is not None
        assert graph.node_by_id(edge.target) is not None


def test_duplicate_edges_collapse():
    graph = PropertyGraph()
    ds = graph.add_node("Dataset", {"name": "doi:10.1/X", "doi": "doi:10.1/X", "title": "X"})
    rm = graph.add_node("RobotModel", {"name": "Spot"})
    _, created_first = graph.add_edge("usesModel", ds.id, rm.id)
    _, created_second = graph.add_edge("usesModel", ds.id, rm.id)
    assert created_first and not created_second
    assert graph.edge_count == 1


def test_name_index_shared_entities():
    graph = PropertyGraph()
    first, created = graph.get_or_create_node("RobotModel", "Boston Dynamics Spot")
    second, reused = graph.get_or_create_node("RobotModel", "boston dynamics  spot")
    assert created and not reused
    assert first.id == second.id
    assert normalize_name("Boston  Dynamics Spot") == "boston dynamics spot"
