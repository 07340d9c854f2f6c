"""Helpers shared by the retrieval, service, and acceptance tests."""
from __future__ import annotations

from robodex.graph import PropertyGraph
from robodex.retrieval import GroundedAnswer, RetrievalIndex, Source


def fact_exists(graph: PropertyGraph, source: Source) -> bool:
    """A cited fact must correspond to a real edge in the graph."""
    dataset = graph.dataset_node(source.subject or "")
    if dataset is None:
        return False
    for edge in graph.edges():
        if edge.source != dataset.id or edge.edge_type != source.predicate:
            continue
        target = graph.node_by_id(edge.target)
        path = target.properties.get("path")
        display = path if isinstance(path, str) else (target.name or "")
        if display == source.object:
            return True
    return False


def verify_sources(graph: PropertyGraph, index: RetrievalIndex | None, answer: GroundedAnswer) -> bool:
    """Every cited chunk id exists in the index; every cited fact in the graph."""
    if answer.empty_result:
        return answer.sources == ()
    if not answer.sources:
        return False
    for source in answer.sources:
        if source.kind == "fact":
            if not fact_exists(graph, source):
                return False
        elif source.kind == "chunk":
            if index is None or source.chunk_id not in index:
                return False
        else:
            return False
    return True
