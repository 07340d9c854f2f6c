"""Grounded question answering over the dataset catalog.

Two legs feed every answer: structured facts from the property graph and text
chunks scored by cosine similarity in an embedding index. Structured intents
(which-datasets, detail, compare, locate-files) are answered purely from graph
operations through fixed templates; free-form questions fall back to the best
matching chunks. An external completion provider can rephrase, but sources
always come from the same gathering step, so nothing is ever cited that is
not in the graph or the index.
"""
from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Sequence

import numpy as np

from .datamodel import DATASET
from .errors import (
    AmbiguousComparisonError,
    DimensionMismatchError,
    EmptyDocumentError,
    EmptyIndexError,
    ProviderError,
)
from .graph import PropertyGraph

DEFAULT_DIMENSION = 256
DEFAULT_CHUNK_TOKENS = 300
DEFAULT_CHUNK_OVERLAP = 50
DEFAULT_TOP_K = 5
MAX_CONTEXT_FACTS = 12
MAX_CONTEXT_CHUNKS = 6
NO_INFORMATION = "no grounded information found"


class SourceKind(str, Enum):
    DATA_REPORT = "DataReport"
    PUBLICATION = "Publication"
    METADATA_RECORD = "MetadataRecord"


@dataclass(frozen=True)
class Chunk:
    id: str
    source_doi: str
    source_kind: SourceKind
    section: str
    text: str


# -- providers ---------------------------------------------------------------------

class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class CompletionProvider(Protocol):
    def complete(self, prompt: str, max_tokens: int = 512) -> str: ...


class HashingEmbeddingProvider:
    """Deterministic token-count feature hashing; no model, no network.

    Tokens are whitespace-split and case-folded, each hashed to one of
    `dimension` buckets; the resulting count vector is the embedding.
    Identical texts embed identically on every platform.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = []
        for text in texts:
            bucket = np.zeros(self.dimension, dtype=np.float64)
            for token in text.split():
                digest = hashlib.blake2b(token.casefold().encode("utf-8"), digest_size=8).digest()
                bucket[int.from_bytes(digest, "big") % self.dimension] += 1.0
            vectors.append(bucket.tolist())
        return vectors


class HttpEmbeddingProvider:
    """Client for a `POST {endpoint}/embed {"texts": [...]}` service."""

    def __init__(self, endpoint: str, dimension: int = DEFAULT_DIMENSION, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.dimension = dimension
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        import httpx

        try:
            response = httpx.post(
                f"{self.endpoint}/embed", json={"texts": list(texts)}, timeout=self.timeout
            )
            response.raise_for_status()
            return response.json()["vectors"]
        except Exception as exc:
            raise ProviderError(f"embedding provider failed: {exc}") from exc


class HttpCompletionProvider:
    """Client for a `POST {endpoint}/complete {"prompt", "max_tokens"}` service."""

    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def complete(self, prompt: str, max_tokens: int = 512) -> str:
        import httpx

        try:
            response = httpx.post(
                f"{self.endpoint}/complete",
                json={"prompt": prompt, "max_tokens": max_tokens},
                timeout=self.timeout,
            )
            response.raise_for_status()
            return response.json()["text"]
        except Exception as exc:
            raise ProviderError(f"completion provider failed: {exc}") from exc


@dataclass
class Providers:
    embedding: EmbeddingProvider
    completion: CompletionProvider | None = None


# -- chunking ----------------------------------------------------------------------

def chunk_document(
    doc,
    source_kind: SourceKind,
    doi: str,
    window: int = DEFAULT_CHUNK_TOKENS,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
) -> list[Chunk]:
    """Split a document into overlapping token windows, section-first.

    Accepts a parsed DataReport (its sections are the split boundaries) or a
    plain string (split on "## " headings when present). Windows hold at most
    `window` whitespace tokens and consecutive windows share `overlap`
    tokens, so every input token lands in at least one chunk.
    """
    if window <= overlap:
        raise ValueError("window must exceed overlap")
    segments = _segments(doc)
    chunks: list[Chunk] = []
    for section, text in segments:
        tokens = text.split()
        if not tokens:
            continue
        step = window - overlap
        start = 0
        index = 0
        while True:
            piece = tokens[start : start + window]
            # "~" keeps ids safe inside URL paths (a "#" would start a fragment)
            chunks.append(
                Chunk(
                    id=f"{doi}~{source_kind.value}~{section}~{index}",
                    source_doi=doi,
                    source_kind=source_kind,
                    section=section,
                    text=" ".join(piece),
                )
            )
            index += 1
            if start + window >= len(tokens):
                break
            start += step
    if not chunks:
        raise EmptyDocumentError("nothing to chunk")
    return chunks


def _segments(doc) -> list[tuple[str, str]]:
    if hasattr(doc, "sections"):  # DataReport
        return [(section.name, section.as_text()) for section in doc.sections]
    text = str(doc)
    if not text.strip():
        raise EmptyDocumentError("document is empty")
    if "\n## " in text or text.startswith("## "):
        segments = []
        current_name, lines = "body", []
        for line in text.splitlines():
            if line.startswith("## "):
                if lines:
                    segments.append((current_name, "\n".join(lines)))
                current_name, lines = line[3:].strip(), []
            else:
                lines.append(line)
        if lines:
            segments.append((current_name, "\n".join(lines)))
        return segments
    return [("body", text)]


# -- index -------------------------------------------------------------------------

class RetrievalIndex:
    """Chunk store with unit-normalized embedding vectors."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension
        self._chunks: dict[str, Chunk] = {}
        self._vectors: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self._matrix: np.ndarray | None = None
        self._order: list[str] | None = None

    def __len__(self) -> int:
        return len(self._chunks)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._chunks

    def chunk(self, chunk_id: str) -> Chunk | None:
        return self._chunks.get(chunk_id)

    def vector(self, chunk_id: str) -> np.ndarray | None:
        return self._vectors.get(chunk_id)

    def upsert(self, chunk: Chunk, vector: np.ndarray) -> None:
        if vector.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"chunk {chunk.id}: got {vector.shape[0] if vector.ndim == 1 else vector.shape} "
                f"dimensions, index holds {self.dimension}"
            )
        with self._lock:
            self._chunks[chunk.id] = chunk
            self._vectors[chunk.id] = vector
            self._matrix = None
            self._order = None

    def ranked(self, query_vector: np.ndarray) -> list[tuple[str, float]]:
        with self._lock:
            if self._matrix is None:
                self._order = sorted(self._chunks)
                self._matrix = (
                    np.stack([self._vectors[i] for i in self._order])
                    if self._order
                    else np.zeros((0, self.dimension))
                )
            order, matrix = self._order, self._matrix
        scores = matrix @ query_vector
        pairs = sorted(zip(order, scores.tolist()), key=lambda p: (-p[1], p[0]))
        return pairs


def _unit(vector: Sequence[float], context: str) -> np.ndarray:
    arr = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ProviderError(f"zero embedding vector for {context}")
    return arr / norm


def embed_and_index(
    index: RetrievalIndex, chunks: Sequence[Chunk], provider: EmbeddingProvider
) -> RetrievalIndex:
    """Embed chunks and insert them; re-sent chunk ids replace in place."""
    if not chunks:
        return index
    try:
        vectors = provider.embed([c.text for c in chunks])
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"embedding provider failed on batch of {len(chunks)}: {exc}") from exc
    if len(vectors) != len(chunks):
        raise ProviderError(f"provider returned {len(vectors)} vectors for {len(chunks)} chunks")
    for chunk, vector in zip(chunks, vectors):
        if len(vector) != index.dimension:
            raise DimensionMismatchError(
                f"chunk {chunk.id}: provider returned {len(vector)} dimensions, index holds {index.dimension}"
            )
        index.upsert(chunk, _unit(vector, f"chunk {chunk.id}"))
    return index


def retrieve(
    index: RetrievalIndex, query: str, provider: EmbeddingProvider, k: int
) -> list[tuple[Chunk, float]]:
    """Top-k chunks by cosine similarity, ties broken by chunk id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(index) == 0:
        raise EmptyIndexError("retrieval index is empty")
    vectors = provider.embed([query])
    if len(vectors) != 1 or len(vectors[0]) != index.dimension:
        raise DimensionMismatchError("query embedding has the wrong dimension")
    ranked = index.ranked(_unit(vectors[0], "query"))
    return [(index.chunk(chunk_id), score) for chunk_id, score in ranked[:k]]


# -- intent parsing -------------------------------------------------------------------

class IntentKind(str, Enum):
    WHICH_DATASETS = "WhichDatasets"
    DETAIL = "Detail"
    COMPARE = "Compare"
    LOCATE_FILES = "LocateFiles"
    FREE_FORM = "FreeForm"


@dataclass(frozen=True)
class Intent:
    kind: IntentKind
    entity_label: str | None = None
    entity_name: str | None = None
    doi: str | None = None
    topic: str | None = None
    dois: tuple[str, ...] = ()
    facets: tuple[str, ...] | None = None
    filters: tuple[tuple[str, str], ...] = ()
    text: str | None = None

    def to_json_dict(self) -> dict:
        doc = {"kind": self.kind.value}
        for key in ("entity_label", "entity_name", "doi", "topic", "text"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        if self.dois:
            doc["dois"] = list(self.dois)
        if self.facets is not None:
            doc["facets"] = list(self.facets)
        if self.filters:
            doc["filters"] = {k: v for k, v in self.filters}
        return doc


_COMPARE_CUES = ("difference", "differences", "differ", "differs", "compare", "compared", "comparison", "versus", "vs")
_WHICH_DATASETS = re.compile(r"\b(which|what)\s+(datasets?|studies|study)\b")
_FILE_CUES = ("file", "files", "point to")

# topic keyword -> (canonical topic, facets); longest keyword wins
_TOPIC_KEYWORDS: list[tuple[str, str, tuple[str, ...]]] = [
    ("robot model", "robot model", ("usesModel",)),
    ("robot models", "robot model", ("usesModel",)),
    ("research method", "method", ("usesMethod",)),
    ("research methods", "method", ("usesMethod",)),
    ("participants", "participant", ("involves",)),
    ("participant", "participant", ("involves",)),
    ("instruments", "instrument", ("usesInstrument",)),
    ("instrument", "instrument", ("usesInstrument",)),
    ("conditions", "condition", ("hasCondition",)),
    ("condition", "condition", ("hasCondition",)),
    ("sessions", "session", ("hasSession",)),
    ("session", "session", ("hasSession",)),
    ("locations", "location", ("conductedAt",)),
    ("location", "location", ("conductedAt",)),
    ("settings", "setting", ("hasSetting",)),
    ("setting", "setting", ("hasSetting",)),
    ("sensors", "sensor", ("hasSensor",)),
    ("sensor", "sensor", ("hasSensor",)),
    ("sensory", "sensor", ("hasSensor",)),
    ("control", "control", ("usesControl",)),
    ("controls", "control", ("usesControl",)),
    ("methods", "method", ("usesMethod",)),
    ("method", "method", ("usesMethod",)),
    ("robots", "robot", ("hasRobot", "usesModel")),
    ("robot", "robot", ("hasRobot", "usesModel")),
    ("publications", "publication", ("describedBy",)),
    ("publication", "publication", ("describedBy",)),
    ("quality", "quality", ("hasQuality",)),
    ("ethics", "ethics", ("approvedBy",)),
    ("irb", "ethics", ("approvedBy",)),
]

_RESERVED_FILE_PROPS = {"name", "path", "size", "content_type", "url", "checksum", "pattern"}
_NON_WORD = re.compile(r"[^0-9a-z]+")


def _norm_text(text: str) -> str:
    return _NON_WORD.sub(" ", text.casefold()).strip()


def _contains_phrase(haystack_norm: str, phrase_norm: str) -> bool:
    if not phrase_norm:
        return False
    return f" {phrase_norm} " in f" {haystack_norm} "


def _match_datasets(graph: PropertyGraph, query_norm: str) -> tuple[list[tuple[int, str]], str]:
    """(position, doi) for every dataset whose title or DOI is named in the
    query, plus the query with those mentions blanked out (a word like "robot"
    inside a matched title is the dataset's name, not a topic request)."""
    hits = []
    padded = f" {query_norm} "
    for node in graph.list_datasets():
        doi = str(node.properties.get("doi", ""))
        for candidate in (str(node.properties.get("title", "")), doi):
            norm = _norm_text(candidate)
            if norm and f" {norm} " in padded:
                hits.append((padded.index(f" {norm} "), doi))
                padded = padded.replace(f" {norm} ", " " + " " * len(norm) + " ")
                break
    hits.sort()
    return hits, _NON_WORD.sub(" ", padded).strip()


def _match_entity(graph: PropertyGraph, query_norm: str) -> tuple[str, str] | None:
    """Longest entity name present in the query, as (label, stored name)."""
    best: tuple[int, str, str] | None = None
    for node in graph.nodes():
        if node.label == DATASET or node.name is None:
            continue
        norm = _norm_text(node.name)
        if _contains_phrase(query_norm, norm):
            key = (-len(norm), node.label, node.name)
            if best is None or key < best:
                best = key
    if best is None:
        return None
    return best[1], best[2]


def _match_topics(query_norm: str) -> list[tuple[str, tuple[str, ...]]]:
    """Non-overlapping topic keyword matches, longest first, in query order."""
    taken: list[tuple[int, int]] = []
    found: list[tuple[int, str, tuple[str, ...]]] = []
    padded = f" {query_norm} "
    for keyword, topic, facets in sorted(_TOPIC_KEYWORDS, key=lambda t: -len(t[0])):
        start = 0
        needle = f" {keyword} "
        while True:
            pos = padded.find(needle, start)
            if pos < 0:
                break
            span = (pos, pos + len(needle))
            if not any(s < span[1] and span[0] < e for s, e in taken):
                taken.append(span)
                found.append((pos, topic, facets))
            start = pos + 1
    found.sort()
    return [(topic, facets) for _, topic, facets in found]


def _extract_filters(graph: PropertyGraph, doi: str, query_norm: str) -> tuple[tuple[str, str], ...]:
    """File filters from the query, bound against the dataset's actual files."""
    try:
        files = graph.locate_files(doi)
    except Exception:
        return ()
    keys: dict[str, set[str]] = {}
    for node in files:
        for key, value in node.properties.items():
            if key not in _RESERVED_FILE_PROPS:
                keys.setdefault(key, set()).add(str(value))
    filters: dict[str, str] = {}
    for key in sorted(keys):
        m = re.search(rf"\b{re.escape(key)}s?\s+([0-9a-z]+)\b", query_norm)
        if m:
            filters[key] = m.group(1)
    for key in sorted(keys):
        if key in filters:
            continue
        for value in sorted(keys[key]):
            if _contains_phrase(query_norm, _norm_text(value)):
                filters[key] = value
                break
    return tuple(sorted(filters.items()))


def parse_intent(query: str, graph: PropertyGraph) -> Intent:
    """Rule-based intent classification against the live catalog.

    Comparison cue words demand at least two resolvable dataset names;
    otherwise the query is rejected as ambiguous rather than guessed at.
    """
    query_norm = _norm_text(query)
    datasets, masked = _match_datasets(graph, query_norm)
    dois = tuple(doi for _, doi in datasets)

    if any(_contains_phrase(masked, cue) for cue in _COMPARE_CUES):
        if len(dois) < 2:
            raise AmbiguousComparisonError(
                "comparison requested but fewer than two datasets were named; "
                "include the specific dataset names or DOIs"
            )
        topics = _match_topics(masked)
        facets = tuple(sorted({facet for _, fs in topics for facet in fs})) or None
        return Intent(kind=IntentKind.COMPARE, dois=dois, facets=facets)

    if _WHICH_DATASETS.search(masked):
        entity = _match_entity(graph, masked)
        if entity is not None:
            return Intent(kind=IntentKind.WHICH_DATASETS, entity_label=entity[0], entity_name=entity[1])

    if dois and any(_contains_phrase(masked, cue) for cue in _FILE_CUES):
        return Intent(
            kind=IntentKind.LOCATE_FILES,
            doi=dois[0],
            filters=_extract_filters(graph, dois[0], masked),
        )

    if dois:
        topics = _match_topics(masked)
        return Intent(kind=IntentKind.DETAIL, doi=dois[0], topic=topics[0][0] if topics else None)

    return Intent(kind=IntentKind.FREE_FORM, text=query.strip())


# -- answering ----------------------------------------------------------------------

@dataclass(frozen=True)
class Source:
    kind: str  # "fact" | "chunk"
    subject: str | None = None
    predicate: str | None = None
    object: str | None = None
    chunk_id: str | None = None

    def to_json_dict(self) -> dict:
        if self.kind == "fact":
            return {"kind": "fact", "subject": self.subject, "predicate": self.predicate, "object": self.object}
        return {"kind": "chunk", "chunk_id": self.chunk_id}

    def render(self) -> str:
        if self.kind == "fact":
            return f"{self.subject} {self.predicate} {self.object}"
        return f"[chunk {self.chunk_id}]"


def fact(subject: str, predicate: str, object_: str) -> Source:
    return Source(kind="fact", subject=subject, predicate=predicate, object=object_)


def chunk_source(chunk_id: str) -> Source:
    return Source(kind="chunk", chunk_id=chunk_id)


@dataclass
class GroundedAnswer:
    text: str
    sources: tuple[Source, ...]
    intent: Intent
    empty_result: bool = False

    def to_json_dict(self) -> dict:
        return {
            "answer": self.text,
            "sources": [s.to_json_dict() for s in self.sources],
            "intent": self.intent.to_json_dict(),
            "empty_result": self.empty_result,
        }


class AnswerMode(str, Enum):
    GROUNDED = "Grounded"
    LLM = "LLM"


_TOPIC_FACETS = {topic: facets for _, topic, facets in _TOPIC_KEYWORDS}


def _gather(
    intent: Intent,
    query: str,
    graph: PropertyGraph,
    index: RetrievalIndex | None,
    embedder: EmbeddingProvider | None,
    top_k: int,
) -> tuple[str, list[Source], list[Chunk], bool]:
    """Produce the grounded answer text, fact sources, and supporting chunks."""
    if intent.kind is IntentKind.WHICH_DATASETS:
        links = graph.find_dataset_links(intent.entity_label, intent.entity_name)
        if not links:
            return NO_INFORMATION, [], [], True
        names = []
        facts = []
        for node, edge_name in links:
            title = str(node.properties.get("title", node.properties.get("doi", "")))
            doi = str(node.properties.get("doi", ""))
            names.append(f"{title} ({doi})")
            facts.append(fact(doi, edge_name, intent.entity_name))
        text = f"Datasets using {intent.entity_name}: " + "; ".join(names) + "."
        return text, facts, [], False

    if intent.kind is IntentKind.DETAIL:
        profile = graph.dataset_profile(intent.doi)
        groups = profile.groups
        if intent.topic:
            allowed = set(_TOPIC_FACETS.get(intent.topic, ()))
            groups = [(et, names) for et, names in groups if et in allowed]
        facts = [fact(profile.doi, et, name) for et, names in groups for name in names]
        if not facts:
            return NO_INFORMATION, [], [], True
        lines = [f"{et}: {', '.join(names)}" for et, names in groups if names]
        text = f"{profile.title} ({profile.doi}) — " + "; ".join(lines) + "."
        return text, facts, [], False

    if intent.kind is IntentKind.COMPARE:
        table = graph.compare(intent.dois, intent.facets)
        facts = []
        lines = []
        for row in table.rows:
            if not any(row.cells):
                continue
            cell_text = []
            for doi, cell in zip(table.dois, row.cells):
                cell_text.append(f"{doi}: {', '.join(cell) if cell else '(none)'}")
                facts.extend(fact(doi, row.facet, name) for name in cell)
            verdict = "same" if row.same else "different"
            lines.append(f"{row.facet} [{verdict}] — " + " | ".join(cell_text))
        if not facts:
            return NO_INFORMATION, [], [], True
        return "\n".join(lines), facts, [], False

    if intent.kind is IntentKind.LOCATE_FILES:
        files = graph.locate_files(intent.doi, dict(intent.filters))
        if not files:
            return NO_INFORMATION, [], [], True
        paths = [str(node.properties.get("path", "")) for node in files]
        facts = [fact(intent.doi, "containsFile", path) for path in paths]
        described = ", ".join(f"{k}={v}" for k, v in intent.filters) or "no filters"
        text = f"Files in {intent.doi} ({described}): " + ", ".join(paths)
        return text, facts, [], False

    # free form: best chunks
    if index is None or embedder is None or len(index) == 0:
        return NO_INFORMATION, [], [], True
    hits = retrieve(index, query, embedder, max(1, top_k))
    chunks = [chunk for chunk, _ in hits]
    if not chunks:
        return NO_INFORMATION, [], [], True
    quoted = chunks[: min(3, len(chunks))]
    parts = [
        f"From {c.source_doi} / {c.section}: \"{_excerpt(c.text)}\"" for c in quoted
    ]
    return "\n".join(parts), [], quoted, False


def _excerpt(text: str, limit: int = 400) -> str:
    return text if len(text) <= limit else text[: limit - 1] + "…"


def answer(
    query: str,
    graph: PropertyGraph,
    index: RetrievalIndex | None,
    providers: Providers,
    mode: AnswerMode = AnswerMode.GROUNDED,
    top_k: int = DEFAULT_TOP_K,
) -> GroundedAnswer:
    """Answer a question with sources, in Grounded or LLM mode.

    Grounded mode is a pure function of (query, graph, index): structured
    intents go through graph operations and fixed templates, free-form
    questions quote their top chunks. LLM mode sends the same facts and
    chunks as context to the completion provider and wraps its reply with
    the identical sources. Either way an answer without sources is only the
    explicit no-information marker.
    """
    intent = parse_intent(query, graph)
    text, facts, chunks, empty = _gather(
        intent, query, graph, index, providers.embedding if providers else None, top_k
    )
    sources = tuple(facts) + tuple(chunk_source(c.id) for c in chunks)
    if empty:
        return GroundedAnswer(text=NO_INFORMATION, sources=(), intent=intent, empty_result=True)
    if mode is AnswerMode.GROUNDED:
        return GroundedAnswer(text=text, sources=sources, intent=intent)
    if providers.completion is None:
        raise ProviderError("LLM mode requires a completion provider")
    context_facts = facts[:MAX_CONTEXT_FACTS]
    context_chunks = chunks[:MAX_CONTEXT_CHUNKS]
    if not context_chunks and index is not None and len(index) > 0:
        hits = retrieve(index, query, providers.embedding, min(MAX_CONTEXT_CHUNKS, len(index)))
        context_chunks = [chunk for chunk, _ in hits]
    prompt = _build_prompt(query, context_facts, context_chunks)
    reply = providers.completion.complete(prompt)
    sources = tuple(context_facts) + tuple(chunk_source(c.id) for c in context_chunks)
    if not sources:
        return GroundedAnswer(text=NO_INFORMATION, sources=(), intent=intent, empty_result=True)
    return GroundedAnswer(text=reply, sources=sources, intent=intent)


def _build_prompt(query: str, facts: Sequence[Source], chunks: Sequence[Chunk]) -> str:
    lines = ["Answer the question using only the facts and excerpts below.", "", "Facts:"]
    lines += [f"- {source.render()}" for source in facts] or ["- (none)"]
    lines += ["", "Excerpts:"]
    lines += [f"- ({c.id}) {c.text}" for c in chunks] or ["- (none)"]
    lines += ["", f"Question: {query}", "Answer:"]
    return "\n".join(lines)
