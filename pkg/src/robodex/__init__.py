"""robodex: curation, knowledge-graph integration, and grounded inquiry for
human-robot-interaction dataset catalogs."""

from .datamodel import (
    DataModelSchema,
    LabelKind,
    LabelStatus,
    PropertyKind,
    PropertySpec,
    SchemaLabel,
    ValidationReport,
    builtin_schema,
    edge_type,
    node_label,
    validate,
)
from .graph import (
    ComparisonTable,
    DatasetProfile,
    Edge,
    Node,
    PropertyGraph,
    normalize_name,
)
from .harvester import (
    EdgeProposal,
    FileEntry,
    KeywordRule,
    MetadataRecord,
    Proposal,
    UpsertSummary,
    ValueSource,
    apply_report,
    builtin_rules,
    extract_entities,
    fetch_record,
    ingest_record,
    parse_ddi,
    upsert_dataset,
)
from .reports import (
    DataReport,
    NamingConvention,
    classify_file,
    parse_naming_convention,
    parse_report,
    report_to_graph,
    schema_extension_for,
)
from .retrieval import (
    AnswerMode,
    Chunk,
    GroundedAnswer,
    HashingEmbeddingProvider,
    HttpCompletionProvider,
    HttpEmbeddingProvider,
    Intent,
    IntentKind,
    Providers,
    RetrievalIndex,
    SourceKind,
    answer,
    chunk_document,
    embed_and_index,
    parse_intent,
    retrieve,
)
from .bhm import (
    Dimension,
    GibbsPriors,
    PosteriorSummary,
    RatingTable,
    adjusted_scores,
    fit,
    load_ratings,
)

__version__ = "0.1.0"
