"""Structured data-report parsing.

Reports are plain UTF-8 text: "## Section" headings with "Key: Value" lines
and free prose underneath. Section names outside the standard template are
kept and flagged provisional; they feed the schema's appendix-tracking
extension mechanism. The FileOrganization section may declare file naming
patterns whose token bindings drive file classification.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .datamodel import (
    DATASET,
    DataModelSchema,
    LabelStatus,
    edge_type,
    node_label,
)
from .errors import (
    DuplicatePriorityError,
    EmptyDocumentError,
    MalformedPatternError,
)

KNOWN_SECTIONS = (
    "Overview",
    "RobotDescription",
    "Methodology",
    "ParticipantsAndEthics",
    "Instruments",
    "Processing",
    "QualityStatement",
    "FileOrganization",
    "Appendix",
)

_URI_LINE = re.compile(r"^[a-zA-Z][a-zA-Z0-9+.-]*://")
_PATTERN_KEY = re.compile(r"^pattern\s+(\d+)$", re.IGNORECASE)
_TOKEN_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_DOMAIN_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:∈|in)\s*\{(.*)\}\s*$")


@dataclass
class ReportSection:
    name: str
    provisional: bool
    pairs: list[tuple[str, str]] = field(default_factory=list)
    free_text: list[str] = field(default_factory=list)

    def value(self, key: str) -> str | None:
        lowered = key.casefold()
        for k, v in self.pairs:
            if k.casefold() == lowered:
                return v
        return None

    def as_text(self) -> str:
        lines = [f"{k}: {v}" for k, v in self.pairs] + self.free_text
        return "\n".join(lines)


@dataclass
class DataReport:
    sections: list[ReportSection]
    source_doi: str | None = None
    heading_count: int = 0

    def section(self, name: str) -> ReportSection | None:
        for sec in self.sections:
            if sec.name == name:
                return sec
        return None

    def provisional_sections(self) -> list[ReportSection]:
        return [s for s in self.sections if s.provisional]

    def line_accounting(self) -> dict[str, int]:
        """How every non-blank input line was classified."""
        recognized = sum(len(s.pairs) for s in self.sections if not s.provisional)
        provisional = sum(len(s.pairs) for s in self.sections if s.provisional)
        free = sum(len(s.free_text) for s in self.sections)
        return {
            "headings": self.heading_count,
            "recognized_kv": recognized,
            "provisional_kv": provisional,
            "free_text": free,
        }


def parse_report(text: str) -> DataReport:
    """Parse a report document into sections of key/value pairs plus prose.

    Content before the first heading lands in an implicit Overview section.
    A line is a pair when it has a ':' and does not look like a bare URL;
    everything else is free text, so no input line is ever dropped.
    """
    if not text or not text.strip():
        raise EmptyDocumentError("report document is empty")
    sections: list[ReportSection] = []
    by_name: dict[str, ReportSection] = {}
    current: ReportSection | None = None
    headings = 0
    for raw_line in text.splitlines():
        line = raw_line.rstrip("\r").rstrip()
        if not line.strip():
            continue
        if line.startswith("## "):
            headings += 1
            name = line[3:].strip()
            if name in by_name:
                current = by_name[name]  # repeated heading: merge
            else:
                current = ReportSection(name=name, provisional=name not in KNOWN_SECTIONS)
                sections.append(current)
                by_name[name] = current
            continue
        if current is None:
            current = ReportSection(name="Overview", provisional=False)
            sections.append(current)
            by_name["Overview"] = current
        key, sep, value = line.partition(":")
        if sep and key.strip() and not _URI_LINE.match(line.strip()):
            current.pairs.append((key.strip(), value.strip()))
        else:
            current.free_text.append(line.strip())
    doi = None
    for sec in sections:
        doi = sec.value("doi") or sec.value("dataset doi")
        if doi:
            break
    return DataReport(sections=sections, source_doi=doi, heading_count=headings)


# -- file naming conventions ---------------------------------------------------------

@dataclass(frozen=True)
class FilePattern:
    priority: int
    template: str
    tokens: tuple[str, ...]
    domains: dict[str, frozenset[str] | None]
    regex: re.Pattern

    def match(self, basename: str) -> dict[str, str] | None:
        m = self.regex.fullmatch(basename)
        if m is None:
            return None
        bindings = dict(m.groupdict())
        for token, domain in self.domains.items():
            if domain is not None and bindings.get(token) not in domain:
                return None
        return bindings


@dataclass(frozen=True)
class NamingConvention:
    patterns: tuple[FilePattern, ...]  # ascending priority


def _compile_template(priority: int, template: str) -> FilePattern:
    if template == "*":
        return FilePattern(priority, template, (), {}, re.compile(r".*"))
    tokens: list[str] = []
    regex_parts: list[str] = []
    literal_seen = False
    i = 0
    while i < len(template):
        ch = template[i]
        if ch == "{":
            end = template.find("}", i)
            if end < 0:
                raise MalformedPatternError(f"unbalanced brace in {template!r}")
            name = template[i + 1 : end]
            if not _TOKEN_NAME.match(name):
                raise MalformedPatternError(f"bad token name {name!r} in {template!r}")
            if name in tokens:
                raise MalformedPatternError(f"token {name!r} repeats in {template!r}")
            tokens.append(name)
            regex_parts.append(f"(?P<{name}>.+?)")
            i = end + 1
        elif ch == "}":
            raise MalformedPatternError(f"unbalanced brace in {template!r}")
        else:
            literal_seen = True
            regex_parts.append(re.escape(ch))
            i += 1
    if not literal_seen:
        raise MalformedPatternError(f"{template!r} has no literal characters (use '*' for a catch-all)")
    return FilePattern(priority, template, tuple(tokens), {t: None for t in tokens}, re.compile("".join(regex_parts)))


def parse_naming_convention(section) -> NamingConvention:
    """Build a NamingConvention from a FileOrganization section (or raw text).

    Recognized lines: ``pattern <priority>: <template>`` and ``tokens: name ∈
    {a, b, c}`` (ASCII ``in`` also accepted). A tokens line after a pattern
    constrains that pattern; before any pattern it applies to all of them.
    """
    if isinstance(section, str):
        pairs = []
        for line in section.splitlines():
            key, sep, value = line.partition(":")
            if sep and key.strip():
                pairs.append((key.strip(), value.strip()))
    else:
        pairs = list(section.pairs)

    raw: list[tuple[int, str, dict[str, frozenset[str]]]] = []
    defaults: dict[str, frozenset[str]] = {}
    for key, value in pairs:
        priority_match = _PATTERN_KEY.match(key)
        if priority_match:
            raw.append((int(priority_match.group(1)), value, {}))
        elif key.casefold() == "tokens":
            token, domain = _parse_domain(value)
            if raw:
                raw[-1][2][token] = domain
            else:
                defaults[token] = domain
    if not raw:
        raise MalformedPatternError("section declares no 'pattern <priority>:' lines")

    seen: set[int] = set()
    patterns = []
    for priority, template, overrides in raw:
        if priority in seen:
            raise DuplicatePriorityError(f"priority {priority} declared twice")
        seen.add(priority)
        compiled = _compile_template(priority, template)
        domains = dict(compiled.domains)
        for token in domains:
            if token in defaults:
                domains[token] = defaults[token]
        for token, domain in overrides.items():
            if token in domains:
                domains[token] = domain
        patterns.append(
            FilePattern(priority, compiled.template, compiled.tokens, domains, compiled.regex)
        )
    patterns.sort(key=lambda p: p.priority)
    for pattern in patterns[:-1]:
        if pattern.template == "*":
            raise MalformedPatternError("catch-all '*' must be the final (highest-priority) pattern")
    return NamingConvention(patterns=tuple(patterns))


def _parse_domain(value: str) -> tuple[str, frozenset[str]]:
    m = _DOMAIN_LINE.match(value)
    if m is None:
        raise MalformedPatternError(f"cannot read token domain {value!r}")
    token = m.group(1)
    values = frozenset(v.strip() for v in m.group(2).split(",") if v.strip())
    if not values:
        raise MalformedPatternError(f"empty domain for token {token!r}")
    return token, values


def classify_file(conv: NamingConvention, path: str) -> tuple[int, dict[str, str]] | None:
    """Match a relative path's basename against the convention.

    Patterns run in ascending priority; the first full match whose token
    domains are all satisfied wins. Returns (pattern priority, bindings).
    """
    if not path:
        return None
    basename = path.rsplit("/", 1)[-1]
    for pattern in conv.patterns:
        bindings = pattern.match(basename)
        if bindings is not None:
            return pattern.priority, bindings
    return None


# -- report-to-graph projection ---------------------------------------------------------

def provisional_label_name(section_name: str) -> str:
    return re.sub(r"[^0-9A-Za-z]", "", section_name)


def schema_extension_for(report: DataReport, schema: DataModelSchema) -> DataModelSchema:
    """Extend a schema with provisional labels for the report's unknown sections.

    Each unknown section "X" contributes a provisional node label X and a
    provisional edge type hasX from Dataset, so appendix material validates
    while it waits for standardization.
    """
    extended = schema
    for section in report.provisional_sections():
        label = provisional_label_name(section.name)
        if not label:
            continue
        if not extended.has_node_label(label):
            extended = extended.add_provisional(node_label(label, status=LabelStatus.PROVISIONAL))
        edge_name = f"has{label}"
        if not extended.has_edge_type(edge_name):
            extended = extended.add_provisional(
                edge_type(edge_name, {DATASET}, {label}, status=LabelStatus.PROVISIONAL)
            )
    return extended


def report_to_graph(
    report: DataReport,
    conv: NamingConvention | None,
    files: Iterable,
    rules: Sequence | None = None,
    doi: str | None = None,
):
    """Project a parsed report onto node/edge proposals.

    Classified files become DataFile proposals carrying their token bindings;
    distinct session bindings become ExperimentSession nodes with the files
    linked to their sessions. Report key/value pairs run through the keyword
    rule machinery, and provisional-section pairs become nodes under their
    provisional labels.
    """
    from .harvester import EdgeProposal, MetadataRecord, Proposal, extract_entities, file_node_name

    doi = doi or report.source_doi or ""

    if conv is None:
        file_org = report.section("FileOrganization")
        if file_org is not None and any(_PATTERN_KEY.match(k) for k, _ in file_org.pairs):
            conv = parse_naming_convention(file_org)

    proposals: list = []

    # keyword extraction over the report's own key/value pairs
    shim = MetadataRecord(doi=report.source_doi or "", title="", kv_fields=[])
    proposals.extend(extract_entities(shim, report=report, rules=rules))

    # provisional appendix material
    for section in report.provisional_sections():
        label = provisional_label_name(section.name)
        if not label:
            continue
        for key, value in section.pairs:
            name = value if value else key
            proposals.append(Proposal(label, {"name": name, "field": key}, f"has{label}"))

    # file classification
    if conv is not None:
        sessions_seen: set[str] = set()
        for entry in files:
            path = entry if isinstance(entry, str) else entry.path
            classified = classify_file(conv, path)
            if classified is None:
                continue
            priority, bindings = classified
            scoped = file_node_name(doi, path)
            props = {"name": scoped, "path": path, "pattern": priority}
            props.update({k: v for k, v in bindings.items()})
            proposals.append(Proposal("DataFile", props, "containsFile"))
            session = bindings.get("session")
            if session:
                if session not in sessions_seen:
                    sessions_seen.add(session)
                    proposals.append(
                        Proposal("ExperimentSession", {"name": session, "session": session}, "hasSession")
                    )
                proposals.append(
                    EdgeProposal(("DataFile", scoped), "partOfSession", ("ExperimentSession", session))
                )
    return proposals
