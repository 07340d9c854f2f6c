/**
 * Pure HTML renderers: every function maps an API response (plus nothing
 * else) to markup. No fact string is composed client-side; text content is
 * always a field of the response, HTML-escaped.
 */

import type {
  ChunkDetail,
  ComparisonTable,
  DatasetCard,
  DatasetProfile,
  FairAudit,
  Manifest,
  SessionMessage,
  Source,
} from "./api.js";

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function sourceKey(source: Source): string {
  return source.kind === "fact"
    ? `fact:${source.subject}|${source.predicate}|${source.object}`
    : `chunk:${source.chunk_id}`;
}

export function sourceLabel(source: Source): string {
  return source.kind === "fact"
    ? `${source.subject} · ${source.predicate} · ${source.object}`
    : source.chunk_id;
}

function renderCitationChip(source: Source, index: number): string {
  const label = source.kind === "fact" ? source.predicate : "chunk";
  return (
    `<button class="citation-chip" data-source-key="${escapeHtml(sourceKey(source))}"` +
    ` title="${escapeHtml(sourceLabel(source))}">[${index + 1}] ${escapeHtml(label)}</button>`
  );
}

export function renderMessage(message: SessionMessage): string {
  const role = message.role === "user" ? "user" : "system";
  const chips =
    role === "system" && message.sources.length > 0
      ? `<div class="citations">${message.sources.map(renderCitationChip).join("")}</div>`
      : "";
  return (
    `<div class="message message-${role}">` +
    `<div class="bubble">${escapeHtml(message.text)}</div>` +
    chips +
    `</div>`
  );
}

export function renderConversation(messages: SessionMessage[]): string {
  return messages.map(renderMessage).join("\n");
}

/** Inline guidance when a comparison query named too few datasets. */
export function renderRefineHint(message: string, hint: string): string {
  return (
    `<div class="message message-hint">` +
    `<div class="hint">${escapeHtml(message)}<br><em>${escapeHtml(hint)}</em></div>` +
    `</div>`
  );
}

/** Transport failure: the log is unchanged on the server, offer a retry. */
export function renderRetry(text: string): string {
  return (
    `<div class="message message-error">` +
    `<div class="hint">service unreachable — the message was not recorded</div>` +
    `<button class="retry" data-retry-text="${escapeHtml(text)}">retry</button>` +
    `</div>`
  );
}

export function renderSourceInspector(source: Source, chunk?: ChunkDetail): string {
  if (source.kind === "fact") {
    return (
      `<div class="inspector">` +
      `<h3>Graph fact</h3>` +
      `<table class="fact-triple"><tbody>` +
      `<tr><th>subject</th><td>${escapeHtml(source.subject)}</td></tr>` +
      `<tr><th>predicate</th><td>${escapeHtml(source.predicate)}</td></tr>` +
      `<tr><th>object</th><td>${escapeHtml(source.object)}</td></tr>` +
      `</tbody></table></div>`
    );
  }
  if (!chunk) {
    return `<div class="inspector"><h3>Document chunk</h3><p class="muted">${escapeHtml(source.chunk_id)}</p></div>`;
  }
  return (
    `<div class="inspector">` +
    `<h3>Document chunk</h3>` +
    `<p class="muted">${escapeHtml(chunk.source_doi)} · ${escapeHtml(chunk.source_kind)} · ${escapeHtml(chunk.section)}</p>` +
    `<blockquote>${escapeHtml(chunk.text)}</blockquote>` +
    `</div>`
  );
}

export function renderCatalog(datasets: DatasetCard[], selected: string[] = []): string {
  if (datasets.length === 0) {
    return `<p class="muted">no datasets harvested yet</p>`;
  }
  return datasets
    .map((dataset) => {
      const checked = selected.includes(dataset.doi) ? " checked" : "";
      return (
        `<div class="dataset-card" data-doi="${escapeHtml(dataset.doi)}">` +
        `<label><input type="checkbox" class="compare-pick" value="${escapeHtml(dataset.doi)}"${checked}></label>` +
        `<a href="#" class="dataset-link" data-doi="${escapeHtml(dataset.doi)}">${escapeHtml(dataset.title)}</a>` +
        `<span class="doi">${escapeHtml(dataset.doi)}</span>` +
        `</div>`
      );
    })
    .join("\n");
}

export function renderProfile(profile: DatasetProfile): string {
  const rows = profile.groups
    .map(
      (group) =>
        `<tr><th>${escapeHtml(group.edge_type)}</th>` +
        `<td>${group.entities.map((e) => `<span class="entity">${escapeHtml(e)}</span>`).join(" ")}</td></tr>`,
    )
    .join("");
  const license = profile.properties["license"];
  return (
    `<div class="profile">` +
    `<h2>${escapeHtml(profile.title)}</h2>` +
    `<p class="doi">${escapeHtml(profile.doi)}${license ? ` · ${escapeHtml(String(license))}` : ""}</p>` +
    `<table class="profile-table"><tbody>${rows}</tbody></table>` +
    `<button class="manifest-download" data-doi="${escapeHtml(profile.doi)}">download manifest script</button>` +
    `</div>`
  );
}

/** Facet rows x dataset columns; a differing row carries the highlight class. */
export function renderComparison(table: ComparisonTable): string {
  const header = `<tr><th>facet</th>${table.dois.map((d) => `<th>${escapeHtml(d)}</th>`).join("")}</tr>`;
  const rows = table.rows
    .map((row) => {
      const cells = table.dois
        .map((doi) => {
          const values = row.cells[doi] ?? [];
          return `<td>${values.length ? values.map(escapeHtml).join(", ") : "<span class=\"muted\">—</span>"}</td>`;
        })
        .join("");
      const klass = row.same ? "row-same" : "row-different";
      return `<tr class="${klass}" data-same="${row.same}"><th>${escapeHtml(row.facet)}</th>${cells}</tr>`;
    })
    .join("");
  return `<table class="comparison"><thead>${header}</thead><tbody>${rows}</tbody></table>`;
}

export function renderManifest(manifest: Manifest): string {
  const rows = manifest.entries
    .map(
      (entry) =>
        `<tr><td>${escapeHtml(entry.path)}</td><td>${entry.size ?? ""}</td>` +
        `<td>${escapeHtml(entry.checksum)}</td></tr>`,
    )
    .join("");
  return (
    `<div class="manifest">` +
    `<h3>${escapeHtml(manifest.doi)} · ${manifest.entries.length} files</h3>` +
    `<table class="manifest-table"><thead><tr><th>path</th><th>size</th><th>checksum</th></tr></thead>` +
    `<tbody>${rows}</tbody></table></div>`
  );
}

export function renderAudit(audit: FairAudit): string {
  const rows = audit.checks
    .map(
      (check) =>
        `<tr class="${check.passed ? "check-pass" : "check-fail"}">` +
        `<td>${escapeHtml(check.principle)}</td><td>${escapeHtml(check.name)}</td>` +
        `<td>${check.passed ? "pass" : "fail"}</td><td>${escapeHtml(check.detail)}</td></tr>`,
    )
    .join("");
  return (
    `<div class="audit"><h3>FAIR audit: ${audit.passed ? "pass" : "fail"}</h3>` +
    `<table class="audit-table"><tbody>${rows}</tbody></table></div>`
  );
}

export function renderNotFound(what: string): string {
  return `<div class="not-found">not found: ${escapeHtml(what)}</div>`;
}
