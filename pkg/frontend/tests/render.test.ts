/**
 * Snapshot tests over real service responses captured as fixtures: rendering
 * must be a pure function of the API payloads, with no client-side fact text.
 */
import { describe, expect, it } from "vitest";

import type {
  ChunkDetail,
  ComparisonTable,
  DatasetProfile,
  ErrorBody,
  FairAudit,
  Manifest,
  SessionLog,
  Source,
} from "../src/api.js";
import {
  escapeHtml,
  renderAudit,
  renderCatalog,
  renderComparison,
  renderConversation,
  renderManifest,
  renderMessage,
  renderNotFound,
  renderProfile,
  renderRefineHint,
  renderRetry,
  renderSourceInspector,
} from "../src/render.js";

import ambiguous from "./fixtures/ambiguous_comparison.json";
import audit from "./fixtures/audit.json";
import chunk from "./fixtures/chunk.json";
import compare from "./fixtures/compare.json";
import datasets from "./fixtures/datasets.json";
import manifest from "./fixtures/manifest.json";
import profile from "./fixtures/profile_spotcd.json";
import sessionLog from "./fixtures/session_log.json";

const log = sessionLog as unknown as SessionLog;
const comparison = compare as unknown as ComparisonTable;

describe("conversation rendering", () => {
  it("renders the fixture conversation", () => {
    expect(renderConversation(log.messages)).toMatchSnapshot();
  });

  it("gives every system message one citation chip per source", () => {
    for (const message of log.messages) {
      const html = renderMessage(message);
      const chips = html.match(/citation-chip/g) ?? [];
      if (message.role === "system" && message.sources.length > 0) {
        expect(chips.length).toBe(message.sources.length);
      } else {
        expect(chips.length).toBe(0);
      }
    }
  });

  it("keeps the log order as delivered", () => {
    const html = renderConversation(log.messages);
    const roles = [...html.matchAll(/message-(user|system)/g)].map((m) => m[1]);
    expect(roles).toEqual(log.messages.map((m) => m.role));
  });

  it("only shows text that came from the response", () => {
    for (const message of log.messages) {
      const html = renderMessage(message);
      const bubble = /<div class="bubble">(.*?)<\/div>/s.exec(html);
      expect(bubble).not.toBeNull();
      expect(bubble![1]).toBe(escapeHtml(message.text));
    }
  });
});

describe("ambiguous comparison hint", () => {
  it("renders the refine-your-query hint from the error body", () => {
    const body = ambiguous as unknown as ErrorBody;
    expect(body.error_code).toBe("AmbiguousComparison");
    const html = renderRefineHint(body.message, String(body.details["hint"] ?? ""));
    expect(html).toContain("message-hint");
    expect(html).toContain(escapeHtml(String(body.details["hint"])));
    expect(html).not.toContain("bubble");
    expect(html).toMatchSnapshot();
  });

  it("offers a retry affordance on transport failure", () => {
    const html = renderRetry("Which datasets use Boston Dynamics Spot?");
    expect(html).toContain("retry");
    expect(html).toMatchSnapshot();
  });
});

describe("comparison table", () => {
  it("renders rows with highlight classes driven by the same flag", () => {
    const html = renderComparison(comparison);
    expect(html).toMatchSnapshot();
  });

  it("highlight flags match the /compare response exactly", () => {
    const html = renderComparison(comparison);
    const flags = [...html.matchAll(/class="row-(same|different)" data-same="(true|false)"/g)];
    expect(flags.length).toBe(comparison.rows.length);
    comparison.rows.forEach((row, i) => {
      expect(flags[i]![1]).toBe(row.same ? "same" : "different");
      expect(flags[i]![2]).toBe(String(row.same));
    });
  });

  it("renders one column per dataset in response order", () => {
    const html = renderComparison(comparison);
    for (const doi of comparison.dois) {
      expect(html).toContain(escapeHtml(doi));
    }
  });
});

describe("catalog and dataset views", () => {
  it("renders a card per dataset", () => {
    const html = renderCatalog(datasets);
    expect(html.match(/dataset-card/g)?.length).toBe(datasets.length);
    expect(html).toMatchSnapshot();
  });

  it("renders the profile groups as delivered", () => {
    const html = renderProfile(profile as unknown as DatasetProfile);
    for (const group of (profile as unknown as DatasetProfile).groups) {
      expect(html).toContain(escapeHtml(group.edge_type));
    }
    expect(html).toMatchSnapshot();
  });

  it("renders the manifest entries as delivered", () => {
    const html = renderManifest(manifest as unknown as Manifest);
    expect(html.match(/<tr><td>/g)?.length).toBe((manifest as unknown as Manifest).entries.length);
    expect(html).toMatchSnapshot();
  });

  it("renders the audit with pass/fail classes", () => {
    const html = renderAudit(audit as unknown as FairAudit);
    expect(html.match(/check-pass/g)?.length).toBe(
      (audit as unknown as FairAudit).checks.filter((c) => c.passed).length,
    );
    expect(html).toMatchSnapshot();
  });

  it("renders a not-found state", () => {
    expect(renderNotFound("doi:gone")).toMatchSnapshot();
  });
});

describe("source inspector", () => {
  it("shows the fact triple", () => {
    const fact = log.messages
      .flatMap((m) => m.sources)
      .find((s): s is Extract<Source, { kind: "fact" }> => s.kind === "fact");
    expect(fact).toBeDefined();
    const html = renderSourceInspector(fact!);
    expect(html).toContain(escapeHtml(fact!.subject));
    expect(html).toContain(escapeHtml(fact!.predicate));
    expect(html).toContain(escapeHtml(fact!.object));
    expect(html).toMatchSnapshot();
  });

  it("shows the chunk text fetched from the service", () => {
    const source: Source = { kind: "chunk", chunk_id: (chunk as unknown as ChunkDetail).id };
    const html = renderSourceInspector(source, chunk as unknown as ChunkDetail);
    expect(html).toContain(escapeHtml((chunk as unknown as ChunkDetail).text));
    expect(html).toMatchSnapshot();
  });
});

describe("escaping", () => {
  it("escapes markup in API strings", () => {
    const html = renderMessage({ role: "system", text: "<img src=x onerror=alert(1)>", sources: [] });
    expect(html).not.toContain("<img");
    expect(html).toContain("&lt;img");
  });
});
