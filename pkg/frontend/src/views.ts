/**
 * Pure view functions: state in, HTML string out. No DOM access, no
 * fetching, no authorization decisions — disabled buttons are a courtesy,
 * the gateway is the authority.
 *
 * Every stored number from an API payload is rendered verbatim via
 * String(n); formatting helpers only add labels beside the exact value.
 */

import type { FileEntry, Reservation, UsageReport } from "./api.js";
import { escapeHtml, modeString, percentOfLimit, sizeLabel } from "./format.js";
import type { PendingMutation, Rejection } from "./state.js";

export const QUOTA_WARN_PERCENT = 90;

// -- dashboard -----------------------------------------------------------------

export function dashboardView(usage: UsageReport | null): string {
  if (!usage) {
    return `<section class="dashboard"><p class="empty">no project loaded</p></section>`;
  }
  const parts: string[] = [
    `<section class="dashboard" data-project="${escapeHtml(usage.project)}">`,
    `<h2>Data dashboard — ${escapeHtml(usage.project)}</h2>`,
  ];
  for (const [tier, info] of Object.entries(usage.tiers)) {
    parts.push(`<article class="tier" data-tier="${escapeHtml(tier)}">`);
    parts.push(`<h3>${escapeHtml(tier)}</h3>`);
    const pct = percentOfLimit(info.total_bytes, info.limit_bytes);
    const warn = pct !== null && pct >= QUOTA_WARN_PERCENT;
    parts.push(
      `<div class="bar total${warn ? " warn" : ""}" data-percent="${pct ?? ""}">` +
        `<span class="value">${String(info.total_bytes)}</span>` +
        ` of <span class="limit">${info.limit_bytes === null ? "∞" : String(info.limit_bytes)}</span> bytes` +
        `${pct === null ? "" : ` (${pct}%)`}` +
        ` · <span class="value">${String(info.total_inodes)}</span>` +
        ` of <span class="limit">${info.limit_inodes === null ? "∞" : String(info.limit_inodes)}</span> inodes` +
        `</div>`,
    );
    const users = Object.entries(info.users);
    if (users.length === 0) {
      parts.push(`<p class="empty">no usage</p>`);
    } else {
      parts.push(`<table class="users"><tbody>`);
      for (const [user, row] of users) {
        parts.push(
          `<tr data-user="${escapeHtml(user)}">` +
            `<td>${escapeHtml(user)}</td>` +
            `<td class="bytes">${String(row.bytes)}</td>` +
            `<td class="size-label">${sizeLabel(row.bytes)}</td>` +
            `<td class="inodes">${String(row.inodes)}</td>` +
            `</tr>`,
        );
      }
      parts.push(`</tbody></table>`);
    }
    const candidates = [...info.top_directories].sort((a, b) => b.bytes - a.bytes);
    if (candidates.length > 0) {
      parts.push(`<h4>Archive candidates</h4><ul class="candidates">`);
      for (const dir of candidates) {
        parts.push(
          `<li data-path="${escapeHtml(dir.path)}">` +
            `<code>${escapeHtml(dir.path)}</code> ` +
            `<span class="bytes">${String(dir.bytes)}</span>` +
            ` <button class="migrate" data-action="migrate"` +
            ` data-tier="${escapeHtml(tier)}" data-path="${escapeHtml(dir.path)}">` +
            `archive</button></li>`,
        );
      }
      parts.push(`</ul>`);
    }
    parts.push(`</article>`);
  }
  parts.push(`</section>`);
  return parts.join("");
}

// -- PI toolbox -----------------------------------------------------------------

export function toolboxView(
  files: FileEntry[],
  isPi: boolean,
  basket: PendingMutation[],
  lastChangeCount: number | null,
): string {
  const disabled = isPi ? "" : " disabled";
  const parts: string[] = [
    `<section class="toolbox">`,
    `<h2>PI toolbox</h2>`,
    isPi ? "" : `<p class="note">PI role required for mutations</p>`,
    `<button data-action="group-readable"${disabled}>make project group-readable</button>`,
  ];
  if (lastChangeCount !== null) {
    parts.push(`<p class="summary">changed ${String(lastChangeCount)} records</p>`);
  }
  if (basket.length > 0) {
    parts.push(`<ul class="basket">`);
    for (const m of basket) {
      parts.push(
        `<li>${m.kind} ${escapeHtml(m.path)} ${escapeHtml(m.detail)}` +
          `${m.recursive ? " (recursive)" : ""}</li>`,
      );
    }
    parts.push(`</ul><button data-action="apply-basket"${disabled}>apply ${basket.length}</button>`);
  }
  parts.push(`<table class="files"><tbody>`);
  for (const f of files) {
    parts.push(
      `<tr data-path="${escapeHtml(f.path)}">` +
        `<td class="mode">${modeString(f.mode)}</td>` +
        `<td>${escapeHtml(f.owner)}</td>` +
        `<td>${escapeHtml(f.group)}</td>` +
        `<td class="bytes">${String(f.size_bytes)}</td>` +
        `<td><code>${escapeHtml(f.path)}${f.is_dir ? "/" : ""}</code></td>` +
        `</tr>`,
    );
  }
  parts.push(`</tbody></table></section>`);
  return parts.join("");
}

// -- reservation manager ----------------------------------------------------------

export function reservationsView(
  reservations: Reservation[],
  rejection: Rejection | null,
  isPi: boolean,
): string {
  const disabled = isPi ? "" : " disabled";
  const parts: string[] = [`<section class="reservations"><h2>Reservations</h2>`];
  if (rejection) {
    parts.push(
      `<div class="rejection" role="alert">request ` +
        `<strong>${escapeHtml(rejection.name)}</strong> rejected: ` +
        `${escapeHtml(rejection.reason)}</div>`,
    );
  }
  if (reservations.length === 0) {
    parts.push(`<p class="empty">no reservations</p>`);
  } else {
    parts.push(`<table class="calendar"><tbody>`);
    for (const r of reservations) {
      parts.push(
        `<tr data-name="${escapeHtml(r.name)}">` +
          `<td>${escapeHtml(r.name)}</td>` +
          `<td>${escapeHtml(r.project)}</td>` +
          `<td>${escapeHtml(r.state)}</td>` +
          `<td class="nodes">${String(r.node_count)}</td>` +
          `<td>[${String(r.start)}, ${String(r.end)})</td>` +
          `<td><button data-action="cancel-reservation"` +
          ` data-name="${escapeHtml(r.name)}"${disabled}>cancel</button></td>` +
          `</tr>`,
      );
    }
    parts.push(`</tbody></table>`);
  }
  parts.push(
    `<form class="create" data-action="create-reservation">` +
      `<input name="name" placeholder="name" required>` +
      `<input name="node_count" type="number" min="1" required>` +
      `<input name="start" type="number" min="0" required>` +
      `<input name="end" type="number" min="1" required>` +
      `<label><input name="allow_preemptible" type="checkbox">allow preemptible</label>` +
      `<button type="submit"${disabled}>request</button>` +
      `</form></section>`,
  );
  return parts.join("");
}

// -- occupancy timeline -------------------------------------------------------------

interface TimelineBlock {
  job: number;
  qos: string;
  nodes: number;
  start: number;
  end: number | null;
}

export interface TimelineModel {
  blocks: TimelineBlock[];
  skipped: number;
}

/** Fold a JSONL event log into per-job occupancy blocks; malformed rows are
 * counted and skipped, never fatal. */
export function parseTimeline(lines: string[]): TimelineModel {
  const open = new Map<number, TimelineBlock>();
  const blocks: TimelineBlock[] = [];
  let skipped = 0;
  for (const line of lines) {
    if (line.trim() === "") {
      continue;
    }
    let rec: Record<string, unknown>;
    try {
      rec = JSON.parse(line) as Record<string, unknown>;
    } catch {
      skipped += 1;
      continue;
    }
    if (typeof rec !== "object" || rec === null ||
        typeof rec["t"] !== "number" || typeof rec["kind"] !== "string") {
      skipped += 1;
      continue;
    }
    const kind = rec["kind"] as string;
    const t = rec["t"] as number;
    if (kind === "job_start" && typeof rec["job"] === "number") {
      const nodes = Array.isArray(rec["nodes"]) ? rec["nodes"].length : 0;
      const block: TimelineBlock = {
        job: rec["job"] as number,
        qos: typeof rec["qos"] === "string" ? (rec["qos"] as string) : "regular",
        nodes,
        start: t,
        end: null,
      };
      open.set(block.job, block);
      blocks.push(block);
    } else if (
      (kind === "job_complete" || kind === "job_killed" || kind === "job_failed") &&
      typeof rec["job"] === "number"
    ) {
      const block = open.get(rec["job"] as number);
      if (block) {
        block.end = typeof rec["end"] === "number" ? (rec["end"] as number) : t;
        open.delete(block.job);
      }
    }
  }
  return { blocks, skipped };
}

export function timelineView(
  lines: string[],
  reservations: Reservation[] = [],
): string {
  const { blocks, skipped } = parseTimeline(lines);
  const parts: string[] = [`<section class="timeline"><h2>Node occupancy</h2>`];
  if (skipped > 0) {
    parts.push(`<span class="badge skipped">${skipped} malformed rows skipped</span>`);
  }
  for (const r of reservations) {
    parts.push(
      `<div class="window" data-name="${escapeHtml(r.name)}"` +
        ` data-start="${String(r.start)}" data-end="${String(r.end)}"></div>`,
    );
  }
  if (blocks.length === 0) {
    parts.push(`<p class="empty">no activity</p>`);
  } else {
    for (const b of blocks) {
      parts.push(
        `<div class="block qos-${escapeHtml(b.qos)}" data-job="${b.job}"` +
          ` data-start="${String(b.start)}"` +
          ` data-end="${b.end === null ? "" : String(b.end)}"` +
          ` data-nodes="${String(b.nodes)}"></div>`,
      );
    }
  }
  parts.push(`</section>`);
  return parts.join("");
}

// -- chrome ---------------------------------------------------------------------

export function errorBanner(message: string | null): string {
  if (!message) {
    return "";
  }
  return (
    `<div class="error" role="alert">${escapeHtml(message)} ` +
    `<button data-action="retry">retry</button></div>`
  );
}
