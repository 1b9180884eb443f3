/**
 * End-to-end console acceptance against a live gateway.
 *
 * Gated on GATEWAY_URL and GATEWAY_TOKEN (skipped otherwise). Start one with:
 *
 *     python3 -m sfbox.devserver 8800
 *     # first stdout line: {"url": "...", "token": "..."}
 */

import { describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { makeGroupReadable, requestReservation } from "../src/actions.js";
import { dashboardView, reservationsView, toolboxView } from "../src/views.js";

const url = process.env["GATEWAY_URL"];
const token = process.env["GATEWAY_TOKEN"];
const live = Boolean(url && token);

describe.runIf(live)("console against a live gateway", () => {
  const client = new GatewayClient(url!, token!);

  it("dashboard renders values byte-equal to the API payload", async () => {
    const rawText = await client.usageRaw("demo");
    const raw = JSON.parse(rawText) as Awaited<ReturnType<typeof client.usage>>;
    const viaClient = await client.usage("demo");
    expect(JSON.stringify(viaClient)).toBe(JSON.stringify(raw));

    const html = dashboardView(raw);
    for (const info of Object.values(raw.tiers)) {
      expect(html).toContain(`>${String(info.total_bytes)}<`);
      expect(html).toContain(`>${String(info.total_inodes)}<`);
      for (const row of Object.values(info.users)) {
        expect(html).toContain(`>${String(row.bytes)}<`);
        expect(html).toContain(`>${String(row.inodes)}<`);
      }
      for (const dir of info.top_directories) {
        expect(html).toContain(`>${String(dir.bytes)}<`);
      }
    }
  });

  it("one-click group-readable round-trips through ls", async () => {
    const before = await client.ls("community", "/data");
    const target = before.find((f) => f.path === "/data/report.dat");
    expect(target).toBeDefined();
    expect(target!.mode & 0o040).toBe(0);

    const { changed, files } = await makeGroupReadable(client, "community", "/data");
    expect(changed).toBeGreaterThanOrEqual(1);
    for (const f of files) {
      expect(f.mode & 0o040).toBe(0o040);
    }

    // the view renders only what a fresh listing confirms
    const confirmed = await client.ls("community", "/data");
    expect(JSON.stringify(confirmed)).toBe(JSON.stringify(files));
    const html = toolboxView(confirmed, true, [], changed);
    const mutated = confirmed.find((f) => f.path === "/data/report.dat")!;
    expect(mutated.mode & 0o040).toBe(0o040);
    expect(html).toContain(`>${mutated.mode.toString(8)}<`);
    expect(html).toContain(`changed ${changed} records`);
  });

  it("renders the rejection reason for an infeasible reservation", async () => {
    const outcome = await requestReservation(
      client,
      {
        name: "console-whole-machine",
        project: "demo",
        node_count: 128,
        start: 3600,
        end: 7200,
      },
      { intervalMs: 50 },
    );
    expect(outcome.accepted).toBe(false);
    expect(outcome.reason).toMatch(/conflict at t=/);

    const reservations = await client.listReservations();
    const html = reservationsView(
      reservations,
      { name: "console-whole-machine", reason: outcome.reason! },
      true,
    );
    expect(html).toContain("rejected:");
    expect(html).toContain(outcome.reason!.replace(/</g, "&lt;"));
    // the rejected request never appears on the calendar
    expect(reservations.some((r) => r.name === "console-whole-machine")).toBe(false);
  });
});

describe.runIf(!live)("integration (skipped)", () => {
  it.skip("set GATEWAY_URL and GATEWAY_TOKEN to run against a live gateway", () => {});
});
