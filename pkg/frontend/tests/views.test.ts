import { describe, expect, it } from "vitest";

import type { Reservation, UsageReport } from "../src/api.js";
import { modeString, percentOfLimit, sizeLabel } from "../src/format.js";
import {
  dashboardView,
  parseTimeline,
  reservationsView,
  timelineView,
  toolboxView,
} from "../src/views.js";

function usageAt(totalBytes: number, limit: number | null): UsageReport {
  return {
    project: "demo",
    tiers: {
      community: {
        users: { alice: { bytes: totalBytes, inodes: 7 } },
        total_bytes: totalBytes,
        total_inodes: 7,
        limit_bytes: limit,
        limit_inodes: 100,
        top_directories: [
          { path: "/data/raw", bytes: 500 },
          { path: "/data/big", bytes: 900 },
        ],
      },
    },
  };
}

describe("dashboard", () => {
  it("renders stored numbers verbatim", () => {
    const html = dashboardView(usageAt(12345678901, 20000000000));
    expect(html).toContain(">12345678901<");
    expect(html).toContain(">20000000000<");
    expect(html).toContain(">7<");
  });

  it("marks the bar as warning at >=90% of quota", () => {
    expect(dashboardView(usageAt(95, 100))).toContain("total warn");
    expect(dashboardView(usageAt(89, 100))).not.toContain("total warn");
  });

  it("handles an empty project without bars or candidates", () => {
    const html = dashboardView({
      project: "empty",
      tiers: {
        community: {
          users: {}, total_bytes: 0, total_inodes: 0,
          limit_bytes: 100, limit_inodes: 10, top_directories: [],
        },
      },
    });
    expect(html).toContain("no usage");
    expect(html).not.toContain("Archive candidates");
  });

  it("lists archive candidates size-ranked with a migrate action", () => {
    const html = dashboardView(usageAt(10, 100));
    expect(html.indexOf("/data/big")).toBeLessThan(html.indexOf("/data/raw"));
    expect(html).toContain('data-action="migrate"');
  });

  it("escapes HTML in names", () => {
    const report = usageAt(1, 10);
    report.tiers["community"]!.top_directories = [
      { path: "/<script>", bytes: 1 },
    ];
    const html = dashboardView(report);
    expect(html).not.toContain("/<script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("toolbox", () => {
  const files = [
    { path: "/data/report.dat", owner: "alice", group: "demo",
      mode: 0o600, size_bytes: 42000000, is_dir: false },
  ];

  it("disables mutation buttons for non-PI sessions", () => {
    expect(toolboxView(files, false, [], null)).toContain(
      'data-action="group-readable" disabled',
    );
    expect(toolboxView(files, true, [], null)).toContain(
      'data-action="group-readable">',
    );
  });

  it("shows confirmed change counts and octal modes", () => {
    const html = toolboxView(files, true, [], 3);
    expect(html).toContain("changed 3 records");
    expect(html).toContain(">600<");
    expect(html).toContain(">42000000<");
  });

  it("renders the pending mutation basket", () => {
    const html = toolboxView(files, true, [
      { endpoint: "community", path: "/data", kind: "chmod",
        detail: "+g r", recursive: true },
    ], null);
    expect(html).toContain("chmod /data +g r (recursive)");
    expect(html).toContain("apply 1");
  });
});

describe("reservations", () => {
  const reservation: Reservation = {
    name: "shift", project: "demo", state: "pending", node_count: 16,
    nodes: [0, 1], start: 3600, end: 10800, allow_preemptible: true,
    grace_seconds: 120, occupancy: 0,
  };

  it("renders the calendar and a rejection reason verbatim", () => {
    const html = reservationsView([reservation],
      { name: "big", reason: "reservation-infeasible: conflict at t=3600" },
      true);
    expect(html).toContain("[3600, 10800)");
    expect(html).toContain("rejected: reservation-infeasible: conflict at t=3600");
  });

  it("omits the rejection banner when there is none", () => {
    expect(reservationsView([reservation], null, true)).not.toContain("rejection");
  });

  it("disables create/cancel for non-PI sessions", () => {
    const html = reservationsView([reservation], null, false);
    expect(html).toContain('data-name="shift" disabled');
    expect(html).toContain("<button type=\"submit\" disabled>");
  });
});

describe("timeline", () => {
  const lines = [
    JSON.stringify({ t: 100, kind: "job_start", job: 1, nodes: [0, 1],
                     qos: "realtime", wait: 0, backfill: false, tag: "" }),
    JSON.stringify({ t: 400, kind: "job_complete", job: 1, end: 400,
                     qos: "realtime" }),
  ];

  it("folds start/complete pairs into blocks", () => {
    const model = parseTimeline(lines);
    expect(model.blocks).toEqual([
      { job: 1, qos: "realtime", nodes: 2, start: 100, end: 400 },
    ]);
    expect(model.skipped).toBe(0);
  });

  it("skips malformed rows with a badge, never crashing", () => {
    const html = timelineView(["{not json", ...lines, JSON.stringify({ nope: 1 })]);
    expect(html).toContain("2 malformed rows skipped");
    expect(html).toContain('data-job="1"');
  });

  it("renders an empty log as an empty chart", () => {
    const html = timelineView([]);
    expect(html).toContain("no activity");
  });

  it("shades reservation windows", () => {
    const html = timelineView(lines, [{
      name: "shift", project: "demo", state: "active", node_count: 4,
      nodes: [], start: 100, end: 500, allow_preemptible: true,
      grace_seconds: 120, occupancy: 0.5,
    }]);
    expect(html).toContain('class="window" data-name="shift" data-start="100" data-end="500"');
  });
});

describe("format helpers", () => {
  it("labels sizes without altering stored values", () => {
    expect(sizeLabel(0)).toBe("0 B");
    expect(sizeLabel(1536)).toBe("1.5 KiB");
    expect(modeString(0o640)).toBe("640");
    expect(modeString(0o7)).toBe("007");
    expect(percentOfLimit(95, 100)).toBe(95);
    expect(percentOfLimit(1, null)).toBeNull();
  });
});
