/**
 * One-click flows. Each action issues gateway calls and returns only
 * confirmed server state — callers render what came back, never what
 * they hoped for.
 */

import type { FileEntry, GatewayClient, ReservationRequest, Task } from "./api.js";

export const GROUP_READ_BIT = 0o040;

export interface GroupReadableResult {
  changed: number;
  files: FileEntry[];
}

/** Make an entire project directory group-readable, then re-list it so the
 * caller renders the gateway-confirmed modes. */
export async function makeGroupReadable(
  client: GatewayClient,
  tier: string,
  rootPath: string,
): Promise<GroupReadableResult> {
  const { changed } = await client.setPermissions({
    endpoint: tier,
    path: rootPath,
    mode_or: GROUP_READ_BIT,
    recursive: true,
  });
  const files = await client.ls(tier, rootPath);
  return { changed, files };
}

export interface ReservationOutcome {
  accepted: boolean;
  reason: string | null;
  task: Task;
}

/** Request a reservation and track its async task to acceptance or a
 * rejection carrying the conflicting instant. */
export async function requestReservation(
  client: GatewayClient,
  request: ReservationRequest,
  pollOptions: Parameters<GatewayClient["pollTask"]>[1] = {},
): Promise<ReservationOutcome> {
  const { task_id } = await client.createReservation(request);
  const task = await client.pollTask(task_id, pollOptions);
  const result = (task.result ?? {}) as { accepted?: boolean; reason?: string };
  if (task.state === "completed" && result.accepted) {
    return { accepted: true, reason: null, task };
  }
  return {
    accepted: false,
    reason: result.reason ?? `task ${task.id} ${task.state}`,
    task,
  };
}
