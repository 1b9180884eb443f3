/**
 * Typed client for the gateway HTTP API.
 *
 * The console performs no authorization logic of its own: every request
 * carries the bearer token and the gateway decides. `fetchImpl` is
 * injectable so unit tests can run without a network or a DOM.
 */

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SystemStatus {
  name: string;
  kind: string;
  state: string;
  state_since: number;
  planned_outages?: { start: number; end: number; kind: string }[];
}

export interface UserUsage {
  bytes: number;
  inodes: number;
}

export interface TierUsage {
  users: Record<string, UserUsage>;
  total_bytes: number;
  total_inodes: number;
  limit_bytes: number | null;
  limit_inodes: number | null;
  top_directories: { path: string; bytes: number }[];
}

export interface UsageReport {
  project: string;
  tiers: Record<string, TierUsage>;
}

export interface FileEntry {
  path: string;
  owner: string;
  group: string;
  mode: number;
  size_bytes: number;
  is_dir: boolean;
}

export interface Reservation {
  name: string;
  project: string;
  state: string;
  node_count: number;
  nodes: number[];
  start: number;
  end: number;
  allow_preemptible: boolean;
  grace_seconds: number;
  occupancy: number;
}

export interface Task {
  id: string;
  kind: string;
  state: string;
  result: Record<string, unknown> | null;
  created: number;
  finished: number | null;
}

export interface PermissionMutation {
  endpoint: string;
  path: string;
  new_owner?: string | null;
  new_group?: string | null;
  new_mode?: number | null;
  mode_or?: number | null;
  recursive?: boolean;
}

export interface ReservationRequest {
  name: string;
  project: string;
  node_count: number;
  start: number;
  end: number;
  allow_preemptible?: boolean;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

const sleepDefault = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

export class GatewayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        "Content-Type": "application/json",
      },
    };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const text = await response.text();
    let data: unknown = null;
    try {
      data = text ? JSON.parse(text) : null;
    } catch {
      data = { message: text };
    }
    if (!response.ok) {
      const err = (data ?? {}) as { code?: string; message?: string };
      throw new ApiError(
        response.status,
        err.code ?? String(response.status),
        err.message ?? text,
      );
    }
    return data as T;
  }

  status(): Promise<SystemStatus[]> {
    return this.call("GET", "/status");
  }

  usage(project: string, tier?: string): Promise<UsageReport> {
    const query = tier ? `?tier=${encodeURIComponent(tier)}` : "";
    return this.call("GET", `/storage/usage/${encodeURIComponent(project)}${query}`);
  }

  /** Raw usage payload text, for byte-equality checks against rendered values. */
  async usageRaw(project: string): Promise<string> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/storage/usage/${encodeURIComponent(project)}`,
      { headers: { Authorization: `Bearer ${this.token}` } },
    );
    const text = await response.text();
    if (!response.ok) {
      throw new ApiError(response.status, String(response.status), text);
    }
    return text;
  }

  ls(endpoint: string, path: string): Promise<FileEntry[]> {
    return this.call("POST", "/utilities/ls", { endpoint, path });
  }

  setPermissions(mutation: PermissionMutation): Promise<{ changed: number }> {
    return this.call("POST", "/storage/permissions", mutation);
  }

  migrate(body: {
    src_tier: string;
    dst_tier: string;
    paths: string[];
    as_account: string;
    project: string;
    dst_dir?: string;
  }): Promise<{ task_id: string; transfer_id: number }> {
    return this.call("POST", "/storage/migrate", body);
  }

  listReservations(): Promise<Reservation[]> {
    return this.call("GET", "/reservations");
  }

  createReservation(request: ReservationRequest): Promise<{ task_id: string }> {
    return this.call("POST", "/reservations", request);
  }

  cancelReservation(name: string): Promise<{ cancelled: string }> {
    return this.call("DELETE", `/reservations/${encodeURIComponent(name)}`);
  }

  getTask(taskId: string): Promise<Task> {
    return this.call("GET", `/tasks/${encodeURIComponent(taskId)}`);
  }

  /** Poll a task every `intervalMs` (default 2 s) until it leaves `running`. */
  async pollTask(
    taskId: string,
    options: {
      intervalMs?: number;
      maxPolls?: number;
      sleep?: (ms: number) => Promise<void>;
    } = {},
  ): Promise<Task> {
    const { intervalMs = 2000, maxPolls = 150, sleep = sleepDefault } = options;
    let task = await this.getTask(taskId);
    let polls = 0;
    while (task.state === "running" || task.state === "pending") {
      if (++polls > maxPolls) {
        throw new ApiError(0, "poll-timeout", `task ${taskId} still running`);
      }
      await sleep(intervalMs);
      task = await this.getTask(taskId);
    }
    return task;
  }
}
