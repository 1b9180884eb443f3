import { describe, expect, it } from "vitest";

import { ApiError, GatewayClient, type FetchLike } from "../src/api.js";

function fakeFetch(
  responder: (url: string, init?: RequestInit) => { status: number; body: unknown },
): { fetch: FetchLike; calls: { url: string; init?: RequestInit }[] } {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fetch: FetchLike = async (url, init) => {
    calls.push({ url, init });
    const { status, body } = responder(url, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetch, calls };
}

describe("GatewayClient", () => {
  it("sends the bearer token and JSON bodies", async () => {
    const { fetch, calls } = fakeFetch(() => ({ status: 200, body: [] }));
    const client = new GatewayClient("http://gw", "tok-1", fetch);
    await client.ls("community", "/data");
    expect(calls).toHaveLength(1);
    const call = calls[0]!;
    expect(call.url).toBe("http://gw/utilities/ls");
    const headers = call.init?.headers as Record<string, string>;
    expect(headers["Authorization"]).toBe("Bearer tok-1");
    expect(JSON.parse(String(call.init?.body))).toEqual({
      endpoint: "community",
      path: "/data",
    });
  });

  it("maps gateway errors to ApiError with the server's code", async () => {
    const { fetch } = fakeFetch(() => ({
      status: 403,
      body: { code: "insufficient-scope", message: "needs rwx" },
    }));
    const client = new GatewayClient("http://gw", "tok-1", fetch);
    const err = await client.listReservations().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(403);
    expect(err.code).toBe("insufficient-scope");
    expect(err.message).toBe("needs rwx");
  });

  it("polls a task until it leaves running, sleeping between polls", async () => {
    let polls = 0;
    const { fetch } = fakeFetch(() => {
      polls += 1;
      const state = polls < 3 ? "running" : "completed";
      return {
        status: 200,
        body: { id: "task-1", kind: "job", state, result: { ok: true },
                created: 0, finished: state === "completed" ? 4 : null },
      };
    });
    const client = new GatewayClient("http://gw", "tok-1", fetch);
    const slept: number[] = [];
    const task = await client.pollTask("task-1", {
      intervalMs: 2000,
      sleep: async (ms) => {
        slept.push(ms);
      },
    });
    expect(task.state).toBe("completed");
    expect(polls).toBe(3);
    expect(slept).toEqual([2000, 2000]);
  });

  it("gives up polling after maxPolls", async () => {
    const { fetch } = fakeFetch(() => ({
      status: 200,
      body: { id: "t", kind: "job", state: "running", result: null,
              created: 0, finished: null },
    }));
    const client = new GatewayClient("http://gw", "tok-1", fetch);
    const err = await client
      .pollTask("t", { maxPolls: 2, sleep: async () => {} })
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("poll-timeout");
  });

  it("URL-encodes path segments", async () => {
    const { fetch, calls } = fakeFetch(() => ({
      status: 200,
      body: { project: "a b", tiers: {} },
    }));
    const client = new GatewayClient("http://gw", "tok-1", fetch);
    await client.usage("a b");
    expect(calls[0]!.url).toBe("http://gw/storage/usage/a%20b");
  });
});
