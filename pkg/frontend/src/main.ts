/**
 * Browser entry point. Reads gateway URL and bearer token from the query
 * string or a prompt, then renders the four views with 2-second polling.
 * Tokens live in memory only — never persisted.
 */

import { ApiError, GatewayClient } from "./api.js";
import { makeGroupReadable, requestReservation } from "./actions.js";
import { initialState, reduce, type Action, type AppState, type ViewName } from "./state.js";
import {
  dashboardView,
  errorBanner,
  reservationsView,
  timelineView,
  toolboxView,
} from "./views.js";

const POLL_INTERVAL_MS = 2000;
const VIEWS: ViewName[] = ["dashboard", "toolbox", "reservations", "timeline"];

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

const gatewayUrl = param("gateway", "http://127.0.0.1:8800");
const project = param("project", "demo");
const tier = param("tier", "community");
const rootPath = param("root", "/data");
const token = param("token", "") || window.prompt("bearer token") || "";

const client = new GatewayClient(gatewayUrl, token);
let state: AppState = initialState(param("user", "alice"), param("pi", "1") === "1");

const root = document.getElementById("root");
if (!root) {
  throw new Error("missing #root element");
}

function dispatch(action: Action): void {
  state = reduce(state, action);
  render();
}

function render(): void {
  const nav = VIEWS.map(
    (v) =>
      `<button data-action="nav" data-view="${v}"` +
      `${v === state.view ? ' class="active"' : ""}>${v}</button>`,
  ).join("");
  let body = "";
  switch (state.view) {
    case "dashboard":
      body = dashboardView(state.usage);
      break;
    case "toolbox":
      body = toolboxView(state.files, state.isPi, state.basket, state.lastChangeCount);
      break;
    case "reservations":
      body = reservationsView(state.reservations, state.rejection, state.isPi);
      break;
    case "timeline":
      body = timelineView(state.timelineLog, state.reservations);
      break;
  }
  root!.innerHTML = `<nav>${nav}</nav>${errorBanner(state.error)}${body}`;
}

function fail(e: unknown): void {
  const message = e instanceof ApiError ? `[${e.code}] ${e.message}` : String(e);
  dispatch({ type: "error", message });
}

async function refresh(): Promise<void> {
  try {
    if (state.view === "dashboard") {
      dispatch({ type: "usage-loaded", usage: await client.usage(project) });
    } else if (state.view === "toolbox") {
      dispatch({ type: "files-loaded", files: await client.ls(tier, rootPath) });
    } else {
      dispatch({
        type: "reservations-loaded",
        reservations: await client.listReservations(),
      });
    }
  } catch (e) {
    fail(e);
  }
}

root.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement).closest("[data-action]");
  if (!(target instanceof HTMLElement)) {
    return;
  }
  const action = target.dataset["action"];
  if (action === "nav") {
    dispatch({ type: "navigate", view: target.dataset["view"] as ViewName });
    void refresh();
  } else if (action === "retry") {
    dispatch({ type: "error-cleared" });
    void refresh();
  } else if (action === "group-readable") {
    void makeGroupReadable(client, tier, rootPath)
      .then((r) => dispatch({ type: "mutations-applied", changed: r.changed, files: r.files }))
      .catch(fail);
  } else if (action === "cancel-reservation") {
    const name = target.dataset["name"];
    if (name) {
      void client
        .cancelReservation(name)
        .then(() => refresh())
        .catch(fail);
    }
  } else if (action === "migrate") {
    const path = target.dataset["path"];
    const srcTier = target.dataset["tier"];
    if (path && srcTier) {
      void client
        .migrate({
          src_tier: srcTier,
          dst_tier: "archive",
          paths: [path],
          as_account: project,
          project,
        })
        .then(({ task_id }) => client.pollTask(task_id))
        .then(() => refresh())
        .catch(fail);
    }
  }
});

root.addEventListener("submit", (event) => {
  const form = event.target as HTMLFormElement;
  if (form.dataset["action"] !== "create-reservation") {
    return;
  }
  event.preventDefault();
  const data = new FormData(form);
  void requestReservation(client, {
    name: String(data.get("name") ?? ""),
    project,
    node_count: Number(data.get("node_count") ?? 0),
    start: Number(data.get("start") ?? 0),
    end: Number(data.get("end") ?? 0),
    allow_preemptible: data.get("allow_preemptible") !== null,
  })
    .then((outcome) => {
      if (!outcome.accepted) {
        dispatch({
          type: "reservation-rejected",
          name: String(data.get("name") ?? ""),
          reason: outcome.reason ?? "rejected",
        });
      } else {
        dispatch({ type: "reservation-resolved" });
      }
      return refresh();
    })
    .catch(fail);
});

render();
void refresh();
window.setInterval(() => void refresh(), POLL_INTERVAL_MS);
