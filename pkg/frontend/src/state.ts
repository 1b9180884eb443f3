/**
 * Single-reducer application state. Every fetch result and user action
 * flows through `reduce`, so view transitions are unit-testable without
 * a DOM and there is exactly one place state can change.
 *
 * Optimistic updates are deliberately impossible: the reducer only accepts
 * confirmed gateway responses (loaded/applied actions carry server data).
 */

import type { FileEntry, Reservation, UsageReport } from "./api.js";

export type ViewName = "dashboard" | "toolbox" | "reservations" | "timeline";

export interface PendingMutation {
  endpoint: string;
  path: string;
  kind: "chmod" | "chown" | "chgrp";
  detail: string;
  recursive: boolean;
}

export interface Rejection {
  name: string;
  reason: string;
}

export interface AppState {
  view: ViewName;
  user: string;
  isPi: boolean;
  usage: UsageReport | null;
  files: FileEntry[];
  reservations: Reservation[];
  rejection: Rejection | null;
  basket: PendingMutation[];
  lastChangeCount: number | null;
  timelineLog: string[];
  error: string | null;
}

export type Action =
  | { type: "navigate"; view: ViewName }
  | { type: "usage-loaded"; usage: UsageReport }
  | { type: "files-loaded"; files: FileEntry[] }
  | { type: "reservations-loaded"; reservations: Reservation[] }
  | { type: "reservation-rejected"; name: string; reason: string }
  | { type: "reservation-resolved" }
  | { type: "basket-add"; mutation: PendingMutation }
  | { type: "basket-clear" }
  | { type: "mutations-applied"; changed: number; files: FileEntry[] }
  | { type: "timeline-loaded"; lines: string[] }
  | { type: "error"; message: string }
  | { type: "error-cleared" };

export function initialState(user: string, isPi: boolean): AppState {
  return {
    view: "dashboard",
    user,
    isPi,
    usage: null,
    files: [],
    reservations: [],
    rejection: null,
    basket: [],
    lastChangeCount: null,
    timelineLog: [],
    error: null,
  };
}

export function reduce(state: AppState, action: Action): AppState {
  switch (action.type) {
    case "navigate":
      return { ...state, view: action.view, error: null };
    case "usage-loaded":
      return { ...state, usage: action.usage, error: null };
    case "files-loaded":
      return { ...state, files: action.files, error: null };
    case "reservations-loaded":
      return { ...state, reservations: action.reservations, error: null };
    case "reservation-rejected":
      return {
        ...state,
        rejection: { name: action.name, reason: action.reason },
      };
    case "reservation-resolved":
      return { ...state, rejection: null };
    case "basket-add":
      return { ...state, basket: [...state.basket, action.mutation] };
    case "basket-clear":
      return { ...state, basket: [] };
    case "mutations-applied":
      // confirmed state only: the fresh listing comes back with the count
      return {
        ...state,
        basket: [],
        lastChangeCount: action.changed,
        files: action.files,
        error: null,
      };
    case "timeline-loaded":
      return { ...state, timelineLog: action.lines, error: null };
    case "error":
      return { ...state, error: action.message };
    case "error-cleared":
      return { ...state, error: null };
  }
}
