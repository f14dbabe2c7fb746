/**
 * Server-authoritative view state: a pure fold over received frames plus
 * local command bookkeeping. Nothing here mutates on user intent alone;
 * the UI reflects only what the server confirmed, so replaying a recorded
 * session reproduces the live view exactly.
 */

import type {
  AlertView,
  EntityView,
  EventRecord,
  GoalView,
  MapDump,
  PromptView,
  ServerFrame,
  TrackView,
} from "./protocol.js";
import { PROTOCOL_VERSION } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected" | "protocol-error";

export interface PendingCommand {
  cmdId: string;
  command: Record<string, unknown>;
  sentAt: number; // ms epoch of the local clock fed by the caller
}

export interface CommandOutcome {
  cmdId: string;
  ok: boolean;
  result: Record<string, unknown>;
}

export interface ViewState {
  connection: ConnectionStatus;
  banner: string | null;
  scenario: string | null;
  tick: number;
  map: MapDump | null;
  entities: EntityView[];
  tracks: TrackView[];
  goals: Record<string, GoalView>;
  prompts: PromptView[];
  alerts: AlertView[];
  storage: Record<string, (string | null)[]>;
  levels: Record<string, string>;
  feed: EventRecord[];
  pending: PendingCommand[];
  outcomes: CommandOutcome[];
  answeredPrompts: string[]; // case ids we responded to, awaiting server close
}

export const FEED_LIMIT = 200;
export const OUTCOME_LIMIT = 50;

export type ViewInput =
  | { kind: "status"; status: ConnectionStatus; detail?: string }
  | { kind: "frame"; frame: ServerFrame }
  | { kind: "sent"; cmdId: string; command: Record<string, unknown>; at: number }
  | { kind: "timeout"; cmdId: string };

export function initialView(): ViewState {
  return {
    connection: "connecting",
    banner: null,
    scenario: null,
    tick: 0,
    map: null,
    entities: [],
    tracks: [],
    goals: {},
    prompts: [],
    alerts: [],
    storage: {},
    levels: {},
    feed: [],
    pending: [],
    outcomes: [],
    answeredPrompts: [],
  };
}

export function reduce(view: ViewState, input: ViewInput): ViewState {
  switch (input.kind) {
    case "status": {
      const banner =
        input.status === "disconnected"
          ? `disconnected${input.detail ? `: ${input.detail}` : ""} (retrying)`
          : input.status === "protocol-error"
            ? input.detail ?? "protocol error"
            : null;
      return { ...view, connection: input.status, banner };
    }
    case "sent":
      return {
        ...view,
        pending: [...view.pending, { cmdId: input.cmdId, command: input.command, sentAt: input.at }],
        answeredPrompts:
          input.command.kind === "PromptResponse" && typeof input.command.case_id === "string"
            ? [...view.answeredPrompts, input.command.case_id]
            : view.answeredPrompts,
      };
    case "timeout": {
      const timedOut = view.pending.find((p) => p.cmdId === input.cmdId);
      if (!timedOut) return view;
      return {
        ...view,
        pending: view.pending.filter((p) => p.cmdId !== input.cmdId),
        outcomes: pushBounded(
          view.outcomes,
          { cmdId: input.cmdId, ok: false, result: { reason: "Timeout", retry: true } },
          OUTCOME_LIMIT,
        ),
      };
    }
    case "frame":
      return applyFrame(view, input.frame);
  }
}

function applyFrame(view: ViewState, frame: ServerFrame): ViewState {
  switch (frame.type) {
    case "Hello": {
      if (frame.protocol !== PROTOCOL_VERSION) {
        return {
          ...view,
          connection: "protocol-error",
          banner: `protocol mismatch: server speaks v${frame.protocol}, console v${PROTOCOL_VERSION}`,
        };
      }
      return { ...view, connection: "connected", banner: null, scenario: frame.scenario, tick: frame.tick };
    }
    case "Snapshot": {
      const answered = view.answeredPrompts.filter((caseId) =>
        frame.prompts.some((p) => p.case_id === caseId),
      );
      return {
        ...view,
        connection: "connected",
        tick: frame.tick,
        map: frame.map,
        entities: frame.entities,
        tracks: frame.tracks,
        goals: frame.goals,
        prompts: frame.prompts,
        alerts: frame.alerts,
        storage: frame.storage,
        levels: frame.levels,
        answeredPrompts: answered,
      };
    }
    case "Event":
      return { ...view, tick: Math.max(view.tick, frame.record.tick), feed: pushBounded(view.feed, frame.record, FEED_LIMIT) };
    case "Ack": {
      if (!view.pending.some((p) => p.cmdId === frame.cmd_id)) return view;
      return {
        ...view,
        pending: view.pending.filter((p) => p.cmdId !== frame.cmd_id),
        outcomes: pushBounded(view.outcomes, { cmdId: frame.cmd_id, ok: true, result: frame.result }, OUTCOME_LIMIT),
      };
    }
    case "Error": {
      if (frame.cmd_id === undefined) {
        return { ...view, banner: `server error: ${frame.reason}` };
      }
      if (!view.pending.some((p) => p.cmdId === frame.cmd_id)) return view;
      return {
        ...view,
        pending: view.pending.filter((p) => p.cmdId !== frame.cmd_id),
        outcomes: pushBounded(
          view.outcomes,
          { cmdId: frame.cmd_id, ok: false, result: { reason: frame.reason, detail: frame.detail } },
          OUTCOME_LIMIT,
        ),
      };
    }
  }
}

function pushBounded<T>(items: T[], item: T, limit: number): T[] {
  const next = [...items, item];
  return next.length > limit ? next.slice(next.length - limit) : next;
}

/** Open prompts the operator has not answered yet (the modal queue). */
export function openPrompts(view: ViewState): PromptView[] {
  return view.prompts.filter((p) => !view.answeredPrompts.includes(p.case_id));
}

/** Alerts ordered for display: emergencies first, newest first within a class. */
export function orderedAlerts(view: ViewState): AlertView[] {
  const weight = (alert: AlertView) => (alert.reason === "AstronautEmergency" ? 0 : 1);
  return [...view.alerts].sort((a, b) => weight(a) - weight(b) || b.tick - a.tick);
}

/** Fold a recorded session; the result must equal the live view. */
export function foldSession(inputs: ViewInput[]): ViewState {
  return inputs.reduce(reduce, initialView());
}
