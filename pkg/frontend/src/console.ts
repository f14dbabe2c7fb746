/**
 * The operator session: wires the transport to the view fold, repaints on
 * changes, and turns typed commands into wire frames. Every user action
 * produces exactly one Command frame; the view changes only through
 * server-confirmed frames, and an open emergency prompt must be answered
 * (safe/emergency) before other panels regain the operator's focus.
 */

import { GatewayClient } from "./transport.js";
import {
  foldSession,
  initialView,
  openPrompts,
  reduce,
  type ViewInput,
  type ViewState,
} from "./view.js";

export interface SessionOptions {
  host: string;
  port: number;
  reconnect?: boolean;
  now?: () => number;
  onChange?: (view: ViewState) => void;
}

export class ConsoleSession {
  view: ViewState = initialView();
  readonly recorded: ViewInput[] = [];
  private client: GatewayClient;
  private readonly now: () => number;
  private readonly onChange?: (view: ViewState) => void;

  constructor(options: SessionOptions) {
    this.now = options.now ?? Date.now;
    this.onChange = options.onChange;
    this.client = new GatewayClient(
      options.host,
      options.port,
      {
        onFrame: (frame) => this.apply({ kind: "frame", frame }),
        onStatus: (status, detail) => this.apply({ kind: "status", status, detail }),
        onCommandTimeout: (cmdId) => this.apply({ kind: "timeout", cmdId }),
      },
      options.reconnect ?? true,
    );
  }

  connect(): void {
    this.client.connect();
  }

  close(): void {
    this.client.close();
  }

  private apply(input: ViewInput): void {
    this.recorded.push(input);
    this.view = reduce(this.view, input);
    this.onChange?.(this.view);
  }

  /** Replay invariant check: fold the recorded session from scratch. */
  refold(): ViewState {
    return foldSession(this.recorded);
  }

  send(command: Record<string, unknown>): string | null {
    const cmdId = this.client.sendCommand(command);
    if (cmdId !== null) {
      this.apply({ kind: "sent", cmdId, command, at: this.now() });
    }
    return cmdId;
  }

  issueGoal(agent: string, goalKind: string, params: Record<string, unknown>): string | null {
    return this.send({ kind: "IssueGoal", to: agent, goal_kind: goalKind, params });
  }

  respondPrompt(response: "Safe" | "Emergency", caseId?: string): string | null {
    const target = caseId ?? openPrompts(this.view)[0]?.case_id;
    if (target === undefined) return null;
    return this.send({ kind: "PromptResponse", case_id: target, response });
  }

  acknowledgeAlert(alertId: string): string | null {
    return this.send({ kind: "AcknowledgeAlert", alert_id: alertId });
  }

  confirmStorageEmptied(agent: string): string | null {
    return this.send({ kind: "ConfirmStorageEmptied", agent });
  }

  setAutonomyLevel(agent: string, level: string): string | null {
    return this.send({ kind: "SetAutonomyLevel", agent, level });
  }

  telecommand(agent: string, v: number, omega: number, duration: number): string | null {
    return this.send({ kind: "Telecommand", to: agent, v, omega, duration });
  }
}

/** Parse one operator input line into a command invocation. */
export function runCommandLine(session: ConsoleSession, line: string): string {
  const parts = line.trim().split(/\s+/);
  const word = (parts[0] ?? "").toLowerCase();
  if (word === "") return "";
  try {
    switch (word) {
      case "safe":
      case "emergency": {
        const id = session.respondPrompt(word === "safe" ? "Safe" : "Emergency", parts[1]);
        return id ? `prompt answered (${id})` : "no open prompt";
      }
      case "goal": {
        // goal <agent> <Kind> [json params]
        const params = parts.length > 3 ? JSON.parse(parts.slice(3).join(" ")) : {};
        const id = session.issueGoal(parts[1], parts[2], params);
        return id ? `goal sent (${id})` : "offline";
      }
      case "ack": {
        const id = session.acknowledgeAlert(parts[1]);
        return id ? `alert acknowledged (${id})` : "offline";
      }
      case "emptied": {
        const id = session.confirmStorageEmptied(parts[1]);
        return id ? `confirmation sent (${id})` : "offline";
      }
      case "level": {
        const id = session.setAutonomyLevel(parts[1], parts[2]);
        return id ? `level change sent (${id})` : "offline";
      }
      case "tele": {
        const id = session.telecommand(
          parts[1],
          Number(parts[2] ?? 0),
          Number(parts[3] ?? 0),
          Number(parts[4] ?? 1),
        );
        return id ? `telecommand sent (${id})` : "offline";
      }
      case "help":
        return [
          "commands:",
          "  safe | emergency [case]   answer the open prompt",
          "  goal <agent> <Kind> [json params]",
          "  ack <alert_id>",
          "  emptied <agent>",
          "  level <agent> <E1|E2|E3|E4>",
          "  tele <agent> <v> <omega> <ticks>",
          "  quit",
        ].join("\n");
      default:
        return `unknown command: ${word} (try 'help')`;
    }
  } catch (err) {
    return `command failed: ${(err as Error).message}`;
  }
}
