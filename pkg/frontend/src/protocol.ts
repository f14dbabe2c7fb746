/**
 * Wire protocol shared with the gateway: length-prefixed frames, a 4-byte
 * big-endian payload length followed by one UTF-8 JSON document.
 */

export const PROTOCOL_VERSION = 1;

export interface HelloFrame {
  type: "Hello";
  protocol: number;
  scenario: string;
  tick: number;
}

export interface MapDump {
  width: number;
  height: number;
  resolution: number;
  origin: { x: number; y: number; theta: number };
  rows: string[];
  semantic_rows: string[];
}

export interface EntityView {
  id: string;
  kind: string;
  x: number;
  y: number;
  theta: number;
  footprint_radius: number;
  posture: string | null;
}

export interface TrackView {
  track_id: string;
  cls: string;
  x: number;
  y: number;
  status: string;
}

export interface GoalView {
  goal_id: string;
  kind: string;
  required_level: string;
  params: Record<string, unknown>;
  status: string;
  failure_reason: string | null;
  originator: string;
}

export interface PromptView {
  case_id: string;
  astronaut: string;
  t_prompt: number;
}

export interface AlertView {
  alert_id: string;
  recipient: string;
  reason: string;
  ref: Record<string, unknown>;
  tick: number;
}

export interface SnapshotFrame {
  type: "Snapshot";
  tick: number;
  map: MapDump | null;
  entities: EntityView[];
  tracks: TrackView[];
  goals: Record<string, GoalView>;
  prompts: PromptView[];
  alerts: AlertView[];
  storage: Record<string, (string | null)[]>;
  levels: Record<string, string>;
}

export interface EventRecord {
  tick: number;
  seq: number;
  source: string;
  type: string;
  payload: Record<string, unknown>;
}

export interface EventFrame {
  type: "Event";
  record: EventRecord;
}

export interface CommandFrame {
  type: "Command";
  cmd_id: string;
  command: Record<string, unknown>;
}

export interface AckFrame {
  type: "Ack";
  cmd_id: string;
  result: Record<string, unknown>;
}

export interface ErrorFrame {
  type: "Error";
  cmd_id?: string;
  reason: string;
  detail?: string;
}

export type ServerFrame = HelloFrame | SnapshotFrame | EventFrame | AckFrame | ErrorFrame;

export function encodeFrame(doc: unknown): Buffer {
  const payload = Buffer.from(JSON.stringify(doc), "utf-8");
  const frame = Buffer.alloc(4 + payload.length);
  frame.writeUInt32BE(payload.length, 0);
  payload.copy(frame, 4);
  return frame;
}

/** Incremental decoder: feed arbitrary chunks, get complete frames out. */
export class FrameDecoder {
  private pending: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): ServerFrame[] {
    this.pending = this.pending.length === 0 ? chunk : Buffer.concat([this.pending, chunk]);
    const frames: ServerFrame[] = [];
    for (;;) {
      if (this.pending.length < 4) break;
      const length = this.pending.readUInt32BE(0);
      if (this.pending.length < 4 + length) break;
      const body = this.pending.subarray(4, 4 + length).toString("utf-8");
      this.pending = this.pending.subarray(4 + length);
      frames.push(JSON.parse(body) as ServerFrame);
    }
    return frames;
  }
}
