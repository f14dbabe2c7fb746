/**
 * TCP transport for the gateway protocol: frame stream in, commands out,
 * automatic reconnection with status callbacks. Commands time out locally
 * after 5 seconds so the operator gets a retry affordance.
 */

import * as net from "node:net";

import { encodeFrame, FrameDecoder, type ServerFrame } from "./protocol.js";

export interface TransportEvents {
  onFrame(frame: ServerFrame): void;
  onStatus(status: "connecting" | "connected" | "disconnected", detail?: string): void;
  onCommandTimeout(cmdId: string): void;
}

export const COMMAND_TIMEOUT_MS = 5000;

export class GatewayClient {
  private socket: net.Socket | null = null;
  private decoder = new FrameDecoder();
  private counter = 0;
  private closed = false;
  private reconnectDelayMs = 500;
  private timers = new Map<string, NodeJS.Timeout>();

  constructor(
    private readonly host: string,
    private readonly port: number,
    private readonly events: TransportEvents,
    private readonly reconnect: boolean = true,
  ) {}

  connect(): void {
    if (this.closed) return;
    this.events.onStatus("connecting");
    this.decoder = new FrameDecoder();
    const socket = net.createConnection({ host: this.host, port: this.port });
    this.socket = socket;
    socket.on("connect", () => this.events.onStatus("connected"));
    socket.on("data", (chunk) => {
      for (const frame of this.decoder.push(chunk)) {
        if (frame.type === "Ack" || (frame.type === "Error" && frame.cmd_id !== undefined)) {
          const timer = this.timers.get((frame as { cmd_id: string }).cmd_id);
          if (timer) {
            clearTimeout(timer);
            this.timers.delete((frame as { cmd_id: string }).cmd_id);
          }
        }
        this.events.onFrame(frame);
      }
    });
    const drop = (detail?: string) => {
      if (this.socket !== socket) return;
      this.socket = null;
      this.events.onStatus("disconnected", detail);
      if (this.reconnect && !this.closed) {
        setTimeout(() => this.connect(), this.reconnectDelayMs);
      }
    };
    socket.on("error", (err: Error) => drop(err.message));
    socket.on("close", () => drop());
  }

  get connected(): boolean {
    return this.socket !== null && !this.socket.destroyed;
  }

  /** Frame and send one command; returns its cmd_id or null when offline. */
  sendCommand(command: Record<string, unknown>): string | null {
    if (!this.socket || this.socket.destroyed) return null;
    this.counter += 1;
    const cmdId = `c${this.counter.toString().padStart(4, "0")}`;
    this.socket.write(encodeFrame({ type: "Command", cmd_id: cmdId, command }));
    const timer = setTimeout(() => {
      this.timers.delete(cmdId);
      this.events.onCommandTimeout(cmdId);
    }, COMMAND_TIMEOUT_MS);
    this.timers.set(cmdId, timer);
    return cmdId;
  }

  close(): void {
    this.closed = true;
    for (const timer of this.timers.values()) clearTimeout(timer);
    this.timers.clear();
    this.socket?.destroy();
    this.socket = null;
  }
}
