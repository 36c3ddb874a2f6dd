// WebSocket wrapper with automatic reconnect and exponential backoff.
// The socket constructor and timer are injectable so tests (and the node
// round-trip harness) can drive it without a browser.

import { ServerFrame, chatFrame, parseFrame } from "./protocol.js";

export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export interface ConnectionOptions {
  socketFactory?: (url: string) => SocketLike;
  schedule?: (fn: () => void, ms: number) => void;
  retryBaseMs?: number;
  retryMaxMs?: number;
  onFrame?: (frame: ServerFrame) => void;
  onStatus?: (status: "disconnected" | "connecting" | "connected") => void;
}

export class BridgeConnection {
  readonly url: string;
  private readonly makeSocket: (url: string) => SocketLike;
  private readonly schedule: (fn: () => void, ms: number) => void;
  private readonly retryBaseMs: number;
  private readonly retryMaxMs: number;
  private readonly onFrame?: (frame: ServerFrame) => void;
  private readonly onStatus?: ConnectionOptions["onStatus"];

  private socket: SocketLike | null = null;
  private closed = false;
  private retryMs: number;
  connected = false;

  constructor(url: string, options: ConnectionOptions = {}) {
    this.url = url;
    this.makeSocket = options.socketFactory ??
      ((u) => new WebSocket(u) as unknown as SocketLike);
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.retryBaseMs = options.retryBaseMs ?? 500;
    this.retryMaxMs = options.retryMaxMs ?? 5000;
    this.retryMs = this.retryBaseMs;
    this.onFrame = options.onFrame;
    this.onStatus = options.onStatus;
  }

  connect(): void {
    if (this.closed) return;
    this.onStatus?.("connecting");
    let socket: SocketLike;
    try {
      socket = this.makeSocket(this.url);
    } catch {
      this.scheduleRetry();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.connected = true;
      this.retryMs = this.retryBaseMs;
      this.onStatus?.("connected");
    };
    socket.onmessage = (ev) => {
      const frame = parseFrame(String(ev.data));
      if (frame) this.onFrame?.(frame);
    };
    socket.onerror = () => {
      // onclose follows; nothing to do here
    };
    socket.onclose = () => {
      const wasConnected = this.connected;
      this.connected = false;
      this.socket = null;
      this.onStatus?.("disconnected");
      if (!this.closed) this.scheduleRetry(wasConnected);
    };
  }

  private scheduleRetry(resetBackoff = false): void {
    if (resetBackoff) this.retryMs = this.retryBaseMs;
    const delay = this.retryMs;
    this.retryMs = Math.min(this.retryMs * 2, this.retryMaxMs);
    this.schedule(() => this.connect(), delay);
  }

  /** Send one chat command; returns false when not connected. */
  sendChat(text: string): boolean {
    if (!this.connected || !this.socket) return false;
    this.socket.send(chatFrame(text));
    return true;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
    this.connected = false;
  }
}
