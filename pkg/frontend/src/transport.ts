// Live-channel transport with auto-reconnect. Abstracted so tests can swap
// in a mock without a browser WebSocket.

import { ClientMsg, ServerMsg, encodeClientMsg, parseServerMsg } from "./protocol.js";

export interface Transport {
  send(msg: ClientMsg): void;
  close(): void;
}

export interface TransportHooks {
  onMessage(msg: ServerMsg): void;
  onStatus(status: "connecting" | "open" | "closed"): void;
}

interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  readyState: number;
}

type SocketFactory = (url: string) => WebSocketLike;

const RECONNECT_DELAY_MS = 1000;

export class LiveTransport implements Transport {
  private socket: WebSocketLike | null = null;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private hooks: TransportHooks,
    private factory: SocketFactory = (url) => new WebSocket(url) as unknown as WebSocketLike,
  ) {
    this.connect();
  }

  private connect(): void {
    this.hooks.onStatus("connecting");
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => this.hooks.onStatus("open");
    socket.onmessage = (ev) => {
      const msg = parseServerMsg(String(ev.data));
      if (msg) {
        this.hooks.onMessage(msg);
      }
    };
    socket.onclose = () => {
      this.hooks.onStatus("closed");
      if (!this.closed) {
        this.timer = setTimeout(() => this.connect(), RECONNECT_DELAY_MS);
      }
    };
  }

  send(msg: ClientMsg): void {
    if (this.socket && this.socket.readyState === 1) {
      this.socket.send(encodeClientMsg(msg));
    }
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    this.socket?.close();
  }
}
