// WebSocket channel to the engine's API bridge: request/response correlation
// by id, plus fan-out of event pushes to subscribers.

import { ApiRequest, ApiResponse, EnginePush, Inbound, isPush } from "./protocol.js";

export class ApiCallError extends Error {
  readonly code: string;

  constructor(code: string, message: string) {
    super(message);
    this.name = "ApiCallError";
    this.code = code;
  }
}

export class ChannelClosedError extends Error {
  constructor() {
    super("channel closed");
    this.name = "ChannelClosedError";
  }
}

interface PendingCall {
  resolve: (value: unknown) => void;
  reject: (err: Error) => void;
}

export type SocketFactory = (url: string) => WebSocket;

const defaultFactory: SocketFactory = (url) => new WebSocket(url);

export class ApiChannel {
  private socket: WebSocket | null = null;
  private nextId = 1;
  private readonly pending = new Map<number, PendingCall>();
  private readonly pushHandlers: Array<(push: EnginePush) => void> = [];
  private readonly closeHandlers: Array<() => void> = [];
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly factory: SocketFactory = defaultFactory,
  ) {}

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = this.factory(this.url);
      this.socket = socket;
      let settled = false;
      socket.addEventListener("open", () => {
        settled = true;
        resolve();
      });
      socket.addEventListener("error", () => {
        if (!settled) {
          settled = true;
          reject(new Error(`cannot reach ${this.url}`));
        }
      });
      socket.addEventListener("close", () => {
        this.handleClose();
        if (!settled) {
          settled = true;
          reject(new Error(`cannot reach ${this.url}`));
        }
      });
      socket.addEventListener("message", (event) => {
        this.handleMessage(String((event as MessageEvent).data));
      });
    });
  }

  call<T = unknown>(method: string, params: Record<string, unknown> = {}): Promise<T> {
    const socket = this.socket;
    if (this.closed || socket === null || socket.readyState !== socket.OPEN) {
      return Promise.reject(new ChannelClosedError());
    }
    const request: ApiRequest = { id: this.nextId++, method, params };
    return new Promise<T>((resolve, reject) => {
      this.pending.set(request.id, {
        resolve: (value) => resolve(value as T),
        reject,
      });
      socket.send(JSON.stringify(request));
    });
  }

  onPush(handler: (push: EnginePush) => void): void {
    this.pushHandlers.push(handler);
  }

  onClose(handler: () => void): void {
    this.closeHandlers.push(handler);
  }

  close(): void {
    this.closed = true;
    if (this.socket !== null) {
      this.socket.close();
    }
  }

  private handleMessage(raw: string): void {
    let msg: Inbound;
    try {
      msg = JSON.parse(raw) as Inbound;
    } catch {
      return; // a non-JSON frame is dropped, never crashes the UI
    }
    if (isPush(msg)) {
      for (const handler of this.pushHandlers) {
        handler(msg);
      }
      return;
    }
    const response = msg as ApiResponse;
    const waiter = this.pending.get(response.id);
    if (waiter === undefined) {
      return;
    }
    this.pending.delete(response.id);
    if (response.error !== undefined) {
      waiter.reject(new ApiCallError(response.error.code, response.error.message));
    } else {
      waiter.resolve(response.result);
    }
  }

  private handleClose(): void {
    const waiters = [...this.pending.values()];
    this.pending.clear();
    for (const waiter of waiters) {
      waiter.reject(new ChannelClosedError());
    }
    for (const handler of this.closeHandlers) {
      handler();
    }
    this.closeHandlers.length = 0;
  }
}
