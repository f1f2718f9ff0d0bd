// Application wiring: one channel to the engine bridge, one state container,
// one view. Exported as boot() so tests can mount the app against any
// document and WebSocket implementation.

import { ApiCallError, ApiChannel, SocketFactory } from "./channel.js";
import { Notifier } from "./notify.js";
import { BuddyView, EnginePush, StatusSnapshot } from "./protocol.js";
import { UiState } from "./state.js";
import { Actions, View } from "./view.js";

const RETRY_BASE_MS = 500;
const RETRY_MAX_MS = 8000;

export interface App {
  state: UiState;
  stop(): void;
}

export function boot(
  root: HTMLElement,
  wsUrl: string,
  factory?: SocketFactory,
  notifier: Notifier = new Notifier(),
): App {
  const state = new UiState();
  let channel: ApiChannel | null = null;
  let stopped = false;
  let retryMs = RETRY_BASE_MS;

  const call = async (method: string, params: Record<string, unknown> = {}) => {
    if (channel === null) {
      throw new Error("not connected");
    }
    return channel.call(method, params);
  };

  const guarded = (work: () => Promise<void>) => {
    void work().catch((err: unknown) => {
      if (err instanceof ApiCallError) {
        state.applyEvent({
          event: "warning",
          seq: -1,
          data: { reason: err.code, detail: err.message },
        });
      } else {
        state.applyEvent({
          event: "warning",
          seq: -1,
          data: { reason: "ui", detail: String(err) },
        });
      }
    });
  };

  const actions: Actions = {
    join(server, room, nickname) {
      if (room === "" || nickname === "") {
        state.applyEvent({
          event: "warning",
          seq: -1,
          data: { reason: "usage", detail: "conversation name and nickname are required" },
        });
        return;
      }
      guarded(async () => {
        const params: Record<string, unknown> = { room, nickname };
        if (server !== "") {
          params.server = server;
        }
        await call("join_room", params);
      });
    },
    sendMessage(text, to) {
      const key = state.echoPending(text, to !== null);
      void (async () => {
        try {
          if (to === null) {
            await call("send_group", { text });
          } else {
            await call("send_private", { to, text });
          }
          state.settleEcho(key, true);
        } catch (err) {
          state.settleEcho(key, false);
          const detail = err instanceof Error ? err.message : String(err);
          state.applyEvent({
            event: "warning",
            seq: -1,
            data: { reason: "send_failed", detail },
          });
        }
      })();
    },
    confirmFingerprint(nickname) {
      guarded(async () => {
        const view = (await call("confirm_fingerprint", { to: nickname })) as BuddyView;
        state.applyBuddy(view);
      });
    },
    startSmp(nickname, question, answer) {
      guarded(async () => {
        await call("start_smp", { to: nickname, question, answer });
      });
    },
    answerSmp(nickname, answer) {
      guarded(async () => {
        await call("answer_smp", { to: nickname, answer });
      });
    },
    offerFile(nickname, path) {
      guarded(async () => {
        await call("offer_file", { to: nickname, path });
      });
    },
    acceptFile(sid, dest) {
      guarded(async () => {
        await call("accept_file", { offer_id: sid, dest });
      });
    },
    setNotifications(on) {
      state.notificationsOn = on;
      notifier.notificationsOn = on;
      if (on) {
        void notifier.requestPermission();
      }
    },
    setAudio(on) {
      state.audioOn = on;
      notifier.audioOn = on;
    },
    leave() {
      guarded(async () => {
        await call("leave_room");
        state.room = null;
        state.selectedBuddy = null;
        state.buddies.clear();
        state.messages.length = 0;
        state.touch();
      });
    },
  };

  const view = new View(root, actions);
  state.subscribe(() => view.update(state));

  const doc = root.ownerDocument;
  const focused = () => {
    try {
      return doc.hasFocus();
    } catch {
      return true;
    }
  };

  const onPush = (push: EnginePush) => {
    state.applyEvent(push);
    if (push.event === "message" && push.data.sender !== state.me) {
      notifier.incoming(
        String(push.data.sender),
        String(push.data.text),
        focused(),
      );
    } else if (push.event === "file_offer" || push.event === "smp_request") {
      notifier.incoming(String(push.data.nickname), push.event, focused());
    }
  };

  const connectLoop = async () => {
    while (!stopped) {
      state.connection = "connecting";
      const attempt = new ApiChannel(wsUrl, factory);
      try {
        await attempt.connect();
      } catch {
        state.connection = "down";
        state.touch();
        await sleep(retryMs);
        retryMs = Math.min(retryMs * 2, RETRY_MAX_MS);
        continue;
      }
      retryMs = RETRY_BASE_MS;
      channel = attempt;
      attempt.onPush(onPush);
      const gone = new Promise<void>((resolve) => attempt.onClose(resolve));
      try {
        await attempt.call("subscribe_events");
        const status = (await attempt.call("status")) as StatusSnapshot;
        state.connection = "up";
        state.applyStatus(status);
      } catch {
        attempt.close();
        state.connection = "down";
        state.touch();
        await sleep(retryMs);
        continue;
      }
      await gone;
      channel = null;
      if (!stopped) {
        state.connection = "down";
        state.touch();
      }
    }
  };

  void connectLoop();
  view.update(state);
  return {
    state,
    stop() {
      stopped = true;
      if (channel !== null) {
        channel.close();
      }
    },
  };
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

// When loaded as the page module, mount on #app against the serving host.
if (typeof window !== "undefined" && typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root !== null && !root.dataset.testMount) {
    const scheme = window.location.protocol === "https:" ? "wss" : "ws";
    boot(root, `${scheme}://${window.location.host}/ws`);
  }
}
