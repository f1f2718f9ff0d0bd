// Desktop notifications and an audio ping for incoming traffic, both
// individually toggleable. Every capability is feature-detected so the UI
// stays silent (rather than crashing) in environments without Notification
// or AudioContext support.

interface NotificationLike {
  close(): void;
}

interface NotificationCtor {
  new (title: string, options?: { body?: string }): NotificationLike;
  permission: string;
  requestPermission(): Promise<string>;
}

export class Notifier {
  notificationsOn = true;
  audioOn = true;

  constructor(private readonly scope: typeof globalThis = globalThis) {}

  private notificationApi(): NotificationCtor | null {
    const ctor = (this.scope as Record<string, unknown>)["Notification"];
    return typeof ctor === "function" ? (ctor as unknown as NotificationCtor) : null;
  }

  async requestPermission(): Promise<void> {
    const api = this.notificationApi();
    if (api !== null && api.permission === "default") {
      try {
        await api.requestPermission();
      } catch {
        // permission prompts are best-effort
      }
    }
  }

  incoming(title: string, body: string, windowFocused: boolean): void {
    if (!windowFocused && this.notificationsOn) {
      this.desktopNotify(title, body);
    }
    if (this.audioOn) {
      this.ping();
    }
  }

  private desktopNotify(title: string, body: string): void {
    const api = this.notificationApi();
    if (api === null || api.permission !== "granted") {
      return;
    }
    try {
      const note = new api(title, { body });
      setTimeout(() => note.close(), 5000);
    } catch {
      // a failed notification must never take the UI down
    }
  }

  private ping(): void {
    const ctor = (this.scope as Record<string, unknown>)["AudioContext"];
    if (typeof ctor !== "function") {
      return;
    }
    try {
      const ctx = new (ctor as new () => AudioContext)();
      const osc = ctx.createOscillator();
      const gain = ctx.createGain();
      osc.type = "sine";
      osc.frequency.value = 880;
      gain.gain.setValueAtTime(0.08, ctx.currentTime);
      gain.gain.exponentialRampToValueAtTime(0.0001, ctx.currentTime + 0.2);
      osc.connect(gain);
      gain.connect(ctx.destination);
      osc.start();
      osc.stop(ctx.currentTime + 0.2);
      osc.addEventListener("ended", () => {
        void ctx.close();
      });
    } catch {
      // no audio device: stay quiet
    }
  }
}
