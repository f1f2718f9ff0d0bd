// Single UI state container. Everything rendered comes from engine data that
// arrived through status snapshots or event pushes; the only client-side
// additions are pending echoes of our own outbound messages, which are
// reconciled the moment the engine acknowledges the send.

import {
  AuthStatus,
  BuddyView,
  EnginePush,
  FileOfferData,
  KeygenState,
  RgbTriple,
  SmpOutcome,
  StatusSnapshot,
} from "./protocol.js";

export type Screen = "login" | "keygen" | "conversation";

export interface ChatLine {
  sender: string;
  text: string;
  private: boolean;
  pending: boolean;
  key: number;
}

export interface SmpPrompt {
  nickname: string;
  question: string;
}

export interface OfferLine extends FileOfferData {
  accepted: boolean;
}

export interface TransferLine {
  sid: string;
  direction: "send" | "recv";
  label: string; // e.g. "3/16 frames" or "65536 bytes"
  done: boolean;
  path?: string;
}

export interface WarningLine {
  reason: string;
  detail: string;
  key: number;
}

const WARNING_CAP = 5;

export class UiState {
  connection: "idle" | "connecting" | "up" | "down" = "idle";
  keygen: KeygenState = { phase: "idle", elapsed_ms: 0 };
  keygenFact = "";
  ready = false;
  room: string | null = null;
  me: string | null = null;
  fingerprint: string | null = null;
  colors: RgbTriple[] | null = null;
  readonly buddies = new Map<string, BuddyView>();
  readonly messages: ChatLine[] = [];
  readonly smpPrompts = new Map<string, SmpPrompt>();
  readonly smpOutcomes = new Map<string, SmpOutcome>();
  readonly offers = new Map<string, OfferLine>();
  readonly transfers = new Map<string, TransferLine>();
  readonly warnings: WarningLine[] = [];
  selectedBuddy: string | null = null;
  notificationsOn = true;
  audioOn = true;

  private nextKey = 1;
  private readonly listeners: Array<() => void> = [];

  get screen(): Screen {
    if (this.room !== null) {
      return "conversation";
    }
    if (this.keygen.phase === "searching") {
      return "keygen";
    }
    return "login";
  }

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  // For state mutated directly by the app shell (connection flips, leave).
  touch(): void {
    this.changed();
  }

  private changed(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  applyStatus(status: StatusSnapshot): void {
    this.ready = status.ready;
    this.keygen = status.keygen;
    this.fingerprint = status.fingerprint;
    this.colors = status.colors;
    this.room = status.room;
    this.me = status.me;
    this.buddies.clear();
    for (const buddy of status.buddies) {
      this.buddies.set(buddy.nickname, buddy);
    }
    this.messages.length = 0;
    for (const entry of status.messages) {
      this.messages.push({
        sender: entry.sender,
        text: entry.text,
        private: entry.private,
        pending: false,
        key: this.nextKey++,
      });
    }
    this.changed();
  }

  // Record our own outbound message immediately; returns a key the caller
  // settles (or withdraws) once the engine answers the send call.
  echoPending(text: string, isPrivate: boolean): number {
    const key = this.nextKey++;
    this.messages.push({
      sender: this.me ?? "me",
      text,
      private: isPrivate,
      pending: true,
      key,
    });
    this.changed();
    return key;
  }

  settleEcho(key: number, delivered: boolean): void {
    const index = this.messages.findIndex((line) => line.key === key);
    if (index < 0) {
      return;
    }
    if (delivered) {
      this.messages[index]!.pending = false;
    } else {
      this.messages.splice(index, 1);
    }
    this.changed();
  }

  applyEvent(push: EnginePush): void {
    const data = push.data;
    switch (push.event) {
      case "keygen_progress": {
        this.keygen = {
          phase: data.phase as KeygenState["phase"],
          elapsed_ms: (data.elapsed_ms as number) ?? 0,
        };
        if (typeof data.fact === "string") {
          this.keygenFact = data.fact;
        }
        if (this.keygen.phase === "done") {
          this.ready = true;
        }
        break;
      }
      case "joined": {
        this.room = data.room as string;
        this.me = data.me as string;
        break;
      }
      case "buddy_joined": {
        const view = data as unknown as BuddyView;
        this.buddies.set(view.nickname, view);
        break;
      }
      case "buddy_left": {
        const nickname = data.nickname as string;
        this.buddies.delete(nickname);
        if (this.selectedBuddy === nickname) {
          this.selectedBuddy = null;
        }
        break;
      }
      case "message": {
        this.messages.push({
          sender: data.sender as string,
          text: data.text as string,
          private: Boolean(data.private),
          pending: false,
          key: this.nextKey++,
        });
        break;
      }
      case "smp_request": {
        const nickname = data.nickname as string;
        this.smpPrompts.set(nickname, {
          nickname,
          question: (data.question as string) ?? "",
        });
        break;
      }
      case "smp_result": {
        const nickname = data.nickname as string;
        const outcome = data.outcome as SmpOutcome;
        this.smpOutcomes.set(nickname, outcome);
        this.smpPrompts.delete(nickname);
        if (outcome === "match") {
          this.markAuth(nickname, "smp_verified");
        }
        break;
      }
      case "file_offer": {
        const offer = data as unknown as FileOfferData;
        this.offers.set(offer.sid, { ...offer, accepted: false });
        break;
      }
      case "file_progress": {
        const sid = data.sid as string;
        const direction = data.direction as "send" | "recv";
        const label =
          direction === "send"
            ? `${data.frames_sent}/${data.frames_total} frames`
            : `${data.bytes_received} bytes`;
        this.transfers.set(sid, { sid, direction, label, done: false });
        break;
      }
      case "file_done": {
        const sid = data.sid as string;
        const direction = data.direction as "send" | "recv";
        this.transfers.set(sid, {
          sid,
          direction,
          label: `${data.size} bytes`,
          done: true,
          path: typeof data.path === "string" ? data.path : undefined,
        });
        this.offers.delete(sid);
        break;
      }
      case "warning": {
        this.pushWarning(data.reason as string, data.detail as string);
        break;
      }
      case "error": {
        this.pushWarning(data.code as string, data.detail as string);
        break;
      }
      default:
        break; // unknown event kinds are ignored, never fatal
    }
    this.changed();
  }

  markAuth(nickname: string, status: AuthStatus): void {
    const buddy = this.buddies.get(nickname);
    if (buddy !== undefined) {
      this.buddies.set(nickname, { ...buddy, auth_status: status });
    }
  }

  // Engine calls that return a fresh buddy view (e.g. fingerprint
  // confirmation) feed it straight back into the roster.
  applyBuddy(view: BuddyView): void {
    this.buddies.set(view.nickname, view);
    this.changed();
  }

  acceptOffer(sid: string): void {
    const offer = this.offers.get(sid);
    if (offer !== undefined) {
      this.offers.set(sid, { ...offer, accepted: true });
      this.changed();
    }
  }

  dismissWarning(key: number): void {
    const index = this.warnings.findIndex((w) => w.key === key);
    if (index >= 0) {
      this.warnings.splice(index, 1);
      this.changed();
    }
  }

  private pushWarning(reason: string, detail: string): void {
    this.warnings.push({ reason, detail, key: this.nextKey++ });
    if (this.warnings.length > WARNING_CAP) {
      this.warnings.splice(0, this.warnings.length - WARNING_CAP);
    }
  }
}
