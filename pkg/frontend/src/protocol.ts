// Types for the engine's local API as exposed over the /ws bridge.
// One JSON object per WebSocket text message, in either direction:
//   client -> engine   {id, method, params}
//   engine -> client   {id, result} | {id, error: {code, message}}
//   engine -> client   {event, seq, data}   (after subscribe_events)

export interface ApiRequest {
  id: number;
  method: string;
  params: Record<string, unknown>;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

export interface ApiResponse {
  id: number;
  result?: unknown;
  error?: ApiErrorBody;
}

export interface EnginePush {
  event: string;
  seq: number;
  data: Record<string, unknown>;
}

export type Inbound = ApiResponse | EnginePush;

export function isPush(msg: Inbound): msg is EnginePush {
  return typeof (msg as EnginePush).event === "string";
}

// -- engine-side data shapes ---------------------------------------------------

export type RgbTriple = [number, number, number];

export type AuthStatus = "unverified" | "smp_verified" | "fingerprint_verified";

export interface BuddyView {
  nickname: string;
  fingerprint: string;
  colors: RgbTriple[];
  auth_status: AuthStatus;
  session: boolean;
}

export interface MessageEntry {
  sender: string;
  text: string;
  timestamp: number;
  private: boolean;
  state: string;
}

export interface KeygenState {
  phase: "idle" | "searching" | "done" | "failed";
  elapsed_ms: number;
}

export interface StatusSnapshot {
  ready: boolean;
  keygen: KeygenState;
  fingerprint: string | null;
  colors: RgbTriple[] | null;
  room: string | null;
  me: string | null;
  buddies: BuddyView[];
  messages: MessageEntry[];
  transcript_digest: string | null;
}

export type SmpOutcome = "match" | "no_match" | "aborted";

export interface FileOfferData {
  nickname: string;
  sid: string;
  name: string;
  size: number;
}
