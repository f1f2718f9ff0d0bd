// DOM rendering. The view owns a fixed set of input elements (so typing
// survives re-renders) and rebuilds everything else from UiState on each
// update. All user-supplied strings go through textContent, never innerHTML.

import { cssHex } from "./colors.js";
import { BuddyView, RgbTriple } from "./protocol.js";
import { UiState } from "./state.js";

export interface Actions {
  join(server: string, room: string, nickname: string): void;
  sendMessage(text: string, to: string | null): void;
  confirmFingerprint(nickname: string): void;
  startSmp(nickname: string, question: string, answer: string): void;
  answerSmp(nickname: string, answer: string): void;
  offerFile(nickname: string, path: string): void;
  acceptFile(sid: string, dest: string): void;
  setNotifications(on: boolean): void;
  setAudio(on: boolean): void;
  leave(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

function swatchRow(doc: Document, colors: RgbTriple[] | null): HTMLElement {
  const row = el(doc, "span", "swatches");
  for (const triple of colors ?? []) {
    const dot = el(doc, "span", "swatch");
    dot.style.backgroundColor = cssHex(triple);
    dot.title = cssHex(triple);
    row.appendChild(dot);
  }
  return row;
}

const BADGE_TEXT: Record<string, string> = {
  unverified: "unverified",
  smp_verified: "verified (question)",
  fingerprint_verified: "verified (fingerprint)",
};

function authBadge(doc: Document, status: string): HTMLElement {
  return el(doc, "span", `badge ${status}`, BADGE_TEXT[status] ?? status);
}

export class View {
  private readonly doc: Document;
  private readonly banner: HTMLElement;
  private readonly screenHost: HTMLElement;
  private readonly overlay: HTMLElement;

  // persistent inputs: same element objects across renders, so text survives
  private readonly serverInput: HTMLInputElement;
  private readonly roomInput: HTMLInputElement;
  private readonly nickInput: HTMLInputElement;
  private readonly composer: HTMLInputElement;
  private readonly targetSelect: HTMLSelectElement;
  private readonly smpQuestion: HTMLInputElement;
  private readonly smpAnswer: HTMLInputElement;
  private readonly smpReply: HTMLInputElement;
  private readonly filePath: HTMLInputElement;
  private readonly fileDest: HTMLInputElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly actions: Actions,
  ) {
    this.doc = root.ownerDocument;
    const doc = this.doc;
    this.banner = el(doc, "div", "warning-banner");
    this.screenHost = el(doc, "div", "screen-host");
    this.overlay = el(doc, "div", "reconnect-overlay");
    this.overlay.appendChild(
      el(doc, "p", "", "connection to the engine lost — reconnecting…"),
    );
    this.overlay.hidden = true;
    root.replaceChildren(this.banner, this.screenHost, this.overlay);

    this.serverInput = el(doc, "input", "server-input");
    this.serverInput.placeholder = "relay host:port (blank = engine default)";
    this.roomInput = el(doc, "input", "room-input");
    this.roomInput.placeholder = "conversation name";
    this.nickInput = el(doc, "input", "nick-input");
    this.nickInput.placeholder = "nickname";
    this.composer = el(doc, "input", "composer-input");
    this.composer.placeholder = "type a message…";
    this.composer.dir = "auto";
    this.targetSelect = el(doc, "select", "target-select");
    this.smpQuestion = el(doc, "input", "smp-question");
    this.smpQuestion.placeholder = "shared-secret question";
    this.smpAnswer = el(doc, "input", "smp-answer");
    this.smpAnswer.placeholder = "answer";
    this.smpReply = el(doc, "input", "smp-reply");
    this.smpReply.placeholder = "your answer";
    this.filePath = el(doc, "input", "file-path");
    this.filePath.placeholder = "path of file to send";
    this.fileDest = el(doc, "input", "file-dest");
    this.fileDest.placeholder = "save incoming file as…";
  }

  update(state: UiState): void {
    this.renderBanner(state);
    this.overlay.hidden = state.connection !== "down";
    switch (state.screen) {
      case "login":
        this.renderLogin(state);
        break;
      case "keygen":
        this.renderKeygen(state);
        break;
      case "conversation":
        this.renderConversation(state);
        break;
    }
  }

  private renderBanner(state: UiState): void {
    const doc = this.doc;
    this.banner.replaceChildren();
    for (const warning of state.warnings) {
      const line = el(doc, "div", "warning");
      line.appendChild(el(doc, "strong", "", warning.reason));
      line.appendChild(el(doc, "span", "", " " + warning.detail));
      const dismiss = el(doc, "button", "dismiss", "x");
      dismiss.addEventListener("click", () => state.dismissWarning(warning.key));
      line.appendChild(dismiss);
      this.banner.appendChild(line);
    }
  }

  private renderLogin(state: UiState): void {
    const doc = this.doc;
    const pane = el(doc, "div", "login-pane");
    pane.appendChild(el(doc, "h1", "", "hushroom"));
    pane.appendChild(
      el(doc, "p", "tagline", "ephemeral, end-to-end encrypted group chat"),
    );
    const keyLine = state.ready
      ? "identity key ready"
      : "identity key not generated yet";
    pane.appendChild(el(doc, "p", "key-status", keyLine));
    if (state.fingerprint !== null) {
      const idRow = el(doc, "p", "own-identity");
      idRow.appendChild(swatchRow(doc, state.colors));
      idRow.appendChild(el(doc, "code", "fingerprint", state.fingerprint));
      pane.appendChild(idRow);
    }
    const form = el(doc, "div", "login-form");
    form.appendChild(this.serverInput);
    form.appendChild(this.roomInput);
    form.appendChild(this.nickInput);
    const join = el(doc, "button", "join-button", "join conversation");
    join.disabled = !state.ready;
    join.addEventListener("click", () => {
      this.actions.join(
        this.serverInput.value.trim(),
        this.roomInput.value.trim(),
        this.nickInput.value.trim(),
      );
    });
    form.appendChild(join);
    pane.appendChild(form);
    this.screenHost.replaceChildren(pane);
  }

  private renderKeygen(state: UiState): void {
    const doc = this.doc;
    const pane = el(doc, "div", "keygen-pane");
    pane.appendChild(el(doc, "h1", "", "generating your identity key…"));
    const seconds = (state.keygen.elapsed_ms / 1000).toFixed(1);
    pane.appendChild(el(doc, "p", "keygen-elapsed", `${seconds}s elapsed`));
    if (state.keygenFact) {
      const fact = el(doc, "p", "keygen-fact");
      fact.appendChild(el(doc, "span", "fact-label", "while you wait: "));
      fact.appendChild(el(doc, "span", "fact-text", state.keygenFact));
      pane.appendChild(fact);
    }
    this.screenHost.replaceChildren(pane);
  }

  private renderConversation(state: UiState): void {
    const doc = this.doc;
    const layout = el(doc, "div", "conversation");
    layout.appendChild(this.renderHeader(state));
    const body = el(doc, "div", "conversation-body");
    body.appendChild(this.renderMessages(state));
    body.appendChild(this.renderRoster(state));
    layout.appendChild(body);
    layout.appendChild(this.renderComposer(state));
    this.screenHost.replaceChildren(layout);
    const log = this.screenHost.querySelector(".message-log");
    if (log !== null) {
      log.scrollTop = log.scrollHeight;
    }
  }

  private renderHeader(state: UiState): HTMLElement {
    const doc = this.doc;
    const header = el(doc, "header", "room-header");
    header.appendChild(el(doc, "h1", "room-name", state.room ?? ""));
    const meRow = el(doc, "span", "me-row");
    meRow.appendChild(swatchRow(doc, state.colors));
    meRow.appendChild(el(doc, "span", "me-name", state.me ?? ""));
    header.appendChild(meRow);
    const settings = el(doc, "span", "settings");
    settings.appendChild(
      this.toggle(doc, "notifications", state.notificationsOn, (on) =>
        this.actions.setNotifications(on),
      ),
    );
    settings.appendChild(
      this.toggle(doc, "sound", state.audioOn, (on) => this.actions.setAudio(on)),
    );
    const leave = el(doc, "button", "leave-button", "leave");
    leave.addEventListener("click", () => this.actions.leave());
    settings.appendChild(leave);
    header.appendChild(settings);
    return header;
  }

  private toggle(
    doc: Document,
    label: string,
    checked: boolean,
    onChange: (on: boolean) => void,
  ): HTMLElement {
    const wrap = el(doc, "label", `toggle toggle-${label}`);
    const box = el(doc, "input");
    box.type = "checkbox";
    box.checked = checked;
    box.addEventListener("change", () => onChange(box.checked));
    wrap.appendChild(box);
    wrap.appendChild(el(doc, "span", "", label));
    return wrap;
  }

  private renderMessages(state: UiState): HTMLElement {
    const doc = this.doc;
    const log = el(doc, "div", "message-log");
    for (const line of state.messages) {
      const mine = line.sender === state.me;
      const classes = [
        "message",
        mine ? "mine" : "theirs",
        line.private ? "private" : "",
        line.pending ? "pending" : "",
      ]
        .filter(Boolean)
        .join(" ");
      const row = el(doc, "div", classes);
      const buddy = state.buddies.get(line.sender);
      const colors = mine ? state.colors : buddy?.colors ?? null;
      row.appendChild(swatchRow(doc, colors));
      row.appendChild(el(doc, "span", "sender", line.sender));
      if (line.private) {
        row.appendChild(el(doc, "span", "private-mark", "(private)"));
      }
      const text = el(doc, "span", "text", line.text);
      text.dir = "auto"; // right-to-left scripts lay out per content
      row.appendChild(text);
      if (line.pending) {
        row.appendChild(el(doc, "span", "pending-mark", "sending…"));
      }
      log.appendChild(row);
    }
    for (const transfer of state.transfers.values()) {
      const note = transfer.done
        ? `transfer ${transfer.sid} complete (${transfer.label})` +
          (transfer.path !== undefined ? ` → ${transfer.path}` : "")
        : `transfer ${transfer.sid}: ${transfer.label}`;
      log.appendChild(
        el(doc, "div", `transfer ${transfer.done ? "done" : "running"}`, note),
      );
    }
    return log;
  }

  private renderRoster(state: UiState): HTMLElement {
    const doc = this.doc;
    const aside = el(doc, "aside", "roster");
    aside.appendChild(el(doc, "h2", "", "in this conversation"));
    const list = el(doc, "ul", "buddy-list");
    for (const buddy of state.buddies.values()) {
      const item = el(doc, "li", "buddy");
      if (buddy.nickname === state.selectedBuddy) {
        item.classList.add("selected");
      }
      item.dataset.nick = buddy.nickname;
      item.appendChild(swatchRow(doc, buddy.colors));
      item.appendChild(el(doc, "span", "buddy-name", buddy.nickname));
      item.appendChild(authBadge(doc, buddy.auth_status));
      if (!buddy.session) {
        item.appendChild(el(doc, "span", "no-session", "·"));
      }
      item.addEventListener("click", () => {
        state.selectedBuddy =
          state.selectedBuddy === buddy.nickname ? null : buddy.nickname;
        this.update(state);
      });
      list.appendChild(item);
    }
    aside.appendChild(list);
    const selected =
      state.selectedBuddy !== null ? state.buddies.get(state.selectedBuddy) : undefined;
    if (selected !== undefined) {
      aside.appendChild(this.renderBuddyPane(state, selected));
    }
    for (const offer of state.offers.values()) {
      aside.appendChild(this.renderOffer(state, offer.sid));
    }
    return aside;
  }

  private renderBuddyPane(state: UiState, buddy: BuddyView): HTMLElement {
    const doc = this.doc;
    const pane = el(doc, "div", "buddy-pane");
    pane.appendChild(el(doc, "h3", "", buddy.nickname));
    pane.appendChild(swatchRow(doc, buddy.colors));
    pane.appendChild(el(doc, "code", "fingerprint", buddy.fingerprint));
    pane.appendChild(authBadge(doc, buddy.auth_status));
    const outcome = state.smpOutcomes.get(buddy.nickname);
    if (outcome !== undefined) {
      pane.appendChild(el(doc, "p", `smp-outcome ${outcome}`, `verification: ${outcome}`));
    }

    const confirm = el(doc, "button", "confirm-fp", "I compared the fingerprint");
    confirm.addEventListener("click", () =>
      this.actions.confirmFingerprint(buddy.nickname),
    );
    pane.appendChild(confirm);

    const prompt = state.smpPrompts.get(buddy.nickname);
    if (prompt !== undefined) {
      const ask = el(doc, "div", "smp-incoming");
      ask.appendChild(
        el(doc, "p", "smp-their-question", `${buddy.nickname} asks: ${prompt.question}`),
      );
      ask.appendChild(this.smpReply);
      const reply = el(doc, "button", "smp-reply-button", "answer");
      reply.addEventListener("click", () => {
        this.actions.answerSmp(buddy.nickname, this.smpReply.value);
        this.smpReply.value = "";
      });
      ask.appendChild(reply);
      pane.appendChild(ask);
    } else {
      const ask = el(doc, "div", "smp-outgoing");
      ask.appendChild(this.smpQuestion);
      ask.appendChild(this.smpAnswer);
      const start = el(doc, "button", "smp-start-button", "verify by question");
      start.addEventListener("click", () => {
        this.actions.startSmp(
          buddy.nickname,
          this.smpQuestion.value,
          this.smpAnswer.value,
        );
        this.smpAnswer.value = "";
      });
      ask.appendChild(start);
      pane.appendChild(ask);
    }

    const send = el(doc, "div", "file-send");
    send.appendChild(this.filePath);
    const offer = el(doc, "button", "file-offer-button", "send file");
    offer.addEventListener("click", () => {
      this.actions.offerFile(buddy.nickname, this.filePath.value.trim());
    });
    send.appendChild(offer);
    pane.appendChild(send);
    return pane;
  }

  private renderOffer(state: UiState, sid: string): HTMLElement {
    const doc = this.doc;
    const offer = state.offers.get(sid)!;
    const pane = el(doc, "div", "file-incoming");
    pane.appendChild(
      el(
        doc,
        "p",
        "offer-line",
        `${offer.nickname} offers ${offer.name} (${offer.size} bytes)`,
      ),
    );
    if (!offer.accepted) {
      pane.appendChild(this.fileDest);
      const accept = el(doc, "button", "file-accept-button", "accept");
      accept.addEventListener("click", () => {
        const dest = this.fileDest.value.trim();
        if (dest !== "") {
          state.acceptOffer(sid);
          this.actions.acceptFile(sid, dest);
        }
      });
      pane.appendChild(accept);
    } else {
      pane.appendChild(el(doc, "p", "offer-accepted", "receiving…"));
    }
    return pane;
  }

  private renderComposer(state: UiState): HTMLElement {
    const doc = this.doc;
    const bar = el(doc, "div", "composer");
    const previous = this.targetSelect.value;
    this.targetSelect.replaceChildren();
    const everyone = el(doc, "option", "", `everyone in ${state.room ?? "the room"}`);
    everyone.value = "";
    this.targetSelect.appendChild(everyone);
    for (const nickname of state.buddies.keys()) {
      const option = el(doc, "option", "", `privately to ${nickname}`);
      option.value = nickname;
      this.targetSelect.appendChild(option);
    }
    if ([...this.targetSelect.options].some((o) => o.value === previous)) {
      this.targetSelect.value = previous;
    }
    bar.appendChild(this.targetSelect);
    bar.appendChild(this.composer);
    const send = el(doc, "button", "send-button", "send");
    const submit = () => {
      const text = this.composer.value;
      if (text.trim() === "") {
        return;
      }
      const target = this.targetSelect.value;
      this.actions.sendMessage(text, target === "" ? null : target);
      this.composer.value = "";
    };
    send.addEventListener("click", submit);
    this.composer.addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter") {
        submit();
      }
    });
    bar.appendChild(send);
    return bar;
  }
}
