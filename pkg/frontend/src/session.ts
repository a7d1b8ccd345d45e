// Review session state machine. All durable state lives on the server; this
// holds only the session id, the current view, and the undecided decision
// buffer, which survives failed submits so nothing is lost on retry.

import {
  ApiError,
  CurrentView,
  Decision,
  SessionApi,
  SlotView,
} from "./api.js";

export type CardState =
  | { kind: "pending" }
  | { kind: "accepted" }
  | { kind: "overridden"; text: string };

export interface SlotCard {
  slot: SlotView;
  state: CardState;
  validation: string | null;
}

export interface CompletionStats {
  total: number;
  accepted: number;
  overridden: number;
}

export type SessionPhase = "loading" | "reviewing" | "done";

const SLOT_IN_DETAIL = /slot (\d+)/;

export class ReviewSession {
  sessionId: string | null = null;
  elementCount = 0;
  phase: SessionPhase = "loading";
  view: CurrentView | null = null;
  cards: SlotCard[] = [];
  correctedTypes: string[] = [];
  networkError: string | null = null;
  listeners: Array<() => void> = [];

  constructor(private api: SessionApi) {}

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  /** Create a new session, or re-attach to an existing one (page reload). */
  async start(existingId?: string): Promise<void> {
    if (existingId) {
      this.sessionId = existingId;
    } else {
      const created = await this.api.createSession();
      this.sessionId = created.session_id;
      this.elementCount = created.element_count;
    }
    await this.refresh();
  }

  /** Rebuild the whole view from the server; the UI is stateless beyond the
   * session id. */
  async refresh(): Promise<void> {
    if (!this.sessionId) throw new Error("session not started");
    const view = await this.api.current(this.sessionId);
    this.view = view;
    this.elementCount = view.element_count;
    this.phase = view.done ? "done" : "reviewing";
    this.cards = (view.slots ?? []).map((slot) => ({
      slot,
      state: { kind: "pending" },
      validation: null,
    }));
    await this.refreshCorrected();
    this.networkError = null;
    this.notify();
  }

  private async refreshCorrected(): Promise<void> {
    if (!this.sessionId) return;
    const doc = await this.api.assignment(this.sessionId);
    this.correctedTypes = Array.from(
      new Set(
        doc.entries
          .filter((e) => e.provenance === "user_override")
          .map((e) => e.type),
      ),
    );
  }

  accept(slotIndex: number): void {
    const card = this.card(slotIndex);
    if (card.slot.predicted === null) {
      card.validation = "no prediction to accept; override instead";
      this.notify();
      return;
    }
    card.state = { kind: "accepted" };
    card.validation = null;
    this.notify();
  }

  override(slotIndex: number, text: string): void {
    const card = this.card(slotIndex);
    card.state = { kind: "overridden", text };
    card.validation = null;
    this.notify();
  }

  reset(slotIndex: number): void {
    const card = this.card(slotIndex);
    card.state = { kind: "pending" };
    card.validation = null;
    this.notify();
  }

  private card(slotIndex: number): SlotCard {
    const card = this.cards.find((c) => c.slot.index === slotIndex);
    if (!card) throw new Error(`no slot ${slotIndex}`);
    return card;
  }

  get allDecided(): boolean {
    return this.cards.length > 0 && this.cards.every((c) => c.state.kind !== "pending");
  }

  firstPending(): SlotCard | undefined {
    return this.cards.find((c) => c.state.kind === "pending");
  }

  /** Submit the buffered decisions. On a validation rejection the offending
   * card is marked and nothing advances; on a network failure the buffer is
   * kept for retry. */
  async submit(): Promise<boolean> {
    if (!this.sessionId || !this.view || !this.view.element_id) return false;
    if (!this.allDecided) return false;
    const decisions: Record<string, Decision> = {};
    for (const card of this.cards) {
      if (card.state.kind === "accepted") {
        decisions[String(card.slot.index)] = { action: "accept" };
      } else if (card.state.kind === "overridden") {
        decisions[String(card.slot.index)] = {
          action: "override",
          type: card.state.text,
        };
      }
    }
    try {
      await this.api.decide(this.sessionId, this.view.element_id, decisions);
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        const match = SLOT_IN_DETAIL.exec(err.detail);
        if (match) {
          const card = this.card(Number(match[1]));
          card.state = { kind: "pending" };
          card.validation = err.detail;
        }
        this.notify();
        return false;
      }
      this.networkError = err instanceof Error ? err.message : String(err);
      this.notify();
      return false;
    }
    await this.refresh();
    return true;
  }

  async undo(): Promise<void> {
    if (!this.sessionId) return;
    try {
      await this.api.undo(this.sessionId);
    } catch (err) {
      if (err instanceof ApiError) {
        this.networkError = err.detail;
        this.notify();
        return;
      }
      throw err;
    }
    await this.refresh();
  }

  /** Accepted-vs-overridden counts, derived from the server's assignment so
   * they survive page reloads. */
  async stats(): Promise<CompletionStats> {
    if (!this.sessionId) return { total: 0, accepted: 0, overridden: 0 };
    const doc = await this.api.assignment(this.sessionId);
    const overridden = doc.entries.filter(
      (e) => e.provenance === "user_override",
    ).length;
    return {
      total: doc.entries.length,
      accepted: doc.entries.length - overridden,
      overridden,
    };
  }

  async assignmentText(): Promise<string> {
    if (!this.sessionId) return "";
    return this.api.assignmentText(this.sessionId);
  }
}
