// DOM rendering: four context panels (main code always visible), one card
// per annotation slot, progress over the usee-to-user schedule, and the
// completion screen with the assignment download link.

import { ReviewSession, SlotCard } from "./session.js";

// Matched against already-escaped HTML.
const MARKER = /&lt;extra_id_\d+&gt;/g;

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;");
}

function escapeRegExp(text: string): string {
  return text.replace(/[.*+?^${}()|[\]\\]/g, "\\$&");
}

/** Escape code for display, highlighting marker tokens and any previously
 * corrected types. */
export function renderCode(text: string, correctedTypes: string[]): string {
  let html = escapeHtml(text);
  html = html.replace(MARKER, (m) => `<mark class="marker">${m}</mark>`);
  for (const corrected of correctedTypes) {
    if (!corrected) continue;
    const pattern = new RegExp(escapeRegExp(escapeHtml(corrected)), "g");
    html = html.replace(pattern, (m) => `<mark class="corrected">${m}</mark>`);
  }
  return html;
}

function panel(title: string, body: string, corrected: string[], open: boolean): string {
  const content = body
    ? `<pre><code>${renderCode(body, corrected)}</code></pre>`
    : `<p class="empty">(empty)</p>`;
  return `<details class="panel" data-panel="${title}" ${open ? "open" : ""}>
    <summary>${title}</summary>${content}</details>`;
}

function slotLabel(card: SlotCard): string {
  const { role, name } = card.slot;
  if (role === "parameter") return `parameter ${name}`;
  if (role === "return") return "return";
  return `variable ${name}`;
}

function cardHtml(card: SlotCard): string {
  const state = card.state;
  const decided = state.kind !== "pending";
  const shownType =
    state.kind === "overridden" ? state.text : card.slot.predicted ?? "(none)";
  return `<li class="slot-card ${state.kind}" data-slot="${card.slot.index}">
    <span class="slot-label">${escapeHtml(slotLabel(card))}</span>
    <code class="slot-type">${escapeHtml(shownType)}</code>
    <span class="slot-state">${state.kind}</span>
    <button class="accept" data-slot="${card.slot.index}" ${decided ? "disabled" : ""}>accept</button>
    <button class="edit" data-slot="${card.slot.index}">edit</button>
    <input class="override-input" data-slot="${card.slot.index}"
      placeholder="type annotation" value="${
        state.kind === "overridden" ? escapeHtml(state.text) : ""
      }" hidden>
    ${card.validation ? `<p class="validation-error">${escapeHtml(card.validation)}</p>` : ""}
  </li>`;
}

export function render(root: HTMLElement, session: ReviewSession): void {
  if (session.phase === "loading") {
    root.innerHTML = `<p class="loading">loading…</p>`;
    return;
  }
  if (session.phase === "done") {
    root.innerHTML = `<section class="completion">
      <h2>Review complete</h2>
      <p class="stats" data-role="stats"></p>
      <a class="download" download="assignment.json" href="#">download assignment</a>
    </section>`;
    void session.stats().then((stats) => {
      const el = root.querySelector<HTMLElement>("[data-role=stats]");
      if (el) {
        el.textContent =
          `${stats.total} slots decided: ${stats.accepted} accepted, ` +
          `${stats.overridden} corrected`;
      }
    });
    void session.assignmentText().then((text) => {
      const link = root.querySelector<HTMLAnchorElement>("a.download");
      if (link) {
        link.href = "data:application/json;charset=utf-8," + encodeURIComponent(text);
      }
    });
    return;
  }

  const view = session.view;
  if (!view || !view.segments) return;
  const corrected = session.correctedTypes;
  root.innerHTML = `
    <header>
      <h1>element <code>${escapeHtml(view.element_id ?? "")}</code></h1>
      <p class="progress">element ${view.index + 1} of ${view.element_count} (usee-to-user order)</p>
      ${session.networkError ? `<p class="retry-banner">request failed: ${escapeHtml(session.networkError)} — your decisions are kept, retry with submit</p>` : ""}
    </header>
    <section class="context">
      ${panel("preamble", view.segments.preamble, corrected, false)}
      ${panel("usees", view.segments.usees, corrected, true)}
      <section class="panel main-code" data-panel="main_code">
        <h2>main code</h2>
        <pre><code>${renderCode(view.segments.main_code, corrected)}</code></pre>
      </section>
      ${panel("users", view.segments.users, corrected, false)}
    </section>
    <ul class="slots">${session.cards.map(cardHtml).join("")}</ul>
    <footer>
      <button class="submit" ${session.allDecided ? "" : "disabled"}>submit &amp; next</button>
      <button class="undo">undo last element</button>
      <p class="hint">Enter = accept next pending · E = edit · submit advances</p>
    </footer>`;

  for (const button of root.querySelectorAll<HTMLButtonElement>("button.accept")) {
    button.addEventListener("click", () => {
      session.accept(Number(button.dataset.slot));
    });
  }
  for (const button of root.querySelectorAll<HTMLButtonElement>("button.edit")) {
    button.addEventListener("click", () => {
      const input = root.querySelector<HTMLInputElement>(
        `input.override-input[data-slot="${button.dataset.slot}"]`,
      );
      if (input) {
        input.hidden = false;
        input.focus();
      }
    });
  }
  for (const input of root.querySelectorAll<HTMLInputElement>("input.override-input")) {
    input.addEventListener("keydown", (event) => {
      if (event.key === "Enter") {
        event.stopPropagation();
        session.override(Number(input.dataset.slot), input.value);
      }
    });
  }
  root.querySelector<HTMLButtonElement>("button.submit")?.addEventListener(
    "click",
    () => void session.submit(),
  );
  root.querySelector<HTMLButtonElement>("button.undo")?.addEventListener(
    "click",
    () => void session.undo(),
  );
}
