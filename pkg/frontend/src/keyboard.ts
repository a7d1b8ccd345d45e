// Keyboard-first flow: most interactions are accepts, so Enter accepts the
// next pending slot (and submits once everything is decided); E opens the
// override editor for the next pending slot.

import { ReviewSession } from "./session.js";

export function bindKeyboard(target: EventTarget, session: ReviewSession): () => void {
  const handler = (event: Event) => {
    const key = (event as KeyboardEvent).key;
    const element = event.target as HTMLElement | null;
    if (element && (element.tagName === "INPUT" || element.tagName === "TEXTAREA")) {
      return; // typing an override; the input handles its own Enter
    }
    if (session.phase !== "reviewing") return;
    if (key === "Enter") {
      event.preventDefault();
      const pending = session.firstPending();
      if (pending) {
        session.accept(pending.slot.index);
      } else if (session.allDecided) {
        void session.submit();
      }
    } else if (key === "e" || key === "E") {
      const pending = session.firstPending();
      if (pending) {
        event.preventDefault();
        const input = document.querySelector<HTMLInputElement>(
          `input.override-input[data-slot="${pending.slot.index}"]`,
        );
        if (input) {
          input.hidden = false;
          input.focus();
        }
      }
    } else if (key === "u" || key === "U") {
      event.preventDefault();
      void session.undo();
    }
  };
  target.addEventListener("keydown", handler);
  return () => target.removeEventListener("keydown", handler);
}
