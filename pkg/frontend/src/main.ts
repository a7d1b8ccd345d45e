// Bootstrap: the session id lives in the URL hash, so reloading the page
// reconstructs the exact view from the server.

import { SessionApi } from "./api.js";
import { bindKeyboard } from "./keyboard.js";
import { ReviewSession } from "./session.js";
import { render } from "./view.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? window.location.origin;

const api = new SessionApi(apiBase);
const session = new ReviewSession(api);
const root = document.getElementById("app");

if (root) {
  session.onChange(() => render(root, session));
  bindKeyboard(document, session);
  const existing = window.location.hash.replace(/^#/, "") || undefined;
  session
    .start(existing)
    .then(() => {
      if (session.sessionId) window.location.hash = session.sessionId;
    })
    .catch((err) => {
      root.innerHTML = `<p class="retry-banner">could not reach the review service: ${String(
        err,
      )}</p>`;
    });
}
