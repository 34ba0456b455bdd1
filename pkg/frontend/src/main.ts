/** Application bootstrap: configuration, PKCE login round trip, session
 * creation, and router mount. The token lives in memory only, so a page
 * reload always goes back through the issuer. */

import { ApiClient } from "./api.js";
import { loadConfig, type AppConfig } from "./config.js";
import { clear, el, errorView } from "./dom.js";
import { beginLogin, completeLogin } from "./pkce.js";
import { Router } from "./router.js";
import { sessionFromToken, type Session } from "./session.js";

function root(): HTMLElement {
  const node = document.getElementById("app");
  if (!node) throw new Error("missing #app mount point");
  return node;
}

function renderLogin(config: AppConfig, error?: unknown): void {
  const host = root();
  clear(host);
  const button = el("button", { class: "login", type: "button" }, ["Sign in"]);
  button.addEventListener("click", () => {
    void beginLogin(config.authorizeUrl, config.clientId, config.redirectUri).then((url) => {
      window.location.assign(url);
    });
  });
  host.append(el("h1", {}, ["encoviz"]), el("p", {}, ["Energy consumption dashboard"]));
  if (error !== undefined) {
    host.append(errorView(error, () => renderLogin(config)));
  }
  host.append(button);
}

export function mountSession(config: AppConfig, session: Session): Router {
  const api = new ApiClient(config.apiBaseUrl, session, () => {
    // expired or revoked mid-session: back to the issuer
    renderLogin(config, new Error("your session has expired, please sign in again"));
  });
  const router = new Router(session, api, root());
  router.start();
  return router;
}

export async function boot(): Promise<void> {
  const config = await loadConfig();
  const query = new URLSearchParams(window.location.search);
  const code = query.get("code");
  const state = query.get("state");
  if (code && state) {
    try {
      const token = await completeLogin(config.tokenUrl, config.redirectUri, code, state);
      window.history.replaceState(null, "", window.location.pathname + window.location.hash);
      mountSession(config, sessionFromToken(token));
      return;
    } catch (error) {
      renderLogin(config, error);
      return;
    }
  }
  renderLogin(config);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot();
}
