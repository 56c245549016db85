/** Bootstrap: wire the store to the DOM, restore the session from the URL. */

import { ApiClient } from "./api.js";
import { Store } from "./state.js";
import { UiView } from "./render.js";

const DEFAULT_API = "http://127.0.0.1:8000";

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return (fromQuery ?? DEFAULT_API).replace(/\/$/, "");
}

function sessionFromHash(): string | null {
  const match = window.location.hash.match(/#session=([A-Za-z0-9]+)/);
  return match ? match[1]! : null;
}

async function boot(): Promise<void> {
  const store = new Store(new ApiClient(apiBase()));
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  new UiView(root, store);

  // the session id is the only state that survives a reload
  store.subscribe((state) => {
    const hash = state.session ? `#session=${state.session.sessionId}` : "";
    if (window.location.hash !== hash) {
      history.replaceState(null, "", window.location.pathname + window.location.search + hash);
    }
  });

  await store.loadDatasets();
  const restored = sessionFromHash();
  if (restored) {
    await store.restoreSession(restored);
  }
  if (!store.state.queryText && store.state.dataset) {
    store.setQueryText(`SELECT PACKAGE(R) AS P FROM ${store.state.dataset} R`);
  }
}

void boot();
