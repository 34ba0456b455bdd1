/** Hash router with role-gated, lazily loaded view bundles.
 *
 * Exactly one bundle is ever loaded per session, chosen by the verified
 * token's role; navigating to any route outside that bundle lands on the
 * forbidden view. Filter state lives in the hash query so filtered views
 * are shareable; filter edits rewrite the URL in place and refresh the
 * data widget themselves (one fetch per change), while external
 * navigation (back button, pasted link) re-renders through the router.
 */

import type { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { defaultFilters, filtersFromParams, filtersToParams, type FilterState } from "./filters.js";
import type { Role, Session } from "./session.js";
import type { ViewContext } from "./views/consumer.js";

export interface ViewBundle {
  render(route: string, ctx: ViewContext): Promise<void>;
}

export interface RoleBundle {
  home: string;
  routes: ReadonlySet<string>;
  load: () => Promise<ViewBundle>;
}

export const ROUTE_BUNDLES: Record<Role, RoleBundle> = {
  consumer: {
    home: "overview",
    routes: new Set(["overview", "explorer", "devices"]),
    load: () => import("./views/consumer.js"),
  },
  provider: {
    home: "provider",
    routes: new Set(["provider", "provider/categories"]),
    load: () => import("./views/provider.js"),
  },
  admin: {
    home: "admin/users",
    routes: new Set(["admin/users"]),
    load: () => import("./views/admin.js"),
  },
};

export const ALL_ROUTES: readonly string[] = [
  "overview",
  "explorer",
  "devices",
  "provider",
  "provider/categories",
  "admin/users",
];

export function parseHash(hash: string): { route: string; params: URLSearchParams } {
  const text = hash.startsWith("#") ? hash.slice(1) : hash;
  const [pathPart = "", queryPart = ""] = text.split("?");
  const route = pathPart.replace(/^\/+/, "").replace(/\/+$/, "");
  return { route, params: new URLSearchParams(queryPart) };
}

export class Router {
  private readonly bundle: RoleBundle;
  private loaded: ViewBundle | null = null;

  constructor(
    private readonly session: Session,
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {
    this.bundle = ROUTE_BUNDLES[session.role];
  }

  start(): void {
    window.addEventListener("hashchange", () => {
      void this.renderCurrent();
    });
    if (!parseHash(window.location.hash).route) {
      window.location.hash = `#/${this.bundle.home}`;
    }
    void this.renderCurrent();
  }

  async renderCurrent(): Promise<void> {
    const { route, params } = parseHash(window.location.hash);
    await this.renderRoute(route || this.bundle.home, params);
  }

  async renderRoute(route: string, params: URLSearchParams): Promise<void> {
    if (!this.bundle.routes.has(route)) {
      this.renderForbidden(route);
      return;
    }
    if (this.loaded === null) {
      this.loaded = await this.bundle.load();
    }
    const filters = filtersFromParams(params, defaultFilters());
    const ctx: ViewContext = {
      api: this.api,
      container: this.root,
      filters,
      onFiltersChanged: (next: FilterState) => this.writeFilters(route, next),
    };
    await this.loaded.render(route, ctx);
  }

  /** Rewrite the hash query in place; no hashchange, no re-render. */
  private writeFilters(route: string, filters: FilterState): void {
    const hash = `#/${route}?${filtersToParams(filters).toString()}`;
    window.history.replaceState(null, "", hash);
  }

  private renderForbidden(route: string): void {
    clear(this.root);
    this.root.append(
      el("div", { class: "forbidden", "data-testid": "forbidden" }, [
        el("h1", {}, ["Not available"]),
        el("p", {}, [
          `The ${this.session.role} workspace has no "${route || "(empty)"}" view.`,
        ]),
        el("a", { href: `#/${this.bundle.home}` }, ["Back to your home view"]),
      ]),
    );
  }
}
