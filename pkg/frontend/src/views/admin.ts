/** Admin bundle: the all-users table with sortable columns and a visual
 * flag on unverified email addresses. */

import type { AdminUserRow } from "../api.js";
import { clear, el, errorView } from "../dom.js";
import type { ViewContext } from "./consumer.js";

type SortKey = "user_id" | "provider_id" | "email" | "email_verified" | "device_count";

export async function render(route: string, ctx: ViewContext): Promise<void> {
  if (route !== "admin/users") {
    throw new Error(`admin bundle cannot render ${route}`);
  }
  clear(ctx.container);
  let rows: AdminUserRow[];
  try {
    rows = (await ctx.api.adminUsers()).users;
  } catch (error) {
    ctx.container.append(errorView(error, () => render(route, ctx)));
    return;
  }

  let sortKey: SortKey = "user_id";
  let ascending = true;
  const table = el("table", { class: "user-table", "data-testid": "user-table" });

  function draw(): void {
    clear(table);
    const sorted = [...rows].sort((a, b) => {
      const left = a[sortKey];
      const right = b[sortKey];
      const order = left < right ? -1 : left > right ? 1 : 0;
      return ascending ? order : -order;
    });
    const header = el("tr", {});
    const columns: [SortKey, string][] = [
      ["user_id", "User"],
      ["provider_id", "Provider"],
      ["email", "Email"],
      ["email_verified", "Verified"],
      ["device_count", "Devices"],
    ];
    for (const [key, label] of columns) {
      const cell = el("th", { "data-sort": key }, [
        label + (sortKey === key ? (ascending ? " ▲" : " ▼") : ""),
      ]);
      cell.addEventListener("click", () => {
        if (sortKey === key) {
          ascending = !ascending;
        } else {
          sortKey = key;
          ascending = true;
        }
        draw();
      });
      header.append(cell);
    }
    table.append(header);
    for (const row of sorted) {
      const tr = el("tr", { "data-user": row.user_id });
      if (!row.email_verified) {
        tr.classList.add("unverified"); // admins chase these for verification
      }
      tr.append(
        el("td", {}, [row.user_id]),
        el("td", {}, [row.provider_id]),
        el("td", {}, [row.email || "—"]),
        el("td", { class: "verified-flag" }, [row.email_verified ? "yes" : "NOT VERIFIED"]),
        el("td", {}, [String(row.device_count)]),
      );
      table.append(tr);
    }
  }

  draw();
  ctx.container.append(el("h1", {}, [`All users (${rows.length})`]), table);
}
