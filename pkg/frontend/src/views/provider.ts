/** Provider bundle: the full-filter explorer (user id, device, unit and
 * range in any combination) and the per-category composition with fleet
 * stats. */

import type { FleetStats } from "../api.js";
import { pieChart } from "../charts.js";
import { clear, el, emptyState, energyCard, errorView } from "../dom.js";
import { filtersToParams, type FilterState, UNIT_LABELS, UNITS, filtersValid } from "../filters.js";
import { LatestFetch } from "../latest.js";
import { seriesChart, type ViewContext } from "./consumer.js";

export async function render(route: string, ctx: ViewContext): Promise<void> {
  if (route === "provider") return renderExplorer(ctx);
  if (route === "provider/categories") return renderCategories(ctx);
  throw new Error(`provider bundle cannot render ${route}`);
}

async function renderExplorer(ctx: ViewContext): Promise<void> {
  clear(ctx.container);
  const chartHost = el("div", { class: "chart-host", "data-testid": "explorer-chart" });
  const fetcher = new LatestFetch();
  let filters = { ...ctx.filters };

  const unitSelect = el("select", { name: "unit", "data-testid": "unit-filter" });
  for (const unit of UNITS) {
    const option = el("option", { value: unit }, [UNIT_LABELS[unit]]);
    if (unit === filters.unit) option.setAttribute("selected", "");
    unitSelect.append(option);
  }
  const fromInput = el("input", {
    type: "date", name: "from", "data-testid": "from-filter", value: filters.from.slice(0, 10),
  });
  const toInput = el("input", {
    type: "date", name: "to", "data-testid": "to-filter", value: filters.to.slice(0, 10),
  });
  const userInput = el("input", {
    type: "text", name: "user", "data-testid": "user-filter",
    placeholder: "consumer id (blank = fleet)", value: filters.user ?? "",
  });
  const deviceInput = el("input", {
    type: "text", name: "device", "data-testid": "device-filter",
    placeholder: "device id (blank = all)", value: filters.device ?? "",
  });

  async function refresh(): Promise<void> {
    clear(chartHost);
    if (!filtersValid(filters)) {
      chartHost.append(errorView(new RangeError("the start must lie before the end")));
      return;
    }
    chartHost.append(el("div", { class: "loading" }, ["Loading…"]));
    try {
      const params = Object.fromEntries(filtersToParams(filters));
      const series = await fetcher.run((signal) => ctx.api.providerConsumption(params, signal));
      if (series === undefined) return;
      clear(chartHost);
      chartHost.append(seriesChart(series));
    } catch (error) {
      clear(chartHost);
      chartHost.append(errorView(error, refresh));
    }
  }

  function onChange(update: Partial<FilterState>): void {
    filters = { ...filters, ...update };
    if (!filters.device) delete filters.device;
    if (!filters.user) delete filters.user;
    ctx.onFiltersChanged(filters);
    void refresh();
  }

  unitSelect.addEventListener("change", () =>
    onChange({ unit: unitSelect.value as FilterState["unit"] }),
  );
  fromInput.addEventListener("change", () => onChange({ from: `${fromInput.value}T00:00:00Z` }));
  toInput.addEventListener("change", () => onChange({ to: `${toInput.value}T00:00:00Z` }));
  userInput.addEventListener("change", () => onChange({ user: userInput.value || undefined }));
  deviceInput.addEventListener("change", () =>
    onChange({ device: deviceInput.value || undefined }),
  );

  ctx.container.append(
    el("h1", {}, ["Fleet consumption"]),
    el("div", { class: "filter-bar" }, [
      labelled("Unit", unitSelect),
      labelled("From", fromInput),
      labelled("To", toInput),
      labelled("Consumer", userInput),
      labelled("Device", deviceInput),
    ]),
    chartHost,
  );
  await refresh();
}

function labelled(text: string, control: HTMLElement): HTMLElement {
  return el("label", { class: "filter" }, [el("span", {}, [text]), control]);
}

async function renderCategories(ctx: ViewContext): Promise<void> {
  clear(ctx.container);
  const pieHost = el("div", { class: "chart-host", "data-testid": "composition" });
  const statsHost = el("div", { class: "cards", "data-testid": "stats" });
  ctx.container.append(el("h1", {}, ["Device categories"]), pieHost, statsHost);
  const filters = ctx.filters;
  try {
    const range = { from: filters.from, to: filters.to };
    const payload = await ctx.api.providerDevices(range);
    const pie = pieChart(
      payload.categories.map((row) => ({ label: row.category, value: row.energy_wh })),
    );
    if (pie === null) {
      pieHost.append(emptyState("No categorized consumption in this period yet."));
    } else {
      pieHost.innerHTML = pie;
    }
    let stats: FleetStats | null = null;
    try {
      stats = await ctx.api.providerStats({ unit: filters.unit, ...range });
    } catch {
      // an empty fleet range is fine; just skip the stat cards
    }
    if (stats !== null) {
      statsHost.append(
        energyCard("stats-min", "Min per bucket", stats.min_wh),
        energyCard("stats-avg", "Average per bucket", stats.avg_wh),
        energyCard("stats-max", "Max per bucket", stats.max_wh),
      );
    }
  } catch (error) {
    clear(pieHost);
    pieHost.append(errorView(error, () => renderCategories(ctx)));
  }
}
