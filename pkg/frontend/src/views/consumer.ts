/** Consumer bundle: overview cards, the filterable consumption explorer,
 * and the per-device composition pie. */

import type { ApiClient, ConsumptionSeries, Overview } from "../api.js";
import { barLineChart, pieChart } from "../charts.js";
import { clear, el, emptyState, energyCard, errorView, formatWh } from "../dom.js";
import { filtersToParams, type FilterState, UNIT_LABELS, UNITS, filtersValid } from "../filters.js";
import { LatestFetch } from "../latest.js";

export interface ViewContext {
  api: ApiClient;
  container: HTMLElement;
  filters: FilterState;
  /** Persist changed filters into the URL (no full re-render). */
  onFiltersChanged: (filters: FilterState) => void;
}

export async function render(route: string, ctx: ViewContext): Promise<void> {
  if (route === "overview") return renderOverview(ctx);
  if (route === "explorer") return renderExplorer(ctx);
  if (route === "devices") return renderComposition(ctx);
  throw new Error(`consumer bundle cannot render ${route}`);
}

async function renderOverview(ctx: ViewContext): Promise<void> {
  clear(ctx.container);
  let overview: Overview;
  try {
    overview = await ctx.api.meOverview();
  } catch (error) {
    ctx.container.append(errorView(error, () => renderOverview(ctx)));
    return;
  }
  const cards = el("div", { class: "cards" }, [
    energyCard("today-total", "Today", overview.today_wh),
    energyCard("week-total", "This week", overview.week_wh),
    energyCard("month-total", "This month", overview.month_wh),
  ]);

  const delta = overview.comparison.delta_pct_vs_previous;
  const deltaBadge = el("span", { class: "delta", "data-testid": "delta" });
  if (delta === null) {
    deltaBadge.textContent = "n/a"; // absent must never masquerade as 0
    deltaBadge.classList.add("delta-absent");
  } else {
    deltaBadge.textContent = `${delta > 0 ? "+" : ""}${delta.toFixed(1)}% vs previous`;
    deltaBadge.classList.add(delta > 0 ? "delta-up" : "delta-down");
  }
  const comparison = el("div", { class: "comparison card" }, [
    el("div", { class: "card-title" }, ["You vs the fleet average"]),
    el("div", { class: "comparison-pair" }, [
      sideBySide("comparison-user", "You", overview.comparison.user_total_wh),
      sideBySide("comparison-fleet", "Fleet average", overview.comparison.fleet_average_wh),
    ]),
    deltaBadge,
  ]);

  const deviceRows = overview.devices.map((device) => {
    const value = el("span", { class: "device-wh", "data-testid": `device-${device.device_id}` });
    value.dataset.value = String(device.energy_wh);
    value.textContent = formatWh(device.energy_wh);
    const label = device.category ? `${device.device_id} (${device.category})` : device.device_id;
    return el("li", {}, [el("span", {}, [label]), value]);
  });

  ctx.container.append(
    el("h1", {}, ["Your energy overview"]),
    cards,
    comparison,
    el("div", { class: "card" }, [
      el("div", { class: "card-title" }, ["This month per device"]),
      el("ul", { class: "device-list" }, deviceRows),
    ]),
  );
}

function sideBySide(testId: string, label: string, wh: number): HTMLElement {
  const value = el("div", { class: "pair-value", "data-testid": testId });
  value.dataset.value = String(wh);
  value.textContent = formatWh(wh);
  return el("div", { class: "pair" }, [el("div", { class: "pair-label" }, [label]), value]);
}

async function renderExplorer(ctx: ViewContext): Promise<void> {
  clear(ctx.container);
  const chartHost = el("div", { class: "chart-host", "data-testid": "explorer-chart" });
  const fetcher = new LatestFetch();
  let filters = { ...ctx.filters };

  const deviceSelect = el("select", { name: "device", "data-testid": "device-filter" });
  deviceSelect.append(el("option", { value: "" }, ["Whole home (DIN)"]));
  try {
    const { devices } = await ctx.api.meDevices();
    for (const device of devices) {
      const option = el("option", { value: device.device_id }, [
        device.category ? `${device.device_id} (${device.category})` : device.device_id,
      ]);
      if (filters.device === device.device_id) option.setAttribute("selected", "");
      deviceSelect.append(option);
    }
  } catch {
    // device list is a convenience; the explorer still works without it
  }

  const unitSelect = el("select", { name: "unit", "data-testid": "unit-filter" });
  for (const unit of UNITS) {
    const option = el("option", { value: unit }, [UNIT_LABELS[unit]]);
    if (unit === filters.unit) option.setAttribute("selected", "");
    unitSelect.append(option);
  }
  const fromInput = el("input", {
    type: "date", name: "from", "data-testid": "from-filter",
    value: filters.from.slice(0, 10),
  });
  const toInput = el("input", {
    type: "date", name: "to", "data-testid": "to-filter",
    value: filters.to.slice(0, 10),
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
      delete params.user; // not a consumer-side filter
      const series = await fetcher.run((signal) => ctx.api.meConsumption(params, signal));
      if (series === undefined) return; // superseded by a newer filter change
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
    ctx.onFiltersChanged(filters);
    void refresh();
  }

  unitSelect.addEventListener("change", () => {
    const unit = unitSelect.value;
    onChange({ unit: unit as FilterState["unit"] });
  });
  deviceSelect.addEventListener("change", () =>
    onChange({ device: deviceSelect.value || undefined }),
  );
  fromInput.addEventListener("change", () =>
    onChange({ from: `${fromInput.value}T00:00:00Z` }),
  );
  toInput.addEventListener("change", () => onChange({ to: `${toInput.value}T00:00:00Z` }));

  ctx.container.append(
    el("h1", {}, ["Consumption explorer"]),
    el("div", { class: "filter-bar" }, [
      labelled("Unit", unitSelect),
      labelled("From", fromInput),
      labelled("To", toInput),
      labelled("Device", deviceSelect),
    ]),
    chartHost,
  );
  await refresh();
}

function labelled(text: string, control: HTMLElement): HTMLElement {
  return el("label", { class: "filter" }, [el("span", {}, [text]), control]);
}

export function seriesChart(series: ConsumptionSeries): HTMLElement {
  const host = el("div", { class: "series" });
  const points = series.buckets.map((bucket) => ({
    label: shortLabel(bucket.start, series.unit),
    value: bucket.energy_wh,
  }));
  host.innerHTML = barLineChart(points);
  const total = el("div", { class: "series-total", "data-testid": "series-total" });
  total.dataset.value = String(series.total_wh);
  total.textContent = `Total: ${formatWh(series.total_wh)}`;
  host.append(total);
  return host;
}

function shortLabel(start: string, unit: string): string {
  if (unit === "hour") return start.slice(11, 16);
  if (unit === "month") return start.slice(0, 7);
  if (unit === "year") return start.slice(0, 4);
  return start.slice(0, 10);
}

async function renderComposition(ctx: ViewContext): Promise<void> {
  clear(ctx.container);
  const host = el("div", { class: "chart-host", "data-testid": "composition" });
  ctx.container.append(el("h1", {}, ["Energy per device"]), host);
  try {
    const filters = ctx.filters;
    const { devices } = await ctx.api.meDevices();
    const slices = [];
    for (const device of devices) {
      const series = await ctx.api.meConsumption({
        unit: "day", from: filters.from, to: filters.to, device: device.device_id,
      });
      slices.push({
        label: device.category ? `${device.device_id} (${device.category})` : device.device_id,
        value: series.total_wh,
      });
    }
    const pie = pieChart(slices);
    if (pie === null) {
      host.append(emptyState("No consumption recorded in this period yet."));
      return;
    }
    host.innerHTML = pie;
  } catch (error) {
    clear(host);
    host.append(errorView(error, () => renderComposition(ctx)));
  }
}
