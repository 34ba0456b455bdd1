/** Filter state for the consumption explorer, round-tripped losslessly
 * through the URL so any filtered view is shareable and bookmarkable. */

export const UNITS = ["hour", "day", "week", "month", "year"] as const;
export type Unit = (typeof UNITS)[number];

/** Display labels for the unit picker. */
export const UNIT_LABELS: Record<Unit, string> = {
  hour: "Hour",
  day: "Day",
  week: "Week",
  month: "Month",
  year: "Year",
};

export interface FilterState {
  unit: Unit;
  /** RFC 3339 UTC, hour-aligned, inclusive. */
  from: string;
  /** RFC 3339 UTC, hour-aligned, exclusive. */
  to: string;
  device?: string;
  /** Consumer id; provider views only. */
  user?: string;
}

export function isUnit(value: string): value is Unit {
  return (UNITS as readonly string[]).includes(value);
}

export function filtersToParams(state: FilterState): URLSearchParams {
  const params = new URLSearchParams({ unit: state.unit, from: state.from, to: state.to });
  if (state.device) params.set("device", state.device);
  if (state.user) params.set("user", state.user);
  return params;
}

export function filtersFromParams(
  params: URLSearchParams,
  defaults: FilterState,
): FilterState {
  const unit = params.get("unit") ?? "";
  const state: FilterState = {
    unit: isUnit(unit) ? unit : defaults.unit,
    from: params.get("from") ?? defaults.from,
    to: params.get("to") ?? defaults.to,
  };
  const device = params.get("device");
  if (device) state.device = device;
  const user = params.get("user");
  if (user) state.user = user;
  return state;
}

export function filtersValid(state: FilterState): boolean {
  const from = Date.parse(state.from);
  const to = Date.parse(state.to);
  return Number.isFinite(from) && Number.isFinite(to) && from < to;
}

/** Default window: the last seven whole UTC days up to the next hour. */
export function defaultFilters(now = new Date()): FilterState {
  const end = new Date(now);
  end.setUTCMinutes(0, 0, 0);
  end.setUTCHours(end.getUTCHours() + 1);
  const start = new Date(end);
  start.setUTCDate(start.getUTCDate() - 7);
  start.setUTCHours(0, 0, 0, 0);
  return { unit: "day", from: rfc3339(start), to: rfc3339(end) };
}

export function rfc3339(date: Date): string {
  return date.toISOString().replace(/\.\d{3}Z$/, "Z");
}
