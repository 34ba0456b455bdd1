/** Thin typed client for the analytics API. Views never re-aggregate:
 * whatever the API returns is what the charts render. */

import type { Session } from "./session.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface SeriesBucket {
  start: string;
  energy_wh: number;
}

export interface ConsumptionSeries {
  unit: string;
  from: string;
  to: string;
  buckets: SeriesBucket[];
  total_wh: number;
  device_id?: string;
}

export interface Overview {
  as_of: string;
  today_wh: number;
  week_wh: number;
  month_wh: number;
  devices: { device_id: string; kind: string; category: string; energy_wh: number }[];
  comparison: {
    unit: string;
    from: string;
    to: string;
    user_total_wh: number;
    fleet_average_wh: number;
    delta_pct_vs_previous: number | null;
  };
}

export interface DeviceRow {
  device_id: string;
  kind: string;
  category: string;
  month_to_date_wh: number;
}

export interface ProviderDevices {
  categories: { category: string; energy_wh: number }[];
  devices: { device_id: string; user_id: string; kind: string; category: string; energy_wh: number }[];
  users: { user_id: string; energy_wh: number }[];
}

export interface FleetStats {
  unit: string;
  from: string;
  to: string;
  avg_wh: number;
  min_wh: number;
  max_wh: number;
  bucket_count: number;
}

export interface AdminUserRow {
  provider_id: string;
  user_id: string;
  email: string;
  email_verified: boolean;
  device_count: number;
}

export type UnauthorizedHandler = () => void;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly session: Session,
    private readonly onUnauthorized?: UnauthorizedHandler,
  ) {}

  async get<T>(path: string, params?: Record<string, string>, signal?: AbortSignal): Promise<T> {
    const query = params && Object.keys(params).length ? `?${new URLSearchParams(params)}` : "";
    const response = await fetch(`${this.baseUrl}${path}${query}`, {
      headers: { Authorization: `Bearer ${this.session.token}` },
      signal,
    });
    if (response.status === 401) {
      this.onUnauthorized?.();
    }
    if (!response.ok) {
      let code = "error";
      let message = `HTTP ${response.status}`;
      try {
        const body = await response.json();
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body; keep the defaults
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  meConsumption(params: Record<string, string>, signal?: AbortSignal) {
    return this.get<ConsumptionSeries>("/api/v1/me/consumption", params, signal);
  }

  meOverview(signal?: AbortSignal) {
    return this.get<Overview>("/api/v1/me/overview", undefined, signal);
  }

  meDevices(signal?: AbortSignal) {
    return this.get<{ devices: DeviceRow[] }>("/api/v1/me/devices", undefined, signal);
  }

  providerConsumption(params: Record<string, string>, signal?: AbortSignal) {
    return this.get<ConsumptionSeries>("/api/v1/provider/consumption", params, signal);
  }

  providerDevices(params?: Record<string, string>, signal?: AbortSignal) {
    return this.get<ProviderDevices>("/api/v1/provider/devices", params, signal);
  }

  providerStats(params: Record<string, string>, signal?: AbortSignal) {
    return this.get<FleetStats>("/api/v1/provider/stats", params, signal);
  }

  adminUsers(signal?: AbortSignal) {
    return this.get<{ users: AdminUserRow[] }>("/api/v1/admin/users", undefined, signal);
  }
}
