/** In-memory session. The access token is deliberately never written to
 * localStorage/sessionStorage/cookies: a page reload re-authenticates. */

export type Role = "consumer" | "provider" | "admin";

export interface Session {
  token: string;
  sub: string;
  role: Role;
  providerId?: string;
}

/** Read identity claims out of a compact JWT without verifying it; the
 * API is the enforcement point, this only selects which views to load. */
export function sessionFromToken(token: string): Session {
  const parts = token.split(".");
  if (parts.length !== 3 || !parts[1]) {
    throw new Error("not a compact JWT");
  }
  const b64 = parts[1].replace(/-/g, "+").replace(/_/g, "/");
  const padded = b64 + "=".repeat((4 - (b64.length % 4)) % 4);
  const claims = JSON.parse(atob(padded));
  const role = String(claims.role ?? "").toLowerCase();
  if (role !== "consumer" && role !== "provider" && role !== "admin") {
    throw new Error(`token carries no usable role (got ${JSON.stringify(claims.role)})`);
  }
  if (typeof claims.sub !== "string" || !claims.sub) {
    throw new Error("token carries no subject");
  }
  return {
    token,
    sub: claims.sub,
    role,
    providerId: typeof claims.provider_id === "string" ? claims.provider_id : undefined,
  };
}
