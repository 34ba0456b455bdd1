/** Static deployment configuration, served next to the bundle. */

export interface AppConfig {
  /** Base URL of the analytics API, no trailing slash. */
  apiBaseUrl: string;
  /** OAuth2 authorization endpoint (the dev issuer or a real one). */
  authorizeUrl: string;
  /** OAuth2 token endpoint. */
  tokenUrl: string;
  clientId: string;
  redirectUri: string;
}

export async function loadConfig(url = "./config.json"): Promise<AppConfig> {
  const response = await fetch(url);
  if (!response.ok) {
    throw new Error(`cannot load dashboard config from ${url}: HTTP ${response.status}`);
  }
  const raw = await response.json();
  for (const key of ["apiBaseUrl", "authorizeUrl", "tokenUrl", "clientId", "redirectUri"]) {
    if (typeof raw[key] !== "string" || raw[key].length === 0) {
      throw new Error(`dashboard config is missing "${key}"`);
    }
  }
  return raw as AppConfig;
}
