/** Authorization Code flow with PKCE (S256), RFC 7636.
 *
 * The verifier lives in module memory only for the duration of one login
 * round trip; nothing auth-related ever touches persistent storage.
 */

export interface PendingLogin {
  verifier: string;
  state: string;
}

let pending: PendingLogin | null = null;

function base64url(bytes: Uint8Array): string {
  let text = "";
  for (const b of bytes) {
    text += String.fromCharCode(b);
  }
  return btoa(text).replace(/\+/g, "-").replace(/\//g, "_").replace(/=+$/, "");
}

export function generateVerifier(): string {
  const bytes = new Uint8Array(32);
  crypto.getRandomValues(bytes);
  return base64url(bytes);
}

export async function challengeFor(verifier: string): Promise<string> {
  const digest = await crypto.subtle.digest("SHA-256", new TextEncoder().encode(verifier));
  return base64url(new Uint8Array(digest));
}

/** Build the authorize redirect and remember the verifier for the callback. */
export async function beginLogin(
  authorizeUrl: string,
  clientId: string,
  redirectUri: string,
): Promise<string> {
  const verifier = generateVerifier();
  const state = generateVerifier().slice(0, 16);
  pending = { verifier, state };
  const params = new URLSearchParams({
    response_type: "code",
    client_id: clientId,
    redirect_uri: redirectUri,
    state,
    code_challenge: await challengeFor(verifier),
    code_challenge_method: "S256",
  });
  return `${authorizeUrl}?${params.toString()}`;
}

/** Exchange the callback code for an access token. */
export async function completeLogin(
  tokenUrl: string,
  redirectUri: string,
  code: string,
  state: string,
): Promise<string> {
  if (!pending || pending.state !== state) {
    pending = null;
    throw new Error("login callback does not match a pending sign-in");
  }
  const { verifier } = pending;
  pending = null;
  const response = await fetch(tokenUrl, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({
      grant_type: "authorization_code",
      code,
      code_verifier: verifier,
      redirect_uri: redirectUri,
    }),
  });
  if (!response.ok) {
    throw new Error(`token exchange failed: HTTP ${response.status}`);
  }
  const body = await response.json();
  if (typeof body.access_token !== "string") {
    throw new Error("token endpoint returned no access_token");
  }
  return body.access_token;
}

/** Test hook: inspect or clear the pending login. */
export function pendingLogin(): PendingLogin | null {
  return pending;
}
