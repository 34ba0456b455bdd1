import { describe, expect, it } from "vitest";

import { beginLogin, challengeFor, generateVerifier, pendingLogin } from "../src/pkce.js";

describe("PKCE S256", () => {
  it("matches the RFC 7636 appendix B vector", async () => {
    const verifier = "dBjftJeZ4CVP-mB92K27uhbUJU1p1r_wW1gFWFOEjXk";
    expect(await challengeFor(verifier)).toBe("E9Melhoa2OwvFrEMTJguCHaoeK1t8URWbuGJSstw-cM");
  });

  it("generates url-safe verifiers of sufficient entropy", () => {
    const seen = new Set<string>();
    for (let i = 0; i < 50; i++) {
      const verifier = generateVerifier();
      expect(verifier).toMatch(/^[A-Za-z0-9_-]{43}$/);
      seen.add(verifier);
    }
    expect(seen.size).toBe(50);
  });

  it("builds an authorize URL carrying the S256 challenge", async () => {
    const url = new URL(
      await beginLogin("http://issuer/dev/authorize", "dash", "http://app/"),
    );
    expect(url.origin + url.pathname).toBe("http://issuer/dev/authorize");
    expect(url.searchParams.get("response_type")).toBe("code");
    expect(url.searchParams.get("client_id")).toBe("dash");
    expect(url.searchParams.get("code_challenge_method")).toBe("S256");
    const pending = pendingLogin();
    expect(pending).not.toBeNull();
    expect(url.searchParams.get("state")).toBe(pending!.state);
    expect(url.searchParams.get("code_challenge")).toBe(await challengeFor(pending!.verifier));
  });
});
