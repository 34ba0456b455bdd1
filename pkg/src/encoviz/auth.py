"""Bearer-token verification, the three-role access matrix, and a dev-mode
token issuer so the system runs without an external identity provider.

Tokens are compact JWS (RS256) carrying JSON claims. Verification checks,
in order: structure, signature against the trusted key set, issuer,
audience, expiry (strict), issued-at (with 60 s clock-skew tolerance),
then maps the role claim to a Principal. Each failure mode has its own
error kind so callers can answer precisely.

Authorization is deny-by-default: only the triples spelled out in
`authorize` are allowed, everything else is refused with a reason.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

from .model import Principal, Role

CLOCK_SKEW_S = 60


class TokenErrorKind(Enum):
    MALFORMED = "malformed_token"
    BAD_SIGNATURE = "bad_signature"
    EXPIRED = "token_expired"
    WRONG_ISSUER = "wrong_issuer"
    WRONG_AUDIENCE = "wrong_audience"
    BAD_ROLE = "bad_role_claim"


class TokenError(Exception):
    def __init__(self, kind: TokenErrorKind, detail: str):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail


class DevModeDisabled(Exception):
    """Dev token issuance was requested but dev mode is off."""


def _b64url_encode(raw: bytes) -> str:
    return base64.urlsafe_b64encode(raw).rstrip(b"=").decode("ascii")


def _b64url_decode(text: str) -> bytes:
    padding_needed = -len(text) % 4
    try:
        return base64.urlsafe_b64decode(text + "=" * padding_needed)
    except (binascii.Error, ValueError) as exc:
        raise TokenError(TokenErrorKind.MALFORMED, f"bad base64url segment: {exc}") from exc


def now_ms() -> int:
    return int(time.time() * 1000)


@dataclass
class TrustConfig:
    """What the resource server trusts: issuer, audience and the keys that
    may sign tokens. Keys come from a static public key, or lazily from a
    JWKS document fetched via `jwks_fetch` (refresh is synchronized and
    re-done once on an unknown key id)."""

    issuer: str
    audience: str
    public_key: Optional[rsa.RSAPublicKey] = None
    jwks_fetch: Optional[callable] = None
    role_claim: str = "role"
    leeway_s: int = CLOCK_SKEW_S
    _jwks_keys: dict = field(default_factory=dict, repr=False)
    _jwks_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def verification_keys(self, kid: Optional[str]) -> list[rsa.RSAPublicKey]:
        keys: list[rsa.RSAPublicKey] = []
        if self.public_key is not None:
            keys.append(self.public_key)
        if self.jwks_fetch is not None:
            with self._jwks_lock:
                if not self._jwks_keys or (kid is not None and kid not in self._jwks_keys):
                    self._jwks_keys = _parse_jwks(self.jwks_fetch())
            if kid is not None and kid in self._jwks_keys:
                keys.append(self._jwks_keys[kid])
            elif kid is None:
                keys.extend(self._jwks_keys.values())
        return keys


def _parse_jwks(document: dict) -> dict[str, rsa.RSAPublicKey]:
    keys = {}
    for jwk in document.get("keys", []):
        if jwk.get("kty") != "RSA":
            continue
        n = int.from_bytes(_b64url_decode(jwk["n"]), "big")
        e = int.from_bytes(_b64url_decode(jwk["e"]), "big")
        keys[jwk.get("kid", "")] = rsa.RSAPublicNumbers(e, n).public_key()
    return keys


def _resolve_claim(claims: dict, path: str):
    value = claims
    for part in path.split("."):
        if not isinstance(value, dict) or part not in value:
            return None
        value = value[part]
    return value


def sign_token(claims: dict, private_key: rsa.RSAPrivateKey, kid: str) -> str:
    header = {"alg": "RS256", "typ": "JWT", "kid": kid}
    signing_input = (
        _b64url_encode(json.dumps(header, separators=(",", ":")).encode())
        + "."
        + _b64url_encode(json.dumps(claims, separators=(",", ":")).encode())
    )
    signature = private_key.sign(
        signing_input.encode("ascii"), padding.PKCS1v15(), hashes.SHA256()
    )
    return signing_input + "." + _b64url_encode(signature)


def verify_token(raw_token: str, trust: TrustConfig, at_ms: Optional[int] = None) -> Principal:
    """Validate a compact JWS end to end and map its claims to a Principal."""
    at_ms = now_ms() if at_ms is None else at_ms
    parts = raw_token.strip().split(".")
    if len(parts) != 3 or not all(parts):
        raise TokenError(TokenErrorKind.MALFORMED, "token is not a three-part compact JWS")
    try:
        header = json.loads(_b64url_decode(parts[0]))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise TokenError(TokenErrorKind.MALFORMED, f"unparseable header: {exc}") from exc
    if header.get("alg") != "RS256":
        raise TokenError(TokenErrorKind.MALFORMED, f"unsupported alg {header.get('alg')!r}")

    signature = _b64url_decode(parts[2])
    signing_input = f"{parts[0]}.{parts[1]}".encode("ascii")
    keys = trust.verification_keys(header.get("kid"))
    if not keys:
        raise TokenError(TokenErrorKind.BAD_SIGNATURE, "no trusted verification key")
    for key in keys:
        try:
            key.verify(signature, signing_input, padding.PKCS1v15(), hashes.SHA256())
            break
        except InvalidSignature:
            continue
    else:
        raise TokenError(TokenErrorKind.BAD_SIGNATURE, "signature does not verify")

    try:
        claims = json.loads(_b64url_decode(parts[1]))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise TokenError(TokenErrorKind.MALFORMED, f"unparseable claims: {exc}") from exc

    if claims.get("iss") != trust.issuer:
        raise TokenError(
            TokenErrorKind.WRONG_ISSUER,
            f"issuer {claims.get('iss')!r} is not the trusted {trust.issuer!r}",
        )
    aud = claims.get("aud")
    audiences = aud if isinstance(aud, list) else [aud]
    if trust.audience not in audiences:
        raise TokenError(TokenErrorKind.WRONG_AUDIENCE, f"audience {aud!r} does not match")

    now_s = at_ms / 1000.0
    exp = claims.get("exp")
    if not isinstance(exp, (int, float)):
        raise TokenError(TokenErrorKind.MALFORMED, "missing exp claim")
    # expiry is strict; the skew leeway applies to iat/nbf (tokens minted
    # by a clock running ahead of ours)
    if now_s >= exp:
        raise TokenError(TokenErrorKind.EXPIRED, "token has expired")
    iat = claims.get("iat")
    if isinstance(iat, (int, float)) and iat - trust.leeway_s > now_s:
        raise TokenError(TokenErrorKind.MALFORMED, "token issued in the future")
    nbf = claims.get("nbf")
    if isinstance(nbf, (int, float)) and nbf - trust.leeway_s > now_s:
        raise TokenError(TokenErrorKind.MALFORMED, "token not yet valid")

    sub = claims.get("sub")
    if not sub or not isinstance(sub, str):
        raise TokenError(TokenErrorKind.MALFORMED, "missing sub claim")

    role_value = _resolve_claim(claims, trust.role_claim)
    if role_value is None:
        raise TokenError(TokenErrorKind.BAD_ROLE, f"no {trust.role_claim!r} claim present")
    candidates = role_value if isinstance(role_value, list) else [role_value]
    role = None
    for candidate in candidates:
        try:
            role = Role(str(candidate).lower())
            break
        except ValueError:
            continue
    if role is None:
        raise TokenError(TokenErrorKind.BAD_ROLE, f"unknown role claim {role_value!r}")

    provider_id = claims.get("provider_id") if role is Role.PROVIDER else None
    if role is Role.PROVIDER and not provider_id:
        raise TokenError(TokenErrorKind.BAD_ROLE, "provider token lacks a provider_id claim")
    return Principal(sub=sub, role=role, provider_id=provider_id)


# --- authorization matrix ---------------------------------------------------

@dataclass(frozen=True)
class Resource:
    """A protected thing. `owner` is the user_id for consumer-owned data
    and the provider_id for tenant-scoped data."""

    kind: str
    owner: Optional[str] = None


@dataclass(frozen=True)
class AccessDecision:
    allowed: bool
    reason: str = ""


_CONSUMER_READABLE = frozenset({"consumption", "devices", "comparison"})
_PROVIDER_READABLE = frozenset({"consumption", "devices", "stats", "sync"})


def authorize(principal: Principal, resource: Resource, action: str) -> AccessDecision:
    """Evaluate the role matrix. Denial is a value, never an exception.

    CONSUMER  read own consumption/devices/comparison
    PROVIDER  read consumption/devices/stats/sync within its tenant,
              trigger sync, upload files for its tenant
    ADMIN     list users, read/trigger sync, upload files, any tenant
    """
    role = principal.role
    if role is Role.CONSUMER:
        if action == "read" and resource.kind in _CONSUMER_READABLE:
            if resource.owner == principal.sub:
                return AccessDecision(True)
            return AccessDecision(False, "consumers may only read their own data")
    elif role is Role.PROVIDER:
        if resource.owner != principal.provider_id:
            return AccessDecision(False, "resource belongs to another tenant")
        if action == "read" and resource.kind in _PROVIDER_READABLE:
            return AccessDecision(True)
        if action == "trigger" and resource.kind == "sync":
            return AccessDecision(True)
        if action == "upload" and resource.kind == "files":
            return AccessDecision(True)
    elif role is Role.ADMIN:
        if action == "list" and resource.kind == "users":
            return AccessDecision(True)
        if action in ("trigger", "read") and resource.kind == "sync":
            return AccessDecision(True)
        if action == "upload" and resource.kind == "files":
            return AccessDecision(True)
    return AccessDecision(False, f"{role.value} may not {action} {resource.kind}")


# --- dev-mode issuer ---------------------------------------------------------

@dataclass
class _PkceGrant:
    sub: str
    role: str
    provider_id: Optional[str]
    code_challenge: str
    redirect_uri: str
    expires_at_ms: int


class DevIssuer:
    """Minimal token issuer for development and tests.

    Signs RS256 tokens that `verify_token` accepts under `trust_config()`,
    publishes its public key as a JWKS document, and supports the
    authorization-code + PKCE exchange the dashboard login uses. Identity
    is self-asserted: this replaces an external identity provider only for
    development, never for production deployments.
    """

    def __init__(
        self,
        issuer: str,
        audience: str,
        key_path: Optional[Path] = None,
        enabled: bool = True,
    ):
        self.issuer = issuer
        self.audience = audience
        self.enabled = enabled
        self._key = self._load_or_create_key(key_path)
        public_pem = self._key.public_key().public_bytes(
            serialization.Encoding.PEM, serialization.PublicFormat.SubjectPublicKeyInfo
        )
        self.kid = hashlib.sha256(public_pem).hexdigest()[:16]
        self._grants: dict[str, _PkceGrant] = {}
        self._grants_lock = threading.Lock()

    @staticmethod
    def _load_or_create_key(key_path: Optional[Path]) -> rsa.RSAPrivateKey:
        if key_path is not None and key_path.exists():
            return serialization.load_pem_private_key(key_path.read_bytes(), password=None)
        key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
        if key_path is not None:
            key_path.parent.mkdir(parents=True, exist_ok=True)
            key_path.write_bytes(
                key.private_bytes(
                    serialization.Encoding.PEM,
                    serialization.PrivateFormat.PKCS8,
                    serialization.NoEncryption(),
                )
            )
        return key

    def issue(
        self,
        sub: str,
        role: Role | str,
        provider_id: Optional[str] = None,
        ttl_s: int = 3600,
        at_ms: Optional[int] = None,
    ) -> str:
        """Mint a token whose claims round-trip exactly through verify."""
        if not self.enabled:
            raise DevModeDisabled("dev mode is disabled; cannot issue tokens")
        role = Role.parse(role) if isinstance(role, str) else role
        iat = (now_ms() if at_ms is None else at_ms) // 1000
        claims = {
            "iss": self.issuer,
            "aud": self.audience,
            "sub": sub,
            "role": role.value,
            "iat": iat,
            "exp": iat + ttl_s,
        }
        if provider_id is not None:
            claims["provider_id"] = provider_id
        return sign_token(claims, self._key, self.kid)

    def trust_config(self, role_claim: str = "role") -> TrustConfig:
        return TrustConfig(
            issuer=self.issuer,
            audience=self.audience,
            public_key=self._key.public_key(),
            role_claim=role_claim,
        )

    def jwks(self) -> dict:
        numbers = self._key.public_key().public_numbers()
        n_bytes = numbers.n.to_bytes((numbers.n.bit_length() + 7) // 8, "big")
        e_bytes = numbers.e.to_bytes((numbers.e.bit_length() + 7) // 8, "big")
        return {
            "keys": [
                {
                    "kty": "RSA",
                    "use": "sig",
                    "alg": "RS256",
                    "kid": self.kid,
                    "n": _b64url_encode(n_bytes),
                    "e": _b64url_encode(e_bytes),
                }
            ]
        }

    # --- PKCE authorization-code support ---------------------------------

    def create_authorization_code(
        self,
        sub: str,
        role: str,
        provider_id: Optional[str],
        code_challenge: str,
        redirect_uri: str,
        ttl_s: int = 120,
    ) -> str:
        if not self.enabled:
            raise DevModeDisabled("dev mode is disabled")
        code = secrets.token_urlsafe(24)
        with self._grants_lock:
            self._grants[code] = _PkceGrant(
                sub=sub,
                role=role,
                provider_id=provider_id,
                code_challenge=code_challenge,
                redirect_uri=redirect_uri,
                expires_at_ms=now_ms() + ttl_s * 1000,
            )
        return code

    def exchange_code(
        self, code: str, code_verifier: str, redirect_uri: str, ttl_s: int = 3600
    ) -> str:
        """Redeem an authorization code; single use, S256 challenge only."""
        with self._grants_lock:
            grant = self._grants.pop(code, None)
        if grant is None or now_ms() > grant.expires_at_ms:
            raise TokenError(TokenErrorKind.MALFORMED, "unknown or expired authorization code")
        if grant.redirect_uri != redirect_uri:
            raise TokenError(TokenErrorKind.MALFORMED, "redirect_uri mismatch")
        digest = hashlib.sha256(code_verifier.encode("ascii")).digest()
        if _b64url_encode(digest) != grant.code_challenge:
            raise TokenError(TokenErrorKind.BAD_SIGNATURE, "PKCE verifier does not match")
        return self.issue(grant.sub, grant.role, grant.provider_id, ttl_s=ttl_s)
