"""Service configuration: JSON config file with environment overrides.

Environment variables win over the file; every key has a usable default
so a bare `encoviz serve` works in dev mode.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional


class ConfigError(Exception):
    pass


@dataclass
class AppConfig:
    data_dir: Path = Path("data")
    host: str = "127.0.0.1"
    port: int = 8080
    dev_mode: bool = True
    issuer: str = "encoviz-dev"
    audience: str = "encoviz-api"
    role_claim: str = "role"
    static_key_pem: Optional[Path] = None
    jwks_url: Optional[str] = None
    cors_origins: list[str] = field(default_factory=lambda: ["http://localhost:5173"])
    sync_workers: int = 4
    token_ttl_s: int = 3600
    overview_comparison_unit: str = "month"

    @property
    def incoming_dir(self) -> Path:
        return self.data_dir / "incoming"

    def source_dir_for(self, provider_id: str) -> Path:
        return self.incoming_dir / provider_id

    def dev_key_path(self) -> Path:
        return self.data_dir / "dev-issuer-key.pem"

    @classmethod
    def load(
        cls, path: Optional[Path | str] = None, env: Mapping[str, str] = os.environ
    ) -> "AppConfig":
        cfg = cls()
        if path is not None:
            try:
                raw = json.loads(Path(path).read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise ConfigError(f"config file {path} not found") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
            cfg._apply(raw)
        cfg._apply_env(env)
        if not cfg.dev_mode and cfg.static_key_pem is None and cfg.jwks_url is None:
            raise ConfigError(
                "non-dev mode needs a token verification key: set static_key_pem or jwks_url"
            )
        return cfg

    def _apply(self, raw: dict) -> None:
        known = {
            "data_dir": lambda v: setattr(self, "data_dir", Path(v)),
            "host": lambda v: setattr(self, "host", str(v)),
            "port": lambda v: setattr(self, "port", int(v)),
            "dev_mode": lambda v: setattr(self, "dev_mode", bool(v)),
            "issuer": lambda v: setattr(self, "issuer", str(v)),
            "audience": lambda v: setattr(self, "audience", str(v)),
            "role_claim": lambda v: setattr(self, "role_claim", str(v)),
            "static_key_pem": lambda v: setattr(self, "static_key_pem", Path(v) if v else None),
            "jwks_url": lambda v: setattr(self, "jwks_url", v or None),
            "cors_origins": lambda v: setattr(self, "cors_origins", list(v)),
            "sync_workers": lambda v: setattr(self, "sync_workers", int(v)),
            "token_ttl_s": lambda v: setattr(self, "token_ttl_s", int(v)),
            "overview_comparison_unit": lambda v: setattr(
                self, "overview_comparison_unit", str(v)
            ),
        }
        for key, value in raw.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            known[key](value)

    def _apply_env(self, env: Mapping[str, str]) -> None:
        def truthy(text: str) -> bool:
            return text.strip().lower() in ("1", "true", "yes", "on")

        if "ENCOVIZ_DATA_DIR" in env:
            self.data_dir = Path(env["ENCOVIZ_DATA_DIR"])
        if "ENCOVIZ_HOST" in env:
            self.host = env["ENCOVIZ_HOST"]
        if "ENCOVIZ_PORT" in env:
            self.port = int(env["ENCOVIZ_PORT"])
        if "ENCOVIZ_DEV_MODE" in env:
            self.dev_mode = truthy(env["ENCOVIZ_DEV_MODE"])
        if "ENCOVIZ_ISSUER" in env:
            self.issuer = env["ENCOVIZ_ISSUER"]
        if "ENCOVIZ_AUDIENCE" in env:
            self.audience = env["ENCOVIZ_AUDIENCE"]
        if "ENCOVIZ_ROLE_CLAIM" in env:
            self.role_claim = env["ENCOVIZ_ROLE_CLAIM"]
        if "ENCOVIZ_STATIC_KEY_PEM" in env:
            self.static_key_pem = Path(env["ENCOVIZ_STATIC_KEY_PEM"])
        if "ENCOVIZ_JWKS_URL" in env:
            self.jwks_url = env["ENCOVIZ_JWKS_URL"]
        if "ENCOVIZ_CORS_ORIGINS" in env:
            self.cors_origins = [o.strip() for o in env["ENCOVIZ_CORS_ORIGINS"].split(",") if o.strip()]
        if "ENCOVIZ_SYNC_WORKERS" in env:
            self.sync_workers = int(env["ENCOVIZ_SYNC_WORKERS"])
        if "ENCOVIZ_TOKEN_TTL_S" in env:
            self.token_ttl_s = int(env["ENCOVIZ_TOKEN_TTL_S"])
