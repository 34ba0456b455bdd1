"""Shared fixtures: a seeded RSA key for the dev issuer (generated once
per session), app factories and small synthetic fleets."""

from __future__ import annotations

import json
from pathlib import Path
from types import SimpleNamespace

import pytest
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import rsa

from encoviz.config import AppConfig
from encoviz.fleetgen import FleetSpec, generate_fleet
from encoviz.model import UserDeviceMapping
from encoviz.storage import SegmentStore


@pytest.fixture(scope="session")
def dev_key_pem() -> bytes:
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )


@pytest.fixture
def app_env(tmp_path: Path, dev_key_pem: bytes):
    """A live service over a fresh data directory, dev mode on."""
    from fastapi.testclient import TestClient

    from encoviz.api import create_app

    config = AppConfig(data_dir=tmp_path / "data", dev_mode=True, cors_origins=[])
    config.data_dir.mkdir(parents=True)
    config.dev_key_path().write_bytes(dev_key_pem)
    app = create_app(config)
    with TestClient(app) as client:
        yield SimpleNamespace(
            client=client,
            config=config,
            store=app.state.store,
            issuer=app.state.dev_issuer,
            orchestrator=app.state.orchestrator,
            app=app,
        )


def import_fleet(store: SegmentStore, source_dir: Path, incoming_dir: Path) -> UserDeviceMapping:
    """Store the generated mapping/profiles and copy CSVs into the
    provider's drop directory, the way `encoviz import` would."""
    mapping = UserDeviceMapping.from_dict(
        json.loads((source_dir / "mapping.json").read_text())
    )
    store.put_mapping(mapping)
    users_path = source_dir / "users.json"
    if users_path.is_file():
        for profile in json.loads(users_path.read_text()):
            store.set_user_profile(
                mapping.provider_id,
                profile["user_id"],
                profile.get("email", ""),
                bool(profile.get("email_verified", False)),
            )
    incoming_dir.mkdir(parents=True, exist_ok=True)
    for csv_path in source_dir.glob("*.csv"):
        (incoming_dir / csv_path.name).write_bytes(csv_path.read_bytes())
    return mapping


@pytest.fixture
def small_fleet(tmp_path: Path):
    """2 homes x (1 DIN + 2 plugs), 1 day at 60 s sampling."""
    spec = FleetSpec(homes=2, plugs_per_home=2, days=1, sample_period_s=60, seed=7)
    fleet = generate_fleet(spec, tmp_path / "drop")
    return SimpleNamespace(spec=spec, fleet=fleet, source_dir=tmp_path / "drop")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    reports = []
    for outcome in ("passed", "failed", "error"):
        reports.extend(terminalreporter.stats.get(outcome, []))
    acceptance = [
        r
        for r in reports
        if getattr(r, "when", "call") == "call" and "test_acceptance" in r.nodeid
    ]
    if not acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for report in sorted(acceptance, key=lambda r: r.nodeid):
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        terminalreporter.write_line(f"{status}: {name}")
