"""Seeded synthetic fleet generator for demos and tests.

Models the deployment shape the service targets: a fleet of homes, each
with one whole-home DIN meter and a number of appliance smart plugs. Plug
loads are standby power plus on/off appliance cycles; the DIN series is
the plug sum plus a base household load, so the home total dominates its
plug sum at every single timestamp.

All power values are computed in integer deciwatts and formatted from
integers, so output is byte-identical for a fixed spec.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .model import DeviceId, DomainError

# appliance labels the plugs cycle through
CATEGORIES = ["washing machine", "dryer", "dishwasher", "a/c unit", "tv"]

DEFAULT_START_MS = 1_677_628_800_000  # 2023-03-01T00:00:00Z


@dataclass(frozen=True)
class FleetSpec:
    homes: int = 30
    plugs_per_home: int = 2
    start_ms: int = DEFAULT_START_MS
    days: int = 2
    sample_period_s: int = 1
    seed: int = 0
    provider_id: str = "p1"
    # device ids are global across providers; distinct prefixes keep
    # side-by-side fleets collision-free
    home_prefix: str = "h"
    user_prefix: str = "u"

    def __post_init__(self) -> None:
        if self.homes < 1:
            raise DomainError("homes must be >= 1")
        if self.plugs_per_home < 0:
            raise DomainError("plugs_per_home must be >= 0")
        if self.days < 1:
            raise DomainError("days must be >= 1")
        if self.sample_period_s < 1:
            raise DomainError("sample_period_s must be >= 1")
        if self.start_ms < 0:
            raise DomainError("start_ms must be >= 0")

    @property
    def samples_per_device(self) -> int:
        return self.days * 86_400 // self.sample_period_s


@dataclass(frozen=True)
class GeneratedFleet:
    mapping_path: Path
    users_path: Path
    csv_paths: tuple[Path, ...]


def _plug_deciwatts(spec: FleetSpec, device_id: str) -> list[int]:
    rng = random.Random(f"{spec.seed}:{device_id}")
    standby_dw = rng.randint(5, 30)
    cycles: list[tuple[int, int, int]] = []  # (start_s, end_s, power_dw)
    for day in range(spec.days):
        for _ in range(rng.randint(0, 3)):
            duration = rng.randint(1800, 7200)
            start = day * 86_400 + rng.randint(0, 86_400 - duration)
            cycles.append((start, start + duration, rng.randint(3000, 18000)))
    samples = []
    for k in range(spec.samples_per_device):
        t = k * spec.sample_period_s
        dw = standby_dw
        for start, end, power in cycles:
            if start <= t < end:
                dw += power
        samples.append(dw)
    return samples


def _base_deciwatts(spec: FleetSpec, home: int) -> list[int]:
    rng = random.Random(f"{spec.seed}:{spec.home_prefix}{home:03d}_base")
    floor_dw = rng.randint(200, 1500)
    hourly = [floor_dw + rng.randint(0, 3000) for _ in range(24)]
    samples = []
    for k in range(spec.samples_per_device):
        t = k * spec.sample_period_s
        samples.append(hourly[(t // 3600) % 24])
    return samples


def _write_csv(path: Path, start_ms: int, period_s: int, deciwatts: list[int]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for k, dw in enumerate(deciwatts):
            fh.write(f"{start_ms + k * period_s * 1000},{dw // 10}.{dw % 10}\n")


def generate_fleet(spec: FleetSpec, out_dir: Path | str) -> GeneratedFleet:
    """Emit one CSV per device plus the mapping and user-profile documents.

    Byte-identical output for identical specs; the DIN series is >= the
    plug sum at every sample by construction.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_paths: list[Path] = []
    entries = []
    users = []
    for home in range(1, spec.homes + 1):
        user_id = f"{spec.user_prefix}{home:03d}"
        din_id = DeviceId(f"{spec.home_prefix}{home:03d}_din")
        plug_loads: list[tuple[DeviceId, str, list[int]]] = []
        for plug in range(1, spec.plugs_per_home + 1):
            plug_id = DeviceId(f"{spec.home_prefix}{home:03d}_plug{plug}")
            category = CATEGORIES[(home - 1 + plug - 1) % len(CATEGORIES)]
            plug_loads.append((plug_id, category, _plug_deciwatts(spec, plug_id)))
        base = _base_deciwatts(spec, home)
        din = [
            base[k] + sum(load[k] for _, _, load in plug_loads)
            for k in range(spec.samples_per_device)
        ]

        for plug_id, _category, load in plug_loads:
            path = out_dir / f"{plug_id}.csv"
            _write_csv(path, spec.start_ms, spec.sample_period_s, load)
            csv_paths.append(path)
        din_path = out_dir / f"{din_id}.csv"
        _write_csv(din_path, spec.start_ms, spec.sample_period_s, din)
        csv_paths.append(din_path)

        devices = [{"device_id": str(din_id), "kind": "din_total", "category": ""}]
        devices.extend(
            {"device_id": str(plug_id), "kind": "smart_plug", "category": category}
            for plug_id, category, _load in plug_loads
        )
        entries.append({"user_id": user_id, "devices": devices})
        home_rng = random.Random(f"{spec.seed}:{user_id}:profile")
        users.append(
            {
                "user_id": user_id,
                "email": f"{user_id}@example.com",
                "email_verified": home_rng.random() < 0.75,
            }
        )

    mapping_path = out_dir / "mapping.json"
    mapping_path.write_text(
        json.dumps({"provider_id": spec.provider_id, "entries": entries}, indent=2) + "\n",
        encoding="utf-8",
    )
    users_path = out_dir / "users.json"
    users_path.write_text(json.dumps(users, indent=2) + "\n", encoding="utf-8")
    return GeneratedFleet(
        mapping_path=mapping_path, users_path=users_path, csv_paths=tuple(csv_paths)
    )
