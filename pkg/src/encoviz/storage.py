"""Durable file-backed persistence behind a backend-agnostic surface.

Layout under the data root:

    hourly/<deviceID>/<YYYY-MM-DD>.seg    hourly energy, binary segment
    rollup/<providerID>/<YYYY-MM-DD>.seg  provider day rollup, binary segment
    mapping/<providerID>.json             user-device mapping
    users/<providerID>.json               user profile metadata
    jobs/<jobID>.json                     sync job records

Segment encoding (version byte first):

    byte 0:        format version, currently 0x01
    hourly body:   repeated 20-byte records, big-endian
                   uint64 hour_start_ms, float64 energy_wh, uint32 sample_count
    rollup body:   uint32 user_count, then 24 x float64 hour slots

Every write goes to a temp file in the target directory and is moved into
place with an atomic rename, so readers observe either the old or the new
value of a key, never a mix. Writes to the same key are serialized;
distinct keys may be written in parallel.
"""

from __future__ import annotations

import io
import json
import os
import struct
import tempfile
import threading
from dataclasses import dataclass
from datetime import date
from pathlib import Path

from .model import (
    MS_PER_DAY,
    MS_PER_HOUR,
    DeviceId,
    HourlyEnergy,
    ProviderRollup,
    SyncJob,
    UserDeviceMapping,
    date_to_ms,
)

SEGMENT_VERSION = 1
_HOURLY_RECORD = struct.Struct(">QdI")
_ROLLUP_HEADER = struct.Struct(">I")
_ROLLUP_SLOTS = struct.Struct(">24d")


class StorageError(Exception):
    """Backend I/O failure or contract violation."""


class NotFoundError(StorageError):
    """The requested key does not exist."""


def _spill(fh: io.BufferedWriter, payload: bytes) -> None:
    # separated from _write_atomic so tests can inject slow, chunked writes
    fh.write(payload)


def _write_atomic(path: Path, payload: bytes) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            _spill(fh, payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


@dataclass(frozen=True)
class UserRow:
    user_id: str
    email: str
    email_verified: bool
    device_count: int


class SegmentStore:
    """Default embedded backend: one segment file per (device, day) and
    per (provider, day), JSON documents for mappings, profiles and jobs.
    Safe to call from multiple threads."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        for ns in ("hourly", "rollup", "mapping", "users", "jobs"):
            (self.root / ns).mkdir(parents=True, exist_ok=True)
        self._locks: dict[tuple, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, *key) -> threading.Lock:
        with self._locks_guard:
            lock = self._locks.get(key)
            if lock is None:
                lock = self._locks[key] = threading.Lock()
            return lock

    # --- hourly ---------------------------------------------------------

    def put_hourly(self, device: DeviceId, day: date, records: list[HourlyEnergy]) -> None:
        """Atomically replace the full (device, day) bucket."""
        day_start = date_to_ms(day)
        body = bytearray([SEGMENT_VERSION])
        for rec in sorted(records, key=lambda r: r.hour_start_ms):
            if rec.device != device:
                raise StorageError(f"record for {rec.device!r} in a {device!r} write")
            if not day_start <= rec.hour_start_ms < day_start + MS_PER_DAY:
                raise StorageError(
                    f"hour {rec.hour_start_ms} falls outside day {day.isoformat()}"
                )
            body += _HOURLY_RECORD.pack(rec.hour_start_ms, rec.energy_wh, rec.sample_count)
        path = self.root / "hourly" / device / f"{day.isoformat()}.seg"
        with self._lock("hourly", str(device), day):
            try:
                path.parent.mkdir(exist_ok=True)
                _write_atomic(path, bytes(body))
            except OSError as exc:
                raise StorageError(f"cannot write hourly segment: {exc}") from exc

    def get_hourly(self, device: DeviceId, from_ms: int, to_ms: int) -> list[HourlyEnergy]:
        """All stored records with from_ms <= hour_start < to_ms, ascending."""
        if from_ms >= to_ms:
            raise StorageError(f"invalid range: from {from_ms} must be < to {to_ms}")
        if from_ms % MS_PER_HOUR or to_ms % MS_PER_HOUR:
            raise StorageError("range bounds must be hour-aligned")
        from_day = from_ms // MS_PER_DAY
        to_day = (to_ms - 1) // MS_PER_DAY
        out: list[HourlyEnergy] = []
        for day in self.list_hourly_days(device):
            day_index = date_to_ms(day) // MS_PER_DAY
            if not from_day <= day_index <= to_day:
                continue
            for rec in self._read_hourly_segment(device, day):
                if from_ms <= rec.hour_start_ms < to_ms:
                    out.append(rec)
        return out

    def iter_hourly(self, device: DeviceId) -> list[HourlyEnergy]:
        """Every stored record for a device, ascending."""
        out: list[HourlyEnergy] = []
        for day in self.list_hourly_days(device):
            out.extend(self._read_hourly_segment(device, day))
        return out

    def list_hourly_days(self, device: DeviceId) -> list[date]:
        return self._list_days(self.root / "hourly" / device)

    def list_hourly_devices(self) -> list[DeviceId]:
        base = self.root / "hourly"
        return [DeviceId(p.name) for p in sorted(base.iterdir()) if p.is_dir()]

    def _read_hourly_segment(self, device: DeviceId, day: date) -> list[HourlyEnergy]:
        path = self.root / "hourly" / device / f"{day.isoformat()}.seg"
        payload = self._read_bytes(path)
        if payload is None:
            return []
        body = self._segment_body(payload, path)
        if len(body) % _HOURLY_RECORD.size:
            raise StorageError(f"truncated hourly segment {path}")
        return [
            HourlyEnergy(device, hour_start, energy_wh, sample_count)
            for hour_start, energy_wh, sample_count in _HOURLY_RECORD.iter_unpack(body)
        ]

    # --- rollups ----------------------------------------------------------

    def put_rollup(self, rollup: ProviderRollup) -> None:
        body = (
            bytes([SEGMENT_VERSION])
            + _ROLLUP_HEADER.pack(rollup.user_count)
            + _ROLLUP_SLOTS.pack(*rollup.hourly_totals_wh)
        )
        path = self.root / "rollup" / rollup.provider_id / f"{rollup.day.isoformat()}.seg"
        with self._lock("rollup", rollup.provider_id, rollup.day):
            try:
                path.parent.mkdir(exist_ok=True)
                _write_atomic(path, body)
            except OSError as exc:
                raise StorageError(f"cannot write rollup segment: {exc}") from exc

    def get_rollups(self, provider_id: str, from_day: date, to_day: date) -> list[ProviderRollup]:
        """Stored rollups with from_day <= day < to_day, ascending."""
        out: list[ProviderRollup] = []
        for day in self.list_rollup_days(provider_id):
            if not from_day <= day < to_day:
                continue
            path = self.root / "rollup" / provider_id / f"{day.isoformat()}.seg"
            payload = self._read_bytes(path)
            if payload is None:
                continue
            body = self._segment_body(payload, path)
            if len(body) != _ROLLUP_HEADER.size + _ROLLUP_SLOTS.size:
                raise StorageError(f"truncated rollup segment {path}")
            (user_count,) = _ROLLUP_HEADER.unpack_from(body, 0)
            slots = _ROLLUP_SLOTS.unpack_from(body, _ROLLUP_HEADER.size)
            out.append(ProviderRollup(provider_id, day, tuple(slots), user_count))
        return out

    def list_rollup_days(self, provider_id: str) -> list[date]:
        return self._list_days(self.root / "rollup" / provider_id)

    # --- mappings ---------------------------------------------------------

    def put_mapping(self, mapping: UserDeviceMapping) -> None:
        # construction already validated the per-mapping invariants;
        # re-check defensively, then guard the global device namespace
        # (hourly segments are keyed by device id alone)
        UserDeviceMapping(mapping.provider_id, mapping.entries)
        own_devices = {
            md.device for entry in mapping.entries for md in entry.devices
        }
        for other in self.list_providers():
            if other == mapping.provider_id:
                continue
            for entry in self.get_mapping(other).entries:
                for md in entry.devices:
                    if md.device in own_devices:
                        raise StorageError(
                            f"device {md.device!r} is already mapped by provider {other!r}"
                        )
        path = self.root / "mapping" / f"{mapping.provider_id}.json"
        with self._lock("mapping", mapping.provider_id):
            self._write_json(path, mapping.to_dict())

    def get_mapping(self, provider_id: str) -> UserDeviceMapping:
        path = self.root / "mapping" / f"{provider_id}.json"
        data = self._read_json(path)
        if data is None:
            raise NotFoundError(f"no mapping for provider {provider_id!r}")
        return UserDeviceMapping.from_dict(data)

    def list_providers(self) -> list[str]:
        base = self.root / "mapping"
        return sorted(p.stem for p in base.glob("*.json"))

    # --- user profiles ------------------------------------------------------

    def set_user_profile(
        self, provider_id: str, user_id: str, email: str, email_verified: bool
    ) -> None:
        path = self.root / "users" / f"{provider_id}.json"
        with self._lock("users", provider_id):
            profiles = self._read_json(path) or {}
            profiles[user_id] = {"email": email, "email_verified": email_verified}
            self._write_json(path, profiles)

    def get_user_profiles(self, provider_id: str) -> dict:
        return self._read_json(self.root / "users" / f"{provider_id}.json") or {}

    def list_users(self, provider_id: str) -> list[UserRow]:
        """One row per mapped user, ordered by user_id. Profile fields fall
        back to an empty, unverified email when no profile was stored."""
        mapping = self.get_mapping(provider_id)
        profiles = self.get_user_profiles(provider_id)
        rows = []
        for entry in sorted(mapping.entries, key=lambda e: e.user_id):
            profile = profiles.get(entry.user_id, {})
            rows.append(
                UserRow(
                    user_id=entry.user_id,
                    email=profile.get("email", ""),
                    email_verified=bool(profile.get("email_verified", False)),
                    device_count=len(entry.devices),
                )
            )
        return rows

    # --- jobs -------------------------------------------------------------

    def put_job(self, job: SyncJob) -> None:
        path = self.root / "jobs" / f"{job.job_id}.json"
        with self._lock("jobs", job.job_id):
            self._write_json(path, job.to_dict())

    def get_job(self, job_id: str) -> SyncJob:
        data = self._read_json(self.root / "jobs" / f"{job_id}.json")
        if data is None:
            raise NotFoundError(f"no job {job_id!r}")
        return SyncJob.from_dict(data)

    def list_jobs(self) -> list[SyncJob]:
        jobs = []
        for path in sorted((self.root / "jobs").glob("*.json")):
            data = self._read_json(path)
            if data is not None:
                jobs.append(SyncJob.from_dict(data))
        return jobs

    # --- shared helpers -----------------------------------------------------

    @staticmethod
    def _list_days(base: Path) -> list[date]:
        if not base.is_dir():
            return []
        days = []
        for p in base.glob("*.seg"):
            try:
                days.append(date.fromisoformat(p.stem))
            except ValueError:
                continue
        return sorted(days)

    @staticmethod
    def _segment_body(payload: bytes, path: Path) -> bytes:
        if not payload or payload[0] != SEGMENT_VERSION:
            found = payload[0] if payload else None
            raise StorageError(f"unsupported segment version {found!r} in {path}")
        return payload[1:]

    @staticmethod
    def _read_bytes(path: Path) -> bytes | None:
        try:
            return path.read_bytes()
        except FileNotFoundError:
            return None
        except OSError as exc:
            raise StorageError(f"cannot read {path}: {exc}") from exc

    def _read_json(self, path: Path) -> dict | None:
        payload = self._read_bytes(path)
        if payload is None:
            return None
        try:
            return json.loads(payload)
        except json.JSONDecodeError as exc:
            raise StorageError(f"corrupt JSON document {path}: {exc}") from exc

    @staticmethod
    def _write_json(path: Path, data: dict) -> None:
        try:
            _write_atomic(path, json.dumps(data, indent=2).encode("utf-8"))
        except OSError as exc:
            raise StorageError(f"cannot write {path}: {exc}") from exc
