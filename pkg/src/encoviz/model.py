"""Shared domain types and UTC calendar helpers.

All timestamps are integer UNIX epoch milliseconds, UTC. All bucketing is
UTC: weeks start on Monday (ISO-8601), months and years are calendar
months/years. Every type here is an immutable value, safe to share across
threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from typing import Optional

MS_PER_SECOND = 1_000
MS_PER_HOUR = 3_600_000
MS_PER_DAY = 86_400_000

_EPOCH_DATE = date(1970, 1, 1)
_DEVICE_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


class DomainError(ValueError):
    """An invariant of a domain type or operation was violated."""


class DeviceId(str):
    """Opaque device identifier, usable verbatim as a filename stem."""

    def __new__(cls, value: str) -> "DeviceId":
        if not value or not _DEVICE_ID_RE.match(value):
            raise DomainError(f"invalid device id {value!r}: must be non-empty [A-Za-z0-9_-]")
        return super().__new__(cls, value)


class MeterKind(Enum):
    DIN_TOTAL = "din_total"
    SMART_PLUG = "smart_plug"


@dataclass(frozen=True)
class DeviceKind:
    """Meter kind plus a free-text appliance category.

    DIN_TOTAL meters measure whole-home consumption and usually carry an
    empty category; SMART_PLUG meters meter a single appliance.
    """

    kind: MeterKind
    category: str = ""


@dataclass(frozen=True)
class Measurement:
    """One raw 1Hz sample: instantaneous power of one device."""

    device: DeviceId
    timestamp_ms: int
    power_w: float

    def __post_init__(self) -> None:
        if self.timestamp_ms < 0:
            raise DomainError(f"timestamp_ms must be >= 0, got {self.timestamp_ms}")
        if not (math.isfinite(self.power_w) and self.power_w >= 0):
            raise DomainError(f"power_w must be finite and >= 0, got {self.power_w}")


@dataclass(frozen=True)
class MappedDevice:
    device: DeviceId
    kind: DeviceKind


@dataclass(frozen=True)
class UserEntry:
    user_id: str
    devices: tuple[MappedDevice, ...]

    def din_device(self) -> DeviceId:
        for md in self.devices:
            if md.kind.kind is MeterKind.DIN_TOTAL:
                return md.device
        raise DomainError(f"user {self.user_id!r} has no DIN_TOTAL device")


@dataclass(frozen=True)
class UserDeviceMapping:
    """Provider-authored map from users to their metering devices.

    Invariants enforced on construction: every user has exactly one
    DIN_TOTAL device, device ids are unique across the whole mapping, and
    user ids are unique within the provider.
    """

    provider_id: str
    entries: tuple[UserEntry, ...]

    def __post_init__(self) -> None:
        if not self.provider_id:
            raise DomainError("provider_id must be non-empty")
        seen_users: set[str] = set()
        seen_devices: set[DeviceId] = set()
        for entry in self.entries:
            if not entry.user_id:
                raise DomainError("user_id must be non-empty")
            if entry.user_id in seen_users:
                raise DomainError(f"duplicate user {entry.user_id!r} in mapping")
            seen_users.add(entry.user_id)
            din_count = 0
            for md in entry.devices:
                if md.device in seen_devices:
                    raise DomainError(f"device {md.device!r} mapped more than once")
                seen_devices.add(md.device)
                if md.kind.kind is MeterKind.DIN_TOTAL:
                    din_count += 1
            if din_count != 1:
                raise DomainError(
                    f"user {entry.user_id!r} must have exactly one DIN_TOTAL device, has {din_count}"
                )

    def user(self, user_id: str) -> Optional[UserEntry]:
        for entry in self.entries:
            if entry.user_id == user_id:
                return entry
        return None

    def device_owner(self, device: str) -> Optional[tuple[str, MappedDevice]]:
        """Return (user_id, mapped device) for a device id, if mapped."""
        for entry in self.entries:
            for md in entry.devices:
                if md.device == device:
                    return entry.user_id, md
        return None

    def to_dict(self) -> dict:
        return {
            "provider_id": self.provider_id,
            "entries": [
                {
                    "user_id": e.user_id,
                    "devices": [
                        {
                            "device_id": str(md.device),
                            "kind": md.kind.kind.value,
                            "category": md.kind.category,
                        }
                        for md in e.devices
                    ],
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UserDeviceMapping":
        try:
            entries = tuple(
                UserEntry(
                    user_id=e["user_id"],
                    devices=tuple(
                        MappedDevice(
                            device=DeviceId(d["device_id"]),
                            kind=DeviceKind(MeterKind(d["kind"]), d.get("category", "")),
                        )
                        for d in e["devices"]
                    ),
                )
                for e in data["entries"]
            )
            return cls(provider_id=data["provider_id"], entries=entries)
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed mapping document: {exc}") from exc


@dataclass(frozen=True)
class HourlyEnergy:
    """Energy of one device over one UTC hour, the canonical stored unit."""

    device: DeviceId
    hour_start_ms: int
    energy_wh: float
    sample_count: int

    def __post_init__(self) -> None:
        if self.hour_start_ms < 0 or self.hour_start_ms % MS_PER_HOUR != 0:
            raise DomainError(f"hour_start_ms {self.hour_start_ms} is not hour-aligned UTC")
        if not (math.isfinite(self.energy_wh) and self.energy_wh >= 0):
            raise DomainError(f"energy_wh must be finite and >= 0, got {self.energy_wh}")
        if not 1 <= self.sample_count <= 3600:
            raise DomainError(f"sample_count must be in 1..3600, got {self.sample_count}")


class TimeUnit(Enum):
    HOUR = "hour"
    DAY = "day"
    WEEK = "week"
    MONTH = "month"
    YEAR = "year"

    @classmethod
    def parse(cls, text: str) -> "TimeUnit":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise DomainError(f"unknown time unit {text!r}") from None


@dataclass(frozen=True)
class PeriodQuery:
    """A validated consumption query: time unit, half-open hour-aligned
    range, and optional device/user narrowing."""

    unit: TimeUnit
    from_ms: int
    to_ms: int
    device_filter: Optional[DeviceId] = None
    user_filter: Optional[str] = None

    def __post_init__(self) -> None:
        if self.from_ms >= self.to_ms:
            raise DomainError(f"invalid period: from {self.from_ms} must be < to {self.to_ms}")
        if self.from_ms % MS_PER_HOUR or self.to_ms % MS_PER_HOUR:
            raise DomainError("period bounds must be aligned to whole hours")


@dataclass(frozen=True)
class SeriesBucket:
    start_ms: int
    energy_wh: float


@dataclass(frozen=True)
class ConsumptionSeries:
    """Ordered energy buckets at one time unit; starts are unit-aligned."""

    unit: TimeUnit
    buckets: tuple[SeriesBucket, ...]

    def __post_init__(self) -> None:
        prev = None
        for b in self.buckets:
            if b.start_ms != align_to_unit(b.start_ms, self.unit):
                raise DomainError(f"bucket start {b.start_ms} not aligned to {self.unit.value}")
            if prev is not None and b.start_ms <= prev:
                raise DomainError("bucket starts must be strictly increasing")
            prev = b.start_ms

    def total_wh(self) -> float:
        return sum(b.energy_wh for b in self.buckets)


@dataclass(frozen=True)
class ProviderRollup:
    """Per-day fleet totals: 24 hourly slots plus the mapped-user count."""

    provider_id: str
    day: date
    hourly_totals_wh: tuple[float, ...]
    user_count: int

    def __post_init__(self) -> None:
        if len(self.hourly_totals_wh) != 24:
            raise DomainError(f"rollup needs 24 hourly slots, got {len(self.hourly_totals_wh)}")
        if any(not (math.isfinite(v) and v >= 0) for v in self.hourly_totals_wh):
            raise DomainError("rollup slots must be finite and >= 0")
        if self.user_count < 0:
            raise DomainError("user_count must be >= 0")


@dataclass(frozen=True)
class ComparisonReport:
    """User total vs fleet average, with the relative change against the
    previous period. The delta is absent exactly when the previous period
    had no energy to compare against."""

    user_total_wh: float
    fleet_average_wh: float
    delta_pct_vs_previous: Optional[float] = None


class Role(Enum):
    CONSUMER = "consumer"
    PROVIDER = "provider"
    ADMIN = "admin"

    @classmethod
    def parse(cls, text: str) -> "Role":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise DomainError(f"unknown role {text!r}") from None


@dataclass(frozen=True)
class Principal:
    """Verified identity extracted from a bearer token."""

    sub: str
    role: Role
    provider_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.sub:
            raise DomainError("principal sub must be non-empty")
        if self.role is Role.PROVIDER and not self.provider_id:
            raise DomainError("provider principals require a provider_id")
        if self.role is not Role.PROVIDER and self.provider_id is not None:
            raise DomainError("provider_id is only valid for provider principals")


class JobState(Enum):
    QUEUED = "queued"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


_TERMINAL_STATES = frozenset({JobState.SUCCEEDED, JobState.FAILED})


@dataclass(frozen=True)
class SyncJob:
    """One queued sync execution for a provider.

    State moves only along QUEUED -> RUNNING -> (SUCCEEDED | FAILED);
    the transition helpers return new values and reject anything else.
    """

    job_id: str
    provider_id: str
    source_dir: str
    state: JobState = JobState.QUEUED
    files_processed: int = 0
    records_written: int = 0
    enqueued_at: int = 0
    started_at: Optional[int] = None
    finished_at: Optional[int] = None
    error: Optional[str] = None

    def __post_init__(self) -> None:
        if (self.started_at is None) != (self.state is JobState.QUEUED):
            raise DomainError("started_at must be set exactly when the job has left QUEUED")
        if (self.finished_at is None) == (self.state in _TERMINAL_STATES):
            raise DomainError("finished_at must be set exactly in terminal states")

    @property
    def terminal(self) -> bool:
        return self.state in _TERMINAL_STATES

    def started(self, at_ms: int) -> "SyncJob":
        if self.state is not JobState.QUEUED:
            raise DomainError(f"cannot start a {self.state.value} job")
        return replace(self, state=JobState.RUNNING, started_at=at_ms)

    def succeeded(self, at_ms: int, files_processed: int, records_written: int) -> "SyncJob":
        if self.state is not JobState.RUNNING:
            raise DomainError(f"cannot finish a {self.state.value} job")
        return replace(
            self,
            state=JobState.SUCCEEDED,
            finished_at=at_ms,
            files_processed=files_processed,
            records_written=records_written,
        )

    def failed(self, at_ms: int, error: str) -> "SyncJob":
        if self.state is not JobState.RUNNING:
            raise DomainError(f"cannot fail a {self.state.value} job")
        return replace(self, state=JobState.FAILED, finished_at=at_ms, error=error)

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "provider_id": self.provider_id,
            "source_dir": self.source_dir,
            "state": self.state.value,
            "files_processed": self.files_processed,
            "records_written": self.records_written,
            "enqueued_at": self.enqueued_at,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyncJob":
        return cls(
            job_id=data["job_id"],
            provider_id=data["provider_id"],
            source_dir=data["source_dir"],
            state=JobState(data["state"]),
            files_processed=data["files_processed"],
            records_written=data["records_written"],
            enqueued_at=data["enqueued_at"],
            started_at=data.get("started_at"),
            finished_at=data.get("finished_at"),
            error=data.get("error"),
        )


# --- calendar helpers -------------------------------------------------------

def align_to_unit(ts_ms: int, unit: TimeUnit) -> int:
    """Greatest unit boundary <= ts_ms.

    HOUR and DAY truncate in UTC; WEEK snaps to the preceding Monday
    00:00 UTC; MONTH and YEAR snap to the first day of the calendar
    month/year, 00:00 UTC.
    """
    if unit is TimeUnit.HOUR:
        return ts_ms - ts_ms % MS_PER_HOUR
    if unit is TimeUnit.DAY:
        return ts_ms - ts_ms % MS_PER_DAY
    if unit is TimeUnit.WEEK:
        days = ts_ms // MS_PER_DAY
        # 1970-01-01 was a Thursday; (days + 3) % 7 == 0 exactly on Mondays
        return (days - (days + 3) % 7) * MS_PER_DAY
    d = ms_to_date(ts_ms)
    if unit is TimeUnit.MONTH:
        return date_to_ms(d.replace(day=1))
    if unit is TimeUnit.YEAR:
        return date_to_ms(d.replace(month=1, day=1))
    raise DomainError(f"unknown unit {unit!r}")


def next_boundary(aligned_ms: int, unit: TimeUnit) -> int:
    """Start of the unit bucket after the one starting at aligned_ms."""
    if aligned_ms != align_to_unit(aligned_ms, unit):
        raise DomainError(f"{aligned_ms} is not aligned to {unit.value}")
    if unit is TimeUnit.HOUR:
        return aligned_ms + MS_PER_HOUR
    if unit is TimeUnit.DAY:
        return aligned_ms + MS_PER_DAY
    if unit is TimeUnit.WEEK:
        return aligned_ms + 7 * MS_PER_DAY
    d = ms_to_date(aligned_ms)
    if unit is TimeUnit.MONTH:
        nxt = date(d.year + 1, 1, 1) if d.month == 12 else date(d.year, d.month + 1, 1)
        return date_to_ms(nxt)
    return date_to_ms(date(d.year + 1, 1, 1))


def previous_period(from_ms: int, to_ms: int) -> tuple[int, int]:
    """The immediately preceding window of equal length, ending at from_ms."""
    if from_ms >= to_ms:
        raise DomainError(f"invalid period: from {from_ms} must be < to {to_ms}")
    return from_ms - (to_ms - from_ms), from_ms


def ms_to_date(ts_ms: int) -> date:
    return _EPOCH_DATE + timedelta(days=ts_ms // MS_PER_DAY)


def date_to_ms(d: date) -> int:
    return (d - _EPOCH_DATE).days * MS_PER_DAY


def ms_to_datetime(ts_ms: int) -> datetime:
    return datetime(1970, 1, 1, tzinfo=timezone.utc) + timedelta(milliseconds=ts_ms)


def format_rfc3339(ts_ms: int) -> str:
    dt = ms_to_datetime(ts_ms)
    if ts_ms % MS_PER_SECOND == 0:
        return dt.strftime("%Y-%m-%dT%H:%M:%SZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ts_ms % MS_PER_SECOND:03d}Z"


def parse_timestamp(text: str) -> int:
    """Parse an epoch-ms integer or an RFC 3339 timestamp to epoch ms.

    Naive RFC 3339 values are taken as UTC.
    """
    text = text.strip()
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    normalized = (text[:-1] + "+00:00") if text.endswith(("Z", "z")) else text
    try:
        dt = datetime.fromisoformat(normalized)
    except ValueError:
        raise DomainError(f"unparseable timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)
