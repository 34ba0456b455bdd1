"""Two-phase sync executed as queued jobs.

Phase 1 walks the provider's user-device mapping, parses each mapped
device's drop file and writes per-day hourly energy. Phase 2 sums each
user's whole-home (DIN) hourly energy into per-day provider rollups.

Queue contract: jobs for one provider run in FIFO order with at most one
RUNNING at any instant; jobs for distinct providers run concurrently. Job
state is persisted before it becomes observable through job_status. The
queue is in-process; the contract, not the broker product, is the design.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .aggregate import hourly_energy
from .ingest import IngestWarning, WarningKind, normalize_batch, read_device_file
from .model import (
    MS_PER_DAY,
    MS_PER_HOUR,
    HourlyEnergy,
    ProviderRollup,
    SyncJob,
    UserDeviceMapping,
    date_to_ms,
    ms_to_date,
)
from .storage import NotFoundError, SegmentStore

logger = logging.getLogger(__name__)


class SyncError(Exception):
    """Enqueue precondition failed (unknown provider, missing directory)."""


@dataclass
class SyncReport:
    job_id: str
    users_synced: int = 0
    devices_synced: int = 0
    hourly_records_written: int = 0
    rollup_days_written: int = 0
    warnings: list[IngestWarning] = field(default_factory=list)


def _now_ms() -> int:
    return int(time.time() * 1000)


def _group_by_day(records: list[HourlyEnergy]) -> dict:
    days: dict = {}
    for rec in records:
        days.setdefault(ms_to_date(rec.hour_start_ms), []).append(rec)
    return days


def run_user_sync(
    store: SegmentStore, mapping: UserDeviceMapping, source_dir: Path
) -> SyncReport:
    """Phase 1: aggregate every mapped device's drop file to hourly energy.

    A missing file for a mapped device is a warning, not a failure; each
    present (device, day) bucket is replaced whole, so re-running over the
    same files leaves storage value-identical.
    """
    report = SyncReport(job_id="", users_synced=len(mapping.entries))
    if not source_dir.is_dir():
        raise SyncError(f"source directory {source_dir} is not readable")
    for entry in mapping.entries:
        for md in entry.devices:
            path = source_dir / f"{md.device}.csv"
            if not path.is_file():
                report.warnings.append(
                    IngestWarning(
                        WarningKind.MISSING_FILE, 1, f"no drop file for device {md.device}"
                    )
                )
                continue
            device, measurements, file_warnings = read_device_file(path)
            report.warnings.extend(file_warnings)
            normalized, batch_warnings = normalize_batch(measurements)
            report.warnings.extend(batch_warnings)
            records = hourly_energy(normalized)
            for day, day_records in _group_by_day(records).items():
                store.put_hourly(device, day, day_records)
            report.devices_synced += 1
            report.hourly_records_written += len(records)
    return report


def run_provider_sync(store: SegmentStore, provider_id: str) -> int:
    """Phase 2: per-day fleet rollups over the users' DIN_TOTAL devices.

    Only whole-home meters feed the rollup; plug energy is already inside
    the home total and would double-count. user_count is the mapping size
    regardless of who had data. Returns the number of days written.
    """
    mapping = store.get_mapping(provider_id)
    din_devices = [entry.din_device() for entry in mapping.entries]
    days = sorted({day for dev in din_devices for day in store.list_hourly_days(dev)})
    for day in days:
        day_start = date_to_ms(day)
        slots = [0.0] * 24
        for dev in din_devices:
            for rec in store.get_hourly(dev, day_start, day_start + MS_PER_DAY):
                slots[(rec.hour_start_ms - day_start) // MS_PER_HOUR] += rec.energy_wh
        store.put_rollup(
            ProviderRollup(provider_id, day, tuple(slots), user_count=len(mapping.entries))
        )
    return len(days)


class SyncOrchestrator:
    """Per-provider serialized FIFO work queue with persisted job state.

    enqueue_sync is safe to call concurrently from many handlers; a fixed
    worker pool drains the queues, never running two jobs of the same
    provider at once.
    """

    def __init__(self, store: SegmentStore, workers: int = 4):
        self._store = store
        self._cond = threading.Condition()
        self._queues: dict[str, deque[SyncJob]] = {}
        self._busy: set[str] = set()
        self._done_events: dict[str, threading.Event] = {}
        self._reports: dict[str, SyncReport] = {}
        self._closed = False
        self._workers = [
            threading.Thread(target=self._worker_loop, name=f"sync-worker-{i}", daemon=True)
            for i in range(max(1, workers))
        ]
        for w in self._workers:
            w.start()

    # --- public surface ----------------------------------------------------

    def enqueue_sync(self, provider_id: str, source_dir: Path | str) -> SyncJob:
        """Persist and queue a job; returns immediately with state QUEUED."""
        source_dir = Path(source_dir)
        try:
            self._store.get_mapping(provider_id)
        except NotFoundError:
            raise SyncError(f"unknown provider {provider_id!r}: no stored mapping") from None
        if not source_dir.is_dir():
            raise SyncError(f"source directory {source_dir} does not exist")
        job = SyncJob(
            job_id=uuid.uuid4().hex,
            provider_id=provider_id,
            source_dir=str(source_dir),
            enqueued_at=_now_ms(),
        )
        self._store.put_job(job)
        with self._cond:
            if self._closed:
                raise SyncError("orchestrator is shut down")
            self._queues.setdefault(provider_id, deque()).append(job)
            self._done_events[job.job_id] = threading.Event()
            self._cond.notify_all()
        return job

    def job_status(self, job_id: str) -> SyncJob:
        return self._store.get_job(job_id)

    def report(self, job_id: str) -> SyncReport | None:
        return self._reports.get(job_id)

    def wait(self, job_id: str, timeout: float | None = None) -> SyncJob:
        event = self._done_events.get(job_id)
        if event is not None and not event.wait(timeout):
            raise TimeoutError(f"job {job_id} did not finish within {timeout}s")
        return self.job_status(job_id)

    def sync_now(self, provider_id: str, source_dir: Path | str, timeout: float = 600.0):
        """Enqueue and block until terminal; returns (job, report)."""
        job = self.enqueue_sync(provider_id, source_dir)
        final = self.wait(job.job_id, timeout)
        return final, self._reports.get(job.job_id)

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()
        for w in self._workers:
            w.join(timeout=30)

    def __enter__(self) -> "SyncOrchestrator":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # --- worker internals -----------------------------------------------

    def _take_next(self) -> SyncJob | None:
        """Pop the oldest job of any provider that is not already running.
        Caller holds the condition lock."""
        for provider_id, queue in self._queues.items():
            if queue and provider_id not in self._busy:
                self._busy.add(provider_id)
                return queue.popleft()
        return None

    def _worker_loop(self) -> None:
        while True:
            with self._cond:
                job = self._take_next()
                while job is None and not self._closed:
                    self._cond.wait()
                    job = self._take_next()
                if job is None:
                    return
            try:
                self._execute(job)
            finally:
                with self._cond:
                    self._busy.discard(job.provider_id)
                    self._cond.notify_all()
                event = self._done_events.get(job.job_id)
                if event is not None:
                    event.set()

    def _execute(self, queued: SyncJob) -> None:
        try:
            job = queued.started(_now_ms())
            self._store.put_job(job)
            try:
                mapping = self._store.get_mapping(job.provider_id)
                report = run_user_sync(self._store, mapping, Path(job.source_dir))
                report.job_id = job.job_id
                report.rollup_days_written = run_provider_sync(self._store, job.provider_id)
                self._reports[job.job_id] = report
                job = job.succeeded(
                    _now_ms(),
                    files_processed=report.devices_synced,
                    records_written=report.hourly_records_written,
                )
            except Exception as exc:
                logger.exception("sync job %s failed", job.job_id)
                job = job.failed(_now_ms(), str(exc))
            self._store.put_job(job)
        except Exception:  # a broken job record must never kill the worker
            logger.exception("could not persist state for job %s", queued.job_id)
