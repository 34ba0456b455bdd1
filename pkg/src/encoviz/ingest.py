"""CSV drop-file ingestion.

Drop format: one file per device, named `<deviceID>.csv`, records
`timestamp_ms,value_watts` separated by LF or CRLF, UTF-8, with one
optional header line. Parsing never aborts a whole file for a bad line:
glitches are skipped and reported as warnings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .model import DeviceId, DomainError, Measurement


class WarningKind(Enum):
    DUPLICATE_TIMESTAMP = "duplicate_timestamp"
    OUT_OF_ORDER = "out_of_order"
    MALFORMED_LINE = "malformed_line"
    NEGATIVE_VALUE = "negative_value"
    MISSING_FILE = "missing_file"


@dataclass(frozen=True)
class IngestWarning:
    kind: WarningKind
    line_no: int
    detail: str

    def __post_init__(self) -> None:
        if self.line_no < 1:
            raise DomainError(f"line_no must be >= 1, got {self.line_no}")


class LineError(Exception):
    """A single record could not be parsed; carries the warning kind."""

    def __init__(self, kind: WarningKind, detail: str):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail


def parse_measurement_line(line: str, device: DeviceId) -> Measurement:
    """Parse one `timestamp_ms,value_watts` record.

    Tolerates surrounding whitespace. Raises LineError with
    MALFORMED_LINE for a wrong field count or non-numeric fields, and
    NEGATIVE_VALUE for a power below zero.
    """
    fields = line.strip().split(",")
    if len(fields) != 2:
        raise LineError(WarningKind.MALFORMED_LINE, f"expected 2 fields, got {len(fields)}")
    ts_text, value_text = fields[0].strip(), fields[1].strip()
    try:
        timestamp_ms = int(ts_text)
    except ValueError:
        raise LineError(WarningKind.MALFORMED_LINE, f"non-integer timestamp {ts_text!r}") from None
    try:
        power_w = float(value_text)
    except ValueError:
        raise LineError(WarningKind.MALFORMED_LINE, f"non-numeric value {value_text!r}") from None
    if not math.isfinite(power_w):
        raise LineError(WarningKind.MALFORMED_LINE, f"non-finite value {value_text!r}")
    if power_w < 0:
        raise LineError(WarningKind.NEGATIVE_VALUE, f"negative power {power_w}")
    if timestamp_ms < 0:
        raise LineError(WarningKind.MALFORMED_LINE, f"negative timestamp {timestamp_ms}")
    return Measurement(device=device, timestamp_ms=timestamp_ms, power_w=power_w)


def _looks_like_header(line: str) -> bool:
    first = line.strip().split(",")[0].strip()
    if not first:
        return False
    try:
        float(first)
        return False
    except ValueError:
        return True


def read_device_file(path: Path | str) -> tuple[DeviceId, list[Measurement], list[IngestWarning]]:
    """Read one drop file; the device id is the filename stem.

    An optional first line whose first field is non-numeric is skipped as
    a header. Malformed lines are skipped and reported, never fatal.
    Raises DomainError for a bad filename stem, OSError for an unreadable
    file.
    """
    path = Path(path)
    device = DeviceId(path.stem)
    measurements: list[Measurement] = []
    warnings: list[IngestWarning] = []
    with path.open("r", encoding="utf-8", newline=None) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if line_no == 1 and _looks_like_header(line):
                continue
            try:
                measurements.append(parse_measurement_line(line, device))
            except LineError as err:
                warnings.append(IngestWarning(err.kind, line_no, err.detail))
    return device, measurements, warnings


def normalize_batch(
    measurements: list[Measurement],
) -> tuple[list[Measurement], list[IngestWarning]]:
    """Sort one device's batch by timestamp and collapse exact duplicates.

    Duplicate timestamps keep the LAST occurrence in input order (a later
    export supersedes an earlier one). Out-of-order input is accepted,
    warned about once per descent, and corrected by the sort. Raises
    DomainError when the batch mixes devices.

    Idempotent: running on its own output changes nothing and emits no
    warnings.
    """
    warnings: list[IngestWarning] = []
    by_ts: dict[int, Measurement] = {}
    prev_ts: int | None = None
    device = measurements[0].device if measurements else None
    for pos, m in enumerate(measurements, start=1):
        if m.device != device:
            raise DomainError(f"mixed devices in batch: {device!r} and {m.device!r}")
        if m.timestamp_ms in by_ts:
            warnings.append(
                IngestWarning(
                    WarningKind.DUPLICATE_TIMESTAMP,
                    pos,
                    f"duplicate timestamp {m.timestamp_ms}, keeping the later record",
                )
            )
        elif prev_ts is not None and m.timestamp_ms < prev_ts:
            warnings.append(
                IngestWarning(
                    WarningKind.OUT_OF_ORDER,
                    pos,
                    f"timestamp {m.timestamp_ms} arrived after {prev_ts}",
                )
            )
        by_ts[m.timestamp_ms] = m
        prev_ts = m.timestamp_ms
    ordered = [by_ts[ts] for ts in sorted(by_ts)]
    return ordered, warnings
