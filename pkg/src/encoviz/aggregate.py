"""Pure computation core: watt samples to hourly energy, hourly energy to
calendar rollups, fleet averages, period deltas and min/avg/max stats.

Energy rule: each 1Hz sample covers exactly one second at its power, so an
hour's energy in watt-hours is the sum of its sample watts divided by
3600. Missing seconds contribute zero (no interpolation), which keeps
aggregation additive and conservation exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import (
    MS_PER_HOUR,
    ConsumptionSeries,
    DomainError,
    HourlyEnergy,
    Measurement,
    SeriesBucket,
    TimeUnit,
    align_to_unit,
)


@dataclass(frozen=True)
class PeriodStats:
    avg_wh: float
    min_wh: float
    max_wh: float
    bucket_count: int

    def __post_init__(self) -> None:
        if self.bucket_count < 1:
            raise DomainError("stats need at least one bucket")
        if not self.min_wh <= self.avg_wh <= self.max_wh:
            raise DomainError("stats must satisfy min <= avg <= max")


def hourly_energy(samples: Sequence[Measurement]) -> list[HourlyEnergy]:
    """Aggregate a normalized (sorted, deduplicated, single-device) sample
    list into per-hour energy records. Hours with no samples produce no
    record. Rejects unsorted input and input denser than 1Hz (an hour
    cannot hold more than 3600 one-second samples).
    """
    if not samples:
        return []
    device = samples[0].device
    records: list[HourlyEnergy] = []
    hour = samples[0].timestamp_ms // MS_PER_HOUR
    watt_sum = 0.0
    count = 0
    prev_ts = -1
    for m in samples:
        if m.device != device:
            raise DomainError(f"mixed devices in sample list: {device!r} and {m.device!r}")
        if m.timestamp_ms <= prev_ts:
            raise DomainError("samples must be strictly increasing by timestamp")
        prev_ts = m.timestamp_ms
        h = m.timestamp_ms // MS_PER_HOUR
        if h != hour:
            records.append(
                HourlyEnergy(device, hour * MS_PER_HOUR, watt_sum / 3600.0, count)
            )
            hour, watt_sum, count = h, 0.0, 0
        watt_sum += m.power_w
        count += 1
    records.append(HourlyEnergy(device, hour * MS_PER_HOUR, watt_sum / 3600.0, count))
    return records


def bucket_points(
    points: Iterable[tuple[int, float]], unit: TimeUnit, from_ms: int, to_ms: int
) -> ConsumptionSeries:
    """Sum (timestamp_ms, energy_wh) points into unit buckets over the
    half-open range [from_ms, to_ms). Buckets with no points are omitted;
    the range must be hour-aligned.
    """
    if from_ms >= to_ms:
        raise DomainError(f"invalid range: from {from_ms} must be < to {to_ms}")
    if from_ms % MS_PER_HOUR or to_ms % MS_PER_HOUR:
        raise DomainError("range bounds must be hour-aligned")
    sums: dict[int, float] = {}
    for ts, wh in points:
        if from_ms <= ts < to_ms:
            start = align_to_unit(ts, unit)
            sums[start] = sums.get(start, 0.0) + wh
    buckets = tuple(SeriesBucket(start, sums[start]) for start in sorted(sums))
    return ConsumptionSeries(unit=unit, buckets=buckets)


def rollup(
    hourly: Iterable[HourlyEnergy], unit: TimeUnit, from_ms: int, to_ms: int
) -> ConsumptionSeries:
    """Bucket hourly records with from_ms <= hour_start < to_ms by unit."""
    return bucket_points(((h.hour_start_ms, h.energy_wh) for h in hourly), unit, from_ms, to_ms)


def fleet_average(per_user_totals_wh: Sequence[float], user_count: int) -> float:
    """Mean consumption across a fleet. The denominator is the mapped-user
    count: users with no data contribute zero to the numerator but still
    dilute the average.
    """
    if user_count < 1:
        raise DomainError("fleet average needs at least one user")
    if len(per_user_totals_wh) > user_count:
        raise DomainError(
            f"{len(per_user_totals_wh)} totals exceed the fleet size {user_count}"
        )
    return sum(per_user_totals_wh) / user_count


def period_delta(current_wh: float, previous_wh: float) -> float | None:
    """Signed percent change against the previous period, or None when the
    previous period has nothing to compare against (a numeric sentinel
    would corrupt charts downstream).
    """
    if current_wh < 0 or previous_wh < 0:
        raise DomainError("energy totals must be >= 0")
    if previous_wh == 0:
        return None
    return 100.0 * (current_wh - previous_wh) / previous_wh


def period_stats(series: ConsumptionSeries) -> PeriodStats:
    """Min/avg/max over a series' bucket values."""
    if not series.buckets:
        raise DomainError("cannot compute stats over an empty series")
    values = [b.energy_wh for b in series.buckets]
    lo, hi = min(values), max(values)
    avg = sum(values) / len(values)
    # the float sum can drift past hi by one ulp for constant inputs
    avg = min(max(avg, lo), hi)
    return PeriodStats(avg_wh=avg, min_wh=lo, max_wh=hi, bucket_count=len(values))
