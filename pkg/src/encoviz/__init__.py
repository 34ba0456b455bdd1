"""Multi-role energy consumption analytics service.

Ingests per-device watt-sample CSVs, aggregates them to hourly energy,
rolls fleets up to per-provider daily totals, and serves role-scoped
consumption queries over HTTP.
"""

__version__ = "0.1.0"
