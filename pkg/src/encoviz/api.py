"""HTTP surface: role-scoped queries, file upload, sync trigger and job
status, composed from auth, storage, the aggregation engine and the sync
orchestrator.

All routes under /api/v1 require `Authorization: Bearer <token>`. Bodies
are JSON; errors use a stable `{code, message}` envelope. Query
timestamps are accepted as epoch-ms integers or RFC 3339; responses
render timestamps as RFC 3339 UTC. Series served to consumers are
zero-filled across the unit-aligned range so charts get a continuous
axis (the engine itself omits empty buckets).
"""

from __future__ import annotations

import contextlib
import html
from datetime import timedelta
from pathlib import Path
from typing import Optional
from urllib.parse import urlencode

from fastapi import Depends, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import HTMLResponse, JSONResponse, RedirectResponse
from starlette.datastructures import UploadFile

from . import aggregate
from .auth import (
    DevIssuer,
    DevModeDisabled,
    Resource,
    TokenError,
    TrustConfig,
    authorize,
    now_ms,
    verify_token,
)
from .config import AppConfig
from .model import (
    MS_PER_HOUR,
    ComparisonReport,
    ConsumptionSeries,
    DeviceId,
    DomainError,
    MappedDevice,
    MeterKind,
    PeriodQuery,
    Principal,
    Role,
    SeriesBucket,
    SyncJob,
    TimeUnit,
    UserEntry,
    align_to_unit,
    date_to_ms,
    format_rfc3339,
    ms_to_date,
    next_boundary,
    parse_timestamp,
    previous_period,
)
from .storage import NotFoundError, SegmentStore, StorageError
from .sync import SyncError, SyncOrchestrator


class ApiError(Exception):
    """Stable machine-readable API failure."""

    def __init__(self, http_status: int, code: str, message: str):
        assert http_status in (400, 401, 403, 404, 409, 422, 500)
        super().__init__(message)
        self.http_status = http_status
        self.code = code
        self.message = message


def _unauthorized(detail: str, code: str = "unauthorized") -> ApiError:
    return ApiError(401, code, detail)


def _forbidden(detail: str) -> ApiError:
    return ApiError(403, "forbidden", detail)


# --- series helpers ----------------------------------------------------------

def zero_fill(series: ConsumptionSeries, from_ms: int, to_ms: int) -> ConsumptionSeries:
    """Insert zero buckets at every unit boundary of the range. Adds only
    zeros, so totals are unchanged."""
    values = {b.start_ms: b.energy_wh for b in series.buckets}
    buckets = []
    start = align_to_unit(from_ms, series.unit)
    while start < to_ms:
        buckets.append(SeriesBucket(start, values.get(start, 0.0)))
        start = next_boundary(start, series.unit)
    return ConsumptionSeries(unit=series.unit, buckets=tuple(buckets))


def series_payload(series: ConsumptionSeries, from_ms: int, to_ms: int) -> dict:
    return {
        "unit": series.unit.value,
        "from": format_rfc3339(from_ms),
        "to": format_rfc3339(to_ms),
        "buckets": [
            {"start": format_rfc3339(b.start_ms), "energy_wh": b.energy_wh}
            for b in series.buckets
        ],
        "total_wh": series.total_wh(),
    }


def job_payload(job: SyncJob) -> dict:
    return {
        "job_id": job.job_id,
        "provider_id": job.provider_id,
        "state": job.state.value,
        "files_processed": job.files_processed,
        "records_written": job.records_written,
        "enqueued_at": format_rfc3339(job.enqueued_at),
        "started_at": format_rfc3339(job.started_at) if job.started_at else None,
        "finished_at": format_rfc3339(job.finished_at) if job.finished_at else None,
        "error": job.error,
    }


def _parse_range(from_text: Optional[str], to_text: Optional[str]) -> tuple[int, int]:
    if not from_text or not to_text:
        raise ApiError(422, "missing_range", "from and to query parameters are required")
    try:
        from_ms, to_ms = parse_timestamp(from_text), parse_timestamp(to_text)
    except DomainError as exc:
        raise ApiError(422, "bad_timestamp", str(exc)) from None
    if from_ms % MS_PER_HOUR or to_ms % MS_PER_HOUR:
        raise ApiError(422, "misaligned_range", "from and to must be aligned to whole hours")
    if from_ms >= to_ms:
        raise ApiError(422, "empty_range", "from must be strictly before to")
    return from_ms, to_ms


def _parse_at(at_text: Optional[str]) -> int:
    if not at_text:
        return now_ms()
    try:
        return parse_timestamp(at_text)
    except DomainError as exc:
        raise ApiError(422, "bad_timestamp", str(exc)) from None


def _parse_unit(text: Optional[str]) -> TimeUnit:
    if not text:
        raise ApiError(422, "missing_unit", "unit query parameter is required")
    try:
        return TimeUnit.parse(text)
    except DomainError as exc:
        raise ApiError(422, "bad_unit", str(exc)) from None


def _parse_query(
    request: Request,
    unit: Optional[str],
    device: Optional[str] = None,
    user: Optional[str] = None,
) -> PeriodQuery:
    time_unit = _parse_unit(unit)
    from_ms, to_ms = _parse_range(
        request.query_params.get("from"), request.query_params.get("to")
    )
    try:
        return PeriodQuery(
            unit=time_unit,
            from_ms=from_ms,
            to_ms=to_ms,
            device_filter=DeviceId(device) if device else None,
            user_filter=user or None,
        )
    except DomainError as exc:
        raise ApiError(422, "bad_query", str(exc)) from None


def _ceil_hour(ts_ms: int) -> int:
    return ts_ms if ts_ms % MS_PER_HOUR == 0 else ts_ms - ts_ms % MS_PER_HOUR + MS_PER_HOUR


# --- application factory -------------------------------------------------------

def create_app(config: AppConfig) -> FastAPI:
    config.data_dir.mkdir(parents=True, exist_ok=True)
    store = SegmentStore(config.data_dir)
    dev_issuer = (
        DevIssuer(config.issuer, config.audience, key_path=config.dev_key_path())
        if config.dev_mode
        else None
    )
    if dev_issuer is not None:
        trust = dev_issuer.trust_config(role_claim=config.role_claim)
    else:
        trust = _external_trust(config)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.orchestrator = SyncOrchestrator(store, workers=config.sync_workers)
        yield
        app.state.orchestrator.close()

    app = FastAPI(title="encoviz", lifespan=lifespan)
    app.state.config = config
    app.state.store = store
    app.state.dev_issuer = dev_issuer
    app.state.trust = trust

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiError)
    async def on_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.http_status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(NotFoundError)
    async def on_not_found(_request: Request, exc: NotFoundError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"code": "not_found", "message": str(exc)})

    @app.exception_handler(StorageError)
    async def on_storage_error(_request: Request, exc: StorageError) -> JSONResponse:
        return JSONResponse(
            status_code=500, content={"code": "storage_failure", "message": str(exc)}
        )

    _mount_api(app, store, trust, config)
    if dev_issuer is not None:
        _mount_dev_issuer(app, dev_issuer, config)
    return app


def _external_trust(config: AppConfig) -> TrustConfig:
    from cryptography.hazmat.primitives import serialization

    public_key = None
    jwks_fetch = None
    if config.static_key_pem is not None:
        public_key = serialization.load_pem_public_key(config.static_key_pem.read_bytes())
    if config.jwks_url is not None:
        import json as _json
        import urllib.request

        url = config.jwks_url

        def jwks_fetch() -> dict:
            with urllib.request.urlopen(url) as response:
                return _json.load(response)

    return TrustConfig(
        issuer=config.issuer,
        audience=config.audience,
        public_key=public_key,
        jwks_fetch=jwks_fetch,
        role_claim=config.role_claim,
    )


# --- route implementations -----------------------------------------------------

def _mount_api(app: FastAPI, store: SegmentStore, trust: TrustConfig, config: AppConfig) -> None:
    def principal_of(request: Request) -> Principal:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise _unauthorized("missing bearer token", "missing_token")
        try:
            return verify_token(header[7:].strip(), trust)
        except TokenError as exc:
            raise _unauthorized(exc.detail, exc.kind.value) from None

    def require(principal: Principal, resource: Resource, action: str) -> None:
        decision = authorize(principal, resource, action)
        if not decision.allowed:
            raise _forbidden(decision.reason)

    def find_user(user_id: str) -> tuple[str, UserEntry]:
        for provider_id in store.list_providers():
            entry = store.get_mapping(provider_id).user(user_id)
            if entry is not None:
                return provider_id, entry
        raise ApiError(404, "unknown_user", f"user {user_id!r} is not mapped")

    def find_device(device_id: str) -> tuple[str, str, MappedDevice]:
        for provider_id in store.list_providers():
            owner = store.get_mapping(provider_id).device_owner(device_id)
            if owner is not None:
                return provider_id, owner[0], owner[1]
        raise ApiError(404, "unknown_device", f"device {device_id!r} is not mapped")

    def caller_entry(principal: Principal) -> tuple[str, UserEntry]:
        try:
            return find_user(principal.sub)
        except ApiError:
            raise ApiError(404, "user_not_mapped", "caller has no mapped devices") from None

    def provider_mapping(provider_id: str):
        try:
            return store.get_mapping(provider_id)
        except NotFoundError:
            raise ApiError(
                404, "unknown_provider", f"no mapping stored for provider {provider_id!r}"
            ) from None

    def device_series(
        device: DeviceId, unit: TimeUnit, from_ms: int, to_ms: int
    ) -> ConsumptionSeries:
        return aggregate.rollup(store.get_hourly(device, from_ms, to_ms), unit, from_ms, to_ms)

    def fleet_series(
        provider_id: str, unit: TimeUnit, from_ms: int, to_ms: int
    ) -> ConsumptionSeries:
        """Fleet-wide consumption served from the stored day rollups."""
        from_day = ms_to_date(from_ms)
        past_day = ms_to_date(to_ms - 1) + timedelta(days=1)
        points: list[tuple[int, float]] = []
        for r in store.get_rollups(provider_id, from_day, past_day):
            base_ms = date_to_ms(r.day)
            points.extend(
                (base_ms + hour * MS_PER_HOUR, wh)
                for hour, wh in enumerate(r.hourly_totals_wh)
            )
        return aggregate.bucket_points(points, unit, from_ms, to_ms)

    def total_over(device: DeviceId, from_ms: int, to_ms: int) -> float:
        if from_ms >= to_ms:
            return 0.0
        return sum(rec.energy_wh for rec in store.get_hourly(device, from_ms, to_ms))

    # --- consumer routes ---------------------------------------------------

    @app.get("/api/v1/me/consumption")
    def me_consumption(
        request: Request,
        unit: Optional[str] = None,
        device: Optional[str] = None,
        principal: Principal = Depends(principal_of),
    ):
        query = _parse_query(request, unit, device=device)
        require(principal, Resource("consumption", owner=principal.sub), "read")
        _provider_id, entry = caller_entry(principal)
        if query.device_filter is not None:
            if all(md.device != query.device_filter for md in entry.devices):
                raise _forbidden("device does not belong to the caller")
            target = query.device_filter
        else:
            target = entry.din_device()
        series = zero_fill(
            device_series(target, query.unit, query.from_ms, query.to_ms),
            query.from_ms,
            query.to_ms,
        )
        payload = series_payload(series, query.from_ms, query.to_ms)
        payload["device_id"] = str(target)
        return payload

    @app.get("/api/v1/me/overview")
    def me_overview(
        request: Request,
        principal: Principal = Depends(principal_of),
    ):
        require(principal, Resource("comparison", owner=principal.sub), "read")
        provider_id, entry = caller_entry(principal)
        at_ms = _parse_at(request.query_params.get("at"))
        horizon = _ceil_hour(at_ms)
        din = entry.din_device()

        month_start = align_to_unit(at_ms, TimeUnit.MONTH)
        devices = [
            {
                "device_id": str(md.device),
                "kind": md.kind.kind.value,
                "category": md.kind.category,
                "energy_wh": total_over(md.device, month_start, horizon),
            }
            for md in entry.devices
        ]

        comparison_unit = TimeUnit.parse(config.overview_comparison_unit)
        cmp_from = align_to_unit(at_ms, comparison_unit)
        cmp_to = horizon
        mapping = store.get_mapping(provider_id)
        user_total = total_over(din, cmp_from, cmp_to)
        per_user = [total_over(e.din_device(), cmp_from, cmp_to) for e in mapping.entries]
        fleet_avg = aggregate.fleet_average(per_user, len(mapping.entries))
        if cmp_from < cmp_to:
            prev_from, prev_to = previous_period(cmp_from, cmp_to)
            prev_total = total_over(din, prev_from, prev_to)
        else:
            prev_total = 0.0
        report = ComparisonReport(
            user_total_wh=user_total,
            fleet_average_wh=fleet_avg,
            delta_pct_vs_previous=aggregate.period_delta(user_total, prev_total),
        )
        return {
            "as_of": format_rfc3339(at_ms),
            "today_wh": total_over(din, align_to_unit(at_ms, TimeUnit.DAY), horizon),
            "week_wh": total_over(din, align_to_unit(at_ms, TimeUnit.WEEK), horizon),
            "month_wh": total_over(din, month_start, horizon),
            "devices": devices,
            "comparison": {
                "unit": comparison_unit.value,
                "from": format_rfc3339(cmp_from),
                "to": format_rfc3339(cmp_to),
                "user_total_wh": report.user_total_wh,
                "fleet_average_wh": report.fleet_average_wh,
                "delta_pct_vs_previous": report.delta_pct_vs_previous,
            },
        }

    @app.get("/api/v1/me/devices")
    def me_devices(
        request: Request,
        principal: Principal = Depends(principal_of),
    ):
        require(principal, Resource("devices", owner=principal.sub), "read")
        _provider_id, entry = caller_entry(principal)
        at_ms = _parse_at(request.query_params.get("at"))
        month_start = align_to_unit(at_ms, TimeUnit.MONTH)
        horizon = _ceil_hour(at_ms)
        return {
            "devices": [
                {
                    "device_id": str(md.device),
                    "kind": md.kind.kind.value,
                    "category": md.kind.category,
                    "month_to_date_wh": total_over(md.device, month_start, horizon),
                }
                for md in entry.devices
            ]
        }

    # --- provider routes -----------------------------------------------------

    @app.get("/api/v1/provider/consumption")
    def provider_consumption(
        request: Request,
        unit: Optional[str] = None,
        user: Optional[str] = None,
        device: Optional[str] = None,
        principal: Principal = Depends(principal_of),
    ):
        query = _parse_query(request, unit, device=device, user=user)
        if principal.role is not Role.PROVIDER:
            # consumers and admins are outside this route's matrix entirely
            require(principal, Resource("consumption", owner=None), "read")

        target_device = query.device_filter
        target_user = query.user_filter
        if target_user is not None and target_device is not None:
            owner_provider, entry = find_user(target_user)
            require(principal, Resource("consumption", owner=owner_provider), "read")
            if all(md.device != target_device for md in entry.devices):
                raise ApiError(
                    404, "unknown_device", f"device {target_device!r} is not {target_user!r}'s"
                )
            series = device_series(target_device, query.unit, query.from_ms, query.to_ms)
            subject = {"user": target_user, "device": str(target_device)}
        elif target_user is not None:
            owner_provider, entry = find_user(target_user)
            require(principal, Resource("consumption", owner=owner_provider), "read")
            series = device_series(entry.din_device(), query.unit, query.from_ms, query.to_ms)
            subject = {"user": target_user, "device": str(entry.din_device())}
        elif target_device is not None:
            owner_provider, owner_user, _md = find_device(target_device)
            require(principal, Resource("consumption", owner=owner_provider), "read")
            series = device_series(target_device, query.unit, query.from_ms, query.to_ms)
            subject = {"user": owner_user, "device": str(target_device)}
        else:
            scope = principal.provider_id
            require(principal, Resource("consumption", owner=scope), "read")
            provider_mapping(scope)
            series = fleet_series(scope, query.unit, query.from_ms, query.to_ms)
            subject = {"fleet": scope}
        # zero-filled like the consumer series, so a provider's per-user
        # view is identical to that user's own view of the same range
        series = zero_fill(series, query.from_ms, query.to_ms)
        payload = series_payload(series, query.from_ms, query.to_ms)
        payload["subject"] = subject
        return payload

    @app.get("/api/v1/provider/devices")
    def provider_devices(
        request: Request,
        principal: Principal = Depends(principal_of),
    ):
        scope = principal.provider_id if principal.role is Role.PROVIDER else None
        require(principal, Resource("devices", owner=scope), "read")
        from_text = request.query_params.get("from")
        to_text = request.query_params.get("to")
        bounded = bool(from_text or to_text)
        if bounded:
            from_ms, to_ms = _parse_range(from_text, to_text)
        mapping = provider_mapping(scope)

        def device_total(device: DeviceId) -> float:
            if bounded:
                return total_over(device, from_ms, to_ms)
            return sum(rec.energy_wh for rec in store.iter_hourly(device))

        categories: dict[str, float] = {}
        devices = []
        users = []
        for entry in mapping.entries:
            home_total = 0.0
            for md in entry.devices:
                wh = device_total(md.device)
                devices.append(
                    {
                        "device_id": str(md.device),
                        "user_id": entry.user_id,
                        "kind": md.kind.kind.value,
                        "category": md.kind.category,
                        "energy_wh": wh,
                    }
                )
                if md.kind.kind is MeterKind.SMART_PLUG:
                    categories[md.kind.category] = categories.get(md.kind.category, 0.0) + wh
                else:
                    home_total += wh
            users.append({"user_id": entry.user_id, "energy_wh": home_total})
        return {
            "categories": [
                {"category": name, "energy_wh": categories[name]} for name in sorted(categories)
            ],
            "devices": devices,
            "users": users,
        }

    @app.get("/api/v1/provider/stats")
    def provider_stats(
        request: Request,
        unit: Optional[str] = None,
        principal: Principal = Depends(principal_of),
    ):
        query = _parse_query(request, unit)
        scope = principal.provider_id if principal.role is Role.PROVIDER else None
        require(principal, Resource("stats", owner=scope), "read")
        provider_mapping(scope)
        series = fleet_series(scope, query.unit, query.from_ms, query.to_ms)
        try:
            stats = aggregate.period_stats(series)
        except DomainError:
            raise ApiError(422, "empty_series", "no data in the requested range") from None
        return {
            "unit": query.unit.value,
            "from": format_rfc3339(query.from_ms),
            "to": format_rfc3339(query.to_ms),
            "avg_wh": stats.avg_wh,
            "min_wh": stats.min_wh,
            "max_wh": stats.max_wh,
            "bucket_count": stats.bucket_count,
        }

    # --- ingest & sync ---------------------------------------------------------

    def sync_scope(principal: Principal, provider_param: Optional[str]) -> str:
        if principal.role is Role.PROVIDER:
            return principal.provider_id
        if provider_param:
            return provider_param
        raise ApiError(422, "missing_provider", "admin requests must name ?provider=")

    @app.post("/api/v1/ingest/files")
    async def ingest_files(
        request: Request,
        principal: Principal = Depends(principal_of),
    ):
        if principal.role is Role.CONSUMER:
            require(principal, Resource("files", owner=None), "upload")
        provider_id = sync_scope(principal, request.query_params.get("provider"))
        require(principal, Resource("files", owner=provider_id), "upload")
        form = await request.form()
        uploads = [v for v in form.getlist("files") if isinstance(v, UploadFile)]
        if not uploads:
            raise ApiError(422, "no_files", "multipart field 'files' is required")
        target = config.source_dir_for(provider_id)
        target.mkdir(parents=True, exist_ok=True)
        accepted = []
        for upload in uploads:
            name = Path(upload.filename or "").name
            stem, dot, suffix = name.rpartition(".")
            if not dot or suffix != "csv":
                raise ApiError(422, "bad_filename", f"{name!r} is not a <deviceID>.csv name")
            try:
                DeviceId(stem)
            except DomainError as exc:
                raise ApiError(422, "bad_filename", str(exc)) from None
            (target / name).write_bytes(await upload.read())
            accepted.append(name)
        return {"provider_id": provider_id, "accepted": sorted(accepted)}

    @app.post("/api/v1/sync", status_code=202)
    def trigger_sync(
        request: Request,
        principal: Principal = Depends(principal_of),
    ):
        if principal.role is Role.CONSUMER:
            require(principal, Resource("sync", owner=None), "trigger")
        provider_id = sync_scope(principal, request.query_params.get("provider"))
        require(principal, Resource("sync", owner=provider_id), "trigger")
        try:
            job = request.app.state.orchestrator.enqueue_sync(
                provider_id, config.source_dir_for(provider_id)
            )
        except SyncError as exc:
            raise ApiError(422, "sync_rejected", str(exc)) from None
        return job_payload(job)

    @app.get("/api/v1/sync/{job_id}")
    def sync_status(
        job_id: str,
        request: Request,
        principal: Principal = Depends(principal_of),
    ):
        if principal.role is Role.CONSUMER:
            require(principal, Resource("sync", owner=None), "read")
        try:
            job = request.app.state.orchestrator.job_status(job_id)
        except NotFoundError:
            raise ApiError(404, "unknown_job", f"no job {job_id!r}") from None
        require(principal, Resource("sync", owner=job.provider_id), "read")
        return job_payload(job)

    # --- admin ---------------------------------------------------------------

    @app.get("/api/v1/admin/users")
    def admin_users(
        principal: Principal = Depends(principal_of),
    ):
        require(principal, Resource("users", owner=None), "list")
        rows = []
        for provider_id in store.list_providers():
            for row in store.list_users(provider_id):
                rows.append(
                    {
                        "provider_id": provider_id,
                        "user_id": row.user_id,
                        "email": row.email,
                        "email_verified": row.email_verified,
                        "device_count": row.device_count,
                    }
                )
        return {"users": rows}


def _mount_dev_issuer(app: FastAPI, issuer: DevIssuer, config: AppConfig) -> None:
    """Dev-only identity endpoints: JWKS, direct token mint, and a minimal
    authorization-code + PKCE flow for the dashboard login."""

    @app.get("/.well-known/jwks.json")
    def jwks():
        return issuer.jwks()

    @app.post("/dev/token")
    async def dev_token(request: Request):
        content_type = request.headers.get("content-type", "")
        if "application/json" in content_type:
            body = await request.json()
        else:
            body = dict(await request.form())
        grant_type = body.get("grant_type", "dev")
        try:
            if grant_type == "authorization_code":
                token = issuer.exchange_code(
                    code=body.get("code", ""),
                    code_verifier=body.get("code_verifier", ""),
                    redirect_uri=body.get("redirect_uri", ""),
                    ttl_s=config.token_ttl_s,
                )
            elif grant_type == "dev":
                sub, role = body.get("sub"), body.get("role")
                if not sub or not role:
                    raise ApiError(422, "bad_grant", "sub and role are required")
                try:
                    Role.parse(role)
                except DomainError as exc:
                    raise ApiError(422, "bad_grant", str(exc)) from None
                token = issuer.issue(
                    sub,
                    role,
                    provider_id=body.get("provider_id") or None,
                    ttl_s=int(body.get("ttl_s") or config.token_ttl_s),
                )
            else:
                raise ApiError(422, "bad_grant", f"unsupported grant_type {grant_type!r}")
        except TokenError as exc:
            raise ApiError(400, "invalid_grant", exc.detail) from None
        except DevModeDisabled as exc:
            raise ApiError(403, "dev_disabled", str(exc)) from None
        return {
            "access_token": token,
            "token_type": "Bearer",
            "expires_in": config.token_ttl_s,
        }

    @app.get("/dev/authorize")
    def dev_authorize(request: Request):
        params = request.query_params
        redirect_uri = params.get("redirect_uri", "")
        challenge = params.get("code_challenge", "")
        method = params.get("code_challenge_method", "S256")
        if not redirect_uri or not challenge:
            raise ApiError(422, "bad_request", "redirect_uri and code_challenge are required")
        if method != "S256":
            raise ApiError(422, "bad_request", "only S256 code challenges are supported")
        sub, role = params.get("sub"), params.get("role")
        if sub and role:
            try:
                Role.parse(role)
            except DomainError as exc:
                raise ApiError(422, "bad_request", str(exc)) from None
            code = issuer.create_authorization_code(
                sub=sub,
                role=role,
                provider_id=params.get("provider_id") or None,
                code_challenge=challenge,
                redirect_uri=redirect_uri,
            )
            separator = "&" if "?" in redirect_uri else "?"
            query = urlencode({"code": code, "state": params.get("state", "")})
            return RedirectResponse(f"{redirect_uri}{separator}{query}", status_code=302)
        # no identity asserted yet: render the dev login form
        hidden = "".join(
            f'<input type="hidden" name="{name}" value="{html.escape(params.get(name, ""), quote=True)}">'
            for name in ("redirect_uri", "code_challenge", "code_challenge_method", "state")
        )
        form = f"""<!doctype html>
<html><body>
<h1>encoviz dev sign-in</h1>
<form method="get" action="/dev/authorize">
  {hidden}
  <label>User id <input name="sub"></label>
  <label>Role
    <select name="role">
      <option>consumer</option><option>provider</option><option>admin</option>
    </select>
  </label>
  <label>Provider id (providers only) <input name="provider_id"></label>
  <button type="submit">Sign in</button>
</form>
</body></html>"""
        return HTMLResponse(form)
