"""HTTP surface: role-scoped access, filter semantics, zero-fill, upload
and sync endpoints, all against a live in-process service."""

import json
from datetime import timedelta
from types import SimpleNamespace

import pytest

from conftest import import_fleet
from encoviz.fleetgen import FleetSpec, generate_fleet
from encoviz.model import (
    MS_PER_DAY,
    MS_PER_HOUR,
    DeviceId,
    DeviceKind,
    MappedDevice,
    MeterKind,
    UserDeviceMapping,
    UserEntry,
    format_rfc3339,
)
from oracle import bucket_hours, read_hour_bins, rel_close, series_close, zero_filled

START = 1_677_628_800_000  # 2023-03-01T00:00:00Z
DAY_END = START + MS_PER_DAY


@pytest.fixture
def env(app_env, tmp_path):
    """Service with two synced providers plus one mapped-but-empty one."""
    spec1 = FleetSpec(homes=2, plugs_per_home=2, days=1, sample_period_s=60, seed=7,
                      provider_id="p1")
    generate_fleet(spec1, tmp_path / "drop-p1")
    import_fleet(app_env.store, tmp_path / "drop-p1", app_env.config.source_dir_for("p1"))

    spec2 = FleetSpec(homes=1, plugs_per_home=1, days=1, sample_period_s=60, seed=9,
                      provider_id="p2", home_prefix="g", user_prefix="w")
    generate_fleet(spec2, tmp_path / "drop-p2")
    import_fleet(app_env.store, tmp_path / "drop-p2", app_env.config.source_dir_for("p2"))

    # p3: mapped user with no data at all
    app_env.store.put_mapping(
        UserDeviceMapping(
            "p3",
            (UserEntry("n001", (MappedDevice(DeviceId("nx_din"), DeviceKind(MeterKind.DIN_TOTAL)),)),),
        )
    )

    for provider in ("p1", "p2"):
        job = app_env.orchestrator.enqueue_sync(provider, app_env.config.source_dir_for(provider))
        app_env.orchestrator.wait(job.job_id, timeout=120)

    def token(sub, role, provider_id=None):
        return app_env.issuer.issue(sub, role, provider_id=provider_id)

    def auth(sub, role, provider_id=None):
        return {"Authorization": f"Bearer {token(sub, role, provider_id)}"}

    return SimpleNamespace(
        client=app_env.client,
        store=app_env.store,
        config=app_env.config,
        orchestrator=app_env.orchestrator,
        issuer=app_env.issuer,
        token=token,
        auth=auth,
        drop1=tmp_path / "drop-p1",
        drop2=tmp_path / "drop-p2",
    )


def payload_series(payload) -> list:
    return [(b["start"], b["energy_wh"]) for b in payload["buckets"]]


def oracle_series(bins, unit, from_ms, to_ms, fill=True) -> list:
    buckets = bucket_hours({h: wh for h, (wh, _c) in bins.items()}, unit, from_ms, to_ms)
    if fill:
        buckets = zero_filled(buckets, unit, from_ms, to_ms)
    return [(format_rfc3339(start), wh) for start, wh in buckets]


def assert_series_equal(payload, expected) -> None:
    got = payload_series(payload)
    assert [s for s, _w in got] == [s for s, _w in expected]
    for (_s, got_wh), (_s2, want_wh) in zip(got, expected):
        assert rel_close(got_wh, want_wh), (got, expected)


class TestAuthEnvelope:
    @pytest.mark.parametrize(
        "path",
        [
            "/api/v1/me/consumption",
            "/api/v1/me/overview",
            "/api/v1/me/devices",
            "/api/v1/provider/consumption",
            "/api/v1/provider/devices",
            "/api/v1/provider/stats",
            "/api/v1/admin/users",
        ],
    )
    def test_missing_token_is_401(self, env, path):
        response = env.client.get(path)
        assert response.status_code == 401
        body = response.json()
        assert set(body) == {"code", "message"}

    def test_garbage_token_is_401(self, env):
        response = env.client.get(
            "/api/v1/me/devices", headers={"Authorization": "Bearer junk"}
        )
        assert response.status_code == 401
        assert response.json()["code"] == "malformed_token"

    def test_expired_token_is_401(self, env):
        expired = env.issuer.issue("u001", "consumer", ttl_s=-10)
        response = env.client.get(
            "/api/v1/me/devices", headers={"Authorization": f"Bearer {expired}"}
        )
        assert response.status_code == 401
        assert response.json()["code"] == "token_expired"


class TestMeConsumption:
    def test_day_total_matches_oracle(self, env):
        bins = read_hour_bins(env.drop1 / "h001_din.csv")
        response = env.client.get(
            "/api/v1/me/consumption",
            params={"unit": "day", "from": START, "to": DAY_END},
            headers=env.auth("u001", "consumer"),
        )
        assert response.status_code == 200
        payload = response.json()
        assert payload["device_id"] == "h001_din"
        assert_series_equal(payload, oracle_series(bins, "day", START, DAY_END))
        assert rel_close(payload["total_wh"], sum(wh for _h, (wh, _c) in bins.items()))

    def test_named_device_must_be_owned(self, env):
        response = env.client.get(
            "/api/v1/me/consumption",
            params={"unit": "day", "from": START, "to": DAY_END, "device": "h002_din"},
            headers=env.auth("u001", "consumer"),
        )
        assert response.status_code == 403

    def test_unknown_device_also_403(self, env):
        response = env.client.get(
            "/api/v1/me/consumption",
            params={"unit": "day", "from": START, "to": DAY_END, "device": "ghost_meter"},
            headers=env.auth("u001", "consumer"),
        )
        assert response.status_code == 403

    def test_week_query_zero_fills_empty_days(self, env):
        response = env.client.get(
            "/api/v1/me/consumption",
            params={"unit": "day", "from": START, "to": START + 7 * MS_PER_DAY},
            headers=env.auth("u001", "consumer"),
        )
        payload = response.json()
        assert len(payload["buckets"]) == 7
        nonzero = [b for b in payload["buckets"] if b["energy_wh"] > 0]
        assert len(nonzero) == 1
        assert nonzero[0]["start"] == "2023-03-01T00:00:00Z"

    def test_own_plug_series(self, env):
        bins = read_hour_bins(env.drop1 / "h001_plug1.csv")
        response = env.client.get(
            "/api/v1/me/consumption",
            params={"unit": "hour", "from": START, "to": DAY_END, "device": "h001_plug1"},
            headers=env.auth("u001", "consumer"),
        )
        assert_series_equal(response.json(), oracle_series(bins, "hour", START, DAY_END))

    @pytest.mark.parametrize(
        "params,code",
        [
            ({"unit": "day", "from": START + 7, "to": DAY_END}, "misaligned_range"),
            ({"unit": "day", "from": DAY_END, "to": START}, "empty_range"),
            ({"unit": "fortnight", "from": START, "to": DAY_END}, "bad_unit"),
            ({"unit": "day", "from": "soon", "to": DAY_END}, "bad_timestamp"),
            ({"unit": "day"}, "missing_range"),
        ],
    )
    def test_malformed_queries_are_422(self, env, params, code):
        response = env.client.get(
            "/api/v1/me/consumption", params=params, headers=env.auth("u001", "consumer")
        )
        assert response.status_code == 422
        assert response.json()["code"] == code

    def test_rfc3339_range_accepted(self, env):
        response = env.client.get(
            "/api/v1/me/consumption",
            params={
                "unit": "day",
                "from": "2023-03-01T00:00:00Z",
                "to": "2023-03-02T00:00:00Z",
            },
            headers=env.auth("u001", "consumer"),
        )
        assert response.status_code == 200

    def test_unmapped_caller_is_404(self, env):
        response = env.client.get(
            "/api/v1/me/consumption",
            params={"unit": "day", "from": START, "to": DAY_END},
            headers=env.auth("stranger", "consumer"),
        )
        assert response.status_code == 404


class TestMeOverview:
    def test_totals_match_oracle(self, env):
        at = START + 18 * MS_PER_HOUR + 1800_000  # 18:30 into the fixture day
        bins = read_hour_bins(env.drop1 / "h001_din.csv")
        horizon = START + 19 * MS_PER_HOUR  # ceil to next hour
        expected_today = sum(wh for h, (wh, _c) in bins.items() if START <= h < horizon)
        response = env.client.get(
            "/api/v1/me/overview",
            params={"at": at},
            headers=env.auth("u001", "consumer"),
        )
        assert response.status_code == 200
        payload = response.json()
        assert rel_close(payload["today_wh"], expected_today)
        # fixture day is the first of month and a Wednesday: week starts Feb 27
        assert rel_close(payload["week_wh"], expected_today)
        assert rel_close(payload["month_wh"], expected_today)
        assert payload["comparison"]["unit"] == "month"
        assert rel_close(payload["comparison"]["user_total_wh"], expected_today)
        # previous month has no data: delta must be absent, not 0
        assert payload["comparison"]["delta_pct_vs_previous"] is None

    def test_fleet_average_counts_all_mapped_users(self, env):
        at = START + 23 * MS_PER_HOUR
        response = env.client.get(
            "/api/v1/me/overview", params={"at": at}, headers=env.auth("u001", "consumer")
        )
        payload = response.json()
        bins1 = read_hour_bins(env.drop1 / "h001_din.csv")
        bins2 = read_hour_bins(env.drop1 / "h002_din.csv")
        horizon = at
        total = lambda bins: sum(wh for h, (wh, _c) in bins.items() if START <= h < horizon)
        assert rel_close(
            payload["comparison"]["fleet_average_wh"], (total(bins1) + total(bins2)) / 2
        )

    def test_single_user_fleet_average_equals_user_total(self, env):
        at = START + 23 * MS_PER_HOUR
        response = env.client.get(
            "/api/v1/me/overview", params={"at": at}, headers=env.auth("w001", "consumer")
        )
        payload = response.json()
        assert rel_close(
            payload["comparison"]["fleet_average_wh"], payload["comparison"]["user_total_wh"]
        )

    def test_user_with_no_data_gets_zeros_and_absent_delta(self, env):
        response = env.client.get(
            "/api/v1/me/overview",
            params={"at": START + MS_PER_HOUR},
            headers=env.auth("n001", "consumer"),
        )
        assert response.status_code == 200
        payload = response.json()
        assert payload["today_wh"] == 0
        assert payload["month_wh"] == 0
        assert payload["comparison"]["user_total_wh"] == 0
        assert payload["comparison"]["delta_pct_vs_previous"] is None

    def test_per_device_totals_listed(self, env):
        response = env.client.get(
            "/api/v1/me/overview",
            params={"at": START + 23 * MS_PER_HOUR},
            headers=env.auth("u001", "consumer"),
        )
        devices = response.json()["devices"]
        assert [d["device_id"] for d in devices] == ["h001_din", "h001_plug1", "h001_plug2"]


class TestMeDevices:
    def test_all_three_meters_listed(self, env):
        response = env.client.get(
            "/api/v1/me/devices",
            params={"at": START + 23 * MS_PER_HOUR + 1800_000},  # 23:30, horizon 24:00
            headers=env.auth("u001", "consumer"),
        )
        payload = response.json()["devices"]
        assert len(payload) == 3
        kinds = {d["device_id"]: d["kind"] for d in payload}
        assert kinds["h001_din"] == "din_total"
        assert kinds["h001_plug1"] == "smart_plug"
        plug = next(d for d in payload if d["device_id"] == "h001_plug1")
        bins = read_hour_bins(env.drop1 / "h001_plug1.csv")
        assert rel_close(plug["month_to_date_wh"], sum(wh for _h, (wh, _c) in bins.items()))

    def test_no_data_device_reports_zero(self, env):
        response = env.client.get(
            "/api/v1/me/devices",
            params={"at": START},
            headers=env.auth("n001", "consumer"),
        )
        assert response.json()["devices"][0]["month_to_date_wh"] == 0


class TestProviderConsumption:
    def fleet_bins(self, env):
        bins = {}
        for name in ("h001_din.csv", "h002_din.csv"):
            for hour, (wh, _c) in read_hour_bins(env.drop1 / name).items():
                bins[hour] = bins.get(hour, (0.0, 0))
                bins[hour] = (bins[hour][0] + wh, 0)
        return bins

    def test_fleet_day_series_matches_rollup_oracle(self, env):
        response = env.client.get(
            "/api/v1/provider/consumption",
            params={"unit": "day", "from": START, "to": DAY_END},
            headers=env.auth("ops", "provider", "p1"),
        )
        assert response.status_code == 200
        assert_series_equal(
            response.json(), oracle_series(self.fleet_bins(env), "day", START, DAY_END)
        )

    def test_user_filter_equals_me_series(self, env):
        params = {"unit": "hour", "from": START, "to": DAY_END}
        own = env.client.get(
            "/api/v1/me/consumption", params=params, headers=env.auth("u002", "consumer")
        ).json()
        via_provider = env.client.get(
            "/api/v1/provider/consumption",
            params={**params, "user": "u002"},
            headers=env.auth("ops", "provider", "p1"),
        ).json()
        assert payload_series(own) == payload_series(via_provider)

    def test_device_filter(self, env):
        bins = read_hour_bins(env.drop1 / "h002_plug1.csv")
        response = env.client.get(
            "/api/v1/provider/consumption",
            params={"unit": "hour", "from": START, "to": DAY_END, "device": "h002_plug1"},
            headers=env.auth("ops", "provider", "p1"),
        )
        assert_series_equal(response.json(), oracle_series(bins, "hour", START, DAY_END))

    def test_user_and_device_must_belong_together(self, env):
        response = env.client.get(
            "/api/v1/provider/consumption",
            params={
                "unit": "hour",
                "from": START,
                "to": DAY_END,
                "user": "u001",
                "device": "h002_plug1",
            },
            headers=env.auth("ops", "provider", "p1"),
        )
        assert response.status_code == 404

    def test_cross_tenant_device_is_403(self, env):
        response = env.client.get(
            "/api/v1/provider/consumption",
            params={"unit": "day", "from": START, "to": DAY_END, "device": "h001_din"},
            headers=env.auth("ops2", "provider", "p2"),
        )
        assert response.status_code == 403

    def test_cross_tenant_user_is_403(self, env):
        response = env.client.get(
            "/api/v1/provider/consumption",
            params={"unit": "day", "from": START, "to": DAY_END, "user": "w001"},
            headers=env.auth("ops", "provider", "p1"),
        )
        assert response.status_code == 403

    def test_unknown_user_is_404(self, env):
        response = env.client.get(
            "/api/v1/provider/consumption",
            params={"unit": "day", "from": START, "to": DAY_END, "user": "nobody"},
            headers=env.auth("ops", "provider", "p1"),
        )
        assert response.status_code == 404

    def test_consumer_token_rejected(self, env):
        response = env.client.get(
            "/api/v1/provider/consumption",
            params={"unit": "day", "from": START, "to": DAY_END},
            headers=env.auth("u001", "consumer"),
        )
        assert response.status_code == 403


class TestProviderDevicesAndStats:
    def test_categories_group_plugs_across_users(self, env):
        response = env.client.get(
            "/api/v1/provider/devices", headers=env.auth("ops", "provider", "p1")
        )
        assert response.status_code == 200
        payload = response.json()
        # h001_plug2 and h002_plug1 share the "dryer" category
        dryer = next(c for c in payload["categories"] if c["category"] == "dryer")
        bins_a = read_hour_bins(env.drop1 / "h001_plug2.csv")
        bins_b = read_hour_bins(env.drop1 / "h002_plug1.csv")
        expected = sum(wh for _h, (wh, _c) in bins_a.items()) + sum(
            wh for _h, (wh, _c) in bins_b.items()
        )
        assert rel_close(dryer["energy_wh"], expected)
        assert len(payload["devices"]) == 6
        assert {u["user_id"] for u in payload["users"]} == {"u001", "u002"}

    def test_stats_match_fleet_series(self, env):
        series = env.client.get(
            "/api/v1/provider/consumption",
            params={"unit": "hour", "from": START, "to": DAY_END},
            headers=env.auth("ops", "provider", "p1"),
        ).json()
        values = [b["energy_wh"] for b in series["buckets"]]
        stats = env.client.get(
            "/api/v1/provider/stats",
            params={"unit": "hour", "from": START, "to": DAY_END},
            headers=env.auth("ops", "provider", "p1"),
        ).json()
        assert stats["bucket_count"] == len(values)
        assert rel_close(stats["min_wh"], min(values))
        assert rel_close(stats["max_wh"], max(values))
        assert rel_close(stats["avg_wh"], sum(values) / len(values))

    def test_stats_empty_range_is_422(self, env):
        response = env.client.get(
            "/api/v1/provider/stats",
            params={
                "unit": "day",
                "from": START + 400 * MS_PER_DAY,
                "to": START + 401 * MS_PER_DAY,
            },
            headers=env.auth("ops", "provider", "p1"),
        )
        assert response.status_code == 422
        assert response.json()["code"] == "empty_series"


class TestUploadAndSync:
    def csv_bytes(self, hours=2, watts=600):
        lines = []
        for hour in range(hours):
            for second in range(0, 3600, 60):
                ts = START + hour * MS_PER_HOUR + second * 1000
                lines.append(f"{ts},{watts}")
        return ("\n".join(lines) + "\n").encode()

    def test_upload_then_sync_end_to_end(self, env):
        env.store.put_mapping(
            UserDeviceMapping(
                "p9",
                (
                    UserEntry(
                        "z001",
                        (
                            MappedDevice(DeviceId("z_din"), DeviceKind(MeterKind.DIN_TOTAL)),
                            MappedDevice(
                                DeviceId("z_plug"), DeviceKind(MeterKind.SMART_PLUG, "tv")
                            ),
                        ),
                    ),
                ),
            )
        )
        headers = env.auth("ops9", "provider", "p9")
        upload = env.client.post(
            "/api/v1/ingest/files",
            files=[
                ("files", ("z_din.csv", self.csv_bytes(watts=600), "text/csv")),
                ("files", ("z_plug.csv", self.csv_bytes(watts=60), "text/csv")),
            ],
            headers=headers,
        )
        assert upload.status_code == 200
        assert upload.json()["accepted"] == ["z_din.csv", "z_plug.csv"]

        sync = env.client.post("/api/v1/sync", headers=headers)
        assert sync.status_code == 202
        job_id = sync.json()["job_id"]
        env.orchestrator.wait(job_id, timeout=120)

        status = env.client.get(f"/api/v1/sync/{job_id}", headers=headers)
        assert status.status_code == 200
        body = status.json()
        assert body["state"] == "succeeded"
        assert body["files_processed"] == 2
        assert body["records_written"] == 4  # 2 devices x 2 hours

        series = env.client.get(
            "/api/v1/me/consumption",
            params={"unit": "hour", "from": START, "to": START + 2 * MS_PER_HOUR},
            headers=env.auth("z001", "consumer"),
        ).json()
        # 60 samples/hour at 600 W -> 600*60/3600 = 10 Wh
        assert [b["energy_wh"] for b in series["buckets"]] == pytest.approx([10.0, 10.0])

    def test_bad_filename_rejected(self, env):
        response = env.client.post(
            "/api/v1/ingest/files",
            files=[("files", ("bad name!.csv", b"1,2\n", "text/csv"))],
            headers=env.auth("ops", "provider", "p1"),
        )
        assert response.status_code == 422

    def test_non_csv_suffix_rejected(self, env):
        response = env.client.post(
            "/api/v1/ingest/files",
            files=[("files", ("data.txt", b"1,2\n", "text/plain"))],
            headers=env.auth("ops", "provider", "p1"),
        )
        assert response.status_code == 422

    def test_consumer_cannot_upload_or_sync(self, env):
        headers = env.auth("u001", "consumer")
        upload = env.client.post(
            "/api/v1/ingest/files",
            files=[("files", ("d.csv", b"1,2\n", "text/csv"))],
            headers=headers,
        )
        assert upload.status_code == 403
        assert env.client.post("/api/v1/sync", headers=headers).status_code == 403

    def test_admin_sync_needs_provider_param(self, env):
        headers = env.auth("root", "admin")
        assert env.client.post("/api/v1/sync", headers=headers).status_code == 422
        accepted = env.client.post("/api/v1/sync", params={"provider": "p1"}, headers=headers)
        assert accepted.status_code == 202
        env.orchestrator.wait(accepted.json()["job_id"], timeout=120)

    def test_unknown_job_is_404(self, env):
        response = env.client.get(
            "/api/v1/sync/doesnotexist", headers=env.auth("ops", "provider", "p1")
        )
        assert response.status_code == 404

    def test_two_rapid_syncs_serialize(self, env):
        headers = env.auth("ops", "provider", "p1")
        first = env.client.post("/api/v1/sync", headers=headers).json()
        second = env.client.post("/api/v1/sync", headers=headers).json()
        j1 = env.orchestrator.wait(first["job_id"], timeout=120)
        j2 = env.orchestrator.wait(second["job_id"], timeout=120)
        assert j1.state.value == "succeeded" and j2.state.value == "succeeded"
        assert j2.started_at >= j1.finished_at

    def test_sync_without_uploads_rejected(self, env):
        # p3 has a mapping but no drop directory yet
        response = env.client.post(
            "/api/v1/sync", params={"provider": "p3"}, headers=env.auth("root", "admin")
        )
        assert response.status_code == 422


class TestAdminUsers:
    def test_all_users_listed_with_flags(self, env):
        response = env.client.get("/api/v1/admin/users", headers=env.auth("root", "admin"))
        assert response.status_code == 200
        rows = response.json()["users"]
        by_user = {r["user_id"]: r for r in rows}
        assert {"u001", "u002", "w001", "n001"} <= set(by_user)
        assert by_user["u001"]["email"] == "u001@example.com"
        assert by_user["u001"]["device_count"] == 3
        fixture_users = json.loads((env.drop1 / "users.json").read_text())
        for profile in fixture_users:
            assert by_user[profile["user_id"]]["email_verified"] == profile["email_verified"]
        # n001 never had a profile imported
        assert by_user["n001"]["email_verified"] is False

    def test_provider_and_consumer_denied(self, env):
        assert (
            env.client.get(
                "/api/v1/admin/users", headers=env.auth("ops", "provider", "p1")
            ).status_code
            == 403
        )
        assert (
            env.client.get("/api/v1/admin/users", headers=env.auth("u001", "consumer")).status_code
            == 403
        )


class TestDevIssuerEndpoints:
    def test_jwks_served(self, env):
        response = env.client.get("/.well-known/jwks.json")
        assert response.status_code == 200
        assert response.json()["keys"][0]["kty"] == "RSA"

    def test_dev_token_grant_and_use(self, env):
        minted = env.client.post(
            "/dev/token", json={"grant_type": "dev", "sub": "u001", "role": "consumer"}
        )
        assert minted.status_code == 200
        token = minted.json()["access_token"]
        response = env.client.get(
            "/api/v1/me/devices",
            params={"at": START},
            headers={"Authorization": f"Bearer {token}"},
        )
        assert response.status_code == 200

    def test_pkce_flow_over_http(self, env):
        import base64
        import hashlib

        verifier = "test-verifier-abcdefghijklmnop"
        challenge = (
            base64.urlsafe_b64encode(hashlib.sha256(verifier.encode()).digest())
            .rstrip(b"=")
            .decode()
        )
        authorize = env.client.get(
            "/dev/authorize",
            params={
                "response_type": "code",
                "redirect_uri": "http://app/cb",
                "state": "xyz",
                "code_challenge": challenge,
                "code_challenge_method": "S256",
                "sub": "u001",
                "role": "consumer",
            },
            follow_redirects=False,
        )
        assert authorize.status_code == 302
        location = authorize.headers["location"]
        assert location.startswith("http://app/cb?")
        code = dict(p.split("=") for p in location.split("?")[1].split("&"))["code"]
        exchanged = env.client.post(
            "/dev/token",
            json={
                "grant_type": "authorization_code",
                "code": code,
                "code_verifier": verifier,
                "redirect_uri": "http://app/cb",
            },
        )
        assert exchanged.status_code == 200
        token = exchanged.json()["access_token"]
        me = env.client.get(
            "/api/v1/me/overview",
            params={"at": START},
            headers={"Authorization": f"Bearer {token}"},
        )
        assert me.status_code == 200

    def test_login_form_rendered_without_identity(self, env):
        response = env.client.get(
            "/dev/authorize",
            params={"redirect_uri": "http://app/cb", "code_challenge": "x"},
        )
        assert response.status_code == 200
        assert "dev sign-in" in response.text
