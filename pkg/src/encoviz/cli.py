"""Operator command line: run the server, import and sync offline, mint
dev tokens, and generate synthetic fleets.

Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import json
import shutil
import sys
from collections import Counter
from pathlib import Path

import click

from .auth import DevIssuer, DevModeDisabled
from .config import AppConfig, ConfigError
from .fleetgen import FleetSpec, generate_fleet
from .ingest import read_device_file
from .model import DomainError, JobState, UserDeviceMapping, parse_timestamp
from .storage import SegmentStore
from .sync import SyncError, SyncOrchestrator


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="JSON config file; ENCOVIZ_* environment variables win over it.",
)
@click.pass_context
def cli(ctx: click.Context, config_path: Path | None) -> None:
    """Energy consumption analytics service."""
    try:
        ctx.obj = AppConfig.load(config_path)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from None


@cli.command()
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--homes", default=30, show_default=True, help="number of homes in the fleet")
@click.option("--plugs", default=2, show_default=True, help="smart plugs per home")
@click.option("--start", default="2023-03-01T00:00:00Z", show_default=True)
@click.option("--days", default=2, show_default=True)
@click.option("--period", default=1, show_default=True, help="sample period, seconds")
@click.option("--seed", default=0, show_default=True)
@click.option("--provider", default="p1", show_default=True)
def generate(out_dir: Path, homes: int, plugs: int, start: str, days: int, period: int,
             seed: int, provider: str) -> None:
    """Generate a synthetic fleet: CSV drops plus mapping and user files."""
    try:
        spec = FleetSpec(
            homes=homes,
            plugs_per_home=plugs,
            start_ms=parse_timestamp(start),
            days=days,
            sample_period_s=period,
            seed=seed,
            provider_id=provider,
        )
    except DomainError as exc:
        raise click.UsageError(str(exc)) from None
    fleet = generate_fleet(spec, out_dir)
    click.echo(f"wrote {len(fleet.csv_paths)} device files to {out_dir}")
    click.echo(f"mapping: {fleet.mapping_path}")
    click.echo(f"users:   {fleet.users_path}")


@cli.command(name="import")
@click.argument("source_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--provider", required=True)
@click.option("--mapping", "mapping_path", type=click.Path(path_type=Path), default=None,
              help="mapping document [default: SOURCE_DIR/mapping.json]")
@click.option("--users", "users_path", type=click.Path(path_type=Path), default=None,
              help="user profile document [default: SOURCE_DIR/users.json if present]")
@click.pass_obj
def import_cmd(config: AppConfig, source_dir: Path, provider: str,
               mapping_path: Path | None, users_path: Path | None) -> None:
    """Store the provider mapping and copy its device files into the drop
    directory, validating each file and printing any warnings."""
    mapping_path = mapping_path or source_dir / "mapping.json"
    if not mapping_path.is_file():
        raise click.UsageError(f"mapping file {mapping_path} not found")
    try:
        mapping = UserDeviceMapping.from_dict(json.loads(mapping_path.read_text()))
    except (DomainError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"invalid mapping document: {exc}") from None
    if mapping.provider_id != provider:
        raise click.UsageError(
            f"mapping belongs to {mapping.provider_id!r}, not {provider!r}"
        )
    store = SegmentStore(config.data_dir)
    store.put_mapping(mapping)

    if users_path is None and (source_dir / "users.json").is_file():
        users_path = source_dir / "users.json"
    if users_path is not None:
        for profile in json.loads(Path(users_path).read_text()):
            store.set_user_profile(
                provider,
                profile["user_id"],
                profile.get("email", ""),
                bool(profile.get("email_verified", False)),
            )

    target = config.source_dir_for(provider)
    target.mkdir(parents=True, exist_ok=True)
    copied = 0
    warning_count = 0
    for entry in mapping.entries:
        for md in entry.devices:
            src = source_dir / f"{md.device}.csv"
            if not src.is_file():
                click.echo(f"warning: no file for mapped device {md.device}", err=True)
                warning_count += 1
                continue
            _device, _records, warnings = read_device_file(src)
            for w in warnings:
                click.echo(f"warning: {src.name}:{w.line_no}: {w.detail}", err=True)
            warning_count += len(warnings)
            shutil.copyfile(src, target / src.name)
            copied += 1
    click.echo(f"imported {copied} device files for {provider} ({warning_count} warnings)")


@cli.command()
@click.option("--provider", required=True)
@click.option("--source", "source_dir", type=click.Path(path_type=Path), default=None,
              help="drop directory [default: the provider's incoming directory]")
@click.pass_obj
def sync(config: AppConfig, provider: str, source_dir: Path | None) -> None:
    """Run a sync job to completion and print its report."""
    store = SegmentStore(config.data_dir)
    source_dir = source_dir or config.source_dir_for(provider)
    with SyncOrchestrator(store, workers=config.sync_workers) as orchestrator:
        try:
            job, report = orchestrator.sync_now(provider, source_dir)
        except SyncError as exc:
            raise click.UsageError(str(exc)) from None
    if job.state is not JobState.SUCCEEDED:
        click.echo(f"sync failed: {job.error}", err=True)
        raise SystemExit(2)
    click.echo(f"job {job.job_id}: {job.state.value}")
    click.echo(f"  users synced:          {report.users_synced}")
    click.echo(f"  devices synced:        {report.devices_synced}")
    click.echo(f"  hourly records:        {report.hourly_records_written}")
    click.echo(f"  rollup days:           {report.rollup_days_written}")
    click.echo(f"  warnings:              {len(report.warnings)}")
    for kind, count in sorted(Counter(w.kind.value for w in report.warnings).items()):
        click.echo(f"    {kind}: {count}")


@cli.command()
@click.option("--host", default=None, help="override the configured listen host")
@click.option("--port", default=None, type=int, help="override the configured listen port")
@click.pass_obj
def serve(config: AppConfig, host: str | None, port: int | None) -> None:
    """Run the HTTP service (blocks)."""
    import uvicorn

    from .api import create_app

    uvicorn.run(
        create_app(config),
        host=host or config.host,
        port=port or config.port,
        log_level="info",
    )


@cli.command()
@click.option("--sub", required=True, help="subject (user id)")
@click.option("--role", required=True, type=click.Choice(["consumer", "provider", "admin"]))
@click.option("--provider", default=None, help="provider scope, for provider tokens")
@click.option("--ttl", default=3600, show_default=True, help="token lifetime, seconds")
@click.pass_obj
def token(config: AppConfig, sub: str, role: str, provider: str | None, ttl: int) -> None:
    """Mint a dev-mode bearer token."""
    if not config.dev_mode:
        raise click.UsageError("dev mode is disabled; tokens come from the real issuer")
    issuer = DevIssuer(config.issuer, config.audience, key_path=config.dev_key_path())
    try:
        click.echo(issuer.issue(sub, role, provider_id=provider, ttl_s=ttl))
    except (DevModeDisabled, DomainError) as exc:
        raise click.UsageError(str(exc)) from None


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 1
    except Exception as exc:  # internal error contract: exit 2
        click.echo(f"internal error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
