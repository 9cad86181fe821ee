"""tagprobe command line: a thin client over the HTTP service.

Every subcommand builds a JSON request and sends it to the service. With
``--server`` the request goes to a running instance (shared filesystem
assumed); otherwise the service app is mounted in-process, so the CLI works
standalone with identical semantics. Exit codes: 0 success, 2 config error,
3 data/format error, 4 training error.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx

from . import __version__
from .errors import exit_code_for
from .service import create_app


def _send(server: str | None, path: str, payload: dict) -> httpx.Response:
    try:
        if server:
            with httpx.Client(base_url=server, timeout=None) as client:
                return client.post(path, json=payload)

        async def go() -> httpx.Response:
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://tagprobe.internal", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        return asyncio.run(go())
    except httpx.HTTPError as e:
        click.echo(f"error: cannot reach service: {e}", err=True)
        sys.exit(1)


def _finish(resp: httpx.Response) -> dict:
    try:
        body = resp.json()
    except json.JSONDecodeError:
        click.echo(f"error: malformed service response (HTTP {resp.status_code})", err=True)
        sys.exit(1)
    if resp.status_code == 200:
        return body
    detail = body.get("detail")
    if isinstance(detail, dict) and "kind" in detail:
        click.echo(f"error ({detail['kind']}): {detail['message']}", err=True)
        sys.exit(exit_code_for(detail["kind"]))
    # pydantic request validation: bad flags/config values
    click.echo(f"error: invalid request: {json.dumps(detail)}", err=True)
    sys.exit(2 if resp.status_code == 422 else 1)


def _echo(body: dict) -> None:
    click.echo(json.dumps(body, indent=2, sort_keys=True))


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise click.UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise click.UsageError(f"config file is not valid JSON: {e}")
    if not isinstance(obj, dict):
        raise click.UsageError("config file must hold a JSON object")
    return obj


def _merge(config: dict, **flags) -> dict:
    """Config-file values overridden by explicitly set CLI flags."""
    payload = dict(config)
    train = dict(payload.get("train") or {})
    for key, value in flags.items():
        if value is None:
            continue
        if key.startswith("train_"):
            train[key[len("train_"):]] = value
        else:
            payload[key] = value
    if train:
        payload["train"] = train
    return payload


def _int_list(_ctx, _param, value):
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(",") if v.strip() != ""]
    except ValueError:
        raise click.BadParameter("expected a comma-separated list of integers")


server_option = click.option(
    "--server", metavar="URL", default=None,
    help="Base URL of a running service; default runs the service in-process.",
)
config_option = click.option(
    "--config", "config_path", metavar="PATH", default=None,
    help="JSON file with request fields; explicit flags override it.",
)


@click.group()
@click.version_option(version=__version__, prog_name="tagprobe")
def main():
    """Few-shot linear-probe benchmark engine."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


@main.command()
@server_option
@config_option
@click.option("--out", "out_dir", required=False, help="Output directory.")
@click.option("--num-clips", type=int, default=None)
@click.option("--num-tags", type=int, default=None)
@click.option("--frame-dim", type=int, default=None)
@click.option("--frames-per-clip", type=int, default=None)
@click.option("--noise-scale", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--name", default=None, help="Dataset name in the manifest.")
def synth(server, config_path, out_dir, num_clips, num_tags, frame_dim,
          frames_per_clip, noise_scale, seed, name):
    """Generate a synthetic dataset (frames, tags, manifest)."""
    payload = _merge(
        _load_config(config_path),
        out_dir=out_dir, num_clips=num_clips, num_tags=num_tags,
        frame_dim=frame_dim, frames_per_clip=frames_per_clip,
        noise_scale=noise_scale, seed=seed, name=name,
    )
    _echo(_finish(_send(server, "/v1/synth", payload)))


@main.command()
@server_option
@config_option
@click.option("--manifest", default=None, help="Dataset manifest path.")
@click.option("--out", "out_dir", default=None, help="Output directory.")
@click.option("--normalize", type=click.Choice(["zscore", "l2", "none"]), default=None)
@click.option("--source", "sources", multiple=True,
              help="Source to aggregate (repeatable); default: all.")
def aggregate(server, config_path, manifest, out_dir, normalize, sources):
    """Aggregate frame files into per-source feature tables."""
    payload = _merge(
        _load_config(config_path),
        manifest=manifest, out_dir=out_dir, normalize=normalize,
        sources=list(sources) or None,
    )
    _echo(_finish(_send(server, "/v1/aggregate", payload)))


def _train_options(fn):
    fn = click.option("--learning-rate", "train_learning_rate", type=float, default=None)(fn)
    fn = click.option("--max-epochs", "train_max_epochs", type=int, default=None)(fn)
    fn = click.option("--patience", "train_patience", type=int, default=None)(fn)
    fn = click.option("--l2-penalty", "train_l2_penalty", type=float, default=None)(fn)
    return fn


@main.command("train-full")
@server_option
@config_option
@click.option("--manifest", default=None)
@click.option("--out", "out_dir", default=None)
@click.option("--embedding", default=None, help="Source name or 'combined'.")
@click.option("--normalize", type=click.Choice(["zscore", "l2", "none"]), default=None)
@click.option("--seed", type=int, default=None)
@_train_options
def train_full(server, config_path, manifest, out_dir, embedding, normalize, seed,
               train_learning_rate, train_max_epochs, train_patience, train_l2_penalty):
    """Train the full linear probe on the whole training split."""
    payload = _merge(
        _load_config(config_path),
        manifest=manifest, out_dir=out_dir, embedding=embedding,
        normalize=normalize, seed=seed,
        train_learning_rate=train_learning_rate, train_max_epochs=train_max_epochs,
        train_patience=train_patience, train_l2_penalty=train_l2_penalty,
    )
    _echo(_finish(_send(server, "/v1/train-full", payload)))


def _grid_like_options(fn):
    fn = click.option("--manifest", default=None)(fn)
    fn = click.option("--out", "out_dir", default=None)(fn)
    fn = click.option("--embedding", default=None)(fn)
    fn = click.option("--normalize", type=click.Choice(["zscore", "l2", "none"]), default=None)(fn)
    fn = click.option("--k-values", callback=_int_list, default=None,
                      help="Comma-separated shots-per-tag list.")(fn)
    fn = click.option("--seeds", callback=_int_list, default=None,
                      help="Comma-separated seed list.")(fn)
    fn = click.option("--order-policy", type=click.Choice(
        ["frequency_descending", "manifest_order", "seeded_shuffle"]), default=None)(fn)
    fn = click.option("--dedup/--allow-shared-clips", "dedup", default=None,
                      help="Skip clips already selected for earlier tags (default: dedup).")(fn)
    fn = click.option("--correlation/--no-correlation", "correlation", default=None,
                      help="Compute weight correlation vs the full probe.")(fn)
    fn = click.option("--full-model", default=None,
                      help="Path to the full-probe .fsp artifact.")(fn)
    fn = click.option("--workers", type=int, default=None)(fn)
    fn = click.option("--resume/--no-resume", "resume", default=None)(fn)
    fn = click.option("--timings/--no-timings", "timings", default=None,
                      help="Include wall-clock times in outputs (non-deterministic).")(fn)
    fn = _train_options(fn)
    return fn


@main.command()
@server_option
@config_option
@click.option("--n-values", callback=_int_list, default=None,
              help="Comma-separated class-count list.")
@_grid_like_options
def grid(server, config_path, n_values, **flags):
    """Run the N x K few-shot ablation grid."""
    payload = _merge(_load_config(config_path), n_values=n_values, **flags)
    _echo(_finish(_send(server, "/v1/grid", payload)))


@main.command()
@server_option
@config_option
@_grid_like_options
def sweep(server, config_path, **flags):
    """Run the data-efficiency sweep (K varies, N = all tags)."""
    payload = _merge(_load_config(config_path), **flags)
    _echo(_finish(_send(server, "/v1/sweep", payload)))


@main.command()
@server_option
@config_option
@click.option("--results", default=None, help="results.json from grid/sweep.")
@click.option("--kind", type=click.Choice(["heatmap_csv", "curve_csv", "summary_json"]),
              default=None)
@click.option("--out", "out_dir", default=None)
def report(server, config_path, results, kind, out_dir):
    """Re-emit report files from stored results."""
    payload = _merge(_load_config(config_path), results=results, kind=kind, out_dir=out_dir)
    _echo(_finish(_send(server, "/v1/report", payload)))


@main.command()
@server_option
@click.argument("paths", nargs=-1, required=True)
def validate(server, paths):
    """Format-check FSE1/FSA1/FSL1/FSP1 files and dataset manifests."""
    body = _finish(_send(server, "/v1/validate", {"paths": list(paths)}))
    _echo(body)
    if not body.get("ok", False):
        sys.exit(3)


if __name__ == "__main__":
    main()
