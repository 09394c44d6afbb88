"""Command-line client for the verification service.

Every subcommand speaks HTTP to the service. With ``--server`` it targets a
running instance; without it, an in-process app is spun up from ``--config``
over an ASGI transport, so batch runs work standalone with no socket.
"""

from __future__ import annotations

import asyncio
import json
import logging
import sys

import click
import httpx

from .config import load_config
from .labels import LABELS


def _call_service(path: str, payload: dict, server: str | None, config_path: str | None) -> dict:
    """POST against a remote server, or an ephemeral in-process app."""

    async def _run() -> httpx.Response:
        if server:
            client = httpx.AsyncClient(base_url=server, timeout=None)
        else:
            from .service import create_app

            config = load_config(config_path) if config_path else None
            app = create_app(config)
            client = httpx.AsyncClient(
                transport=httpx.ASGITransport(app=app), base_url="http://factrag", timeout=None
            )
        async with client:
            return await client.post(path, json=payload)

    try:
        response = asyncio.run(_run())
    except httpx.HTTPError as exc:
        target = server or "in-process service"
        raise click.ClickException(f"cannot reach {target}: {exc}") from exc
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except json.JSONDecodeError:
            detail = response.text
        raise click.ClickException(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


def _require_target(server: str | None, config: str | None) -> None:
    if not server and not config:
        raise click.UsageError("either --config or --server is required")


server_option = click.option(
    "--server", metavar="URL", default=None, help="Base URL of a running service; "
    "when omitted the command runs against an in-process instance."
)
config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
    help="Run configuration YAML (ignored when --server is given).",
)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool) -> None:
    """Fact verification over per-claim vector stores."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(config_path: str, host: str, port: int) -> None:
    """Run the verification service."""
    import uvicorn

    from .service import create_app

    app = create_app(load_config(config_path))
    uvicorn.run(app, host=host, port=port)


@main.command()
@config_option
@server_option
@click.option("--force", is_flag=True, help="Rebuild stores even when valid ones exist.")
@click.option("--workers", type=int, default=None, help="Parallel store builds.")
def precompute(config_path: str | None, server: str | None, force: bool, workers: int | None) -> None:
    """Build the per-claim vector stores."""
    _require_target(server, config_path)
    data = _call_service(
        "/precompute", {"force": force, "workers": workers}, server, config_path
    )
    click.echo(
        f"stores built={data['built']} skipped={data['skipped']} failed={data['failed']} "
        f"in {data['elapsed_s']:.1f}s"
    )
    chunk_counts = [d["chunks"] for d in data["details"] if d["status"] != "failed"]
    if chunk_counts:
        click.echo(
            f"chunks per claim: min={min(chunk_counts)} "
            f"mean={sum(chunk_counts) / len(chunk_counts):.0f} max={max(chunk_counts)}"
        )
    for detail in data["details"]:
        if detail["status"] == "failed":
            click.echo(f"  claim {detail['claim_id']} failed: {detail['error']}", err=True)
    if data["failed"]:
        sys.exit(1)


@main.command()
@config_option
@server_option
@click.option("--resume", is_flag=True, help="Continue from a partial output file.")
@click.option("--think/--no-think", "think", default=None, help="Override the thinking-mode toggle.")
@click.option("--workers", type=int, default=None, help="Parallel verification workers.")
def verify(
    config_path: str | None,
    server: str | None,
    resume: bool,
    think: bool | None,
    workers: int | None,
) -> None:
    """Verify all claims and write the predictions file."""
    _require_target(server, config_path)
    data = _call_service(
        "/verify/batch",
        {"resume": resume, "think": think, "workers": workers},
        server,
        config_path,
    )
    click.echo(
        f"{data['total']} claims -> {data['output_file']} "
        f"(ok={data['ok']} parse_fallback={data['parse_fallback']} error={data['error']} "
        f"resumed={data['resumed']})"
    )
    click.echo(f"time per claim: mean={data['mean_total_s']:.2f}s p95={data['p95_total_s']:.2f}s")
    over = [m["claim_id"] for m in data["metrics"] if m["over_budget"]]
    if over:
        click.echo(f"over budget: {over}", err=True)


@main.command()
@click.option("--pred", "predictions_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gold", "gold_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--label-field", default="label", show_default=True)
@server_option
def evaluate(predictions_file: str, gold_file: str, label_field: str, server: str | None) -> None:
    """Label accuracy and confusion matrix of a predictions file."""
    data = _call_service(
        "/evaluate",
        {"predictions_file": predictions_file, "gold_file": gold_file, "label_field": label_field},
        server,
        None,
    )
    click.echo(f"claims: {data['n_claims']}  accuracy: {data['accuracy']:.4f}")
    click.echo("confusion (rows=gold, cols=pred):")
    short = {label: label.split("/")[0].split()[0] for label in LABELS}
    header = "  ".join(f"{short[label]:>10}" for label in LABELS)
    click.echo(f"{'':>12} {header}")
    for gold in LABELS:
        row = "  ".join(f"{data['confusion'][gold][pred]:>10}" for pred in LABELS)
        click.echo(f"{short[gold]:>12} {row}")
    for label in LABELS:
        stats = data["per_label"][label]
        click.echo(
            f"{label}: precision={stats['precision']:.3f} recall={stats['recall']:.3f} "
            f"support={int(stats['support'])}"
        )


if __name__ == "__main__":
    main()
