"""extractor-bridge command line: extract embeddings, verify FSE1 files."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .errors import ExtractorError, VerificationError
from .extract import ExtractionJob, extract
from .fse import verify_fse
from .models import available_models


@click.group()
def main():
    """Offline audio-to-embedding extraction tool."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


@main.command("extract")
@click.option("--audio-dir", required=True, help="Directory of audio clips (.wav).")
@click.option("--model", required=True, help=f"One of: {', '.join(available_models())}.")
@click.option("--out", "out_path", required=True, help="Output FSE1 file path.")
@click.option("--batch-size", default=8, show_default=True)
@click.option("--rate-policy", type=click.Choice(["resample", "require-native"]),
              default="resample", show_default=True)
@click.option("--manifest-fragment", default=None,
              help="Path for the JSON manifest fragment (default: <out>.manifest.json).")
def extract_cmd(audio_dir, model, out_path, batch_size, rate_policy, manifest_fragment):
    """Decode every clip, run the model over the whole clip, write FSE1."""
    job = ExtractionJob(
        audio_dir=Path(audio_dir),
        model=model,
        out_path=Path(out_path),
        batch_size=batch_size,
        rate_policy=rate_policy,
        manifest_fragment=Path(manifest_fragment) if manifest_fragment else None,
    )
    try:
        report = extract(job)
    except ExtractorError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(json.dumps({
        "source": report.source,
        "out": report.out_path,
        "clips": len(report.clips),
        "skipped": len(report.skipped),
        "dims": report.dims,
        "total_frames": report.total_frames,
        "manifest_fragment": str(job.fragment_path()),
    }, indent=2, sort_keys=True))


@main.command("verify")
@click.argument("paths", nargs=-1, required=True)
def verify_cmd(paths):
    """Independently re-read FSE1 files; nonzero exit on the first violation."""
    failed = False
    for path in paths:
        try:
            report = verify_fse(path)
        except (VerificationError, OSError) as e:
            click.echo(f"FAIL {path}: {e}", err=True)
            failed = True
            continue
        click.echo(json.dumps(
            {k: report[k] for k in ("path", "source", "num_clips", "dims", "total_frames")},
            sort_keys=True,
        ))
    if failed:
        sys.exit(1)


if __name__ == "__main__":
    main()
