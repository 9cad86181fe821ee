"""Experiment orchestration: full probes, data-efficiency sweeps, N x K grids.

Every run loads the dataset once, builds the feature table (per-source
normalization, aggregation, optional concatenation), executes its cells,
and writes all artifacts under one output directory together with a
manifest of produced files. Cells are independent jobs; they may execute on
a bounded worker pool, and results are sorted before emission so outputs do
not depend on completion order.

Grid rows are appended to ``rows.jsonl`` as cells finish (in submission
order) so long grids are resumable; the final report files are written via
atomic replace. Wall-clock timings are recorded in memory but kept out of
the output files unless explicitly requested, so equal configs produce
byte-identical outputs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analysis, metrics, probe, sampler
from .data import (
    AggregatedTable,
    aggregate_frames,
    compute_norm_stats,
    concat_tables,
    l2_normalize_frames,
    standardize_frames,
)
from .errors import (
    ArgumentError,
    ConfigError,
    DependencyError,
    UndefinedCorrelationError,
)
from .formats import (
    Dataset,
    atomic_write_text,
    canonical_json,
    load_dataset,
    write_table,
    save_manifest,
)

log = logging.getLogger(__name__)

DEFAULT_N = (2, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
DEFAULT_K = (1, 5, 10, 15, 20)

MODES = ("full", "sweep", "grid")
NORMALIZE_MODES = ("zscore", "l2", "none")

COMBINED = "combined"


def _check_increasing(name: str, values) -> tuple[int, ...]:
    values = tuple(int(v) for v in values)
    if not values:
        raise ConfigError(f"{name} list must be non-empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name} list must be strictly increasing, got {values}")
    if values[0] < 1:
        raise ConfigError(f"{name} values must be >= 1")
    return values


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment invocation needs; JSON-representable."""

    manifest: str
    out_dir: str
    mode: str = "full"
    embedding: str = COMBINED
    n_values: tuple[int, ...] | None = None
    k_values: tuple[int, ...] | None = None
    seeds: tuple[int, ...] | None = None
    seed: int = 0
    train: probe.TrainConfig = field(default_factory=probe.TrainConfig)
    normalize: str = "zscore"
    order_policy: str = "frequency_descending"
    dedup: bool = True
    correlation: bool = True
    full_model: str | None = None
    workers: int = 1
    resume: bool = False
    timings: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.normalize not in NORMALIZE_MODES:
            raise ConfigError(
                f"normalize must be one of {NORMALIZE_MODES}, got {self.normalize!r}"
            )
        if self.order_policy not in sampler.ORDER_POLICIES:
            raise ConfigError(f"unknown order policy {self.order_policy!r}")
        if self.n_values is not None:
            object.__setattr__(self, "n_values", _check_increasing("N", self.n_values))
        if self.k_values is not None:
            object.__setattr__(self, "k_values", _check_increasing("K", self.k_values))
        if self.seeds is not None:
            seeds = tuple(int(s) for s in self.seeds)
            if not seeds:
                raise ConfigError("seeds list must be non-empty")
            if len(set(seeds)) != len(seeds):
                raise ConfigError("seeds must be distinct")
            object.__setattr__(self, "seeds", seeds)
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def identity_digest(self) -> str:
        """Digest of the experiment identity (excludes execution details)."""
        ident = {
            "manifest": str(self.manifest),
            "mode": self.mode,
            "embedding": self.embedding,
            "n_values": list(self.n_values) if self.n_values else None,
            "k_values": list(self.k_values) if self.k_values else None,
            "seeds": list(self.seeds) if self.seeds else None,
            "seed": self.seed,
            "train": json.loads(json.dumps(self.train.__dict__)),
            "normalize": self.normalize,
            "order_policy": self.order_policy,
            "dedup": self.dedup,
            "correlation": self.correlation,
            "full_model": str(self.full_model) if self.full_model else None,
        }
        payload = json.dumps(ident, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class GridRow:
    embedding: str
    n_way: int
    k_shot: int
    seed: int
    map: float
    mean_auc: float
    excluded_tags: int
    weight_correlation: float | None
    wall_ms: float
    support_digest: str

    def key(self) -> tuple:
        return (self.embedding, self.n_way, self.k_shot, self.seed)

    def to_json(self, timings: bool = False) -> dict:
        def clean(v):
            return None if v is None or (isinstance(v, float) and np.isnan(v)) else v

        out = {
            "embedding": self.embedding,
            "n_way": self.n_way,
            "k_shot": self.k_shot,
            "seed": self.seed,
            "map": clean(self.map),
            "mean_auc": clean(self.mean_auc),
            "excluded_tags": self.excluded_tags,
            "weight_correlation": clean(self.weight_correlation),
            "support_digest": self.support_digest,
        }
        if timings:
            out["wall_ms"] = self.wall_ms
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "GridRow":
        return cls(
            embedding=obj["embedding"],
            n_way=int(obj["n_way"]),
            k_shot=int(obj["k_shot"]),
            seed=int(obj["seed"]),
            map=float("nan") if obj["map"] is None else float(obj["map"]),
            mean_auc=float("nan") if obj["mean_auc"] is None else float(obj["mean_auc"]),
            excluded_tags=int(obj["excluded_tags"]),
            weight_correlation=(
                None if obj.get("weight_correlation") is None
                else float(obj["weight_correlation"])
            ),
            wall_ms=float(obj.get("wall_ms", 0.0)),
            support_digest=str(obj.get("support_digest", "")),
        )


@dataclass(frozen=True)
class GridResult:
    embedding: str
    mode: str
    n_values: tuple[int, ...]
    k_values: tuple[int, ...]
    seeds: tuple[int, ...]
    rows: tuple[GridRow, ...]

    def __post_init__(self):
        expected = len(self.n_values) * len(self.k_values) * len(self.seeds)
        if len(self.rows) != expected:
            raise ArgumentError(
                f"expected {expected} rows "
                f"(|N|*|K|*|seeds| for one embedding), got {len(self.rows)}"
            )

    def to_json(self, timings: bool = False) -> dict:
        return {
            "embedding": self.embedding,
            "mode": self.mode,
            "n_values": list(self.n_values),
            "k_values": list(self.k_values),
            "seeds": list(self.seeds),
            "rows": [r.to_json(timings) for r in self.rows],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GridResult":
        return cls(
            embedding=obj["embedding"],
            mode=obj.get("mode", "grid"),
            n_values=tuple(obj["n_values"]),
            k_values=tuple(obj["k_values"]),
            seeds=tuple(obj["seeds"]),
            rows=tuple(GridRow.from_json(r) for r in obj["rows"]),
        )


# ---------------------------------------------------------------------------
# Feature pipeline
# ---------------------------------------------------------------------------

def normalize_store(store, normalize: str, train_rows):
    if normalize == "zscore":
        stats = compute_norm_stats(store, train_rows)
        return standardize_frames(store, stats)
    if normalize == "l2":
        return l2_normalize_frames(store)
    return store


def build_features(dataset: Dataset, embedding: str, normalize: str) -> AggregatedTable:
    """Normalize each source on train-split stats, aggregate, then concat."""
    if embedding == COMBINED:
        sources = list(dataset.stores)
    else:
        if embedding not in dataset.stores:
            raise ConfigError(
                f"embedding {embedding!r} not in manifest "
                f"(available: {', '.join(dataset.stores)} or '{COMBINED}')"
            )
        sources = [embedding]
    tables = []
    for source in sources:
        store = normalize_store(dataset.stores[source], normalize, dataset.splits.train_rows)
        tables.append(aggregate_frames(store))
    return concat_tables(tables)


@dataclass(frozen=True)
class RunContext:
    """Dataset plus precomputed split feature matrices, shared read-only."""

    dataset: Dataset
    features: AggregatedTable
    X_all: np.ndarray
    X_train: np.ndarray
    X_valid: np.ndarray
    X_test: np.ndarray
    Y_train: np.ndarray
    Y_valid: np.ndarray
    Y_test: np.ndarray


def build_context(config: ExperimentConfig) -> RunContext:
    dataset = load_dataset(config.manifest)
    features = build_features(dataset, config.embedding, config.normalize)
    rows64 = features.rows.astype(np.float64)
    labels = dataset.tags.labels
    tr = list(dataset.splits.train_rows)
    va = list(dataset.splits.valid_rows)
    te = list(dataset.splits.test_rows)
    return RunContext(
        dataset=dataset,
        features=features,
        X_all=rows64,
        X_train=rows64[tr],
        X_valid=rows64[va],
        X_test=rows64[te],
        Y_train=labels[tr],
        Y_valid=labels[va],
        Y_test=labels[te],
    )


def _base_provenance(config: ExperimentConfig, ctx: RunContext) -> dict:
    return {
        "dataset": ctx.dataset.manifest.name,
        "embedding": config.embedding,
        "normalize": config.normalize,
        "blocks": [b.to_json() for b in ctx.features.provenance],
    }


# ---------------------------------------------------------------------------
# Experiment modes
# ---------------------------------------------------------------------------

def run_full(config: ExperimentConfig) -> tuple[probe.ProbeModel, metrics.MetricsReport]:
    """Train on the whole training split and evaluate on the whole test split."""
    if config.mode != "full":
        raise ConfigError(f"run_full called with mode={config.mode!r}")
    if config.n_values is not None or config.k_values is not None or config.seeds is not None:
        raise ConfigError("N/K/seeds lists are grid options; not valid for mode=full")
    if config.full_model is not None:
        raise ConfigError("full_model is a grid option; not valid for mode=full")
    ctx = build_context(config)
    prov = _base_provenance(config, ctx)
    prov.update(n_way="full", k_shot="full")
    model, history = probe.train(
        ctx.X_train, ctx.Y_train, ctx.X_valid, ctx.Y_valid,
        config.train, seed=config.seed, provenance=prov,
    )
    report = metrics.evaluate(model, ctx.X_test, ctx.Y_test)

    out = Path(config.out_dir)
    model_path = out / f"full_{config.embedding}.fsp"
    probe.save_model(model, model_path)
    profile = analysis.position_norms(model)
    shares = analysis.block_shares(profile, ctx.features.provenance)
    payload = {
        "embedding": config.embedding,
        "metrics": report.to_json(),
        "provenance": model.provenance,
        "block_shares": shares.to_json(),
        "weight_profile": profile.norms.tolist(),
        "history": {
            "epochs": len(history.train_losses),
            "best_epoch": history.best_epoch,
            "stop_reason": history.stop_reason,
            "train_losses": list(history.train_losses),
            "valid_losses": list(history.valid_losses),
        },
    }
    atomic_write_text(out / f"full_{config.embedding}_metrics.json", canonical_json(payload))
    _write_outputs_manifest(out)
    return model, report


def _load_full_model(config: ExperimentConfig, ctx: RunContext) -> probe.ProbeModel | None:
    if not config.correlation:
        return None
    if config.full_model is None:
        raise DependencyError(
            "weight correlation needs a full-probe model; pass full_model "
            "(from train-full) or disable correlation"
        )
    model = probe.load_model(config.full_model)
    if model.dims != ctx.features.dims:
        raise DependencyError(
            f"full model has {model.dims} dims, features have {ctx.features.dims}; "
            "was it trained on the same embedding and normalization?"
        )
    if model.num_tags != ctx.dataset.tags.num_tags:
        raise DependencyError(
            f"full model covers {model.num_tags} tags, dataset has "
            f"{ctx.dataset.tags.num_tags}"
        )
    for key in ("embedding", "normalize"):
        want = getattr(config, key)
        have = model.provenance.get(key)
        if have is not None and have != want:
            raise DependencyError(
                f"full model was trained with {key}={have!r}, run wants {want!r}"
            )
    return model


def _run_cell(
    config: ExperimentConfig,
    ctx: RunContext,
    order: sampler.TagOrder,
    full_model: probe.ProbeModel | None,
    n: int,
    k: int,
    seed: int,
) -> GridRow:
    started = time.perf_counter()
    support = sampler.sample_support(
        ctx.dataset.tags, ctx.dataset.splits, order, n, k, seed, dedup=config.dedup
    )
    rows, Y_sub = sampler.support_labels(ctx.dataset.tags, support)
    tag_subset = list(order.order[:n])
    X_sup = ctx.X_all[rows]
    digest = support.digest()
    prov = _base_provenance(config, ctx)
    prov.update(n_way=n, k_shot=k, support_digest=digest)
    model, _ = probe.train(
        X_sup,
        Y_sub,
        ctx.X_valid,
        ctx.Y_valid[:, tag_subset],
        config.train,
        seed=seed,
        provenance=prov,
    )
    # the model's rows follow tag_subset order, so score explicitly
    report = metrics.score_metrics(
        probe.forward(model, ctx.X_test), ctx.Y_test[:, tag_subset], tag_subset
    )
    corr: float | None = None
    if full_model is not None:
        try:
            corr = analysis.weight_correlation(
                model, probe.restrict_tags(full_model, tag_subset)
            )
        except UndefinedCorrelationError:
            corr = None
    wall_ms = (time.perf_counter() - started) * 1000.0
    return GridRow(
        embedding=config.embedding,
        n_way=n,
        k_shot=k,
        seed=seed,
        map=report.map,
        mean_auc=report.mean_auc,
        excluded_tags=len(report.excluded_tags),
        weight_correlation=corr,
        wall_ms=wall_ms,
        support_digest=digest,
    )


def _run_cells(config: ExperimentConfig, n_values, k_values, seeds) -> GridResult:
    ctx = build_context(config)
    num_tags = ctx.dataset.tags.num_tags
    if n_values is None:
        n_values = (num_tags,)
    if max(n_values) > num_tags:
        raise ConfigError(
            f"N={max(n_values)} exceeds the {num_tags} tags in the dataset"
        )
    full_model = _load_full_model(config, ctx)
    orders = {
        s: sampler.order_tags(ctx.dataset.tags, ctx.dataset.splits, config.order_policy, s)
        for s in seeds
    }

    cells = [(n, k, s) for n in n_values for k in k_values for s in seeds]
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    progress_path = out / "rows.jsonl"
    digest = config.identity_digest()

    reused: dict[tuple, GridRow] = {}
    if config.resume and progress_path.exists():
        reused = _load_progress(progress_path, digest)
        if reused:
            log.info("resuming: %d of %d cells already computed", len(reused), len(cells))

    def compute(cell) -> GridRow:
        n, k, s = cell
        key = (config.embedding, n, k, s)
        if key in reused:
            return reused[key]
        return _run_cell(config, ctx, orders[s], full_model, n, k, s)

    rows: list[GridRow] = []
    with open(progress_path, "w", encoding="utf-8") as progress:
        progress.write(json.dumps({"config_digest": digest}) + "\n")
        if config.workers == 1:
            for cell in cells:
                row = compute(cell)
                rows.append(row)
                progress.write(_row_line(row, config.timings))
                progress.flush()
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                for row in pool.map(compute, cells):
                    rows.append(row)
                    progress.write(_row_line(row, config.timings))
                    progress.flush()

    _write_supports(config, ctx, orders, cells, out / "supports.jsonl")

    rows.sort(key=GridRow.key)
    return GridResult(
        embedding=config.embedding,
        mode=config.mode,
        n_values=tuple(n_values),
        k_values=tuple(k_values),
        seeds=tuple(seeds),
        rows=tuple(rows),
    )


def _write_supports(config: ExperimentConfig, ctx: RunContext, orders, cells, path: Path) -> None:
    """Provenance log of every cell's exact support draw.

    Supports are pure functions of (tags, split, order, n, k, seed), so the
    log is re-derived at finalize time and resumed runs emit the same bytes.
    """
    lines = []
    for n, k, s in sorted(cells, key=lambda c: (c[0], c[1], c[2])):
        support = sampler.sample_support(
            ctx.dataset.tags, ctx.dataset.splits, orders[s], n, k, s, dedup=config.dedup
        )
        lines.append(json.dumps(support.to_json(), sort_keys=True, separators=(",", ":")))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _row_line(row: GridRow, timings: bool) -> str:
    return json.dumps(row.to_json(timings), sort_keys=True, separators=(",", ":")) + "\n"


def _load_progress(path: Path, digest: str) -> dict[tuple, GridRow]:
    rows: dict[tuple, GridRow] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("config_digest") != digest:
                log.warning("progress file %s was written by a different config; ignoring", path)
                return {}
            for line in fh:
                line = line.strip()
                if line:
                    row = GridRow.from_json(json.loads(line))
                    rows[row.key()] = row
    except (json.JSONDecodeError, KeyError, ValueError):
        log.warning("progress file %s is unreadable; recomputing all cells", path)
        return {}
    return rows


def run_grid(config: ExperimentConfig) -> GridResult:
    """The N x K ablation grid for one embedding."""
    if config.mode != "grid":
        raise ConfigError(f"run_grid called with mode={config.mode!r}")
    n_values = config.n_values or DEFAULT_N
    k_values = config.k_values or DEFAULT_K
    seeds = config.seeds or (0,)
    result = _run_cells(config, n_values, k_values, seeds)
    finalize_outputs(result, config)
    return result


def run_sweep(config: ExperimentConfig) -> GridResult:
    """Data-efficiency sweep: K varies, N fixed to all tags in the dataset."""
    if config.mode != "sweep":
        raise ConfigError(f"run_sweep called with mode={config.mode!r}")
    if config.n_values is not None:
        raise ConfigError("sweep fixes N to the full tag count; N list is not valid")
    k_values = config.k_values or DEFAULT_K
    seeds = config.seeds or (0,)
    result = _run_cells(config, None, k_values, seeds)
    finalize_outputs(result, config)
    return result


def run_synth(
    out_dir,
    num_clips: int = 500,
    num_tags: int = 10,
    frame_dim: int = 32,
    frames_per_clip: int = 4,
    noise_scale: float = 0.1,
    seed: int = 42,
    name: str | None = None,
) -> Path:
    """Generate a synthetic dataset on disk; returns the manifest path."""
    from .data import generate_synthetic
    from .formats import DatasetManifest, write_frames, write_tags

    store, tags, splits = generate_synthetic(
        num_clips, num_tags, frame_dim, frames_per_clip, noise_scale, seed
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_frames(store, out / "synthetic.fse")
    write_tags(tags, out / "tags.fsl")
    manifest = DatasetManifest(
        name=name or f"synthetic-{num_clips}x{num_tags}-seed{seed}",
        frames={"synthetic": "synthetic.fse"},
        tags="tags.fsl",
        splits=splits,
        root=out,
    )
    path = save_manifest(manifest, out / "manifest.json")
    _write_outputs_manifest(out)
    return path


def run_aggregate(manifest_path, out_dir, normalize: str = "zscore", sources=None) -> list[Path]:
    """Export per-source aggregated tables plus an updated manifest copy."""
    if normalize not in NORMALIZE_MODES:
        raise ConfigError(f"normalize must be one of {NORMALIZE_MODES}")
    dataset = load_dataset(manifest_path)
    chosen = list(sources) if sources else list(dataset.stores)
    for s in chosen:
        if s not in dataset.stores:
            raise ConfigError(f"source {s!r} not in manifest")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    produced: list[Path] = []
    aggregated: dict[str, str] = {}
    for source in chosen:
        store = normalize_store(dataset.stores[source], normalize, dataset.splits.train_rows)
        table = aggregate_frames(store)
        name = f"{source}_aggregated.fsa"
        produced.append(write_table(table, out / name))
        aggregated[source] = name
    def rel_to_out(p: str) -> str:
        return os.path.relpath((Path(dataset.manifest.root) / p).resolve(), start=out.resolve())

    manifest = replace(
        dataset.manifest,
        aggregated=aggregated,
        frames={s: rel_to_out(p) for s, p in dataset.manifest.frames.items()},
        tags=rel_to_out(dataset.manifest.tags),
    )
    produced.append(save_manifest(manifest, out / "manifest.json"))
    _write_outputs_manifest(out)
    return produced


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    return repr(float(v))


def _seed_stats(rows: list[GridRow], attr: str) -> tuple[float | None, float | None]:
    values = [getattr(r, attr) for r in rows]
    values = [v for v in values if v is not None and not np.isnan(v)]
    if not values:
        return None, None
    return float(np.mean(values)), float(np.std(values))


def emit_report(result: GridResult, kind: str, out_dir, timings: bool = False) -> list[Path]:
    """Write one report artifact family; returns the produced paths."""
    if not result.rows:
        raise ArgumentError("cannot emit a report from empty results")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_cell: dict[tuple[int, int], list[GridRow]] = {}
    for r in result.rows:
        by_cell.setdefault((r.n_way, r.k_shot), []).append(r)

    if kind == "summary_json":
        path = out / "results.json"
        atomic_write_text(path, canonical_json(result.to_json(timings)))
        return [path]

    if kind == "heatmap_csv":
        produced = []
        for metric, attr in (("map", "map"), ("auc", "mean_auc")):
            for stat_idx, suffix in ((0, ""), (1, "_std")):
                buf = io.StringIO()
                writer = csv.writer(buf, lineterminator="\n")
                writer.writerow(["k/n"] + [str(n) for n in result.n_values])
                for k in result.k_values:
                    row = [str(k)]
                    for n in result.n_values:
                        stats = _seed_stats(by_cell.get((n, k), []), attr)
                        row.append(_fmt(stats[stat_idx]))
                    writer.writerow(row)
                path = out / f"heatmap_{metric}{suffix}.csv"
                atomic_write_text(path, buf.getvalue())
                produced.append(path)
        return produced

    if kind == "curve_csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["embedding", "n", "k", "map_mean", "map_std", "auc_mean", "auc_std",
             "corr_mean", "corr_std"]
        )
        for n in result.n_values:
            for k in result.k_values:
                rows = by_cell.get((n, k), [])
                m = _seed_stats(rows, "map")
                a = _seed_stats(rows, "mean_auc")
                c = _seed_stats(rows, "weight_correlation")
                writer.writerow(
                    [result.embedding, str(n), str(k),
                     _fmt(m[0]), _fmt(m[1]), _fmt(a[0]), _fmt(a[1]),
                     _fmt(c[0]), _fmt(c[1])]
                )
        path = out / "curves.csv"
        atomic_write_text(path, buf.getvalue())
        return [path]

    raise ArgumentError(
        f"unknown report kind {kind!r}; expected heatmap_csv, curve_csv or summary_json"
    )


def finalize_outputs(result: GridResult, config: ExperimentConfig) -> list[Path]:
    """Write the standard artifact set for a finished sweep/grid run."""
    out = Path(config.out_dir)
    produced = emit_report(result, "summary_json", out, timings=config.timings)
    produced += emit_report(result, "heatmap_csv", out)
    produced += emit_report(result, "curve_csv", out)
    _write_outputs_manifest(out)
    return produced


def load_results(path) -> GridResult:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"results file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    try:
        return GridResult.from_json(obj)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"{path} is not a results summary: missing {e}") from e


def _write_outputs_manifest(out_dir: Path) -> Path:
    """List every artifact in the directory with size and content hash."""
    out = Path(out_dir)
    entries = []
    for p in sorted(out.rglob("*")):
        if not p.is_file() or p.name == "outputs.json":
            continue
        raw = p.read_bytes()
        entries.append(
            {
                "path": str(p.relative_to(out)),
                "bytes": len(raw),
                "sha256": hashlib.sha256(raw).hexdigest(),
            }
        )
    return atomic_write_text(out / "outputs.json", canonical_json({"files": entries}))
