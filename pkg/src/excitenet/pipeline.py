"""Stage orchestration: topics -> events -> fit, plus simulation support.

Stages communicate exclusively through files in the output directory
(theta.csv, events.csv, grid.json, ...), so each stage can be re-run from
its persisted inputs with identical results given fixed seeds. Every command
writes a manifest listing its configuration echo, per-stage counts, wall
clock, emitted files, and the derived seeds it used.
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import corpus, events, hawkes, ingest, topics
from .config import PipelineConfig
from .errors import ConfigError, InputError, StageError
from .reports import write_heatmap_svg

MANIFEST_NAME = "manifest.json"


def stage_seed(master: int, *parts) -> int:
    """Deterministic per-stage seed derived from the master seed and name parts."""
    keys = [zlib.crc32(p.encode("utf-8")) if isinstance(p, str) else int(p)
            for p in parts]
    return topics.derived_seed(master, *keys)


@dataclass
class StageRecord:
    name: str
    wall_clock_s: float = 0.0
    counts: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    seeds: dict = field(default_factory=dict)


def write_manifest(out_dir: Path, command: str, config_echo: dict,
                   stages: list[StageRecord], failed_stage: str | None = None) -> Path:
    payload = {
        "command": command,
        "config": config_echo,
        "ok": failed_stage is None,
        "failed_stage": failed_stage,
        "stages": [
            {"name": s.name, "wall_clock_s": round(s.wall_clock_s, 3),
             "counts": s.counts, "outputs": s.outputs, "warnings": s.warnings,
             "seeds": s.seeds}
            for s in stages
        ],
        "outputs": sorted({f for s in stages for f in s.outputs}),
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    missing = [f for f in payload["outputs"] if not (out_dir / f).exists()]
    if missing:
        raise StageError(command, InputError(f"manifest lists missing files: {missing}"))
    return path


def run_topics_stage(cfg: PipelineConfig) -> StageRecord:
    """Fit per-source dynamic topic models; write topic reports and theta.csv."""
    started = time.perf_counter()
    record = StageRecord(name="topics")
    if not cfg.sources:
        raise InputError("no sources configured")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    stoplist = corpus.load_stopwords(cfg.stopwords)
    tagger = corpus.default_tagger()

    processed_by_source: dict[str, list[corpus.ProcessedDocument]] = {}
    for src in cfg.sources:
        read = ingest.read_submissions(src.submissions, lenient=cfg.lenient)
        processed_by_source[src.name] = [corpus.preprocess(s, stoplist, tagger)
                                         for s in read.records]
        record.counts[src.name] = {"submissions": len(read.records),
                                   "skipped_lines": read.skipped}
        if read.skipped:
            record.warnings.append(f"{src.name}: skipped {read.skipped} malformed lines")

    pooled_vocab = None
    if cfg.pooled_vocabulary:
        pooled_docs = [d for docs in processed_by_source.values() for d in docs]
        pooled_vocab = corpus.build_vocabulary(pooled_docs, cfg.min_df, cfg.max_df_ratio)

    all_mixes: list[topics.DocTopicMix] = []
    for src in cfg.sources:
        docs = processed_by_source[src.name]
        vocab = pooled_vocab or corpus.build_vocabulary(docs, cfg.min_df, cfg.max_df_ratio)
        bows = [corpus.vectorize(d, vocab) for d in docs]
        kept = [b for b in bows if b.counts]
        dropped = len(bows) - len(kept)
        seed = stage_seed(cfg.seed, "topics", src.name)
        lda_cfg = cfg.lda_config_for(src, seed)
        model, mixes = topics.fit_dynamic(kept, cfg.slice_duration, lda_cfg,
                                          cfg.kappa, vocab_size=len(vocab))
        report_name = f"topic_report_{src.name}.txt"
        topics.write_topic_report(cfg.out_dir / report_name, model, vocab,
                                  n=cfg.top_words)
        record.outputs.append(report_name)
        record.seeds[f"topics/{src.name}"] = seed
        record.counts[src.name].update({
            "vocabulary": len(vocab),
            "documents_fit": len(kept),
            "documents_dropped_empty": dropped,
            "slices": len(model.slices),
        })
        if dropped:
            record.warnings.append(f"{src.name}: {dropped} documents emptied by vectorization")
        all_mixes.extend(mixes)

    topics.write_theta_csv(cfg.out_dir / "theta.csv", all_mixes)
    record.outputs.append("theta.csv")
    record.wall_clock_s = time.perf_counter() - started
    return record


def _shared_grid(mixes, tick_sets, bucket_width: int) -> events.BucketGrid:
    stamps = [m.timestamp for m in mixes]
    for ticks in tick_sets:
        stamps.extend(t.timestamp_ms // 1000 for t in ticks)
    if not stamps:
        raise InputError("no timestamps available to build the bucket grid")
    return events.BucketGrid.covering(min(stamps), max(stamps), bucket_width)


def run_events_stage(cfg: PipelineConfig) -> StageRecord:
    """Build occurrence and price series, detect jumps, and write event streams."""
    started = time.perf_counter()
    record = StageRecord(name="events")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    mixes = topics.read_theta_csv(cfg.out_dir / "theta.csv") if cfg.sources else []
    ticks_by_market = {}
    for market in cfg.markets:
        read = ingest.read_ticks(market.ticks, lenient=cfg.lenient)
        ticks_by_market[market.name] = read.records
        record.counts[market.name] = {"ticks": len(read.records),
                                      "skipped_lines": read.skipped}
        if read.skipped:
            record.warnings.append(f"{market.name}: skipped {read.skipped} malformed lines")

    grid = _shared_grid(mixes, ticks_by_market.values(), cfg.bucket_width)
    planned: list[tuple[str, events.ReturnSeries, str]] = []
    for src in cfg.sources:
        source_mixes = [m for m in mixes if m.source == src.name]
        if not source_mixes:
            raise InputError(f"theta.csv has no documents for source '{src.name}'")
        series = topics.occurrence_series(source_mixes, grid, cfg.occurrence_threshold)
        for topic in src.selected_topics:
            if topic >= len(series):
                raise ConfigError(f"topic {topic} not in the fitted model for '{src.name}'")
            counts = events.BucketSeries(grid=grid,
                                         values=series[topic].counts.astype(float),
                                         kind="count")
            returns = events.log_returns(counts, cfg.count_smoothing)
            planned.append((f"{src.prefix}_{topic}", returns, "up"))
    for market in cfg.markets:
        prices = events.bucketize_prices(ticks_by_market[market.name], grid)
        returns = events.log_returns(prices)
        planned.append((f"{market.name}_pos", returns, "up"))
        planned.append((f"{market.name}_neg", returns, "down"))

    thresholds: dict[str, float | None] = {"up": None, "down": None}
    if cfg.percentile_scope == "pooled":
        pooled = np.concatenate([r.returns for _, r, _ in planned])
        thresholds["up"] = events.nearest_rank(np.sort(pooled), cfg.jump_percentile)
        thresholds["down"] = events.nearest_rank(np.sort(-pooled), cfg.jump_percentile)
    streams = [
        events.detect_jumps(returns, cfg.jump_percentile, direction, label=label,
                            threshold=thresholds[direction])
        for label, returns, direction in planned
    ]

    process_set = events.ProcessSet(grid=grid, streams=streams)
    for stream in streams:
        if not stream.event_buckets:
            record.warnings.append(f"stream '{stream.label}' has zero events")

    events.write_event_csv(cfg.out_dir / "events.csv", process_set)
    events.write_grid_json(cfg.out_dir / "grid.json", grid)
    fraction = events.overlap_fraction(process_set) if process_set.n_events else None
    if fraction is None:
        record.warnings.append("no events at all; overlap fraction undefined")
    overlap_payload = {
        "n_events": process_set.n_events,
        "n_streams": len(streams),
        "overlap_fraction": None if fraction is None else round(1 - fraction, 6),
        "non_overlapping_fraction": None if fraction is None else round(fraction, 6),
    }
    (cfg.out_dir / "overlap.json").write_text(
        json.dumps(overlap_payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    record.outputs += ["events.csv", "grid.json", "overlap.json"]
    record.counts["streams"] = len(streams)
    record.counts["events_total"] = process_set.n_events
    record.counts["n_buckets"] = grid.n_buckets
    record.wall_clock_s = time.perf_counter() - started
    return record


def _subset(process_set: events.ProcessSet, labels: list[str]) -> events.ProcessSet:
    by_label = {s.label: s for s in process_set.streams}
    streams = [by_label.get(lb, events.EventStream(label=lb, event_buckets=()))
               for lb in labels]
    return events.ProcessSet(grid=process_set.grid, streams=streams)


def _fit_one(process_set: events.ProcessSet, group: str, cfg: PipelineConfig,
             record: StageRecord) -> None:
    if len(process_set.streams) < 2:
        raise ConfigError(f"group '{group}' has fewer than 2 streams")
    seed = stage_seed(cfg.seed, "fit", group)
    gibbs = hawkes.GibbsConfig(
        iterations=cfg.iterations, burn_in=cfg.fit_burn_in, thinning=cfg.thinning,
        prior_background=cfg.prior_background, prior_weight=cfg.prior_weight,
        prior_impulse=cfg.prior_impulse, seed=seed)
    basis = hawkes.ImpulseBasis.boxcars(cfg.dt_max, cfg.basis_edges)
    summary = hawkes.fit(process_set, cfg.dt_max, basis, gibbs)
    echo = {"dt_max": cfg.dt_max, "iterations": cfg.iterations,
            "burn_in": cfg.fit_burn_in, "thinning": cfg.thinning,
            "prior_background": list(cfg.prior_background),
            "prior_weight": list(cfg.prior_weight),
            "prior_impulse": cfg.prior_impulse, "seed": seed, "group": group}
    names = [f"weights_{group}.csv", f"posterior_{group}.json", f"heatmap_{group}.svg"]
    hawkes.write_weight_csv(cfg.out_dir / names[0], summary.labels, summary.mean_weights)
    hawkes.write_posterior_json(cfg.out_dir / names[1], summary, config_echo=echo)
    write_heatmap_svg(cfg.out_dir / names[2], summary.labels, summary.mean_weights,
                      title=f"posterior mean weights ({group})")
    record.outputs += names
    record.seeds[f"fit/{group}"] = seed
    record.counts[group] = {"processes": len(summary.labels),
                            "events": process_set.n_events,
                            "n_samples": summary.n_samples}


def run_fit_stage(cfg: PipelineConfig) -> StageRecord:
    """Fit one Hawkes network per configured group from the persisted event CSV."""
    started = time.perf_counter()
    record = StageRecord(name="fit")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    grid = events.read_grid_json(cfg.out_dir / "grid.json")
    full_set = events.read_event_csv(cfg.out_dir / "events.csv", grid,
                                     labels=cfg.process_labels())
    for group, labels in cfg.fit_groups():
        _fit_one(_subset(full_set, labels), group, cfg, record)
    record.wall_clock_s = time.perf_counter() - started
    return record


def run_fit_standalone(events_path: Path, grid_path: Path, out_dir: Path,
                       dt_max: int, gibbs: hawkes.GibbsConfig) -> StageRecord:
    """Fit directly from an event CSV (stream order = first appearance)."""
    started = time.perf_counter()
    record = StageRecord(name="fit")
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = events.read_grid_json(grid_path)
    process_set = events.read_event_csv(events_path, grid)
    if len(process_set.streams) < 2:
        raise ConfigError("event file has fewer than 2 streams")
    basis = hawkes.ImpulseBasis.boxcars(dt_max)
    summary = hawkes.fit(process_set, dt_max, basis, gibbs)
    echo = {"dt_max": dt_max, "iterations": gibbs.iterations, "burn_in": gibbs.burn_in,
            "thinning": gibbs.thinning, "seed": gibbs.seed, "group": "all",
            "events": str(events_path)}
    names = ["weights_all.csv", "posterior_all.json", "heatmap_all.svg"]
    hawkes.write_weight_csv(out_dir / names[0], summary.labels, summary.mean_weights)
    hawkes.write_posterior_json(out_dir / names[1], summary, config_echo=echo)
    write_heatmap_svg(out_dir / names[2], summary.labels, summary.mean_weights,
                      title="posterior mean weights (all)")
    record.outputs += names
    record.seeds["fit/all"] = gibbs.seed
    record.counts["all"] = {"processes": len(summary.labels),
                            "events": process_set.n_events,
                            "n_samples": summary.n_samples}
    record.wall_clock_s = time.perf_counter() - started
    return record


def run_simulate_stage(network_path: Path, n_buckets: int, seed: int,
                       out_dir: Path) -> StageRecord:
    """Simulate a network spec into the exact event CSV format the fit consumes."""
    started = time.perf_counter()
    record = StageRecord(name="simulate")
    if n_buckets < 2:
        raise ConfigError("n_buckets must be at least 2")
    if seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    out_dir.mkdir(parents=True, exist_ok=True)
    net, bucket_width = hawkes.read_network_json(network_path)
    process_set = hawkes.simulate(net, n_buckets, seed, bucket_width=bucket_width)
    events.write_event_csv(out_dir / "events.csv", process_set)
    events.write_grid_json(out_dir / "grid.json", process_set.grid)
    record.outputs += ["events.csv", "grid.json"]
    record.seeds["simulate"] = seed
    record.counts["events_total"] = process_set.n_events
    record.counts["processes"] = len(process_set.streams)
    record.wall_clock_s = time.perf_counter() - started
    return record


def _staged(stage: str, fn, *args) -> StageRecord:
    try:
        return fn(*args)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc


def cmd_topics(cfg: PipelineConfig) -> Path:
    record = _staged("topics", run_topics_stage, cfg)
    return write_manifest(cfg.out_dir, "topics", cfg.echo(), [record])


def cmd_events(cfg: PipelineConfig) -> Path:
    record = _staged("events", run_events_stage, cfg)
    return write_manifest(cfg.out_dir, "events", cfg.echo(), [record])


def cmd_fit(cfg: PipelineConfig) -> Path:
    record = _staged("fit", run_fit_stage, cfg)
    return write_manifest(cfg.out_dir, "fit", cfg.echo(), [record])


def cmd_simulate(network_path: Path, n_buckets: int, seed: int, out_dir: Path) -> Path:
    record = _staged("simulate", run_simulate_stage, network_path, n_buckets, seed, out_dir)
    echo = {"network": str(network_path), "n_buckets": n_buckets, "seed": seed}
    return write_manifest(out_dir, "simulate", echo, [record])


def cmd_run(cfg: PipelineConfig) -> Path:
    """Full pipeline: topics -> events -> fit, manifest written last (or on failure
    with the partial progress recorded)."""
    stages: list[StageRecord] = []
    plan = [("topics", run_topics_stage), ("events", run_events_stage),
            ("fit", run_fit_stage)]
    for name, fn in plan:
        try:
            stages.append(_staged(name, fn, cfg))
        except StageError as exc:
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            write_manifest(cfg.out_dir, "run", cfg.echo(), stages, failed_stage=name)
            raise exc
    return write_manifest(cfg.out_dir, "run", cfg.echo(), stages)
