"""Pipeline configuration: a TOML file with one section per stage.

Defaults follow the documented method values: 900-second buckets, 0.99 jump
percentile, dt_max 96, occurrence threshold 0.1, vocabulary pruning at
min_df 20 / max_df_ratio 0.5, and K = 30 topics. Paths are resolved relative
to the config file's directory.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .topics import LdaConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class SourceConfig:
    name: str
    submissions: Path
    prefix: str
    market: str
    selected_topics: list[int]
    lda_overrides: dict = field(default_factory=dict)

    def topic_labels(self) -> list[str]:
        return [f"{self.prefix}_{k}" for k in self.selected_topics]


@dataclass
class MarketConfig:
    name: str
    ticks: Path

    def stream_labels(self) -> list[str]:
        return [f"{self.name}_pos", f"{self.name}_neg"]


@dataclass
class PipelineConfig:
    out_dir: Path
    seed: int
    lenient: bool
    # corpus
    min_df: int
    max_df_ratio: float
    stopwords: Path | None
    pooled_vocabulary: bool
    # topics
    k: int
    alpha: float | None
    eta: float
    sweeps: int
    topics_burn_in: int
    slice_duration: int
    kappa: float
    occurrence_threshold: float
    top_words: int
    # events
    bucket_width: int
    jump_percentile: float
    percentile_scope: str
    count_smoothing: float
    # hawkes
    dt_max: int
    iterations: int
    fit_burn_in: int
    thinning: int
    prior_background: tuple[float, float]
    prior_weight: tuple[float, float]
    prior_impulse: float
    basis_edges: list[tuple[int, int]] | None
    pooled_fit: bool
    sources: list[SourceConfig]
    markets: list[MarketConfig]
    raw: dict = field(default_factory=dict)

    def lda_config_for(self, source: SourceConfig, seed: int) -> LdaConfig:
        merged = {"k": self.k, "alpha": self.alpha, "eta": self.eta,
                  "sweeps": self.sweeps, "burn_in": self.topics_burn_in}
        merged.update(source.lda_overrides)
        return LdaConfig(seed=seed, **merged)

    def process_labels(self) -> list[str]:
        labels = [lb for src in self.sources for lb in src.topic_labels()]
        labels += [lb for mkt in self.markets for lb in mkt.stream_labels()]
        return labels

    def fit_groups(self) -> list[tuple[str, list[str]]]:
        """Process subsets fitted together: one per market by default, or a
        single pooled group containing every configured process."""
        if self.pooled_fit:
            return [("all", self.process_labels())]
        groups = []
        for market in self.markets:
            labels = [lb for src in self.sources if src.market == market.name
                      for lb in src.topic_labels()]
            labels += market.stream_labels()
            groups.append((market.name, labels))
        return groups

    def echo(self) -> dict:
        return {
            "config": self.raw,
            "overrides": {"out_dir": str(self.out_dir), "seed": self.seed,
                          "lenient": self.lenient},
        }


def _take(table: dict, key: str, kind: type, default=None, required: bool = False,
          context: str = ""):
    if key not in table:
        if required:
            raise ConfigError(f"missing required key '{key}'{context}")
        return default
    value = table.pop(key)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and (not isinstance(value, kind) or isinstance(value, bool)
                             and kind is not bool):
        raise ConfigError(f"key '{key}'{context} must be of type {kind.__name__}")
    return value


def _reject_unknown(table: dict, context: str) -> None:
    if table:
        raise ConfigError(f"unknown keys {sorted(table)} in {context}")


def _pair(value, name: str) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(f"{name} must be a [shape, rate] pair")
    return float(value[0]), float(value[1])


def load_config(path: str | Path, out_override: Path | None = None,
                seed_override: int | None = None,
                lenient_override: bool = False) -> PipelineConfig:
    """Parse and validate a pipeline config file; CLI overrides win."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    base_dir = path.parent
    table = dict(raw)

    out_dir = Path(_take(table, "out_dir", str, "out"))
    seed = _take(table, "seed", int, 0)
    lenient = _take(table, "lenient", bool, False)

    corpus = dict(_take(table, "corpus", dict, {}))
    min_df = _take(corpus, "min_df", int, 20, context=" in [corpus]")
    max_df_ratio = _take(corpus, "max_df_ratio", float, 0.5, context=" in [corpus]")
    stopwords = _take(corpus, "stopwords", str, None, context=" in [corpus]")
    pooled_vocabulary = _take(corpus, "pooled_vocabulary", bool, False,
                              context=" in [corpus]")
    _reject_unknown(corpus, "[corpus]")

    topics = dict(_take(table, "topics", dict, {}))
    k = _take(topics, "k", int, 30, context=" in [topics]")
    alpha = _take(topics, "alpha", float, None, context=" in [topics]")
    eta = _take(topics, "eta", float, 0.01, context=" in [topics]")
    sweeps = _take(topics, "sweeps", int, 500, context=" in [topics]")
    topics_burn_in = _take(topics, "burn_in", int, 250, context=" in [topics]")
    slice_duration = _take(topics, "slice_duration", int, 604800, context=" in [topics]")
    kappa = _take(topics, "kappa", float, 5.0, context=" in [topics]")
    occurrence_threshold = _take(topics, "occurrence_threshold", float, 0.1,
                                 context=" in [topics]")
    top_n = _take(topics, "top_words", int, 10, context=" in [topics]")
    _reject_unknown(topics, "[topics]")

    events = dict(_take(table, "events", dict, {}))
    bucket_width = _take(events, "bucket_width", int, 900, context=" in [events]")
    jump_percentile = _take(events, "jump_percentile", float, 0.99, context=" in [events]")
    percentile_scope = _take(events, "percentile_scope", str, "per_series",
                             context=" in [events]")
    count_smoothing = _take(events, "count_smoothing", float, 1.0, context=" in [events]")
    _reject_unknown(events, "[events]")

    hawkes = dict(_take(table, "hawkes", dict, {}))
    dt_max = _take(hawkes, "dt_max", int, 96, context=" in [hawkes]")
    iterations = _take(hawkes, "iterations", int, 1500, context=" in [hawkes]")
    fit_burn_in = _take(hawkes, "burn_in", int, 500, context=" in [hawkes]")
    thinning = _take(hawkes, "thinning", int, 1, context=" in [hawkes]")
    prior_background = _pair(_take(hawkes, "prior_background", list, [1.0, 1.0],
                                   context=" in [hawkes]"), "prior_background")
    prior_weight = _pair(_take(hawkes, "prior_weight", list, [0.5, 10.0],
                               context=" in [hawkes]"), "prior_weight")
    prior_impulse = _take(hawkes, "prior_impulse", float, 1.0, context=" in [hawkes]")
    raw_edges = _take(hawkes, "basis_edges", list, None, context=" in [hawkes]")
    pooled_fit = _take(hawkes, "pooled", bool, False, context=" in [hawkes]")
    _reject_unknown(hawkes, "[hawkes]")
    basis_edges = None
    if raw_edges is not None:
        try:
            basis_edges = [(int(lo), int(hi)) for lo, hi in raw_edges]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"basis_edges must be [lo, hi] pairs: {exc}") from exc

    sources = []
    for name, body in dict(_take(table, "sources", dict, {})).items():
        if not isinstance(body, dict):
            raise ConfigError(f"[sources.{name}] must be a table")
        body = dict(body)
        context = f" in [sources.{name}]"
        submissions = _take(body, "submissions", str, required=True, context=context)
        prefix = _take(body, "prefix", str, name, context=context)
        market = _take(body, "market", str, required=True, context=context)
        selected = _take(body, "selected_topics", list, [], context=context)
        overrides = dict(_take(body, "lda", dict, {}, context=context))
        _reject_unknown(body, f"[sources.{name}]")
        allowed = {"alpha", "eta", "sweeps", "burn_in"}
        if not set(overrides) <= allowed:
            raise ConfigError(
                f"[sources.{name}.lda] may override only {sorted(allowed)} "
                "(k is global so all sources share one mixture width)")
        if not all(isinstance(t, int) and not isinstance(t, bool) for t in selected):
            raise ConfigError(f"selected_topics{context} must be integers")
        sources.append(SourceConfig(name=name, submissions=base_dir / submissions,
                                    prefix=prefix, market=market,
                                    selected_topics=list(selected),
                                    lda_overrides=overrides))

    markets = []
    for name, body in dict(_take(table, "markets", dict, {})).items():
        if not isinstance(body, dict):
            raise ConfigError(f"[markets.{name}] must be a table")
        body = dict(body)
        ticks = _take(body, "ticks", str, required=True, context=f" in [markets.{name}]")
        _reject_unknown(body, f"[markets.{name}]")
        markets.append(MarketConfig(name=name, ticks=base_dir / ticks))
    _reject_unknown(table, "config root")

    cfg = PipelineConfig(
        out_dir=out_override if out_override is not None else base_dir / out_dir,
        seed=seed_override if seed_override is not None else seed,
        lenient=lenient or lenient_override,
        min_df=min_df, max_df_ratio=max_df_ratio,
        stopwords=base_dir / stopwords if stopwords else None,
        pooled_vocabulary=pooled_vocabulary,
        k=k, alpha=alpha, eta=eta, sweeps=sweeps, topics_burn_in=topics_burn_in,
        slice_duration=slice_duration, kappa=kappa,
        occurrence_threshold=occurrence_threshold, top_words=top_n,
        bucket_width=bucket_width, jump_percentile=jump_percentile,
        percentile_scope=percentile_scope, count_smoothing=count_smoothing,
        dt_max=dt_max, iterations=iterations, fit_burn_in=fit_burn_in,
        thinning=thinning, prior_background=prior_background,
        prior_weight=prior_weight, prior_impulse=prior_impulse,
        basis_edges=basis_edges, pooled_fit=pooled_fit,
        sources=sources, markets=markets, raw=raw,
    )
    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    if cfg.min_df < 1 or not 0 < cfg.max_df_ratio <= 1:
        raise ConfigError("need min_df >= 1 and 0 < max_df_ratio <= 1")
    if not cfg.sweeps > cfg.topics_burn_in >= 0:
        raise ConfigError("[topics] needs sweeps > burn_in >= 0")
    if not cfg.iterations > cfg.fit_burn_in >= 0:
        raise ConfigError("[hawkes] needs iterations > burn_in >= 0")
    if cfg.kappa < 0:
        raise ConfigError("kappa must be nonnegative")
    if not 0 < cfg.jump_percentile < 1:
        raise ConfigError("jump_percentile must be in (0, 1)")
    if cfg.percentile_scope not in ("per_series", "pooled"):
        raise ConfigError("percentile_scope must be 'per_series' or 'pooled'")
    if cfg.bucket_width <= 0 or cfg.slice_duration <= 0 or cfg.dt_max < 1:
        raise ConfigError("bucket_width, slice_duration and dt_max must be positive")
    market_names = {m.name for m in cfg.markets}
    if len(market_names) != len(cfg.markets):
        raise ConfigError("market names must be unique")
    for src in cfg.sources:
        if src.market not in market_names:
            raise ConfigError(f"source '{src.name}' references unknown market '{src.market}'")
        bad = [t for t in src.selected_topics if not 0 <= t < cfg.k]
        if bad:
            raise ConfigError(f"source '{src.name}' selects topics {bad} outside 0..{cfg.k - 1}")
    labels = cfg.process_labels()
    if len(set(labels)) != len(labels):
        raise ConfigError(f"process labels collide: {labels}")
    if len(labels) < 2:
        raise ConfigError("need at least two processes (topics plus market streams)")
