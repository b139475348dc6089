"""Bundled synthetic end-to-end fixture.

Writes two submission dumps drawn from known drifting topics, a matching tick
file with occasional price shocks, and a ready-to-run pipeline config. Sized
so the full pipeline finishes in seconds; used by the test suite and as a
quick-start example.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

BASE_TS = 1483228800  # 2017-01-01 00:00 UTC, multiple of 900
SPAN_DAYS = 30

TOPIC_BLOCKS = [
    ["price", "chart", "trend", "margin", "volume", "trade", "swap", "spread",
     "bid", "order", "candle", "signal", "whale", "bull", "bear"],
    ["block", "chain", "node", "hash", "nonce", "shard", "beacon", "relay",
     "proof", "stake", "miner", "ledger", "fork", "patch", "code"],
    ["coin", "token", "wallet", "value", "cash", "fiat", "asset", "fund",
     "bank", "tax", "law", "rule", "vote", "audit", "exchange"],
    ["moon", "dip", "pump", "dump", "crash", "spike", "surge", "panic",
     "scam", "bug", "hack", "rumor", "news", "hype", "fear"],
]
WORDS = [w for block in TOPIC_BLOCKS for w in block]

_CONFIG_TEMPLATE = """\
out_dir = "out"
seed = {seed}

[corpus]
min_df = 5
max_df_ratio = 0.5

[topics]
k = 6
alpha = 0.5
eta = 0.01
sweeps = 150
burn_in = 75
slice_duration = 1296000
kappa = 5.0
occurrence_threshold = 0.1
top_words = 10

[events]
bucket_width = 900
jump_percentile = 0.99
count_smoothing = 1.0

[hawkes]
dt_max = 96
iterations = 400
burn_in = 150
thinning = 1

[sources.alphachat]
submissions = "alphachat.jsonl"
prefix = "a"
market = "COIN"
selected_topics = [0, 1, 2]

[sources.betatalk]
submissions = "betatalk.jsonl"
prefix = "bt"
market = "COIN"
selected_topics = [0, 1]

[markets.COIN]
ticks = "coin_ticks.csv"
"""


def _topic_distributions(rng: np.random.Generator) -> list[np.ndarray]:
    """Per-slice topic-word distributions: block-concentrated, mildly drifting."""
    v = len(WORDS)
    k = len(TOPIC_BLOCKS)
    beta0 = np.full((k, v), 0.12 / v)
    offset = 0
    for topic, block in enumerate(TOPIC_BLOCKS):
        beta0[topic, offset:offset + len(block)] += 0.88 / len(block)
        offset += len(block)
    beta1 = beta0 * np.exp(0.25 * rng.normal(size=beta0.shape))
    beta1 /= beta1.sum(axis=1, keepdims=True)
    return [beta0, beta1]


def _document_words(rng: np.random.Generator, beta: np.ndarray) -> list[str]:
    theta = rng.dirichlet(np.full(beta.shape[0], 0.25))
    length = 0
    while length == 0:
        length = rng.poisson(45)
    words: list[str] = []
    for topic, count in enumerate(rng.multinomial(length, theta)):
        if count:
            for w in np.flatnonzero(rng.multinomial(count, beta[topic])):
                words.append(WORDS[w])
    rng.shuffle(words)
    return words


def _write_submissions(path: Path, rng: np.random.Generator, prefix: str,
                       source: str, n_docs: int, slice_duration: int) -> None:
    betas = _topic_distributions(rng)
    span = SPAN_DAYS * 86400
    stamps = np.sort(rng.integers(BASE_TS, BASE_TS + span, size=n_docs))
    lines = []
    for i, ts in enumerate(stamps):
        beta = betas[min(int((ts - BASE_TS) // slice_duration), len(betas) - 1)]
        words = _document_words(rng, beta)
        title = " ".join(words[:6]) or "untitled"
        body = " ".join(words[6:])
        if rng.random() < 0.2:
            title = f"the {title}"
        if body and rng.random() < 0.1:
            body = f"{body} https://example.com/p/{prefix}{i}"
        lines.append(json.dumps({
            "id": f"{prefix}{i:05d}",
            "created_utc": int(ts),
            "subreddit": source,
            "title": title,
            "selftext": body,
        }))
    rng.shuffle(lines)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_ticks(path: Path, rng: np.random.Generator) -> None:
    rows = []
    price = 1000.0
    for minute in range(SPAN_DAYS * 1440):
        step = rng.normal(0.0, 0.004)
        if rng.random() < 0.004:
            step += (0.02 + 0.03 * rng.random()) * (1 if rng.random() < 0.5 else -1)
        price *= float(np.exp(step))
        ts_ms = (BASE_TS + minute * 60) * 1000 + int(rng.integers(0, 60000))
        amount = abs(rng.normal(1.0, 0.5)) + 0.01
        rows.append(f"{ts_ms},{price:.2f},{amount:.4f}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_demo_inputs(directory: str | Path, seed: int = 7) -> dict[str, Path]:
    """Write the bundled fixture into ``directory`` and return the file paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    slice_duration = 1296000  # 15 days -> two slices over the 30-day span
    paths = {
        "config": directory / "config.toml",
        "alphachat": directory / "alphachat.jsonl",
        "betatalk": directory / "betatalk.jsonl",
        "ticks": directory / "coin_ticks.csv",
    }
    rng = np.random.default_rng(seed)
    _write_submissions(paths["alphachat"], rng, "a", "alphachat", 900, slice_duration)
    _write_submissions(paths["betatalk"], rng, "b", "betatalk", 900, slice_duration)
    _write_ticks(paths["ticks"], rng)
    paths["config"].write_text(_CONFIG_TEMPLATE.format(seed=seed), encoding="utf-8")
    return paths
