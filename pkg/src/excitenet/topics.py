"""Topic models over bag-of-words corpora: collapsed Gibbs LDA, a slice-chained
dynamic variant, per-document mixture inference, and topic-occurrence series.

The dynamic model partitions documents into fixed-duration time slices and
fits each slice with the topic-word prior recentered on the previous slice's
fitted topics (pseudo-count carry-over with strength ``kappa``), so topic
identities align across slices by construction. Point estimates use counts
averaged over the post-burn-in sweeps.

All fits are deterministic given the configured seed. Slice ``t`` of a
dynamic fit uses ``slice_seed(config.seed, t)``, so a chained fit with
``kappa = 0`` reproduces independent per-slice LDA fits seed-for-seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .corpus import BowDocument, Vocabulary
from .errors import ConfigError, InputError
from .events import BucketGrid

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class LdaConfig:
    """Sampler settings. ``alpha`` defaults to 50/K; ``xi`` is the mean document
    length used only by the synthetic-corpus generator."""

    k: int = 30
    alpha: float | None = None
    eta: float = 0.01
    sweeps: int = 500
    burn_in: int = 250
    seed: int = 0
    xi: float = 80.0

    def __post_init__(self):
        if self.alpha is None:
            object.__setattr__(self, "alpha", 50.0 / self.k)
        if self.k < 2:
            raise ConfigError("topic count k must be >= 2")
        if self.alpha <= 0 or self.eta <= 0:
            raise ConfigError("alpha and eta must be positive")
        if not self.sweeps > self.burn_in >= 0:
            raise ConfigError("need sweeps > burn_in >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.xi <= 0:
            raise ConfigError("xi must be positive")


@dataclass
class TopicModelSlice:
    """Topic-word distributions for one time slice; ``beta[k]`` is topic k."""

    slice_index: int
    beta: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.ndim != 2:
            raise ValueError("beta must be a K x V matrix")
        if np.any(self.beta < 0) or np.any(np.abs(self.beta.sum(axis=1) - 1.0) > SIMPLEX_TOL):
            raise ValueError("every beta row must be a probability distribution")

    @property
    def k(self) -> int:
        return self.beta.shape[0]


@dataclass
class DynamicTopicModel:
    slices: list[TopicModelSlice]
    slice_duration: int
    kappa: float
    vocab_size: int
    config: LdaConfig
    start: int

    def __post_init__(self):
        if [s.slice_index for s in self.slices] != list(range(len(self.slices))):
            raise ValueError("slice indices must be contiguous from 0")


@dataclass
class DocTopicMix:
    """Per-document topic mixture."""

    doc_id: str
    timestamp: int
    source: str
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if np.any(self.theta < 0) or abs(self.theta.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError("theta must be a probability distribution")


@dataclass
class TopicOccurrenceSeries:
    """Per-bucket counts of documents whose mixture exceeds the occurrence threshold."""

    topic_index: int
    bucket_start: int
    bucket_width: int
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=int)
        if np.any(self.counts < 0):
            raise ValueError("occurrence counts must be nonnegative")


def derived_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed from a parent seed and integer keys."""
    ss = np.random.SeedSequence([int(seed)] + [int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def slice_seed(seed: int, slice_index: int) -> int:
    """Seed used for slice ``slice_index`` of a dynamic fit."""
    return derived_seed(seed, slice_index)


@njit(cache=True)
def _lda_sweep(z, doc_of, term_of, n_kv, n_k, m_dk, eta_kv, eta_row, alpha,
               uniforms, probs):
    n_topics = n_kv.shape[0]
    for i in range(z.shape[0]):
        k_old = z[i]
        d = doc_of[i]
        v = term_of[i]
        n_kv[k_old, v] -= 1
        n_k[k_old] -= 1
        m_dk[d, k_old] -= 1
        total = 0.0
        for k in range(n_topics):
            p = (n_kv[k, v] + eta_kv[k, v]) / (n_k[k] + eta_row[k]) * (m_dk[d, k] + alpha)
            probs[k] = p
            total += p
        u = uniforms[i] * total
        acc = 0.0
        k_new = n_topics - 1
        for k in range(n_topics):
            acc += probs[k]
            if u < acc:
                k_new = k
                break
        z[i] = k_new
        n_kv[k_new, v] += 1
        n_k[k_new] += 1
        m_dk[d, k_new] += 1


@njit(cache=True)
def _mixture_sweep(z, term_of, beta, m_k, alpha, uniforms, probs):
    n_topics = beta.shape[0]
    for i in range(z.shape[0]):
        k_old = z[i]
        v = term_of[i]
        m_k[k_old] -= 1
        total = 0.0
        for k in range(n_topics):
            p = beta[k, v] * (m_k[k] + alpha)
            probs[k] = p
            total += p
        if total <= 0.0:
            k_new = k_old
        else:
            u = uniforms[i] * total
            acc = 0.0
            k_new = n_topics - 1
            for k in range(n_topics):
                acc += probs[k]
                if u < acc:
                    k_new = k
                    break
        z[i] = k_new
        m_k[k_new] += 1


def _expand_tokens(docs: Sequence[BowDocument], vocab_size: int):
    """Flatten sparse documents into parallel (doc index, term index) arrays."""
    doc_parts, term_parts = [], []
    for d, doc in enumerate(docs):
        if not doc.counts:
            raise InputError(f"document '{doc.doc_id}' has no in-vocabulary tokens")
        terms = np.array([v for v, _ in doc.counts], dtype=np.int64)
        reps = np.array([c for _, c in doc.counts], dtype=np.int64)
        if np.any(terms >= vocab_size) or np.any(terms < 0):
            raise InputError(f"document '{doc.doc_id}' has term indices outside the vocabulary")
        term_parts.append(np.repeat(terms, reps))
        doc_parts.append(np.full(int(reps.sum()), d, dtype=np.int64))
    return np.concatenate(doc_parts), np.concatenate(term_parts)


def _fit_slice(docs: Sequence[BowDocument], config: LdaConfig, vocab_size: int,
               eta_kv: np.ndarray, seed: int, init_beta: np.ndarray | None = None,
               sweep_hook: Callable | None = None):
    """One collapsed-Gibbs fit with a (possibly per-entry) topic-word prior.

    ``init_beta`` warm-starts the chain: initial token assignments are drawn
    per token from ``init_beta[:, term]`` instead of uniformly. Returns
    (beta, theta) from counts averaged over post-burn-in sweeps.
    """
    doc_of, term_of = _expand_tokens(docs, vocab_size)
    n_tokens = len(doc_of)
    k = config.k
    if k > n_tokens:
        raise ConfigError(f"topic count {k} exceeds total token count {n_tokens}")

    rng = np.random.default_rng(seed)
    if init_beta is None:
        z = rng.integers(0, k, size=n_tokens, dtype=np.int64)
    else:
        cum = np.cumsum(init_beta[:, term_of].T, axis=1)
        u = rng.random(n_tokens) * cum[:, -1]
        z = np.minimum((cum <= u[:, None]).sum(axis=1), k - 1).astype(np.int64)
    n_kv = np.zeros((k, vocab_size), dtype=np.int64)
    np.add.at(n_kv, (z, term_of), 1)
    n_k = n_kv.sum(axis=1)
    m_dk = np.zeros((len(docs), k), dtype=np.int64)
    np.add.at(m_dk, (doc_of, z), 1)
    eta_row = eta_kv.sum(axis=1)
    probs = np.empty(k)

    acc_nkv = np.zeros((k, vocab_size))
    acc_mdk = np.zeros((len(docs), k))
    for s in range(config.sweeps):
        uniforms = rng.random(n_tokens)
        _lda_sweep(z, doc_of, term_of, n_kv, n_k, m_dk, eta_kv, eta_row,
                   config.alpha, uniforms, probs)
        if sweep_hook is not None:
            sweep_hook(s, n_kv, m_dk)
        if s >= config.burn_in:
            acc_nkv += n_kv
            acc_mdk += m_dk

    n_retained = config.sweeps - config.burn_in
    avg_nkv = acc_nkv / n_retained
    beta = (avg_nkv + eta_kv) / (avg_nkv.sum(axis=1) + eta_row)[:, None]
    doc_len = m_dk.sum(axis=1)
    theta = (acc_mdk / n_retained + config.alpha) / (doc_len + k * config.alpha)[:, None]
    return beta, theta


def fit_lda(docs: Sequence[BowDocument], config: LdaConfig,
            vocab_size: int | None = None, _sweep_hook: Callable | None = None):
    """Fit plain LDA by collapsed Gibbs sampling.

    Returns a :class:`TopicModelSlice` (index 0) and one :class:`DocTopicMix`
    per document, in input order. Deterministic given ``config.seed``.
    """
    docs = list(docs)
    if not docs:
        raise InputError("cannot fit a topic model on an empty corpus")
    if vocab_size is None:
        vocab_size = 1 + max(v for doc in docs for v, _ in doc.counts)
    eta_kv = np.full((config.k, vocab_size), config.eta)
    beta, theta = _fit_slice(docs, config, vocab_size, eta_kv, config.seed,
                             sweep_hook=_sweep_hook)
    mixes = [
        DocTopicMix(doc.doc_id, doc.timestamp, doc.source, theta[d])
        for d, doc in enumerate(docs)
    ]
    return TopicModelSlice(slice_index=0, beta=beta), mixes


def fit_dynamic(docs: Sequence[BowDocument], slice_duration: int, config: LdaConfig,
                kappa: float, vocab_size: int | None = None):
    """Fit the slice-chained dynamic topic model.

    Documents are partitioned into ``slice_duration``-second slices by
    timestamp. Slice 0 is plain LDA; slice t >= 1 replaces the topic-word
    prior per (topic, term) with ``eta + kappa * beta_prev * V * eta``,
    centering the prior mass on the previous slice's topics, and warm-starts
    the sampler from those topics so the labels stay aligned slice to slice.
    With ``kappa = 0`` chaining is disabled entirely and every slice equals an
    independent :func:`fit_lda` of its documents under the slice seed
    schedule. A slice with no documents carries the prior mean forward.

    Returns the model and mixtures for all documents in input order.
    """
    docs = list(docs)
    if not docs:
        raise InputError("cannot fit a topic model on an empty corpus")
    if slice_duration <= 0:
        raise ConfigError("slice_duration must be positive")
    if kappa < 0:
        raise ConfigError("kappa must be nonnegative")
    if vocab_size is None:
        vocab_size = 1 + max(v for doc in docs for v, _ in doc.counts)

    start = min(doc.timestamp for doc in docs)
    n_slices = (max(doc.timestamp for doc in docs) - start) // slice_duration + 1
    by_slice: list[list[int]] = [[] for _ in range(n_slices)]
    for position, doc in enumerate(docs):
        by_slice[(doc.timestamp - start) // slice_duration].append(position)

    slices: list[TopicModelSlice] = []
    thetas: dict[int, np.ndarray] = {}
    beta_prev: np.ndarray | None = None
    base_eta = np.full((config.k, vocab_size), config.eta)
    for t in range(n_slices):
        chained = beta_prev is not None and kappa > 0
        eta_kv = config.eta + kappa * beta_prev * vocab_size * config.eta \
            if beta_prev is not None else base_eta
        members = by_slice[t]
        if members:
            beta, theta = _fit_slice([docs[p] for p in members], config, vocab_size,
                                     eta_kv, slice_seed(config.seed, t),
                                     init_beta=beta_prev if chained else None)
            for row, position in enumerate(members):
                thetas[position] = theta[row]
        else:
            beta = eta_kv / eta_kv.sum(axis=1)[:, None]
        slices.append(TopicModelSlice(slice_index=t, beta=beta))
        beta_prev = beta

    mixes = [
        DocTopicMix(doc.doc_id, doc.timestamp, doc.source, thetas[position])
        for position, doc in enumerate(docs)
    ]
    model = DynamicTopicModel(slices=slices, slice_duration=slice_duration, kappa=kappa,
                              vocab_size=vocab_size, config=config, start=start)
    return model, mixes


def infer_mixture(doc: BowDocument, slice_: TopicModelSlice, alpha: float,
                  sweeps: int, seed: int, burn_in: int | None = None) -> DocTopicMix:
    """Infer a document's topic mixture with the topic-word distributions fixed.

    ``burn_in`` defaults to half the sweeps; the mixture is the average of
    post-burn-in topic counts smoothed by ``alpha``.
    """
    if not doc.counts:
        raise InputError(f"document '{doc.doc_id}' is empty")
    if burn_in is None:
        burn_in = sweeps // 2
    if not sweeps > burn_in >= 0:
        raise ConfigError("need sweeps > burn_in >= 0")
    k = slice_.k
    term_of = np.repeat(
        np.array([v for v, _ in doc.counts], dtype=np.int64),
        np.array([c for _, c in doc.counts], dtype=np.int64),
    )
    if np.any(term_of >= slice_.beta.shape[1]):
        raise InputError(f"document '{doc.doc_id}' has term indices outside the model vocabulary")
    rng = np.random.default_rng(seed)
    z = rng.integers(0, k, size=len(term_of), dtype=np.int64)
    m_k = np.bincount(z, minlength=k).astype(np.int64)
    probs = np.empty(k)
    acc = np.zeros(k)
    for s in range(sweeps):
        uniforms = rng.random(len(term_of))
        _mixture_sweep(z, term_of, slice_.beta, m_k, alpha, uniforms, probs)
        if s >= burn_in:
            acc += m_k
    theta = (acc / (sweeps - burn_in) + alpha) / (len(term_of) + k * alpha)
    return DocTopicMix(doc.doc_id, doc.timestamp, doc.source, theta)


def top_words(slice_: TopicModelSlice, topic: int, n: int, vocab: Vocabulary) -> list[str]:
    """The ``n`` most probable terms of a topic, ties broken lexicographically."""
    if not 0 <= topic < slice_.k:
        raise ValueError(f"topic {topic} out of range for K={slice_.k}")
    if slice_.beta.shape[1] != len(vocab):
        raise ValueError("vocabulary size does not match the model")
    row = slice_.beta[topic]
    order = sorted(range(len(vocab)), key=lambda v: (-row[v], vocab.terms[v]))
    return [vocab.terms[v] for v in order[: min(n, len(vocab))]]


def occurrence_series(mixes: Sequence[DocTopicMix], grid: BucketGrid,
                      threshold: float = 0.1) -> list[TopicOccurrenceSeries]:
    """Count, per bucket and topic, documents with mixture strictly above threshold.

    Thresholding is per-topic, so one document can contribute occurrences to
    several topics in the same bucket.
    """
    mixes = list(mixes)
    if not mixes:
        raise InputError("no document mixtures given")
    k = len(mixes[0].theta)
    counts = np.zeros((k, grid.n_buckets), dtype=int)
    for mix in mixes:
        if len(mix.theta) != k:
            raise InputError("all mixtures must have the same topic count")
        b = grid.bucket_of(mix.timestamp)
        counts[:, b] += mix.theta > threshold
    return [
        TopicOccurrenceSeries(topic_index=topic, bucket_start=grid.start,
                              bucket_width=grid.bucket_width, counts=counts[topic])
        for topic in range(k)
    ]


def synthetic_corpus(beta: np.ndarray, n_docs: int, alpha: float, xi: float, seed: int,
                     source: str = "synthetic", start: int = 0, spacing: int = 900,
                     doc_prefix: str = "doc"):
    """Generate documents from known topics: per document a length drawn from
    Poisson(xi) (redrawn if zero), a mixture from Dir(alpha), topic counts from
    the mixture, and words from the per-topic distributions.

    Returns (documents, mixture matrix); timestamps are evenly spaced from
    ``start``. This is the oracle generator used to test recovery.
    """
    beta = np.asarray(beta, dtype=float)
    k, v = beta.shape
    if np.any(beta < 0) or np.any(np.abs(beta.sum(axis=1) - 1.0) > 1e-8):
        raise ValueError("beta rows must be probability distributions")
    rng = np.random.default_rng(seed)
    docs: list[BowDocument] = []
    thetas = np.empty((n_docs, k))
    for i in range(n_docs):
        theta = rng.dirichlet(np.full(k, alpha))
        n = 0
        while n == 0:
            n = rng.poisson(xi)
        topic_counts = rng.multinomial(n, theta)
        word_counts = np.zeros(v, dtype=np.int64)
        for topic in np.flatnonzero(topic_counts):
            word_counts += rng.multinomial(topic_counts[topic], beta[topic])
        pairs = tuple((int(w), int(word_counts[w])) for w in np.flatnonzero(word_counts))
        docs.append(BowDocument(doc_id=f"{doc_prefix}_{i:05d}",
                                timestamp=start + i * spacing,
                                source=source, counts=pairs))
        thetas[i] = theta
    return docs, thetas


def perplexity(docs: Sequence[BowDocument], slice_: TopicModelSlice, alpha: float,
               sweeps: int = 100, seed: int = 0) -> float:
    """Document-completion perplexity: infer each document's mixture from half
    its tokens and score the held-back half. Lower is better."""
    logp = 0.0
    n_eval = 0
    for i, doc in enumerate(docs):
        term_of = np.repeat([v for v, _ in doc.counts], [c for _, c in doc.counts])
        if len(term_of) < 2:
            continue
        fold, held = term_of[::2], term_of[1::2]
        fold_counts = np.bincount(fold, minlength=slice_.beta.shape[1])
        fold_doc = replace(doc, counts=tuple(
            (int(w), int(fold_counts[w])) for w in np.flatnonzero(fold_counts)))
        mix = infer_mixture(fold_doc, slice_, alpha, sweeps, derived_seed(seed, i))
        word_probs = mix.theta @ slice_.beta[:, held]
        if np.any(word_probs <= 0):
            return float("inf")
        logp += float(np.log(word_probs).sum())
        n_eval += len(held)
    if n_eval == 0:
        raise InputError("no evaluable documents for perplexity")
    return float(np.exp(-logp / n_eval))


def write_topic_report(path: str | Path, model: DynamicTopicModel, vocab: Vocabulary,
                       n: int = 10) -> None:
    """One block per (slice, topic): a `slice <t> topic <k>:` header followed by
    the top terms with their probabilities."""
    lines: list[str] = []
    for slice_ in model.slices:
        for topic in range(slice_.k):
            lines.append(f"slice {slice_.slice_index} topic {topic}:")
            for term in top_words(slice_, topic, n, vocab):
                lines.append(f"  {term} {slice_.beta[topic, vocab.index[term]]:.6f}")
            lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def write_theta_csv(path: str | Path, mixes: Sequence[DocTopicMix]) -> None:
    """Per-document mixtures as `doc_id,timestamp,source,theta_0..theta_{K-1}`."""
    mixes = list(mixes)
    if not mixes:
        raise InputError("no mixtures to write")
    k = len(mixes[0].theta)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["doc_id", "timestamp", "source"] + [f"theta_{i}" for i in range(k)])
        for mix in mixes:
            if len(mix.theta) != k:
                raise InputError("all mixtures must have the same topic count")
            writer.writerow([mix.doc_id, mix.timestamp, mix.source]
                            + [repr(float(x)) for x in mix.theta])


def read_theta_csv(path: str | Path) -> list[DocTopicMix]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:3] != ["doc_id", "timestamp", "source"]:
                raise InputError(f"unexpected theta CSV header: {header}")
            k = len(header) - 3
            if [h for h in header[3:]] != [f"theta_{i}" for i in range(k)]:
                raise InputError("theta CSV columns must be theta_0..theta_{K-1}")
            mixes = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3 + k:
                    raise InputError(f"line {lineno}: expected {3 + k} columns")
                theta = np.array([float(x) for x in row[3:]])
                mixes.append(DocTopicMix(row[0], int(row[1]), row[2], theta))
            return mixes
    except OSError as exc:
        raise InputError(f"cannot read theta CSV {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"malformed theta CSV {path}: {exc}") from exc
