"""Text preprocessing: tokens, stopword and part-of-speech filters, vocabulary
pruning, and sparse term-count vectors.

The part-of-speech filter keeps nouns and adjectives. The bundled tagger is a
deterministic heuristic (closed-class word list plus suffix rules, defaulting
to noun); any object with a ``tag(token) -> str`` method can be substituted.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InputError

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*", re.UNICODE)

KEPT_TAGS = frozenset({"noun", "adjective"})
_ADJ_SUFFIXES = ("ous", "ful", "ile", "ive")


@dataclass(frozen=True)
class ProcessedDocument:
    """A timestamped, filtered token sequence for one submission."""

    id: str
    timestamp: int
    source: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class BowDocument:
    """Sparse term counts: (term_index, count) pairs with strictly increasing indices."""

    doc_id: str
    timestamp: int
    source: str
    counts: tuple[tuple[int, int], ...]

    @property
    def total(self) -> int:
        return sum(c for _, c in self.counts)


class Vocabulary:
    """Pruned term list with dense lexicographic indices and document frequencies."""

    def __init__(self, terms: Sequence[str], doc_frequency: Sequence[int],
                 corpus_size: int, min_df: int, max_df_ratio: float):
        self.terms = list(terms)
        self.doc_frequency = list(doc_frequency)
        self.corpus_size = corpus_size
        self.min_df = min_df
        self.max_df_ratio = max_df_ratio
        self.index = {t: i for i, t in enumerate(self.terms)}
        if len(self.terms) != len(self.doc_frequency):
            raise ValueError("terms and doc_frequency lengths differ")
        if self.terms != sorted(self.terms):
            raise ValueError("vocabulary terms must be sorted lexicographically")
        for term, df in zip(self.terms, self.doc_frequency):
            if not (min_df <= df <= max_df_ratio * corpus_size):
                raise ValueError(f"term '{term}' violates pruning bounds (df={df})")

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index


def _read_wordlist(path: Path) -> list[str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read word list {path}: {exc}") from exc
    entries = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.append(line)
    return entries


def _data_path(name: str) -> Path:
    return Path(str(resources.files("excitenet").joinpath("data", name)))


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Load a stopword list (one entry per line, '#' comments); default is bundled."""
    path = _data_path("stopwords.txt") if path is None else Path(path)
    return frozenset(_read_wordlist(path))


def tokenize(text: str) -> list[str]:
    """Lowercase, strip URLs, split on non-word characters, drop tokens shorter than 2.

    Apostrophes are kept only between word characters (so "it'll" is one
    token). URLs are any substrings starting ``http://``, ``https://`` or
    ``www.``, removed before splitting.
    """
    lowered = _URL_RE.sub(" ", text.lower())
    return [t for t in _TOKEN_RE.findall(lowered) if len(t) >= 2]


def remove_stopwords(tokens: Iterable[str], stoplist: frozenset[str] | set[str]) -> list[str]:
    """Order-preserving removal of exact stoplist matches."""
    return [t for t in tokens if t not in stoplist]


class HeuristicTagger:
    """Deterministic rule-based tagger.

    Rules, in order: closed-class word list -> "function"; "-ly" -> "adverb";
    "-ing"/"-ed" whose stem matches the known-verb list -> "verb"; the
    suffixes -ous/-ful/-ile/-ive -> "adjective"; anything else -> "noun".
    """

    def __init__(self, closed_class_path: str | Path | None = None,
                 verbs_path: str | Path | None = None):
        cc = _data_path("tagger_closed_class.txt") if closed_class_path is None \
            else Path(closed_class_path)
        vb = _data_path("tagger_verbs.txt") if verbs_path is None else Path(verbs_path)
        self.closed_class = frozenset(_read_wordlist(cc))
        self.verbs = frozenset(_read_wordlist(vb))

    def _is_verb_form(self, token: str, suffix: str) -> bool:
        stem = token[: -len(suffix)]
        if not stem:
            return False
        if stem in self.verbs or stem + "e" in self.verbs:
            return True
        # doubled final consonant: "stopped" -> "stop"
        return len(stem) >= 2 and stem[-1] == stem[-2] and stem[:-1] in self.verbs

    def tag(self, token: str) -> str:
        if token in self.closed_class:
            return "function"
        if token.endswith("ly") and len(token) > 3:
            return "adverb"
        for suffix in ("ing", "ed"):
            if token.endswith(suffix) and self._is_verb_form(token, suffix):
                return "verb"
        if token.endswith(_ADJ_SUFFIXES):
            return "adjective"
        return "noun"


_default_tagger: HeuristicTagger | None = None


def default_tagger() -> HeuristicTagger:
    global _default_tagger
    if _default_tagger is None:
        _default_tagger = HeuristicTagger()
    return _default_tagger


def filter_pos(tokens: Iterable[str], tagger=None) -> list[str]:
    """Keep tokens tagged noun or adjective, preserving order."""
    tagger = tagger or default_tagger()
    return [t for t in tokens if tagger.tag(t) in KEPT_TAGS]


def preprocess(submission, stoplist: frozenset[str] | None = None,
               tagger=None) -> ProcessedDocument:
    """Full text pipeline for one submission: tokenize, stopwords, POS filter."""
    stoplist = load_stopwords() if stoplist is None else stoplist
    tokens = filter_pos(remove_stopwords(tokenize(submission.text), stoplist), tagger)
    return ProcessedDocument(
        id=submission.id,
        timestamp=submission.created_utc,
        source=submission.source,
        tokens=tuple(tokens),
    )


def build_vocabulary(docs: Sequence[ProcessedDocument], min_df: int = 20,
                     max_df_ratio: float = 0.5) -> Vocabulary:
    """Prune terms by document frequency.

    A term is kept iff ``min_df <= doc_frequency <= max_df_ratio * len(docs)``
    (both bounds inclusive). Terms are indexed in lexicographic order.
    """
    if not docs:
        raise InputError("cannot build a vocabulary from an empty corpus")
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(set(doc.tokens))
    cap = max_df_ratio * len(docs)
    kept = sorted(t for t, n in df.items() if min_df <= n <= cap)
    return Vocabulary(
        terms=kept,
        doc_frequency=[df[t] for t in kept],
        corpus_size=len(docs),
        min_df=min_df,
        max_df_ratio=max_df_ratio,
    )


def vectorize(doc: ProcessedDocument, vocab: Vocabulary) -> BowDocument:
    """Count in-vocabulary tokens into a sparse vector; OOV tokens are dropped."""
    counts = Counter(vocab.index[t] for t in doc.tokens if t in vocab.index)
    return BowDocument(
        doc_id=doc.id,
        timestamp=doc.timestamp,
        source=doc.source,
        counts=tuple(sorted(counts.items())),
    )
