"""Tests for tokenization, filtering, vocabulary pruning, and vectorization."""

from collections import Counter

import numpy as np
import pytest

from excitenet.corpus import (HeuristicTagger, ProcessedDocument, Vocabulary,
                              build_vocabulary, default_tagger, filter_pos,
                              load_stopwords, preprocess, remove_stopwords,
                              tokenize, vectorize)
from excitenet.errors import InputError
from excitenet.ingest import RawSubmission


def doc(tokens, doc_id="d0", timestamp=100, source="src"):
    return ProcessedDocument(id=doc_id, timestamp=timestamp, source=source,
                             tokens=tuple(tokens))


class TestTokenize:
    def test_basic(self):
        assert tokenize("Bitcoin hits ATH!") == ["bitcoin", "hits", "ath"]

    def test_strips_urls(self):
        assert tokenize("see https://example.com now") == ["see", "now"]
        assert tokenize("go www.example.com/x?q=1 there") == ["go", "there"]
        assert tokenize("HTTP://CAPS.example and on") == ["and", "on"]

    def test_internal_apostrophe_kept(self):
        assert tokenize("it'll moon, it'll") == ["it'll", "moon", "it'll"]
        assert tokenize("'tis the 'quoted' word") == ["tis", "the", "quoted", "word"]

    def test_short_tokens_dropped(self):
        assert tokenize("a I x btc") == ["btc"]

    def test_digits_kept(self):
        assert tokenize("price 10k to 20000 usd") == ["price", "10k", "to", "20000", "usd"]

    def test_empty(self):
        assert tokenize("") == []
        assert tokenize("  !!! .. ") == []

    @pytest.mark.parametrize("text", [
        "Bitcoin hits ATH!", "it'll moon, it'll", "mixed CASE and 99 numbers",
        "see https://example.com now", "under_score splits here",
    ])
    def test_idempotent_on_own_output(self, text):
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once


class TestStopwords:
    def test_default_list_removal(self):
        stop = load_stopwords()
        assert remove_stopwords(["the", "moon"], stop) == ["moon"]

    def test_empty_sequence(self):
        assert remove_stopwords([], load_stopwords()) == []

    def test_counts_match_independent_scan(self):
        rng = np.random.default_rng(4)
        keep = [f"word{i}" for i in range(20)]
        stop_hits = ["the", "and", "of", "to"]
        tokens = [str(rng.choice(keep)) for _ in range(600)] + \
                 [str(rng.choice(stop_hits)) for _ in range(400)]
        rng.shuffle(tokens)
        stop = load_stopwords()
        expected_kept = sum(1 for t in tokens if t not in stop)
        assert expected_kept == 600
        assert len(remove_stopwords(tokens, stop)) == 600

    def test_custom_list_file(self, tmp_path):
        path = tmp_path / "stop.txt"
        path.write_text("# comment\nfoo\nbar\n\n", encoding="utf-8")
        stop = load_stopwords(path)
        assert stop == {"foo", "bar"}


class TestPosFilter:
    def test_keeps_nouns_and_adjectives(self):
        assert filter_pos(["quickly", "price", "volatile"]) == ["price", "volatile"]

    def test_empty(self):
        assert filter_pos([]) == []

    def test_all_nouns_identity(self):
        tokens = ["miner", "wallet", "exchange"]
        assert filter_pos(tokens) == tokens

    def test_verb_forms_dropped(self):
        tagger = default_tagger()
        assert tagger.tag("going") == "verb"      # go
        assert tagger.tag("used") == "verb"       # use + d
        assert tagger.tag("stopped") == "verb"    # doubled consonant
        assert filter_pos(["going", "market", "used"]) == ["market"]

    def test_unlisted_gerund_defaults_to_noun(self):
        assert default_tagger().tag("mining") == "noun"
        assert default_tagger().tag("trading") == "noun"

    def test_closed_class_dropped(self):
        assert filter_pos(["between", "value", "must"]) == ["value"]

    @pytest.mark.parametrize("token,tag", [
        ("famous", "adjective"), ("useful", "adjective"), ("volatile", "adjective"),
        ("active", "adjective"), ("quickly", "adverb"), ("satoshi", "noun"),
    ])
    def test_suffix_rules(self, token, tag):
        assert default_tagger().tag(token) == tag

    def test_custom_rule_files(self, tmp_path):
        closed = tmp_path / "closed.txt"
        closed.write_text("zork\n", encoding="utf-8")
        verbs = tmp_path / "verbs.txt"
        verbs.write_text("blorp\n", encoding="utf-8")
        tagger = HeuristicTagger(closed_class_path=closed, verbs_path=verbs)
        assert tagger.tag("zork") == "function"
        assert tagger.tag("blorping") == "verb"
        assert tagger.tag("the") == "noun"  # not in this closed-class file


class TestBuildVocabulary:
    def _corpus_with_df(self, frequencies):
        """100 docs; term f'term_{df}' appears in exactly df of them."""
        docs = []
        for i in range(100):
            tokens = [t for df, t in frequencies.items() if i < df]
            docs.append(doc(tokens or ["filler"], doc_id=f"d{i}"))
        return docs

    def test_pruning_boundaries(self):
        freqs = {19: "term_19", 20: "term_20", 50: "term_50", 51: "term_51"}
        docs = self._corpus_with_df({df: t for df, t in freqs.items()})
        vocab = build_vocabulary(docs, min_df=20, max_df_ratio=0.5)
        assert "term_19" not in vocab
        assert "term_51" not in vocab
        assert "term_20" in vocab
        assert "term_50" in vocab

    def test_terms_sorted_with_dense_indices(self):
        docs = [doc(["zeta", "alpha", "mid"]), doc(["alpha", "mid"]), doc(["zeta"])]
        vocab = build_vocabulary(docs, min_df=1, max_df_ratio=1.0)
        assert vocab.terms == ["alpha", "mid", "zeta"]
        assert [vocab.index[t] for t in vocab.terms] == [0, 1, 2]

    def test_doc_frequency_counts_documents_not_tokens(self):
        docs = [doc(["coin", "coin", "coin"]), doc(["coin"])]
        vocab = build_vocabulary(docs, min_df=1, max_df_ratio=1.0)
        assert vocab.doc_frequency[vocab.index["coin"]] == 2

    def test_order_independence(self):
        rng = np.random.default_rng(8)
        words = [f"w{i}" for i in range(30)]
        docs = [doc(list(rng.choice(words, size=10)), doc_id=f"d{i}") for i in range(60)]
        vocab_a = build_vocabulary(docs, min_df=2, max_df_ratio=0.9)
        shuffled = list(docs)
        rng.shuffle(shuffled)
        vocab_b = build_vocabulary(shuffled, min_df=2, max_df_ratio=0.9)
        assert vocab_a.terms == vocab_b.terms
        assert vocab_a.doc_frequency == vocab_b.doc_frequency

    def test_empty_corpus_raises(self):
        with pytest.raises(InputError):
            build_vocabulary([], min_df=1)

    def test_constructor_enforces_bounds(self):
        with pytest.raises(ValueError, match="pruning bounds"):
            Vocabulary(terms=["rare"], doc_frequency=[1], corpus_size=100,
                       min_df=20, max_df_ratio=0.5)


class TestVectorize:
    def _vocab(self, terms):
        return Vocabulary(terms=sorted(terms), doc_frequency=[1] * len(terms),
                          corpus_size=1, min_df=1, max_df_ratio=1.0)

    def test_counts_multiplicities(self):
        vocab = self._vocab(["dip", "moon"])
        bow = vectorize(doc(["moon", "moon", "dip"]), vocab)
        assert bow.counts == ((0, 1), (1, 2))

    def test_oov_dropped(self):
        vocab = self._vocab(["dip"])
        bow = vectorize(doc(["moon", "rocket"]), vocab)
        assert bow.counts == ()

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_counter(self, seed):
        rng = np.random.default_rng(seed)
        words = [f"w{i}" for i in range(15)]
        vocab = self._vocab(words[:10])
        tokens = [str(rng.choice(words)) for _ in range(120)]
        bow = vectorize(doc(tokens), vocab)
        oracle = Counter(vocab.index[t] for t in tokens if t in vocab.index)
        assert dict(bow.counts) == dict(oracle)
        assert list(dict(bow.counts)) == sorted(dict(bow.counts))

    def test_total_counts_at_most_token_count(self):
        rng = np.random.default_rng(11)
        words = [f"w{i}" for i in range(12)]
        vocab = self._vocab(words[:6])
        for _ in range(10):
            tokens = [str(rng.choice(words)) for _ in range(40)]
            bow = vectorize(doc(tokens), vocab)
            assert bow.total <= len(tokens)


class TestPreprocess:
    def test_full_pipeline(self):
        sub = RawSubmission(id="x", created_utc=42, source="Bitcoin",
                            text="The price QUICKLY moved to https://moon.example moon!")
        processed = preprocess(sub)
        assert processed.id == "x"
        assert processed.timestamp == 42
        assert processed.source == "Bitcoin"
        assert processed.tokens == ("price", "moon")
        assert all(t == t.lower() and len(t) >= 2 and " " not in t
                   for t in processed.tokens)
