"""Tests for pipeline config parsing and validation."""

from pathlib import Path

import pytest

from excitenet.config import load_config
from excitenet.errors import ConfigError

MINIMAL = """\
[sources.chat]
submissions = "chat.jsonl"
market = "BTC"
selected_topics = [0, 1]

[markets.BTC]
ticks = "btc.csv"
"""


def write_config(tmp_path, text=MINIMAL):
    path = tmp_path / "config.toml"
    path.write_text(text, encoding="utf-8")
    return path


class TestDefaults:
    def test_documented_defaults(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.k == 30
        assert cfg.min_df == 20
        assert cfg.max_df_ratio == 0.5
        assert cfg.bucket_width == 900
        assert cfg.jump_percentile == 0.99
        assert cfg.dt_max == 96
        assert cfg.occurrence_threshold == 0.1
        assert cfg.sweeps == 500 and cfg.topics_burn_in == 250
        assert cfg.slice_duration == 604800
        assert cfg.iterations == 1500 and cfg.fit_burn_in == 500
        assert cfg.prior_background == (1.0, 1.0)
        assert cfg.prior_weight == (0.5, 10.0)
        assert cfg.top_words == 10

    def test_paths_resolved_relative_to_config(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.sources[0].submissions == tmp_path / "chat.jsonl"
        assert cfg.markets[0].ticks == tmp_path / "btc.csv"
        assert cfg.out_dir == tmp_path / "out"

    def test_prefix_defaults_to_source_name(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.sources[0].prefix == "chat"
        assert cfg.process_labels() == ["chat_0", "chat_1", "BTC_pos", "BTC_neg"]

    def test_fit_groups_by_market(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.fit_groups() == [("BTC", ["chat_0", "chat_1", "BTC_pos", "BTC_neg"])]

    def test_pooled_fit_single_group(self, tmp_path):
        text = MINIMAL + "\n[hawkes]\npooled = true\n"
        cfg = load_config(write_config(tmp_path, text))
        assert cfg.fit_groups() == [("all", cfg.process_labels())]


class TestOverrides:
    def test_cli_overrides_win(self, tmp_path):
        cfg = load_config(write_config(tmp_path), out_override=Path("/elsewhere"),
                          seed_override=99, lenient_override=True)
        assert cfg.out_dir == Path("/elsewhere")
        assert cfg.seed == 99
        assert cfg.lenient is True

    def test_per_source_lda_overrides(self, tmp_path):
        text = MINIMAL + "\n[sources.chat.lda]\nsweeps = 60\nburn_in = 30\n"
        cfg = load_config(write_config(tmp_path, text))
        lda = cfg.lda_config_for(cfg.sources[0], seed=5)
        assert lda.sweeps == 60 and lda.burn_in == 30 and lda.k == 30
        assert lda.seed == 5


class TestValidation:
    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.toml")

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown keys"):
            load_config(write_config(tmp_path, MINIMAL + "\n[topics]\nbogus = 1\n"))

    def test_unknown_root_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown keys"):
            load_config(write_config(tmp_path, "zap = 1\n" + MINIMAL))

    def test_selected_topic_out_of_range(self, tmp_path):
        text = MINIMAL.replace("[0, 1]", "[0, 30]")
        with pytest.raises(ConfigError, match="selects topics"):
            load_config(write_config(tmp_path, text))

    def test_unknown_market_reference(self, tmp_path):
        text = MINIMAL.replace('market = "BTC"', 'market = "ETH"')
        with pytest.raises(ConfigError, match="unknown market"):
            load_config(write_config(tmp_path, text))

    def test_per_source_k_override_rejected(self, tmp_path):
        text = MINIMAL + "\n[sources.chat.lda]\nk = 5\n"
        with pytest.raises(ConfigError, match="k is global"):
            load_config(write_config(tmp_path, text))

    def test_requires_two_processes(self, tmp_path):
        text = """\
[sources.chat]
submissions = "chat.jsonl"
market = "BTC"
selected_topics = []

[markets.BTC]
ticks = "btc.csv"
"""
        cfg = load_config(write_config(tmp_path, text))
        assert len(cfg.process_labels()) == 2  # market streams alone suffice
        with pytest.raises(ConfigError, match="two processes"):
            load_config(write_config(tmp_path, 'out_dir = "out"\n'))

    def test_duplicate_labels_rejected(self, tmp_path):
        text = """\
[sources.a]
submissions = "a.jsonl"
prefix = "x"
market = "BTC"
selected_topics = [1]

[sources.b]
submissions = "b.jsonl"
prefix = "x"
market = "BTC"
selected_topics = [1]

[markets.BTC]
ticks = "btc.csv"
"""
        with pytest.raises(ConfigError, match="collide"):
            load_config(write_config(tmp_path, text))

    def test_malformed_toml(self, tmp_path):
        with pytest.raises(ConfigError, match="malformed"):
            load_config(write_config(tmp_path, "not == toml\n"))

    def test_bad_percentile(self, tmp_path):
        with pytest.raises(ConfigError, match="percentile"):
            load_config(write_config(tmp_path,
                                     MINIMAL + "\n[events]\njump_percentile = 1.5\n"))
