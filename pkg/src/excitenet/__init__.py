"""excitenet: topic and price-jump event streams from social media text and
market ticks, with mutually-exciting Hawkes network inference."""

from .corpus import (BowDocument, ProcessedDocument, Vocabulary, build_vocabulary,
                     filter_pos, load_stopwords, remove_stopwords, tokenize, vectorize)
from .errors import (ConfigError, ExciteNetError, InputError, NumericError,
                     StabilityError, StageError)
from .events import (BucketGrid, BucketSeries, EventStream, ProcessSet, ReturnSeries,
                     bucketize_counts, bucketize_prices, detect_jumps, log_returns,
                     overlap_fraction)
from .hawkes import (GibbsConfig, HawkesNetwork, ImpulseBasis, ParentAssignment,
                     PosteriorSummary, fit, intensity, log_likelihood, sample_parents,
                     simulate, simulate_events, spectral_radius, update_parameters)
from .ingest import RawSubmission, TickRecord, read_submissions, read_ticks
from .topics import (DocTopicMix, DynamicTopicModel, LdaConfig, TopicModelSlice,
                     TopicOccurrenceSeries, fit_dynamic, fit_lda, infer_mixture,
                     occurrence_series, slice_seed, synthetic_corpus, top_words)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
