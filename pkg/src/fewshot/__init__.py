"""Few-shot classification over precomputed text embeddings.

Two siamese-style classifiers (aggregated cosine similarity over frozen
embeddings, and a trained bidirectional-GRU pair scorer), a linear-probe
baseline, an episodic N-way-K-shot evaluation harness, and a
small-sample t-test for comparing metric triples.
"""

__version__ = "0.1.0"

from .embeddings import (  # noqa: F401
    Dataset,
    EmbeddingRecord,
    average_subwords,
    load_dataset,
    pool_words,
    record_sequence,
    record_vector,
    save_dataset,
    synth_fixture,
)
from .errors import (  # noqa: F401
    ConfigError,
    DataError,
    FewshotError,
    NumericError,
    ZeroVarianceError,
)
from .evaluation import (  # noqa: F401
    Episode,
    EvalConfig,
    MetricsReport,
    TTestResult,
    compute_metrics,
    evaluate,
    paired_ttest,
    sample_episode,
)
from .numkit import (  # noqa: F401
    AdamWHyper,
    AdamWState,
    GruParams,
    PairHeadParams,
    adamw_init,
    adamw_step,
    bce_loss,
    bigru_forward,
    cosine_similarity,
    gradient_check,
    sigmoid,
    soe_pair_backward,
    soe_pair_forward,
)
from .probe import ProbeHyper, ProbeModel, probe_classify, train_probe  # noqa: F401
from .snn import (  # noqa: F401
    PairExample,
    SoeHyper,
    SoeModel,
    build_pairs,
    load_model,
    pair_count,
    ptsnn_classify,
    save_model,
    soesnn_classify,
    train_soe,
)
