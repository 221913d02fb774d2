"""duorec: dual-embedding complementary item recommendation.

Trains skip-gram-with-negative-sampling embeddings over co-purchase data
and keeps both weight matrices: scoring a query item's input vector
against every item's output vector retrieves complementary items, while
input-against-input retrieves substitutes. Includes the full pipeline —
session ingestion with PMI/taxonomy filtering, pair- and sequence-mode
training, exact and approximate retrieval, similarity-driven data
augmentation with inference-time fallback for cold items, offline
evaluation, hyperparameter search, and a synthetic-world generator with
known ground truth.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    Catalog,
    CatalogEntry,
    FilterConfig,
    PairDataset,
    PairRecord,
    Session,
    SessionSet,
    build_pairs,
    build_taxonomy_pairs,
    compute_pmi,
    filter_outliers,
    filter_pairs,
    parse_sessions,
)
from .errors import (  # noqa: F401
    ConfigError,
    CorpusError,
    DuorecError,
    EvaluationError,
    InputError,
    OutOfCoverageError,
    TrainingStreamError,
    TuningError,
    UndefinedPmiError,
    UndefinedSimilarityError,
)
from .sgns import (  # noqa: F401
    DevSet,
    DualEmbedding,
    TrainConfig,
    build_noise_table,
    init_model,
    keep_probability,
    load_model,
    save_model,
    sgns_loss,
    train_pairs,
    train_sequences,
)
from .retrieval import (  # noqa: F401
    AnnIndexConfig,
    RecommendationList,
    RetrievalVariant,
    build_ann_index,
    build_exact_index,
    cosine,
    query,
)
from .augment import (  # noqa: F401
    AugmentConfig,
    EmbeddingSimilarity,
    augment_dataset,
    query_with_ia,
    replace_both,
    replace_single,
)
from .evaluation import (  # noqa: F401
    EvalReport,
    GroundTruth,
    baseline,
    build_ground_truth,
    coverage_report,
    evaluate,
    precision_recall_at_k,
    split_coverage,
    taxonomy_eval,
)
from .tune import SearchSpace, make_dev_split, random_search  # noqa: F401
from .synth import WorldConfig, WorldTruth, generate_sessions, generate_world  # noqa: F401
