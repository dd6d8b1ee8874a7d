"""poolrank: response-pool corpora, rankers, and evaluation for dialogue systems."""

from .core import (
    AnnotationRecord,
    ContinuationSignal,
    DialogueState,
    Grade,
    Label,
    LabelPolicy,
    LabeledExample,
    ResponseCandidate,
    ResponsePool,
    RGDescriptor,
    RGType,
    Speaker,
    Turn,
    build_pool,
    derive_labels,
    make_candidate,
    preferred_set,
)
from .corpus import (
    CorpusStats,
    NormalizationReport,
    SamplingPlan,
    corpus_stats,
    negative_cap,
    normalize,
    sample_corpus,
    split,
)
from .evaluation import (
    ABReport,
    ComparisonReport,
    ConversationRecord,
    EvalReport,
    ab_analyze,
    compare,
    recall_at_1,
)
from .heuristic import HeuristicConfig, HeuristicRanker, heuristic_rank
from .probes import (
    LMScorer,
    MetricMatrix,
    ProbeRanker,
    ProbeSet,
    load_probe_sets,
    metric_correlations,
    preferred_vs_dispreferred_test,
    probe_rank,
    probe_score,
)
from .ranking import FunctionRanker, RankedPool, Ranker

__version__ = "0.1.0"
