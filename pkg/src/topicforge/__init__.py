"""topicforge: staged-curriculum training schedules and MAP evaluation for
cross-topic claim ranking."""

from .corpus import (
    Claim,
    Corpus,
    FieldMapping,
    Label,
    NormalizationConfig,
    SyntheticSpec,
    SyntheticTopic,
    generate_synthetic,
    load_corpus,
    merge_topics,
    normalize_text,
    save_corpus,
)
from .errors import ConfigError, TopicForgeError
from .evaluation import (
    RankedEntry,
    RankedList,
    RunReport,
    TopicResult,
    average_precision,
    emit_report,
    mean_average_precision,
    rank,
)
from .runner import (
    ExperimentConfig,
    SweepResult,
    compare,
    render_comparison,
    run_all,
    run_topic,
    write_outputs,
)
from .schedule import (
    AllocationSizes,
    Scheme,
    StageAlloc,
    StagePlan,
    allocation_sizes,
    build_plan,
    decremental_source_sizes,
    divisor,
    equivalent_source_sizes,
    incremental_sizes,
    split_target,
)
from .similarity import (
    TopicOrdering,
    TopicVector,
    cosine,
    count_vector,
    order_sources,
)
from .trainer import (
    BuiltinTrainer,
    ExternalTrainer,
    TrainerConfig,
    TrainExample,
    create_trainer,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationSizes",
    "BuiltinTrainer",
    "Claim",
    "ConfigError",
    "Corpus",
    "ExperimentConfig",
    "ExternalTrainer",
    "FieldMapping",
    "Label",
    "NormalizationConfig",
    "RankedEntry",
    "RankedList",
    "RunReport",
    "Scheme",
    "StageAlloc",
    "StagePlan",
    "SweepResult",
    "SyntheticSpec",
    "SyntheticTopic",
    "TopicForgeError",
    "TopicOrdering",
    "TopicResult",
    "TopicVector",
    "TrainExample",
    "TrainerConfig",
    "allocation_sizes",
    "average_precision",
    "build_plan",
    "compare",
    "cosine",
    "count_vector",
    "create_trainer",
    "decremental_source_sizes",
    "divisor",
    "emit_report",
    "equivalent_source_sizes",
    "generate_synthetic",
    "incremental_sizes",
    "load_corpus",
    "mean_average_precision",
    "merge_topics",
    "normalize_text",
    "order_sources",
    "rank",
    "render_comparison",
    "run_all",
    "run_topic",
    "save_corpus",
    "split_target",
    "write_outputs",
]
