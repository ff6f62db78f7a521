"""Sequence labeling for security text: recurrent/convolutional encoders
with a linear-chain CRF output layer, trained from scratch on numpy."""

from .crf import LinearChainCrf
from .data import (
    SplitSpec,
    TaggedSentence,
    Vocabulary,
    build_vocab,
    convert_json_corpus,
    generate_synthetic_corpus,
    parse_conll,
    split_dataset,
    write_conll,
)
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    EvaluationError,
    ModelChecksumError,
    ModelFormatError,
    ModelIOError,
    ModelTruncatedError,
    ModelVersionError,
    ParseError,
    SeqTagError,
)
from .evaluate import (
    MetricsReport,
    TagCounts,
    accumulate_counts,
    comparison_csv,
    precision_recall_f1,
    render_comparison_table,
    weighted_average,
)
from .model import (
    ModelConfig,
    TaggerModel,
    TrainingReport,
    VARIANTS,
    build_model,
    load_model,
    save_model,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "DimensionError",
    "EvaluationError",
    "LinearChainCrf",
    "MetricsReport",
    "ModelChecksumError",
    "ModelConfig",
    "ModelFormatError",
    "ModelIOError",
    "ModelTruncatedError",
    "ModelVersionError",
    "ParseError",
    "SeqTagError",
    "SplitSpec",
    "TagCounts",
    "TaggedSentence",
    "TaggerModel",
    "TrainingReport",
    "VARIANTS",
    "Vocabulary",
    "accumulate_counts",
    "build_model",
    "build_vocab",
    "comparison_csv",
    "convert_json_corpus",
    "generate_synthetic_corpus",
    "load_model",
    "parse_conll",
    "precision_recall_f1",
    "render_comparison_table",
    "save_model",
    "split_dataset",
    "train",
    "weighted_average",
    "write_conll",
]
