"""screenloop: active-learning screening for systematic reviews.

The library half (corpus, textfeat, classify, strategy, engine, simulate)
is pure and deterministic; the cli and service modules wrap it for batch
benchmarking and live, local-only screening.
"""

from .corpus import Dataset, Record, parse_auto, parse_csv, parse_ris, search_records
from .engine import LabelEvent, ScreeningEngine, Settings, StopSpec
from .classify import ClassifierSpec, Model, fit, predict_relevance
from .strategy import BalanceSpec, QuerySpec, balance, rank_pool, select_next
from .textfeat import FeatureMatrix, FeatureSpec, Vocabulary, build_features, tokenize
from .simulate import (
    SimulationResult,
    SimulationSpec,
    emit_plot_data,
    recall_curve,
    rrf,
    run_simulation,
    wss,
)

__version__ = "0.1.0"

__all__ = [
    "BalanceSpec",
    "ClassifierSpec",
    "Dataset",
    "FeatureMatrix",
    "FeatureSpec",
    "LabelEvent",
    "Model",
    "QuerySpec",
    "Record",
    "ScreeningEngine",
    "Settings",
    "SimulationResult",
    "SimulationSpec",
    "StopSpec",
    "Vocabulary",
    "balance",
    "build_features",
    "emit_plot_data",
    "fit",
    "parse_auto",
    "parse_csv",
    "parse_ris",
    "predict_relevance",
    "rank_pool",
    "recall_curve",
    "rrf",
    "run_simulation",
    "search_records",
    "select_next",
    "tokenize",
    "wss",
]
