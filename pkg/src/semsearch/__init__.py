"""Statement-level semantic search over interchangeable similarity backends."""

__version__ = "0.1.0"

from .engine import BACKEND_KINDS, BackendSpec, Index, RankedResult, build_index, load_index, rank, save_index
from .errors import (
    ConfigError,
    ConvergenceError,
    EmptyDocumentError,
    EmptyQueryError,
    FormatError,
    SemsearchError,
    SolverError,
    TrialFileError,
    UnresolvedTokenError,
)
from .evaluation import BackendReport, QueryOutcome, Trial, evaluate, format_report_table, hits_at, load_trials
from .pipeline import Statement, build_corpus, default_stoplist, load_stoplist, segment_paragraphs, tokenize
from .pv import PvConfig, PvModel, infer_vector, train_pv

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "EmptyDocumentError",
    "EmptyQueryError",
    "FormatError",
    "SemsearchError",
    "SolverError",
    "TrialFileError",
    "UnresolvedTokenError",
    "Statement",
    "build_corpus",
    "default_stoplist",
    "load_stoplist",
    "segment_paragraphs",
    "tokenize",
    "BACKEND_KINDS",
    "BackendSpec",
    "Index",
    "RankedResult",
    "build_index",
    "rank",
    "save_index",
    "load_index",
    "BackendReport",
    "QueryOutcome",
    "Trial",
    "evaluate",
    "format_report_table",
    "hits_at",
    "load_trials",
    "PvConfig",
    "PvModel",
    "train_pv",
    "infer_vector",
]
