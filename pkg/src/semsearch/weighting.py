"""Bag-of-words mass vectors and the TF-IDF term-document matrix."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDocumentError

__all__ = ["NbowVector", "nbow", "TermDocumentMatrix", "tfidf_matrix"]


@dataclass(frozen=True)
class NbowVector:
    """Normalized bag-of-words: unique tokens with mass weights summing to 1.

    Tokens are sorted so that downstream cost matrices and transport plans
    align positionally with the weights.
    """

    tokens: tuple[str, ...]
    weights: np.ndarray  # float64, strictly positive, sums to 1

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.tokens)

    def same_as(self, other: "NbowVector") -> bool:
        return self.tokens == other.tokens and np.array_equal(self.weights, other.weights)


def nbow(tokens, lookup=None) -> NbowVector:
    """Build the normalized bag-of-words distribution of a token list.

    ``lookup``, when given, maps a token to its vector or None; tokens
    without a vector are dropped before normalization.  Raises
    :class:`EmptyDocumentError` when nothing survives -- the caller decides
    whether that means skipping a statement or rejecting a query.
    """
    if lookup is not None:
        tokens = [t for t in tokens if lookup(t) is not None]
    if not tokens:
        raise EmptyDocumentError("no tokens left after filtering")
    counts = Counter(tokens)
    ordered = sorted(counts)
    total = len(tokens)
    weights = np.array([counts[t] / total for t in ordered], dtype=np.float64)
    return NbowVector(tuple(ordered), weights)


@dataclass(frozen=True)
class TermDocumentMatrix:
    """Sparse TF-IDF matrix: term rows x statement columns.

    ``doc_ids`` maps columns back to statement ids; statements that were
    empty after the pipeline are excluded (their ids listed in
    ``skipped_ids``).  Rows that would be all-zero (terms present in every
    retained document) are dropped.  ``idf`` is kept for query folding.
    """

    terms: tuple[str, ...]
    doc_ids: tuple[int, ...]
    weights: sp.csr_matrix
    idf: np.ndarray
    skipped_ids: tuple[int, ...]


def tfidf_matrix(corpus) -> TermDocumentMatrix:
    """TF-IDF weights with raw term counts and idf(t) = ln(N / df(t)).

    N counts retained (non-empty) statements.  No smoothing; terms occurring
    in every retained document get idf 0 and their rows are dropped.
    """
    retained = [s for s in corpus if s.tokens]
    skipped = tuple(s.id for s in corpus if not s.tokens)
    if not retained:
        raise EmptyDocumentError("corpus has no non-empty statements")

    n_docs = len(retained)
    df = Counter()
    doc_counts = []
    for stmt in retained:
        counts = Counter(stmt.tokens)
        doc_counts.append(counts)
        df.update(counts.keys())

    terms = tuple(sorted(t for t in df if df[t] < n_docs))
    term_index = {t: r for r, t in enumerate(terms)}
    idf = np.array([math.log(n_docs / df[t]) for t in terms], dtype=np.float64)

    rows, cols, vals = [], [], []
    for col, counts in enumerate(doc_counts):
        for token, count in counts.items():
            row = term_index.get(token)
            if row is not None:
                rows.append(row)
                cols.append(col)
                vals.append(count * idf[row])
    weights = sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(terms), n_docs), dtype=np.float64
    )
    return TermDocumentMatrix(
        terms=terms,
        doc_ids=tuple(s.id for s in retained),
        weights=weights,
        idf=idf,
        skipped_ids=skipped,
    )
