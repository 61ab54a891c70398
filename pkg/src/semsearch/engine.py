"""Uniform retrieval backends: build an index once, rank queries against it.

All backends report descending-better scores: similarity backends (lsa, pv)
return cosine as-is, distance backends (wcd, wmd) return the negated
distance.  Ties always break by ascending statement id.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, replace
from typing import Callable

import numpy as np

from .embeddings import (
    EmbeddingTable,
    load_ngram_table,
    load_text_vectors,
    load_word2vec_binary,
    make_resolver,
)
from .errors import ConfigError, EmptyDocumentError, EmptyQueryError, FormatError
from .lsa import LsaModel, build_lsa, lsa_rank
from .pipeline import Statement, normalize_text, tokenize
from .pv import PvConfig, PvModel, pv_rank, train_pv
from .serialize import read_container, write_container
from .transport import (
    METRICS,
    TransportIndex,
    exhaustive_topk,
    metric_cdist,
    prune_topk,
)
from .weighting import nbow, tfidf_matrix

__all__ = [
    "BACKEND_KINDS",
    "EMBEDDING_KINDS",
    "PV_KINDS",
    "BackendSpec",
    "RankedResult",
    "Index",
    "build_index",
    "rank",
    "save_index",
    "load_index",
]

BACKEND_KINDS = ("lsa", "wcd", "wmd", "wmd_pruned",
                 "pv_dm", "pv_dbow", "pv_dm_plus_dbow")
EMBEDDING_KINDS = ("wcd", "wmd", "wmd_pruned")
PV_KINDS = ("pv_dm", "pv_dbow", "pv_dm_plus_dbow")


@dataclass(frozen=True)
class BackendSpec:
    """What to build: backend kind plus the resources and knobs it needs.

    ``embeddings`` (a word2vec-binary or text vector file) is required for
    the embedding-based kinds and ignored elsewhere; ``metric`` likewise.
    ``pv`` overrides the paragraph-vector hyperparameters; its mode must
    agree with ``kind``.
    """

    kind: str
    embeddings: str | None = None
    embedding_format: str = "auto"
    ngrams: str | None = None
    metric: str = "cosine_distance"
    k_latent: int = 100
    prefetch: int = 40
    pv: PvConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"unknown ground metric {self.metric!r}")
        if self.embedding_format not in ("auto", "binary", "text", "text_header"):
            raise ConfigError(
                f"unknown embedding format {self.embedding_format!r}"
            )
        if self.kind in EMBEDDING_KINDS and not self.embeddings:
            raise ConfigError(f"backend {self.kind!r} needs an embeddings file")
        if self.k_latent < 1 or self.prefetch < 1:
            raise ConfigError("k_latent and prefetch must be at least 1")
        if self.pv is not None and self.pv.mode != self.kind:
            raise ConfigError(
                f"pv config mode {self.pv.mode!r} conflicts with kind {self.kind!r}"
            )

    def pv_config(self) -> PvConfig:
        if self.pv is not None:
            return self.pv
        return PvConfig(mode=self.kind, seed=self.seed)


@dataclass(frozen=True)
class RankedResult:
    """Top-k hits for one query: (statement id, score) with scores
    non-increasing, plus how many query tokens were dropped by the stoplist
    or fell outside the backend's vocabulary."""

    query_id: str
    hits: tuple[tuple[int, float], ...]
    dropped: int


@dataclass(frozen=True)
class Index:
    """Immutable per-backend search state over a fixed corpus."""

    spec: BackendSpec
    stops: frozenset[str]
    statements: tuple[Statement, ...]
    lsa: LsaModel | None = None
    pv: PvModel | None = None
    table: EmbeddingTable | None = None
    transport: TransportIndex | None = None
    resolver: Callable[[str], np.ndarray | None] | None = None

    def statement(self, sid: int) -> Statement:
        for stmt in self.statements:
            if stmt.id == sid:
                return stmt
        raise KeyError(f"no statement with id {sid}")


def _load_table(spec: BackendSpec) -> EmbeddingTable:
    fmt = spec.embedding_format
    if fmt == "auto":
        fmt = "binary" if str(spec.embeddings).endswith(".bin") else "text"
    if fmt == "binary":
        return load_word2vec_binary(spec.embeddings)
    return load_text_vectors(spec.embeddings, has_header=(fmt == "text_header"))


def _make_resolver(spec: BackendSpec, table: EmbeddingTable, strict: bool):
    # a stale n-gram path only disables OOV synthesis on a reloaded index;
    # at build time it is a hard error
    ngrams = None
    if spec.ngrams:
        if strict or os.path.exists(spec.ngrams):
            ngrams = load_ngram_table(spec.ngrams)
    return make_resolver(table, ngrams)


def build_index(statements, spec: BackendSpec, stops: frozenset[str]) -> Index:
    """Precompute everything ``rank`` needs for the chosen backend."""
    statements = tuple(statements)
    if not statements:
        raise EmptyDocumentError("corpus has no statements")
    base = dict(spec=spec, stops=frozenset(stops), statements=statements)
    if spec.kind == "lsa":
        matrix = tfidf_matrix(statements)
        return Index(**base, lsa=build_lsa(matrix, spec.k_latent, seed=spec.seed))
    if spec.kind in PV_KINDS:
        return Index(**base, pv=train_pv(statements, spec.pv_config()))
    table = _load_table(spec)
    resolver = _make_resolver(spec, table, strict=True)
    transport = TransportIndex(statements, resolver, spec.metric)
    return Index(**base, table=table, transport=transport, resolver=resolver)


def _query_tokens(index: Index, text: str):
    norm = normalize_text(text)
    total = len(tokenize(norm))
    kept = tokenize(norm, index.stops)
    return total, kept


def _wcd_pairs(index: Index, query, resolver, k: int):
    vecs = np.vstack([np.asarray(resolver(t), dtype=np.float64)
                      for t in query.tokens])
    centroid = query.weights @ vecs
    dists = metric_cdist(centroid[None, :], index.transport.centroids,
                         index.spec.metric)[0]
    scored = sorted(
        (float(dists[pos]), sid) for pos, sid in enumerate(index.transport.ids)
    )
    return scored[:k]


def rank(index: Index, text: str, k: int = 20, query_id: str = "") -> RankedResult:
    """Top-k statements for a query, routed through the index's backend.

    Raises EmptyQueryError when no query token survives the stoplist and
    the backend's vocabulary; an empty hit list is never returned silently.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    total, kept = _query_tokens(index, text)
    spec = index.spec
    if spec.kind == "lsa":
        pairs = lsa_rank(index.lsa, kept, k)
        vocab = set(index.lsa.terms)
        in_vocab = sum(1 for t in kept if t in vocab)
        hits = tuple((sid, score) for sid, score in pairs)
    elif spec.kind in PV_KINDS:
        pairs = pv_rank(index.pv, kept, k)
        vocab = set(index.pv.tokens)
        in_vocab = sum(1 for t in kept if t in vocab)
        hits = tuple((sid, score) for sid, score in pairs)
    else:
        resolver = index.resolver
        try:
            query = nbow(kept, resolver)
        except EmptyDocumentError:
            raise EmptyQueryError(
                "no query token has a vector; nothing to search with"
            ) from None
        in_vocab = sum(1 for t in kept if resolver(t) is not None)
        if spec.kind == "wcd":
            scored = _wcd_pairs(index, query, resolver, k)
        elif spec.kind == "wmd":
            scored = exhaustive_topk(query, index.transport, k, resolver)
        else:
            prefetch = max(spec.prefetch, k)
            scored = prune_topk(query, index.transport, k, prefetch, resolver)
        hits = tuple((sid, 0.0 - dist) for dist, sid in scored)
    return RankedResult(query_id=query_id, hits=hits, dropped=total - in_vocab)


INDEX_VERSION = 1


def _spec_meta(spec: BackendSpec) -> dict:
    meta = asdict(spec)
    if spec.pv is not None:
        meta["pv"] = asdict(spec.pv)
    return meta


def _spec_from_meta(meta: dict) -> BackendSpec:
    fields = dict(meta)
    if fields.get("pv") is not None:
        fields["pv"] = PvConfig(**fields["pv"])
    return BackendSpec(**fields)


def _pv_block(model: PvModel, prefix: str, arrays: dict) -> None:
    arrays[f"{prefix}counts"] = model.counts
    arrays[f"{prefix}word_vectors"] = model.word_vectors
    arrays[f"{prefix}output_vectors"] = model.output_vectors
    arrays[f"{prefix}doc_vectors"] = model.doc_vectors


def _pv_unblock(meta: dict, arrays: dict, prefix: str, config: PvConfig) -> PvModel:
    return PvModel(
        config=config,
        tokens=tuple(meta["tokens"]),
        counts=arrays[f"{prefix}counts"],
        doc_ids=tuple(int(i) for i in meta["doc_ids"]),
        word_vectors=arrays[f"{prefix}word_vectors"],
        output_vectors=arrays[f"{prefix}output_vectors"],
        doc_vectors=arrays[f"{prefix}doc_vectors"],
    )


def save_index(index: Index, path) -> None:
    """Persist an index as one self-contained flat file.

    Embedding backends store only the vectors for tokens the loaded table
    actually resolved among the corpus tokens, so the file stays small;
    query tokens outside that restriction are dropped at search time unless
    the n-gram table named in the backend spec is still readable.
    """
    meta = {
        "version": INDEX_VERSION,
        "spec": _spec_meta(index.spec),
        "stops": sorted(index.stops),
        "statements": [
            {"id": s.id, "raw": s.raw, "tokens": list(s.tokens)}
            for s in index.statements
        ],
    }
    arrays: dict[str, np.ndarray] = {}
    if index.lsa is not None:
        meta["lsa"] = {
            "terms": list(index.lsa.terms),
            "doc_ids": list(index.lsa.doc_ids),
            "k": index.lsa.k,
        }
        arrays.update(
            lsa_u=index.lsa.u, lsa_s=index.lsa.s, lsa_v=index.lsa.v,
            lsa_idf=index.lsa.idf,
        )
    elif index.pv is not None:
        model = index.pv
        meta["pv_model"] = {
            "tokens": list(model.tokens),
            "doc_ids": list(model.doc_ids),
            "combined": bool(model.parts),
        }
        if model.parts:
            _pv_block(model.parts[0], "pv_dm_", arrays)
            _pv_block(model.parts[1], "pv_dbow_", arrays)
        else:
            _pv_block(model, "pv_", arrays)
    else:
        corpus_vocab = sorted({t for s in index.statements for t in s.tokens})
        resolver = index.resolver
        resolved = [t for t in corpus_vocab if resolver(t) is not None]
        meta["emb_tokens"] = resolved
        arrays["emb_vectors"] = np.vstack(
            [resolver(t) for t in resolved]
        ).astype(np.float32) if resolved else np.zeros((0, index.table.dim),
                                                       dtype=np.float32)
    write_container(path, "INDEX", meta, arrays)


def load_index(path) -> Index:
    """Rebuild a persisted index; derived state is recomputed, not stored."""
    meta, arrays = read_container(path, "INDEX")
    if meta.get("version") != INDEX_VERSION:
        raise FormatError(f"unsupported index version {meta.get('version')!r}")
    spec = _spec_from_meta(meta["spec"])
    stops = frozenset(meta["stops"])
    statements = tuple(
        Statement(int(s["id"]), s["raw"], tuple(s["tokens"]))
        for s in meta["statements"]
    )
    base = dict(spec=spec, stops=stops, statements=statements)
    if spec.kind == "lsa":
        sub = meta["lsa"]
        model = LsaModel(
            terms=tuple(sub["terms"]),
            doc_ids=tuple(int(i) for i in sub["doc_ids"]),
            k=int(sub["k"]),
            u=arrays["lsa_u"], s=arrays["lsa_s"], v=arrays["lsa_v"],
            idf=arrays["lsa_idf"],
        )
        return Index(**base, lsa=model)
    if spec.kind in PV_KINDS:
        sub = meta["pv_model"]
        config = spec.pv_config()
        if sub["combined"]:
            dm = _pv_unblock(sub, arrays, "pv_dm_", replace(config, mode="pv_dm"))
            dbow = _pv_unblock(
                sub, arrays, "pv_dbow_",
                replace(config, mode="pv_dbow", seed=config.seed + 1),
            )
            model = PvModel(
                config=config, tokens=dm.tokens, counts=dm.counts.copy(),
                doc_ids=dm.doc_ids,
                word_vectors=np.empty((0, config.dim)),
                output_vectors=np.empty((0, config.dim)),
                doc_vectors=np.hstack([dm.doc_vectors, dbow.doc_vectors]),
                parts=(dm, dbow),
            )
        else:
            model = _pv_unblock(sub, arrays, "pv_", config)
        return Index(**base, pv=model)
    vectors = arrays["emb_vectors"]
    table = EmbeddingTable(
        dim=int(vectors.shape[1]),
        vocab={t: i for i, t in enumerate(meta["emb_tokens"])},
        vectors=vectors,
    )
    resolver = _make_resolver(spec, table, strict=False)
    transport = TransportIndex(statements, resolver, spec.metric)
    return Index(**base, table=table, transport=transport, resolver=resolver)
