"""Paragraph vectors: PV-DM, PV-DBOW, and their concatenation.

Training is plain SGD with negative sampling, single-threaded and fully
deterministic for a fixed seed: documents are visited in corpus order,
window positions left to right, and all negative draws come from one seeded
generator.  The per-example loss/gradient helpers are module-level so tests
can difference them numerically against the exact code path training uses.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyDocumentError, EmptyQueryError, FormatError
from .serialize import read_container, write_container

__all__ = [
    "PvConfig",
    "PvModel",
    "train_pv",
    "infer_vector",
    "query_vector",
    "pv_rank",
    "dm_loss_and_grads",
    "dbow_loss_and_grads",
    "sampled_objective",
    "save_pv",
    "load_pv",
]

MODES = ("pv_dm", "pv_dbow", "pv_dm_plus_dbow")


@dataclass(frozen=True)
class PvConfig:
    mode: str = "pv_dm"
    dim: int = 100
    window: int = 5
    negative: int = 5
    epochs: int = 40
    alpha: float = 0.025
    alpha_min: float = 0.0001
    min_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, not {self.mode!r}")
        if self.dim <= 0 or self.window <= 0:
            raise ValueError("dim and window must be positive")
        if self.negative < 1 or self.epochs < 1 or self.min_count < 1:
            raise ValueError("negative, epochs, and min_count must be at least 1")
        if not (self.alpha > self.alpha_min > 0):
            raise ValueError("need alpha > alpha_min > 0")


@dataclass(frozen=True)
class PvModel:
    """Trained vectors plus the vocabulary and noise-distribution counts.

    For ``pv_dm_plus_dbow``, ``doc_vectors`` holds the concatenated
    representations and ``parts`` the two independently trained halves
    (needed to infer query vectors); the top-level word blocks are empty.
    """

    config: PvConfig
    tokens: tuple[str, ...]
    counts: np.ndarray
    doc_ids: tuple[int, ...]
    word_vectors: np.ndarray
    output_vectors: np.ndarray
    doc_vectors: np.ndarray
    parts: tuple["PvModel", ...] = ()

    def __post_init__(self):
        for arr in (self.counts, self.word_vectors, self.output_vectors,
                    self.doc_vectors):
            arr.flags.writeable = False

    def vocab_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens)}

    def representation_dim(self) -> int:
        return self.doc_vectors.shape[1]


def _sigmoid(x: float) -> float:
    return float(np.exp(-np.logaddexp(0.0, -x)))


def _score_terms(center, negatives):
    """(index, sign) pairs for one example; negatives hitting the center are
    skipped rather than redrawn so the draw count stays fixed."""
    terms = [(center, 1.0)]
    for neg in negatives:
        if neg != center:
            terms.append((int(neg), -1.0))
    return terms


def dbow_loss_and_grads(pv, out, center, negatives):
    """Negative-sampling loss of predicting ``center`` from ``pv`` alone.

    Returns (loss, grad_pv, {out_row: grad}).
    """
    loss = 0.0
    grad_h = np.zeros_like(pv)
    grad_out: dict[int, np.ndarray] = {}
    for idx, sign in _score_terms(center, negatives):
        z = float(pv @ out[idx])
        x = sign * z
        loss += float(np.logaddexp(0.0, -x))
        g = sign * (_sigmoid(x) - 1.0)
        grad_h += g * out[idx]
        if idx in grad_out:
            grad_out[idx] = grad_out[idx] + g * pv
        else:
            grad_out[idx] = g * pv
    return loss, grad_h, grad_out


def dm_loss_and_grads(pv, word_in, out, center, context, negatives):
    """Negative-sampling loss of predicting ``center`` from the mean of the
    paragraph vector and the context word vectors.

    Returns (loss, grad_pv, {word_row: grad}, {out_row: grad}).  The mean
    combiner spreads the hidden gradient as 1/n to each input.
    """
    n_inputs = 1 + len(context)
    h = pv.copy()
    for c in context:
        h += word_in[c]
    h /= n_inputs
    loss, grad_h, grad_out = dbow_loss_and_grads(h, out, center, negatives)
    share = grad_h / n_inputs
    grad_words: dict[int, np.ndarray] = {}
    for c in context:
        if c in grad_words:
            grad_words[c] = grad_words[c] + share
        else:
            grad_words[c] = share.copy()
    return loss, share.copy(), grad_words, grad_out


def _build_vocab(corpus, min_count):
    counted = Counter()
    for stmt in corpus:
        counted.update(stmt.tokens)
    tokens = tuple(sorted(t for t, c in counted.items() if c >= min_count))
    if not tokens:
        raise EmptyDocumentError("no token meets the minimum count")
    counts = np.array([counted[t] for t in tokens], dtype=np.int64)
    return tokens, counts


def _noise_cdf(counts):
    p = counts.astype(np.float64) ** 0.75
    return np.cumsum(p / p.sum())


def _draw_negatives(rng, cdf, count):
    idx = np.searchsorted(cdf, rng.random(count), side="right")
    return np.minimum(idx, len(cdf) - 1)


def _sequences(corpus, index):
    """Per-statement in-vocabulary index sequences; empty ones dropped."""
    doc_ids = []
    seqs = []
    for stmt in corpus:
        seq = [index[t] for t in stmt.tokens if t in index]
        if seq:
            doc_ids.append(stmt.id)
            seqs.append(seq)
    if not doc_ids:
        raise EmptyDocumentError("every statement is empty after vocabulary filtering")
    return tuple(doc_ids), seqs


def _epoch_alpha(config, epoch):
    span = max(1, config.epochs - 1)
    frac = min(epoch, span) / span
    return config.alpha - (config.alpha - config.alpha_min) * frac


def _train_single(corpus, config, epoch_callback=None):
    tokens, counts = _build_vocab(corpus, config.min_count)
    index = {t: i for i, t in enumerate(tokens)}
    doc_ids, seqs = _sequences(corpus, index)
    cdf = _noise_cdf(counts)
    rng = np.random.default_rng(config.seed)

    vocab_n = len(tokens)
    scale = 0.5 / config.dim
    if config.mode == "pv_dm":
        word_in = rng.uniform(-scale, scale, size=(vocab_n, config.dim))
    else:
        word_in = np.zeros((vocab_n, config.dim))
    out = np.zeros((vocab_n, config.dim))
    docs = rng.uniform(-scale, scale, size=(len(seqs), config.dim))

    def snapshot():
        return PvModel(
            config=config,
            tokens=tokens,
            counts=counts.copy(),
            doc_ids=doc_ids,
            word_vectors=word_in.copy(),
            output_vectors=out.copy(),
            doc_vectors=docs.copy(),
        )

    for epoch in range(config.epochs):
        lr = _epoch_alpha(config, epoch)
        for d, seq in enumerate(seqs):
            pv = docs[d]
            for pos, center in enumerate(seq):
                negatives = _draw_negatives(rng, cdf, config.negative)
                if config.mode == "pv_dm":
                    lo = max(0, pos - config.window)
                    hi = min(len(seq), pos + config.window + 1)
                    context = [seq[i] for i in range(lo, hi) if i != pos]
                    _, g_pv, g_words, g_out = dm_loss_and_grads(
                        pv, word_in, out, center, context, negatives
                    )
                    # inputs take the full hidden gradient per occurrence, not
                    # the 1/n mean share; without this the paragraph vector
                    # trains n times slower than the output weights
                    boost = 1.0 + len(context)
                    for row, grad in g_words.items():
                        word_in[row] -= lr * boost * grad
                else:
                    boost = 1.0
                    _, g_pv, g_out = dbow_loss_and_grads(pv, out, center, negatives)
                for row, grad in g_out.items():
                    out[row] -= lr * grad
                pv -= lr * boost * g_pv
        if epoch_callback is not None:
            epoch_callback(epoch, snapshot())
    return snapshot()


def train_pv(corpus, config: PvConfig, epoch_callback=None) -> PvModel:
    """Train paragraph vectors over tokenized statements.

    ``epoch_callback(epoch, model_snapshot)`` runs after every epoch; for
    the combined mode it fires per half, with the DM half first.
    """
    if config.mode != "pv_dm_plus_dbow":
        return _train_single(corpus, config, epoch_callback)
    dm = _train_single(corpus, replace(config, mode="pv_dm"), epoch_callback)
    dbow = _train_single(
        corpus, replace(config, mode="pv_dbow", seed=config.seed + 1), epoch_callback
    )
    return PvModel(
        config=config,
        tokens=dm.tokens,
        counts=dm.counts.copy(),
        doc_ids=dm.doc_ids,
        word_vectors=np.empty((0, config.dim)),
        output_vectors=np.empty((0, config.dim)),
        doc_vectors=np.hstack([dm.doc_vectors, dbow.doc_vectors]),
        parts=(dm, dbow),
    )


def sampled_objective(model: PvModel, corpus, seed: int = 0) -> float:
    """Mean per-example loss with negatives fixed by ``seed``.

    Recomputed from scratch each call, so before/after comparisons see the
    identical sampled objective.  Combined models average the two halves.
    """
    if model.parts:
        return float(
            np.mean([sampled_objective(p, corpus, seed) for p in model.parts])
        )
    config = model.config
    index = model.vocab_index()
    doc_ids, seqs = _sequences(corpus, index)
    if doc_ids != model.doc_ids:
        raise ValueError("corpus does not match the model's retained statements")
    cdf = _noise_cdf(model.counts)
    rng = np.random.default_rng(seed)
    total = 0.0
    examples = 0
    for d, seq in enumerate(seqs):
        pv = model.doc_vectors[d]
        for pos, center in enumerate(seq):
            negatives = _draw_negatives(rng, cdf, config.negative)
            if config.mode == "pv_dm":
                lo = max(0, pos - config.window)
                hi = min(len(seq), pos + config.window + 1)
                context = [seq[i] for i in range(lo, hi) if i != pos]
                loss, _, _, _ = dm_loss_and_grads(
                    pv, model.word_vectors, model.output_vectors, center, context,
                    negatives,
                )
            else:
                loss, _, _ = dbow_loss_and_grads(
                    pv, model.output_vectors, center, negatives
                )
            total += loss
            examples += 1
    return total / examples


_INFER_SEED_OFFSET = 9973


def infer_vector(model: PvModel, tokens, steps: int | None = None) -> np.ndarray:
    """Paragraph vector for unseen text: fresh seeded init, then ``steps``
    gradient updates with the trained word/output weights frozen.

    ``steps`` defaults to the training epoch count; 0 returns the raw
    initialization.
    """
    if model.parts:
        return np.concatenate(
            [infer_vector(p, tokens, steps) for p in model.parts]
        )
    config = model.config
    if steps is None:
        steps = config.epochs
    index = model.vocab_index()
    seq = [index[t] for t in tokens if t in index]
    if not seq:
        raise EmptyQueryError("no query token is in the model vocabulary")
    rng = np.random.default_rng(config.seed + _INFER_SEED_OFFSET)
    scale = 0.5 / config.dim
    pv = rng.uniform(-scale, scale, size=config.dim)
    cdf = _noise_cdf(model.counts)
    for step in range(steps):
        span = max(1, steps - 1)
        lr = config.alpha - (config.alpha - config.alpha_min) * (
            min(step, span) / span
        )
        for pos, center in enumerate(seq):
            negatives = _draw_negatives(rng, cdf, config.negative)
            if config.mode == "pv_dm":
                lo = max(0, pos - config.window)
                hi = min(len(seq), pos + config.window + 1)
                context = [seq[i] for i in range(lo, hi) if i != pos]
                _, g_pv, _, _ = dm_loss_and_grads(
                    pv, model.word_vectors, model.output_vectors, center, context,
                    negatives,
                )
                boost = 1.0 + len(context)
            else:
                boost = 1.0
                _, g_pv, _ = dbow_loss_and_grads(
                    pv, model.output_vectors, center, negatives
                )
            pv -= lr * boost * g_pv
    return pv


def query_vector(model: PvModel, tokens, mode: str = "infer",
                 steps: int | None = None) -> np.ndarray:
    """Query representation: trained inference (default) or the plain mean
    of the model's word vectors (PV-DBOW trains no input vectors, so its
    centroid falls back to the output vectors)."""
    if mode == "infer":
        return infer_vector(model, tokens, steps)
    if mode != "centroid":
        raise ValueError(f"query mode must be 'infer' or 'centroid', not {mode!r}")
    if model.parts:
        return np.concatenate([query_vector(p, tokens, "centroid") for p in model.parts])
    index = model.vocab_index()
    seq = [index[t] for t in tokens if t in index]
    if not seq:
        raise EmptyQueryError("no query token is in the model vocabulary")
    table = model.word_vectors if model.config.mode == "pv_dm" else model.output_vectors
    return np.mean([table[i] for i in seq], axis=0)


def pv_rank(model: PvModel, tokens, k: int, query_mode: str = "infer",
            steps: int | None = None) -> list[tuple[int, float]]:
    """Rank statements by cosine against the query vector, best first; ties
    break by ascending statement id."""
    q = query_vector(model, tokens, query_mode, steps)
    q_norm = np.linalg.norm(q)
    if q_norm == 0.0:
        raise EmptyQueryError("query vector is zero; nothing to rank")
    docs = model.doc_vectors
    norms = np.linalg.norm(docs, axis=1)
    usable = norms > 0.0
    scores = np.zeros(len(docs))
    scores[usable] = (docs[usable] @ q) / (norms[usable] * q_norm)
    ranked = sorted(
        (
            (int(model.doc_ids[i]), float(scores[i]))
            for i in range(len(docs))
            if usable[i]
        ),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return ranked[:k]


def _config_meta(config: PvConfig) -> dict:
    return {
        "mode": config.mode,
        "dim": config.dim,
        "window": config.window,
        "negative": config.negative,
        "epochs": config.epochs,
        "alpha": config.alpha,
        "alpha_min": config.alpha_min,
        "min_count": config.min_count,
        "seed": config.seed,
    }


def _model_arrays(model: PvModel, prefix: str) -> dict:
    return {
        f"{prefix}counts": model.counts,
        f"{prefix}word_vectors": model.word_vectors,
        f"{prefix}output_vectors": model.output_vectors,
        f"{prefix}doc_vectors": model.doc_vectors,
    }


def save_pv(model: PvModel, path) -> None:
    meta = {
        "config": _config_meta(model.config),
        "tokens": list(model.tokens),
        "doc_ids": list(model.doc_ids),
        "combined": bool(model.parts),
    }
    arrays = {}
    if model.parts:
        arrays.update(_model_arrays(model.parts[0], "dm_"))
        arrays.update(_model_arrays(model.parts[1], "dbow_"))
    else:
        arrays.update(_model_arrays(model, ""))
    write_container(path, "PV", meta, arrays)


def _model_from(meta, arrays, prefix, config) -> PvModel:
    return PvModel(
        config=config,
        tokens=tuple(meta["tokens"]),
        counts=arrays[f"{prefix}counts"],
        doc_ids=tuple(int(i) for i in meta["doc_ids"]),
        word_vectors=arrays[f"{prefix}word_vectors"],
        output_vectors=arrays[f"{prefix}output_vectors"],
        doc_vectors=arrays[f"{prefix}doc_vectors"],
    )


def load_pv(path) -> PvModel:
    meta, arrays = read_container(path, "PV")
    try:
        config = PvConfig(**meta["config"])
        if not meta["combined"]:
            return _model_from(meta, arrays, "", config)
        dm = _model_from(meta, arrays, "dm_", replace(config, mode="pv_dm"))
        dbow = _model_from(
            meta, arrays, "dbow_",
            replace(config, mode="pv_dbow", seed=config.seed + 1),
        )
        return PvModel(
            config=config,
            tokens=dm.tokens,
            counts=dm.counts.copy(),
            doc_ids=dm.doc_ids,
            word_vectors=np.empty((0, config.dim)),
            output_vectors=np.empty((0, config.dim)),
            doc_vectors=np.hstack([dm.doc_vectors, dbow.doc_vectors]),
            parts=(dm, dbow),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from None
