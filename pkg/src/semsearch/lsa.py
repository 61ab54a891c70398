"""Latent semantic analysis baseline: truncated SVD, folding-in, cosine rank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, svds

from .errors import ConvergenceError, EmptyQueryError, FormatError
from .serialize import read_container, write_container
from .weighting import TermDocumentMatrix

__all__ = ["LsaModel", "truncated_svd", "build_lsa", "fold_in_query", "lsa_rank",
           "save_lsa", "load_lsa"]

SVD_TOL = 1e-8
SVD_MAXITER = 1000


@dataclass(frozen=True)
class LsaModel:
    """Truncated SVD of a TF-IDF matrix plus what folding a query needs."""

    terms: tuple[str, ...]
    doc_ids: tuple[int, ...]
    k: int
    u: np.ndarray  # terms x k, orthonormal columns
    s: np.ndarray  # k, descending positive
    v: np.ndarray  # docs x k
    idf: np.ndarray  # aligned with terms

    def doc_vectors(self) -> np.ndarray:
        """Latent document representations: rows of V_k scaled by S_k."""
        return self.v * self.s[None, :]


def _flip_signs(u, v):
    # Fix the per-component sign so rebuilds are bit-reproducible: the
    # largest-magnitude entry of each left singular vector is made positive.
    for i in range(u.shape[1]):
        pivot = np.argmax(np.abs(u[:, i]))
        if u[pivot, i] < 0:
            u[:, i] = -u[:, i]
            v[:, i] = -v[:, i]
    return u, v


def truncated_svd(matrix, k: int, seed: int = 0):
    """Rank-k SVD: returns (U_k, S_k, V_k) with V_k as docs x k.

    Iterative (ARPACK) for k < min(shape) with tolerance 1e-8 and at most
    1000 iterations; the full-rank case falls back to a dense decomposition,
    which ARPACK cannot compute.
    """
    rows, cols = matrix.shape
    if not (1 <= k <= min(rows, cols)):
        raise ValueError(f"k={k} outside 1..min{(rows, cols)}")
    if k == min(rows, cols):
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, float)
        u_full, s_full, vt_full = np.linalg.svd(dense, full_matrices=False)
        u, s, vt = u_full[:, :k], s_full[:k], vt_full[:k]
    else:
        try:
            u, s, vt = svds(
                matrix.astype(np.float64),
                k=k,
                tol=SVD_TOL,
                maxiter=SVD_MAXITER,
                random_state=seed,
            )
        except ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"SVD failed to converge within {SVD_MAXITER} iterations "
                f"({len(exc.eigenvalues)} of {k} components converged)"
            ) from exc
        order = np.argsort(s)[::-1]
        u, s, vt = u[:, order], s[order], vt[order]
    v = vt.T.copy()
    u = u.copy()
    u, v = _flip_signs(u, v)
    return u, s.copy(), v


def build_lsa(matrix: TermDocumentMatrix, k: int, seed: int = 0) -> LsaModel:
    """Decompose a term-document matrix; k is clamped to the matrix rank bound."""
    rows, cols = matrix.weights.shape
    if rows == 0:
        raise EmptyQueryError("term-document matrix has no terms")
    k_eff = min(k, rows, cols)
    u, s, v = truncated_svd(matrix.weights, k_eff, seed=seed)
    return LsaModel(
        terms=matrix.terms,
        doc_ids=matrix.doc_ids,
        k=k_eff,
        u=u,
        s=s,
        v=v,
        idf=np.asarray(matrix.idf, dtype=np.float64),
    )


def fold_in_query(model: LsaModel, tokens) -> np.ndarray:
    """Project a tokenized query into the latent space: S_k^-1 U_k^T q."""
    q = np.zeros(len(model.terms))
    index = {t: i for i, t in enumerate(model.terms)}
    hit = False
    for token in tokens:
        pos = index.get(token)
        if pos is not None:
            q[pos] += model.idf[pos]
            hit = True
    if not hit:
        raise EmptyQueryError("query shares no terms with the model")
    return (model.u.T @ q) / model.s


def lsa_rank(model: LsaModel, tokens, k_results: int) -> list[tuple[int, float]]:
    """Rank documents by cosine against the folded query, best first.

    Ties break by ascending statement id; documents whose latent vector is
    zero (no surviving terms) are never returned.
    """
    q_hat = fold_in_query(model, tokens)
    q_norm = np.linalg.norm(q_hat)
    docs = model.doc_vectors()
    norms = np.linalg.norm(docs, axis=1)
    usable = norms > 0.0
    scores = np.zeros(len(docs))
    scores[usable] = (docs[usable] @ q_hat) / (norms[usable] * q_norm)
    ranked = sorted(
        (
            (int(model.doc_ids[i]), float(scores[i]))
            for i in range(len(docs))
            if usable[i]
        ),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return ranked[:k_results]


def save_lsa(model: LsaModel, path) -> None:
    write_container(
        path,
        "LSA",
        {"terms": list(model.terms), "doc_ids": list(model.doc_ids), "k": model.k},
        {"u": model.u, "s": model.s, "v": model.v, "idf": model.idf},
    )


def load_lsa(path) -> LsaModel:
    meta, arrays = read_container(path, "LSA")
    try:
        return LsaModel(
            terms=tuple(meta["terms"]),
            doc_ids=tuple(int(i) for i in meta["doc_ids"]),
            k=int(meta["k"]),
            u=arrays["u"],
            s=arrays["s"],
            v=arrays["v"],
            idf=arrays["idf"],
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from None
