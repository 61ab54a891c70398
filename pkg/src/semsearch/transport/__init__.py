"""Transport-based document distances: exact solve, lower bounds, pruning.

The exact solve runs on a compiled network-simplex kernel when the
extension built, and on the pure-Python twin otherwise; ``kernel_name()``
reports which.  Set SEMSEARCH_TRANSPORT_KERNEL=python to force the fallback
(used by the benchmark and the kernel-parity tests).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyDocumentError, SolverError, UnresolvedTokenError
from ..weighting import NbowVector, nbow
from . import _kernel_py

__all__ = [
    "METRICS",
    "CostMatrix",
    "TransportPlan",
    "TransportIndex",
    "kernel_name",
    "metric_cdist",
    "cost_matrix",
    "wmd",
    "rwmd",
    "wcd",
    "centroid",
    "prune_topk",
    "exhaustive_topk",
]

METRICS = ("euclidean", "cosine_distance")

_FORCED = os.environ.get("SEMSEARCH_TRANSPORT_KERNEL", "")
if _FORCED not in ("", "python", "compiled"):
    raise ValueError(f"SEMSEARCH_TRANSPORT_KERNEL={_FORCED!r} not recognized")

if _FORCED == "python":
    _kernel = _kernel_py
    _KERNEL_NAME = "python"
else:
    try:
        from . import _kernel

        _KERNEL_NAME = "compiled"
    except ImportError:
        if _FORCED == "compiled":
            raise
        _kernel = _kernel_py
        _KERNEL_NAME = "python"


def kernel_name() -> str:
    """Which transport kernel is active: 'compiled' or 'python'."""
    return _KERNEL_NAME


@dataclass(frozen=True)
class CostMatrix:
    """Ground distances between the unique tokens of two documents.

    Rows and columns are sorted token tuples, matching NbowVector order.
    """

    row_tokens: tuple[str, ...]
    col_tokens: tuple[str, ...]
    values: np.ndarray

    @property
    def transposed(self) -> "CostMatrix":
        return CostMatrix(self.col_tokens, self.row_tokens, self.values.T)


@dataclass(frozen=True)
class TransportPlan:
    """Optimal mass flows aligned with a CostMatrix, plus the objective."""

    row_tokens: tuple[str, ...]
    col_tokens: tuple[str, ...]
    flows: np.ndarray
    objective: float


def metric_cdist(left: np.ndarray, right: np.ndarray, metric: str) -> np.ndarray:
    """Pairwise ground distances between two vector stacks.

    euclidean: L2 norm of the difference.  cosine_distance: 1 - cos(u, v),
    with zero vectors treated as orthogonal to everything (cos 0) and two
    zero vectors as identical.  Pairs of bit-identical vectors are forced to
    exactly 0 so self-distances never pick up rounding noise.
    """
    left = np.atleast_2d(np.asarray(left, dtype=np.float64))
    right = np.atleast_2d(np.asarray(right, dtype=np.float64))
    if metric == "euclidean":
        sq = (
            (left * left).sum(axis=1)[:, None]
            + (right * right).sum(axis=1)[None, :]
            - 2.0 * (left @ right.T)
        )
        np.maximum(sq, 0.0, out=sq)
        dist = np.sqrt(sq)
    elif metric == "cosine_distance":
        norm_l = np.linalg.norm(left, axis=1)
        norm_r = np.linalg.norm(right, axis=1)
        denom = norm_l[:, None] * norm_r[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            sim = np.where(denom > 0.0, (left @ right.T) / np.where(denom > 0, denom, 1.0), 0.0)
        both_zero = (norm_l == 0.0)[:, None] & (norm_r == 0.0)[None, :]
        sim[both_zero] = 1.0
        dist = 1.0 - sim
        np.maximum(dist, 0.0, out=dist)
    else:
        raise ValueError(f"unknown ground metric {metric!r}")

    # Exactness pass: identical vectors must be at distance exactly zero.
    near = np.argwhere(dist < 1e-5)
    for i, j in near:
        if np.array_equal(left[i], right[j]):
            dist[i, j] = 0.0
    return dist


def cost_matrix(lookup, src_tokens, dst_tokens, metric: str) -> CostMatrix:
    """Ground-distance matrix between the unique tokens of two documents.

    Every token must resolve through ``lookup``; unresolvable tokens are an
    error here and must be filtered upstream.
    """
    rows = tuple(sorted(set(src_tokens)))
    cols = tuple(sorted(set(dst_tokens)))

    def resolve(tokens):
        vectors = []
        for token in tokens:
            vec = lookup(token)
            if vec is None:
                raise UnresolvedTokenError(f"token {token!r} has no vector")
            vectors.append(np.asarray(vec, dtype=np.float64))
        return np.vstack(vectors)

    values = metric_cdist(resolve(rows), resolve(cols), metric)
    return CostMatrix(rows, cols, values)


def _feasibility_check(plan, supply, demand):
    row_err = np.abs(plan.sum(axis=1) - supply).max()
    col_err = np.abs(plan.sum(axis=0) - demand).max()
    if max(row_err, col_err) > 1e-7:
        raise SolverError(
            f"transport plan violates marginals (row {row_err:.2e}, col {col_err:.2e})"
        )


def _solve_exact(supply, demand, values):
    """Run the kernel in a canonical orientation.

    The problem is solved transposed whenever the (demand, cost^T) side
    sorts lexicographically before the (supply, cost) side, so swapping the
    two documents reproduces the identical float computation and the
    distance is bitwise symmetric.  The float drift between the two totals
    is cancelled on the canonical demand side, after orientation, for the
    same reason.
    """
    key_fwd = (len(supply), supply.tobytes(), values.tobytes())
    values_t = np.ascontiguousarray(values.T)
    key_rev = (len(demand), demand.tobytes(), values_t.tobytes())
    if key_rev < key_fwd:
        src, dst, val, transposed = demand.copy(), supply.copy(), values_t, True
    else:
        src, dst, val, transposed = supply.copy(), demand.copy(), values, False
    dst[dst.argmax()] += src.sum() - dst.sum()
    try:
        plan, objective, _ = _kernel.solve_transport(val, src, dst)
    except RuntimeError as exc:
        raise SolverError(str(exc)) from exc
    if transposed:
        plan = plan.T
    return plan, objective


def wmd(d_src: NbowVector, d_dst: NbowVector, c: CostMatrix):
    """Exact word mover's distance and its optimal transport plan.

    Identical distributions short-circuit to distance 0 with the diagonal
    plan; otherwise the network-simplex kernel solves the transportation
    problem exactly and the returned plan satisfies both marginals within
    1e-7.
    """
    if len(d_src) == 0 or len(d_dst) == 0:
        raise EmptyDocumentError("transport distance needs non-empty documents")
    if c.row_tokens != d_src.tokens or c.col_tokens != d_dst.tokens:
        raise ValueError("cost matrix is not aligned with the documents")
    if d_src.same_as(d_dst):
        plan = np.diag(d_src.weights)
        return 0.0, TransportPlan(d_src.tokens, d_dst.tokens, plan, 0.0)

    plan, objective = _solve_exact(
        d_src.weights, d_dst.weights, np.ascontiguousarray(c.values)
    )
    _feasibility_check(plan, d_src.weights, d_dst.weights)
    return objective, TransportPlan(d_src.tokens, d_dst.tokens, plan, objective)


def rwmd(d_src: NbowVector, d_dst: NbowVector, c: CostMatrix) -> float:
    """Relaxed lower bound: each side ships all mass to its cheapest match.

    max of the two one-sided relaxations; always <= the exact distance.
    """
    if len(d_src) == 0 or len(d_dst) == 0:
        raise EmptyDocumentError("transport distance needs non-empty documents")
    if d_src.same_as(d_dst):
        return 0.0
    one = float(d_src.weights @ c.values.min(axis=1))
    two = float(d_dst.weights @ c.values.min(axis=0))
    return max(one, two)


def centroid(lookup, d: NbowVector) -> np.ndarray:
    """Mass-weighted mean vector of a document."""
    vecs = []
    for token in d.tokens:
        vec = lookup(token)
        if vec is None:
            raise UnresolvedTokenError(f"token {token!r} has no vector")
        vecs.append(np.asarray(vec, dtype=np.float64))
    return d.weights @ np.vstack(vecs)


def wcd(lookup, d_src: NbowVector, d_dst: NbowVector, metric: str) -> float:
    """Ground distance between the two document centroids."""
    if len(d_src) == 0 or len(d_dst) == 0:
        raise EmptyDocumentError("centroid distance needs non-empty documents")
    if d_src.same_as(d_dst):
        return 0.0
    c_src = centroid(lookup, d_src)
    c_dst = centroid(lookup, d_dst)
    return float(metric_cdist(c_src[None, :], c_dst[None, :], metric)[0, 0])


class TransportIndex:
    """Precomputed per-statement data for transport-based ranking.

    Holds, for every non-empty statement, its nbow distribution, the stacked
    vectors of its unique tokens, and its centroid.  Immutable after build.
    """

    def __init__(self, statements, lookup, metric: str):
        if metric not in METRICS:
            raise ValueError(f"unknown ground metric {metric!r}")
        self.metric = metric
        self.ids = []
        self.nbows = []
        self.vectors = []
        cents = []
        for stmt in statements:
            try:
                d = nbow(stmt.tokens, lookup)
            except EmptyDocumentError:
                continue
            vecs = np.vstack([np.asarray(lookup(t), dtype=np.float64) for t in d.tokens])
            self.ids.append(stmt.id)
            self.nbows.append(d)
            self.vectors.append(vecs)
            cents.append(d.weights @ vecs)
        if not self.ids:
            raise EmptyDocumentError("no statement has a resolvable token")
        self.centroids = np.vstack(cents)

    def __len__(self) -> int:
        return len(self.ids)

    def pair_cost(self, query: NbowVector, query_vecs: np.ndarray, pos: int) -> CostMatrix:
        values = metric_cdist(query_vecs, self.vectors[pos], self.metric)
        return CostMatrix(query.tokens, self.nbows[pos].tokens, values)


def _query_vectors(lookup, query: NbowVector) -> np.ndarray:
    return np.vstack([np.asarray(lookup(t), dtype=np.float64) for t in query.tokens])


def exhaustive_topk(query: NbowVector, index: TransportIndex, k: int, lookup):
    """Exact top-k by solving every candidate; ties broken by statement id."""
    query_vecs = _query_vectors(lookup, query)
    scored = []
    for pos, sid in enumerate(index.ids):
        c = index.pair_cost(query, query_vecs, pos)
        dist, _ = wmd(query, index.nbows[pos], c)
        scored.append((dist, sid))
    scored.sort()
    return scored[:k]


def prune_topk(query: NbowVector, index: TransportIndex, k: int, prefetch: int, lookup):
    """Exact top-k with centroid prefetch and relaxed-bound pruning.

    Candidates are visited in centroid-distance order; the first
    ``prefetch`` get an exact solve, after which a candidate is skipped
    whenever its relaxed lower bound exceeds the current k-th best exact
    distance.  The bound never exceeds the exact distance, so the result is
    identical to :func:`exhaustive_topk`, including id tie-breaking.
    """
    if prefetch < k:
        raise ValueError("prefetch must be at least k")
    query_vecs = _query_vectors(lookup, query)
    query_centroid = query.weights @ query_vecs
    cdists = metric_cdist(query_centroid[None, :], index.centroids, index.metric)[0]
    order = sorted(range(len(index)), key=lambda pos: (cdists[pos], index.ids[pos]))

    best: list[tuple[float, int]] = []  # sorted (distance, id), length <= k

    def consider(pos):
        c = index.pair_cost(query, query_vecs, pos)
        dist, _ = wmd(query, index.nbows[pos], c)
        entry = (dist, index.ids[pos])
        if len(best) < k:
            best.append(entry)
            best.sort()
        elif entry < best[-1]:
            best[-1] = entry
            best.sort()

    for rank, pos in enumerate(order):
        if rank < prefetch:
            consider(pos)
            continue
        if len(best) == k:
            bound = rwmd(query, index.nbows[pos], index.pair_cost(query, query_vecs, pos))
            if bound > best[-1][0]:
                continue
        consider(pos)
    return best
