"""Pure-Python transport kernel: network simplex on the transportation graph.

This is the fallback twin of the compiled kernel in ``_kernel.pyx``; both
implement the same algorithm with the same pivot rules and must return the
same plans.  Keep them in sync.

Problem: min sum_ij T_ij * c_ij over T >= 0 with row sums ``supply`` and
column sums ``demand`` (uncapacitated transportation).  The solver maintains
a strongly feasible spanning-tree basis rooted at an artificial node, which
guarantees finite termination even under degeneracy:

* nodes: m sources, n sinks, one artificial root,
* initial basis: big-M artificial arcs source->root and root->sink,
* entering arc: most negative reduced cost among non-basic original arcs,
* leaving arc: last blocking arc when traversing the pivot cycle from its
  apex in the direction of the entering arc.

Potentials and depths are recomputed from the root after every pivot; tree
sizes here are small enough that the O(nodes) refresh is irrelevant next to
the O(m*n) entering-arc scan.
"""

import numpy as np


def solve_transport(cost, supply, demand, max_iter=0):
    """Solve the transportation problem exactly.

    Parameters
    ----------
    cost : (m, n) float64 array, non-negative, finite
    supply : (m,) float64 array, strictly positive
    demand : (n,) float64 array, strictly positive, same total as supply
    max_iter : pivot budget; 0 picks a generous default

    Returns
    -------
    plan : (m, n) float64 array with the optimal flows
    objective : float
    pivots : int

    Raises
    ------
    ValueError : malformed inputs
    RuntimeError : pivot budget exhausted (solution not usable)
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    supply = np.ascontiguousarray(supply, dtype=np.float64)
    demand = np.ascontiguousarray(demand, dtype=np.float64)
    m, n = cost.shape
    if supply.shape != (m,) or demand.shape != (n,):
        raise ValueError("marginal shapes do not match the cost matrix")
    if not (np.isfinite(cost).all() and (cost >= 0).all()):
        raise ValueError("cost entries must be finite and non-negative")
    if (supply <= 0).any() or (demand <= 0).any():
        raise ValueError("marginals must be strictly positive")
    if abs(supply.sum() - demand.sum()) > 1e-9:
        raise ValueError("supply and demand totals differ")

    if max_iter <= 0:
        max_iter = 200 * (m + 1) * (n + 1) + 10_000

    n_nodes = m + n + 1
    root = m + n
    n_orig = m * n

    cmax = float(cost.max()) if cost.size else 0.0
    big_m = 1.0 + (m + n) * max(cmax, 1.0)
    # Optimality tolerance: scaled above the float-cancellation noise of
    # reduced costs (which involve big-M potentials) but far below any
    # meaningful cost difference.
    tol = 1e-12 * big_m

    # Arc a < n_orig: source a//n -> sink m + a%n, cost[a//n, a%n].
    # Arc n_orig + i: source i -> root.  Arc n_orig + m + j: root -> sink m+j.
    flow = np.zeros(n_orig + m + n)
    flow[n_orig:n_orig + m] = supply
    flow[n_orig + m:] = demand

    parent = np.empty(n_nodes, dtype=np.int64)
    pred_arc = np.empty(n_nodes, dtype=np.int64)
    pred_up = np.empty(n_nodes, dtype=np.int8)  # 1: arc points node->parent
    parent[root] = -1
    pred_arc[root] = -1
    pred_up[root] = 0
    for i in range(m):
        parent[i] = root
        pred_arc[i] = n_orig + i
        pred_up[i] = 1
    for j in range(n):
        parent[m + j] = root
        pred_arc[m + j] = n_orig + m + j
        pred_up[m + j] = 0

    depth = np.empty(n_nodes, dtype=np.int64)
    pi = np.empty(n_nodes)
    basic_orig = np.zeros((m, n), dtype=bool)

    def arc_cost(a):
        return cost[a // n, a % n] if a < n_orig else big_m

    def arc_tail(a):
        if a < n_orig:
            return a // n
        if a < n_orig + m:
            return a - n_orig
        return root

    def children_lists():
        children = [[] for _ in range(n_nodes)]
        for v in range(n_nodes):
            if parent[v] >= 0:
                children[parent[v]].append(v)
        return children

    def refresh_tree():
        # Recompute depths and potentials top-down from the root.
        depth[root] = 0
        pi[root] = 0.0
        stack = [root]
        children = children_lists()
        while stack:
            u = stack.pop()
            for v in children[u]:
                depth[v] = depth[u] + 1
                c = arc_cost(pred_arc[v])
                # Basic arcs have zero reduced cost: c = pi[tail] - pi[head].
                pi[v] = c + pi[u] if pred_up[v] else pi[u] - c
                stack.append(v)

    refresh_tree()

    pivots = 0
    while True:
        reduced = cost - pi[:m, None] + pi[None, m:m + n]
        reduced[basic_orig] = np.inf
        entering = int(np.argmin(reduced))
        p, jq = divmod(entering, n)
        if reduced[p, jq] >= -tol:
            break
        if pivots >= max_iter:
            raise RuntimeError(
                f"transport solver exceeded {max_iter} pivots "
                f"(best reduced cost {reduced[p, jq]:.3e})"
            )
        q = m + jq
        e = p * n + jq

        # Pivot cycle: entering arc p->q plus the tree path q ..> apex ..> p.
        # For an arc on the q-side (walking child->parent) the cycle travel
        # direction matches the arc iff it points upward; on the p-side the
        # travel direction is parent->child, so the test flips.
        p_side = []  # (node, arc, increases), walk order: p up to apex
        q_side = []  # (node, arc, increases), walk order: q up to apex
        a, b = p, q
        while depth[a] > depth[b]:
            p_side.append((a, pred_arc[a], pred_up[a] == 0))
            a = parent[a]
        while depth[b] > depth[a]:
            q_side.append((b, pred_arc[b], pred_up[b] == 1))
            b = parent[b]
        while a != b:
            p_side.append((a, pred_arc[a], pred_up[a] == 0))
            q_side.append((b, pred_arc[b], pred_up[b] == 1))
            a = parent[a]
            b = parent[b]

        delta = np.inf
        for _, arc, increases in p_side:
            if not increases:
                delta = min(delta, flow[arc])
        for _, arc, increases in q_side:
            if not increases:
                delta = min(delta, flow[arc])

        # Leaving arc: last blocking arc in cycle order from the apex
        # (apex -> p -> entering -> q -> apex); keeps the tree strongly
        # feasible so degenerate pivots cannot cycle.
        leave_node = -1
        leave_arc = -1
        for node, arc, increases in reversed(p_side):
            if not increases and flow[arc] == delta:
                leave_node, leave_arc = node, arc
        for node, arc, increases in q_side:
            if not increases and flow[arc] == delta:
                leave_node, leave_arc = node, arc
        assert leave_arc >= 0, "pivot cycle must contain a blocking arc"

        flow[e] += delta
        for _, arc, increases in p_side:
            flow[arc] += delta if increases else -delta
        for _, arc, increases in q_side:
            flow[arc] += delta if increases else -delta

        # Basis swap: detach the subtree hanging from the leaving arc,
        # re-root it at the entering arc's endpoint inside it, and hang it
        # off the far endpoint.
        children = children_lists()
        in_t2 = np.zeros(n_nodes, dtype=bool)
        stack = [leave_node]
        in_t2[leave_node] = True
        while stack:
            u = stack.pop()
            for v in children[u]:
                in_t2[v] = True
                stack.append(v)
        r2, r1 = (p, q) if in_t2[p] else (q, p)

        # Reverse the parent chain r2 ..> leave_node, attach r2 under r1.
        v = r2
        prev, prev_arc = r1, e
        while True:
            nxt, nxt_arc = parent[v], pred_arc[v]
            parent[v] = prev
            pred_arc[v] = prev_arc
            pred_up[v] = 1 if arc_tail(prev_arc) == v else 0
            if v == leave_node:
                break
            prev, prev_arc = v, nxt_arc
            v = nxt

        basic_orig[p, jq] = True
        if leave_arc < n_orig:
            basic_orig[leave_arc // n, leave_arc % n] = False
        refresh_tree()
        pivots += 1

    plan = flow[:n_orig].reshape(m, n)
    np.maximum(plan, 0.0, out=plan)
    if flow[n_orig:].max() > 1e-7:
        raise RuntimeError("artificial flow remained after optimization")
    objective = float((plan * cost).sum())
    return plan, objective, pivots
