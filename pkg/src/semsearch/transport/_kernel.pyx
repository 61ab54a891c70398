# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled transport kernel: network simplex on the transportation graph.

Twin of ``_kernel_py.solve_transport`` with identical pivot rules; the two
must return the same plans.  Keep them in sync.  See the pure-Python module
for the algorithm notes.
"""

import numpy as np

from libc.math cimport INFINITY


cdef inline double _arc_cost(double[:, ::1] cost, Py_ssize_t a, Py_ssize_t n,
                             Py_ssize_t n_orig, double big_m) noexcept:
    if a < n_orig:
        return cost[a // n, a % n]
    return big_m


cdef void _build_children(Py_ssize_t[::1] parent, Py_ssize_t n_nodes,
                          Py_ssize_t[::1] child_start, Py_ssize_t[::1] child_list,
                          Py_ssize_t[::1] cursor) noexcept:
    cdef Py_ssize_t u, v
    for u in range(n_nodes + 1):
        child_start[u] = 0
    for v in range(n_nodes):
        if parent[v] >= 0:
            child_start[parent[v] + 1] += 1
    for u in range(n_nodes):
        child_start[u + 1] += child_start[u]
        cursor[u] = child_start[u]
    for v in range(n_nodes):
        if parent[v] >= 0:
            child_list[cursor[parent[v]]] = v
            cursor[parent[v]] += 1


cdef void _refresh_tree(double[:, ::1] cost, Py_ssize_t n, Py_ssize_t n_orig,
                        double big_m, Py_ssize_t root,
                        Py_ssize_t[::1] parent, Py_ssize_t[::1] pred_arc,
                        signed char[::1] pred_up,
                        Py_ssize_t[::1] depth, double[::1] pi,
                        Py_ssize_t[::1] child_start, Py_ssize_t[::1] child_list,
                        Py_ssize_t[::1] stack) noexcept:
    cdef Py_ssize_t top = 0, u, v, idx
    cdef double c
    depth[root] = 0
    pi[root] = 0.0
    stack[top] = root
    top += 1
    while top > 0:
        top -= 1
        u = stack[top]
        for idx in range(child_start[u], child_start[u + 1]):
            v = child_list[idx]
            depth[v] = depth[u] + 1
            c = _arc_cost(cost, pred_arc[v], n, n_orig, big_m)
            if pred_up[v]:
                pi[v] = c + pi[u]
            else:
                pi[v] = pi[u] - c
            stack[top] = v
            top += 1


def solve_transport(cost, supply, demand, max_iter=0):
    """Solve the transportation problem exactly.

    Same contract as the pure-Python twin: returns ``(plan, objective,
    pivots)``; raises ValueError on malformed inputs and RuntimeError when
    the pivot budget is exhausted or artificial flow remains.
    """
    cost_arr = np.ascontiguousarray(cost, dtype=np.float64)
    supply_arr = np.ascontiguousarray(supply, dtype=np.float64)
    demand_arr = np.ascontiguousarray(demand, dtype=np.float64)
    cdef Py_ssize_t m = cost_arr.shape[0]
    cdef Py_ssize_t n = cost_arr.shape[1]
    if supply_arr.shape != (m,) or demand_arr.shape != (n,):
        raise ValueError("marginal shapes do not match the cost matrix")
    if not (np.isfinite(cost_arr).all() and (cost_arr >= 0).all()):
        raise ValueError("cost entries must be finite and non-negative")
    if (supply_arr <= 0).any() or (demand_arr <= 0).any():
        raise ValueError("marginals must be strictly positive")
    if abs(supply_arr.sum() - demand_arr.sum()) > 1e-9:
        raise ValueError("supply and demand totals differ")

    cdef Py_ssize_t budget = int(max_iter)
    if budget <= 0:
        budget = 200 * (m + 1) * (n + 1) + 10_000

    cdef Py_ssize_t n_nodes = m + n + 1
    cdef Py_ssize_t root = m + n
    cdef Py_ssize_t n_orig = m * n
    cdef Py_ssize_t n_arcs = n_orig + m + n

    cdef double cmax = float(cost_arr.max()) if cost_arr.size else 0.0
    cdef double big_m = 1.0 + (m + n) * max(cmax, 1.0)
    cdef double tol = 1e-12 * big_m

    flow_arr = np.zeros(n_arcs)
    flow_arr[n_orig:n_orig + m] = supply_arr
    flow_arr[n_orig + m:] = demand_arr

    parent_arr = np.empty(n_nodes, dtype=np.intp)
    pred_arc_arr = np.empty(n_nodes, dtype=np.intp)
    pred_up_arr = np.empty(n_nodes, dtype=np.int8)
    depth_arr = np.empty(n_nodes, dtype=np.intp)
    pi_arr = np.empty(n_nodes)
    basic_arr = np.zeros((m, n), dtype=np.uint8)
    child_start_arr = np.empty(n_nodes + 1, dtype=np.intp)
    child_list_arr = np.empty(n_nodes, dtype=np.intp)
    cursor_arr = np.empty(n_nodes, dtype=np.intp)
    stack_arr = np.empty(n_nodes, dtype=np.intp)
    p_node_arr = np.empty(n_nodes, dtype=np.intp)
    p_arc_arr = np.empty(n_nodes, dtype=np.intp)
    p_inc_arr = np.empty(n_nodes, dtype=np.int8)
    q_node_arr = np.empty(n_nodes, dtype=np.intp)
    q_arc_arr = np.empty(n_nodes, dtype=np.intp)
    q_inc_arr = np.empty(n_nodes, dtype=np.int8)
    in_t2_arr = np.empty(n_nodes, dtype=np.int8)

    cdef double[:, ::1] cost_v = cost_arr
    cdef double[::1] flow = flow_arr
    cdef Py_ssize_t[::1] parent = parent_arr
    cdef Py_ssize_t[::1] pred_arc = pred_arc_arr
    cdef signed char[::1] pred_up = pred_up_arr
    cdef Py_ssize_t[::1] depth = depth_arr
    cdef double[::1] pi = pi_arr
    cdef unsigned char[:, ::1] basic = basic_arr
    cdef Py_ssize_t[::1] child_start = child_start_arr
    cdef Py_ssize_t[::1] child_list = child_list_arr
    cdef Py_ssize_t[::1] cursor = cursor_arr
    cdef Py_ssize_t[::1] stack = stack_arr
    cdef Py_ssize_t[::1] p_node = p_node_arr
    cdef Py_ssize_t[::1] p_arc = p_arc_arr
    cdef signed char[::1] p_inc = p_inc_arr
    cdef Py_ssize_t[::1] q_node = q_node_arr
    cdef Py_ssize_t[::1] q_arc = q_arc_arr
    cdef signed char[::1] q_inc = q_inc_arr
    cdef signed char[::1] in_t2 = in_t2_arr

    cdef Py_ssize_t i, j, v, u, a, b, t
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

    _build_children(parent, n_nodes, child_start, child_list, cursor)
    _refresh_tree(cost_v, n, n_orig, big_m, root, parent, pred_arc, pred_up,
                  depth, pi, child_start, child_list, stack)

    cdef Py_ssize_t pivots = 0
    cdef Py_ssize_t bp, bq, e, q_node_id, np_side, nq_side
    cdef Py_ssize_t leave_node, leave_arc, r1, r2, prev, prev_arc, nxt, nxt_arc, top
    cdef double best, r, delta

    while True:
        best = INFINITY
        bp = 0
        bq = 0
        for i in range(m):
            for j in range(n):
                if basic[i, j]:
                    continue
                r = (cost_v[i, j] - pi[i]) + pi[m + j]
                if r < best:
                    best = r
                    bp = i
                    bq = j
        if best >= -tol:
            break
        if pivots >= budget:
            raise RuntimeError(
                f"transport solver exceeded {budget} pivots "
                f"(best reduced cost {best:.3e})"
            )
        q_node_id = m + bq
        e = bp * n + bq

        # Pivot cycle: entering arc plus the tree path q ..> apex ..> p; see
        # the pure-Python twin for the direction conventions.
        np_side = 0
        nq_side = 0
        a = bp
        b = q_node_id
        while depth[a] > depth[b]:
            p_node[np_side] = a
            p_arc[np_side] = pred_arc[a]
            p_inc[np_side] = 1 if pred_up[a] == 0 else 0
            np_side += 1
            a = parent[a]
        while depth[b] > depth[a]:
            q_node[nq_side] = b
            q_arc[nq_side] = pred_arc[b]
            q_inc[nq_side] = 1 if pred_up[b] == 1 else 0
            nq_side += 1
            b = parent[b]
        while a != b:
            p_node[np_side] = a
            p_arc[np_side] = pred_arc[a]
            p_inc[np_side] = 1 if pred_up[a] == 0 else 0
            np_side += 1
            a = parent[a]
            q_node[nq_side] = b
            q_arc[nq_side] = pred_arc[b]
            q_inc[nq_side] = 1 if pred_up[b] == 1 else 0
            nq_side += 1
            b = parent[b]

        delta = INFINITY
        for t in range(np_side):
            if not p_inc[t] and flow[p_arc[t]] < delta:
                delta = flow[p_arc[t]]
        for t in range(nq_side):
            if not q_inc[t] and flow[q_arc[t]] < delta:
                delta = flow[q_arc[t]]

        # Leaving arc: last blocking arc in cycle order from the apex.
        leave_node = -1
        leave_arc = -1
        for t in range(np_side - 1, -1, -1):
            if not p_inc[t] and flow[p_arc[t]] == delta:
                leave_node = p_node[t]
                leave_arc = p_arc[t]
        for t in range(nq_side):
            if not q_inc[t] and flow[q_arc[t]] == delta:
                leave_node = q_node[t]
                leave_arc = q_arc[t]
        if leave_arc < 0:
            raise RuntimeError("pivot cycle must contain a blocking arc")

        flow[e] += delta
        for t in range(np_side):
            if p_inc[t]:
                flow[p_arc[t]] += delta
            else:
                flow[p_arc[t]] -= delta
        for t in range(nq_side):
            if q_inc[t]:
                flow[q_arc[t]] += delta
            else:
                flow[q_arc[t]] -= delta

        # Basis swap: detach the subtree under the leaving arc, re-root it at
        # the entering arc's endpoint inside it, hang it off the far endpoint.
        _build_children(parent, n_nodes, child_start, child_list, cursor)
        for t in range(n_nodes):
            in_t2[t] = 0
        _mark_subtree(in_t2, leave_node, child_start, child_list, stack)
        if in_t2[bp]:
            r2 = bp
            r1 = q_node_id
        else:
            r2 = q_node_id
            r1 = bp

        v = r2
        prev = r1
        prev_arc = e
        while True:
            nxt = parent[v]
            nxt_arc = pred_arc[v]
            parent[v] = prev
            pred_arc[v] = prev_arc
            if prev_arc < n_orig:
                pred_up[v] = 1 if prev_arc // n == v else 0
            elif prev_arc < n_orig + m:
                pred_up[v] = 1 if prev_arc - n_orig == v else 0
            else:
                pred_up[v] = 1 if root == v else 0
            if v == leave_node:
                break
            prev = v
            prev_arc = nxt_arc
            v = nxt

        basic[bp, bq] = 1
        if leave_arc < n_orig:
            basic[leave_arc // n, leave_arc % n] = 0
        _build_children(parent, n_nodes, child_start, child_list, cursor)
        _refresh_tree(cost_v, n, n_orig, big_m, root, parent, pred_arc, pred_up,
                      depth, pi, child_start, child_list, stack)
        pivots += 1

    plan = flow_arr[:n_orig].reshape(m, n)
    np.maximum(plan, 0.0, out=plan)
    if flow_arr[n_orig:].max() > 1e-7:
        raise RuntimeError("artificial flow remained after optimization")
    objective = float((plan * cost_arr).sum())
    return plan, objective, int(pivots)


cdef void _mark_subtree(signed char[::1] marked, Py_ssize_t start,
                        Py_ssize_t[::1] child_start, Py_ssize_t[::1] child_list,
                        Py_ssize_t[::1] stack) noexcept:
    cdef Py_ssize_t top = 0, u, idx
    marked[start] = 1
    stack[top] = start
    top += 1
    while top > 0:
        top -= 1
        u = stack[top]
        for idx in range(child_start[u], child_start[u + 1]):
            if not marked[child_list[idx]]:
                marked[child_list[idx]] = 1
                stack[top] = child_list[idx]
                top += 1
