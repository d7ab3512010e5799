"""Pure-Python kernels: bipartite pair counting and Leiden move phases.

These are the reference implementations; ``citemap._core._kernels`` is a
Cython transliteration that must produce bit-identical results (same
arithmetic, same order of operations, same tie-breaking). Keep the two in
lockstep: any change here must be mirrored in ``_kernels.pyx``.

Conventions shared by both backends:

* Graphs arrive as CSR over ``n`` nodes with both edge directions present,
  neighbors of each node pre-sorted by the caller (by per-node random key,
  which makes candidate scan order independent of node labeling).
* Communities are integer slots in ``[0, n)``; ``comm_size``/``comm_strength``
  are indexed by slot and kept in sync with ``membership``.
* Moves require strictly positive gain; ties keep the earliest candidate in
  scan order, and staying put beats a zero-gain move.
"""

from __future__ import annotations

import numpy as np

OBJ_CPM = 0
OBJ_RB = 1


def pair_counts(
    indptr: np.ndarray, indices: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Count unordered co-membership pairs over CSR groups.

    For every group (CSR row), each unordered pair of its members gains one
    count. Members are assumed distinct within a group. Returns ``(a, b, w)``
    int64 arrays with ``a < b``, lexicographically sorted.
    """
    counts: dict[tuple[int, int], int] = {}
    get = counts.get
    for g in range(len(indptr) - 1):
        members = sorted(int(x) for x in indices[indptr[g] : indptr[g + 1]])
        k = len(members)
        for i in range(k - 1):
            a = members[i]
            for j in range(i + 1, k):
                key = (a, members[j])
                counts[key] = get(key, 0) + 1
    if not counts:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    items = sorted(counts.items())
    a = np.fromiter((k[0] for k, _ in items), dtype=np.int64, count=len(items))
    b = np.fromiter((k[1] for k, _ in items), dtype=np.int64, count=len(items))
    w = np.fromiter((v for _, v in items), dtype=np.int64, count=len(items))
    return a, b, w


def local_move(
    indptr: np.ndarray,
    indices: np.ndarray,
    weights: np.ndarray,
    node_size: np.ndarray,
    strength: np.ndarray,
    membership: np.ndarray,
    comm_size: np.ndarray,
    comm_strength: np.ndarray,
    order: np.ndarray,
    gamma: float,
    objective: int,
    two_m: float,
) -> int:
    """Queue-based local moving phase; mutates membership and community
    accumulators in place. Returns the number of moves performed.

    Gain of moving v from community s to t:
      CPM: [w(v,t) - w(v,s\\v)] - gamma * size_v * (S_t - S_s + size_v)
      RB:  [w(v,t) - w(v,s\\v)] - gamma * k_v * (K_t - K_s + k_v) / 2m
    The empty community is always a candidate (scanned last) when v is not
    alone, which lets detrimental communities shed members.
    """
    n = len(membership)
    w_to = [0.0] * n
    touched: list[int] = []
    in_queue = bytearray(n)
    queue = [0] * (n + 1)
    head = 0
    tail = 0
    for v in order:
        queue[tail] = int(v)
        tail += 1
        in_queue[v] = 1
    cap = n + 1
    free_stack = [c for c in range(n - 1, -1, -1) if comm_size[c] == 0]

    moves = 0
    while head != tail:
        v = queue[head]
        head += 1
        if head == cap:
            head = 0
        in_queue[v] = 0

        s = int(membership[v])
        w_vs = 0.0
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            c = int(membership[u])
            if c == s:
                w_vs += weights[e]
            else:
                if w_to[c] == 0.0:
                    touched.append(c)
                w_to[c] += weights[e]

        size_v = int(node_size[v])
        s_s = int(comm_size[s])
        k_v = float(strength[v])
        k_s = float(comm_strength[s])

        best_c = s
        best_gain = 0.0
        if objective == OBJ_CPM:
            for c in touched:
                gain = (w_to[c] - w_vs) - gamma * float(
                    size_v * (int(comm_size[c]) - s_s + size_v)
                )
                if gain > best_gain:
                    best_gain = gain
                    best_c = c
            if s_s > size_v and free_stack:
                gain = (0.0 - w_vs) - gamma * float(size_v * (size_v - s_s))
                if gain > best_gain:
                    best_gain = gain
                    best_c = -1
        else:
            for c in touched:
                gain = (w_to[c] - w_vs) - gamma * (
                    k_v * (float(comm_strength[c]) - k_s + k_v)
                ) / two_m
                if gain > best_gain:
                    best_gain = gain
                    best_c = c
            if s_s > size_v and free_stack:
                gain = (0.0 - w_vs) - gamma * (k_v * (k_v - k_s)) / two_m
                if gain > best_gain:
                    best_gain = gain
                    best_c = -1

        for c in touched:
            w_to[c] = 0.0
        touched.clear()

        if best_c != s and best_gain > 0.0:
            if best_c == -1:
                best_c = free_stack.pop()
            membership[v] = best_c
            comm_size[s] -= size_v
            comm_size[best_c] += size_v
            comm_strength[s] -= k_v
            comm_strength[best_c] += k_v
            if comm_size[s] == 0:
                free_stack.append(s)
            moves += 1
            for e in range(indptr[v], indptr[v + 1]):
                u = int(indices[e])
                if membership[u] != best_c and not in_queue[u]:
                    queue[tail] = u
                    tail += 1
                    if tail == cap:
                        tail = 0
                    in_queue[u] = 1
    return moves


def refine(
    indptr: np.ndarray,
    indices: np.ndarray,
    weights: np.ndarray,
    node_size: np.ndarray,
    strength: np.ndarray,
    membership: np.ndarray,
    comm_total_size: np.ndarray,
    comm_total_strength: np.ndarray,
    ext_node: np.ndarray,
    order: np.ndarray,
    gamma: float,
    objective: int,
    two_m: float,
) -> np.ndarray:
    """Refinement phase: re-partition each community from singletons.

    Nodes still on their own, and well connected within their community, may
    merge into a well-connected refined community of the same parent
    community (deterministic best positive gain). Merged edges stay strictly
    inside parent communities, so every refined community is connected.

    ``ext_node[v]`` must hold w(v, S\\v), the weight from v to the rest of its
    parent community. Returns the refined membership array.
    """
    n = len(membership)
    refined = np.arange(n, dtype=np.int64)
    r_size = node_size.astype(np.int64).copy()
    r_strength = strength.astype(np.float64).copy()
    r_ext = ext_node.astype(np.float64).copy()

    w_to = [0.0] * n
    touched: list[int] = []

    for v in order:
        v = int(v)
        rv = int(refined[v])
        size_v = int(node_size[v])
        if int(r_size[rv]) != size_v:
            continue  # v already absorbed someone or was absorbed
        s = int(membership[v])
        k_v = float(strength[v])
        if objective == OBJ_CPM:
            thr_v = gamma * float(size_v * (int(comm_total_size[s]) - size_v))
        else:
            thr_v = gamma * (k_v * (float(comm_total_strength[s]) - k_v)) / two_m
        if float(r_ext[rv]) < thr_v:
            continue  # v not well connected within its parent community

        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if membership[u] != s:
                continue
            c = int(refined[u])
            if w_to[c] == 0.0:
                touched.append(c)
            w_to[c] += weights[e]

        best_c = -1
        best_gain = 0.0
        if objective == OBJ_CPM:
            for c in touched:
                sz_c = int(r_size[c])
                thr_c = gamma * float(sz_c * (int(comm_total_size[s]) - sz_c))
                if float(r_ext[c]) < thr_c:
                    continue
                gain = w_to[c] - gamma * float(size_v * sz_c)
                if gain > best_gain:
                    best_gain = gain
                    best_c = c
        else:
            for c in touched:
                k_c = float(r_strength[c])
                thr_c = gamma * (k_c * (float(comm_total_strength[s]) - k_c)) / two_m
                if float(r_ext[c]) < thr_c:
                    continue
                gain = w_to[c] - gamma * (k_v * k_c) / two_m
                if gain > best_gain:
                    best_gain = gain
                    best_c = c

        if best_c >= 0:
            refined[v] = best_c
            r_ext[best_c] = r_ext[best_c] + r_ext[rv] - 2.0 * w_to[best_c]
            r_size[best_c] += size_v
            r_strength[best_c] += k_v
            r_size[rv] = 0

        for c in touched:
            w_to[c] = 0.0
        touched.clear()

    return refined
