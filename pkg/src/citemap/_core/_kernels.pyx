# distutils: language = c++
"""Compiled kernels: bipartite pair counting and Leiden move phases.

Transliteration of :mod:`citemap._core.kernels_py`; the two must produce
bit-identical results (same arithmetic in the same order, same tie-breaking).
Any change here must be mirrored there. Compiled without -ffast-math / FMA
contraction so float arithmetic matches CPython's.
"""

import numpy as np

cimport numpy as cnp
from libcpp.algorithm cimport sort as cpp_sort
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

cnp.import_array()

OBJ_CPM = 0
OBJ_RB = 1


def pair_counts(indptr, indices):
    """Count unordered co-membership pairs over CSR groups.

    Same contract as the fallback: returns (a, b, w) int64 arrays with
    a < b, lexicographically sorted.
    """
    cdef cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] mem = np.ascontiguousarray(indices, dtype=np.int64)
    cdef Py_ssize_t n_groups = ip.shape[0] - 1
    cdef long long base = 1
    cdef Py_ssize_t i, j, g
    for i in range(mem.shape[0]):
        if mem[i] + 1 > base:
            base = mem[i] + 1

    cdef unordered_map[long long, long long] counts
    cdef vector[long long] group
    cdef long long lo, hi, av
    with nogil:
        for g in range(n_groups):
            lo = ip[g]
            hi = ip[g + 1]
            if hi - lo < 2:
                continue
            group.clear()
            for i in range(lo, hi):
                group.push_back(mem[i])
            cpp_sort(group.begin(), group.end())
            for i in range(group.size() - 1):
                av = group[i] * base
                for j in range(i + 1, group.size()):
                    counts[av + group[j]] += 1

    cdef Py_ssize_t n_pairs = counts.size()
    a_arr = np.empty(n_pairs, dtype=np.int64)
    b_arr = np.empty(n_pairs, dtype=np.int64)
    w_arr = np.empty(n_pairs, dtype=np.int64)
    cdef cnp.int64_t[::1] a = a_arr
    cdef cnp.int64_t[::1] b = b_arr
    cdef cnp.int64_t[::1] w = w_arr
    cdef Py_ssize_t k = 0
    for it in counts:
        a[k] = it.first // base
        b[k] = it.first % base
        w[k] = it.second
        k += 1
    order = np.lexsort((b_arr, a_arr))
    return a_arr[order], b_arr[order], w_arr[order]


def local_move(
    indptr,
    indices,
    weights,
    node_size,
    strength,
    membership,
    comm_size,
    comm_strength,
    order,
    double gamma,
    int objective,
    double two_m,
):
    """Queue-based local moving phase; see the fallback for the contract."""
    cdef cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] nbr = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] wgt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.int64_t[::1] nsz = np.ascontiguousarray(node_size, dtype=np.int64)
    cdef double[::1] k_arr = np.ascontiguousarray(strength, dtype=np.float64)
    cdef cnp.int64_t[::1] memb = membership
    cdef cnp.int64_t[::1] csz = comm_size
    cdef double[::1] cstr = comm_strength
    cdef cnp.int64_t[::1] ord_v = np.ascontiguousarray(order, dtype=np.int64)

    cdef Py_ssize_t n = memb.shape[0]
    w_to_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] w_to = w_to_arr
    in_queue_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] in_queue = in_queue_arr
    queue_arr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = queue_arr

    cdef vector[long long] touched
    cdef vector[long long] free_stack
    cdef Py_ssize_t head = 0, tail = 0, cap = n + 1
    cdef Py_ssize_t e, t
    cdef long long v, u, s, c, best_c, size_v, s_s
    cdef double w_vs, k_v, k_s, gain, best_gain
    cdef long long moves = 0

    with nogil:
        for t in range(ord_v.shape[0]):
            queue[tail] = ord_v[t]
            tail += 1
            in_queue[ord_v[t]] = 1
        for c in range(n - 1, -1, -1):
            if csz[c] == 0:
                free_stack.push_back(c)

        while head != tail:
            v = queue[head]
            head += 1
            if head == cap:
                head = 0
            in_queue[v] = 0

            s = memb[v]
            w_vs = 0.0
            for e in range(ip[v], ip[v + 1]):
                u = nbr[e]
                c = memb[u]
                if c == s:
                    w_vs += wgt[e]
                else:
                    if w_to[c] == 0.0:
                        touched.push_back(c)
                    w_to[c] += wgt[e]

            size_v = nsz[v]
            s_s = csz[s]
            k_v = k_arr[v]
            k_s = cstr[s]

            best_c = s
            best_gain = 0.0
            if objective == 0:  # CPM
                for t in range(touched.size()):
                    c = touched[t]
                    gain = (w_to[c] - w_vs) - gamma * <double>(
                        size_v * (csz[c] - s_s + size_v)
                    )
                    if gain > best_gain:
                        best_gain = gain
                        best_c = c
                if s_s > size_v and free_stack.size() > 0:
                    gain = (0.0 - w_vs) - gamma * <double>(size_v * (size_v - s_s))
                    if gain > best_gain:
                        best_gain = gain
                        best_c = -1
            else:  # RB
                for t in range(touched.size()):
                    c = touched[t]
                    gain = (w_to[c] - w_vs) - gamma * (
                        k_v * (cstr[c] - k_s + k_v)
                    ) / two_m
                    if gain > best_gain:
                        best_gain = gain
                        best_c = c
                if s_s > size_v and free_stack.size() > 0:
                    gain = (0.0 - w_vs) - gamma * (k_v * (k_v - k_s)) / two_m
                    if gain > best_gain:
                        best_gain = gain
                        best_c = -1

            for t in range(touched.size()):
                w_to[touched[t]] = 0.0
            touched.clear()

            if best_c != s and best_gain > 0.0:
                if best_c == -1:
                    best_c = free_stack.back()
                    free_stack.pop_back()
                memb[v] = best_c
                csz[s] -= size_v
                csz[best_c] += size_v
                cstr[s] -= k_v
                cstr[best_c] += k_v
                if csz[s] == 0:
                    free_stack.push_back(s)
                moves += 1
                for e in range(ip[v], ip[v + 1]):
                    u = nbr[e]
                    if memb[u] != best_c and in_queue[u] == 0:
                        queue[tail] = u
                        tail += 1
                        if tail == cap:
                            tail = 0
                        in_queue[u] = 1
    return int(moves)


def refine(
    indptr,
    indices,
    weights,
    node_size,
    strength,
    membership,
    comm_total_size,
    comm_total_strength,
    ext_node,
    order,
    double gamma,
    int objective,
    double two_m,
):
    """Refinement phase; see the fallback for the contract."""
    cdef cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] nbr = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] wgt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.int64_t[::1] nsz = np.ascontiguousarray(node_size, dtype=np.int64)
    cdef double[::1] k_arr = np.ascontiguousarray(strength, dtype=np.float64)
    cdef cnp.int64_t[::1] memb = np.ascontiguousarray(membership, dtype=np.int64)
    cdef cnp.int64_t[::1] cts = np.ascontiguousarray(comm_total_size, dtype=np.int64)
    cdef double[::1] ctk = np.ascontiguousarray(comm_total_strength, dtype=np.float64)
    cdef cnp.int64_t[::1] ord_v = np.ascontiguousarray(order, dtype=np.int64)

    cdef Py_ssize_t n = memb.shape[0]
    refined_arr = np.arange(n, dtype=np.int64)
    cdef cnp.int64_t[::1] refined = refined_arr
    r_size_arr = np.ascontiguousarray(node_size, dtype=np.int64).copy()
    cdef cnp.int64_t[::1] r_size = r_size_arr
    r_strength_arr = np.ascontiguousarray(strength, dtype=np.float64).copy()
    cdef double[::1] r_strength = r_strength_arr
    r_ext_arr = np.ascontiguousarray(ext_node, dtype=np.float64).copy()
    cdef double[::1] r_ext = r_ext_arr
    w_to_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] w_to = w_to_arr

    cdef vector[long long] touched
    cdef Py_ssize_t e, t, q
    cdef long long v, u, s, c, rv, best_c, size_v, sz_c
    cdef double k_v, k_c, thr_v, thr_c, gain, best_gain

    with nogil:
        for q in range(ord_v.shape[0]):
            v = ord_v[q]
            rv = refined[v]
            size_v = nsz[v]
            if r_size[rv] != size_v:
                continue
            s = memb[v]
            k_v = k_arr[v]
            if objective == 0:
                thr_v = gamma * <double>(size_v * (cts[s] - size_v))
            else:
                thr_v = gamma * (k_v * (ctk[s] - k_v)) / two_m
            if r_ext[rv] < thr_v:
                continue

            for e in range(ip[v], ip[v + 1]):
                u = nbr[e]
                if memb[u] != s:
                    continue
                c = refined[u]
                if w_to[c] == 0.0:
                    touched.push_back(c)
                w_to[c] += wgt[e]

            best_c = -1
            best_gain = 0.0
            if objective == 0:
                for t in range(touched.size()):
                    c = touched[t]
                    sz_c = r_size[c]
                    thr_c = gamma * <double>(sz_c * (cts[s] - sz_c))
                    if r_ext[c] < thr_c:
                        continue
                    gain = w_to[c] - gamma * <double>(size_v * sz_c)
                    if gain > best_gain:
                        best_gain = gain
                        best_c = c
            else:
                for t in range(touched.size()):
                    c = touched[t]
                    k_c = r_strength[c]
                    thr_c = gamma * (k_c * (ctk[s] - k_c)) / two_m
                    if r_ext[c] < thr_c:
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

            for t in range(touched.size()):
                w_to[touched[t]] = 0.0
            touched.clear()

    return refined_arr
