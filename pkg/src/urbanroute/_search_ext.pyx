# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled best-first search kernel; same contract as ``_search_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef struct Entry:
    double key
    Py_ssize_t node


cdef inline bint _less(Entry a, Entry b) nogil:
    return a.key < b.key or (a.key == b.key and a.node < b.node)


cdef inline void _sift_up(Entry* heap, Py_ssize_t pos) nogil:
    cdef Entry item = heap[pos]
    cdef Py_ssize_t parent
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(item, heap[parent]):
            heap[pos] = heap[parent]
            pos = parent
        else:
            break
    heap[pos] = item


cdef inline void _sift_down(Entry* heap, Py_ssize_t size) nogil:
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t child
    cdef Entry item = heap[0]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _less(heap[child + 1], heap[child]):
            child += 1
        if _less(heap[child], item):
            heap[pos] = heap[child]
            pos = child
        else:
            break
    heap[pos] = item


def best_first(indptr, heads, costs, h, Py_ssize_t source, Py_ssize_t target,
               bint record_order=False):
    cdef const cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const cnp.int64_t[::1] hd = np.ascontiguousarray(heads, dtype=np.int64)
    cdef const double[::1] cs = np.ascontiguousarray(costs, dtype=np.float64)
    cdef const double[::1] hv
    cdef bint has_h = h is not None
    if has_h:
        hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t n = ip.shape[0] - 1
    cdef Py_ssize_t m = hd.shape[0]

    pred_arr = np.full(n, -1, dtype=np.int64)
    dist_arr = np.full(n, INFINITY, dtype=np.float64)
    order_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] pred = pred_arr
    cdef double[::1] dist = dist_arr
    cdef cnp.int64_t[::1] order = order_arr
    cdef unsigned char* closed = <unsigned char*> malloc(n if n > 0 else 1)
    # lazy insertion: at most one push per relaxation plus the source
    cdef Entry* heap = <Entry*> malloc((m + 1) * sizeof(Entry))
    if closed == NULL or heap == NULL:
        free(closed)
        free(heap)
        raise MemoryError()

    cdef Py_ssize_t size = 0, expanded = 0, u, v, k
    cdef double du, nd
    cdef Entry e
    with nogil:
        for u in range(n):
            closed[u] = 0
        dist[source] = 0.0
        e.key = hv[source] if has_h else 0.0
        e.node = source
        heap[0] = e
        size = 1
        while size > 0:
            u = heap[0].node
            size -= 1
            if size > 0:
                heap[0] = heap[size]
                _sift_down(heap, size)
            if closed[u]:
                continue
            closed[u] = 1
            order[expanded] = u
            expanded += 1
            if u == target:
                break
            du = dist[u]
            for k in range(ip[u], ip[u + 1]):
                v = hd[k]
                if closed[v]:
                    continue
                nd = du + cs[k]
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = k
                    e.key = nd + hv[v] if has_h else nd
                    e.node = v
                    heap[size] = e
                    _sift_up(heap, size)
                    size += 1
    free(closed)
    free(heap)
    return pred_arr, dist[target], expanded, (order_arr[:expanded] if record_order else None)
