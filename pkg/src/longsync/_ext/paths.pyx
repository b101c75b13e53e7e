# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Depth-first simple-path kernels.

A simple path of ``c`` vertices is an ordered tuple of distinct nodes whose
consecutive pairs are edges. Paths are visited in lexicographic order of the
node tuple, so accumulation order is deterministic.
"""
import numpy as np
cimport numpy as cnp
from libc.string cimport memset

cnp.import_array()


cdef void _mm(const double* a, const double* b, double* out, int d) noexcept nogil:
    cdef int x, y, z
    cdef double acc
    for x in range(d):
        for y in range(d):
            acc = 0.0
            for z in range(d):
                acc += a[x * d + z] * b[z * d + y]
            out[x * d + y] = acc


cdef void _dfs_sums(int depth, int c, int n, int d, int start,
                    const double[:, ::1] w, const double* rot,
                    int* path, char* visited, double* wprod, double* mprod,
                    double[:, ::1] f, double* g, bint want_g) noexcept nogil:
    cdef int last = path[depth - 1]
    cdef int v, k
    cdef double wv
    cdef double* cur
    cdef double* nxt
    cdef double* gb
    cdef int dd = d * d
    for v in range(n):
        if visited[v]:
            continue
        wv = w[last, v]
        if wv == 0.0:
            continue
        wprod[depth] = wprod[depth - 1] * wv
        if want_g:
            cur = mprod + (depth - 1) * dd
            nxt = mprod + depth * dd
            _mm(cur, rot + (<Py_ssize_t>last * n + v) * dd, nxt, d)
        if depth == c - 1:
            f[start, v] += wprod[depth]
            if want_g:
                gb = g + (<Py_ssize_t>start * n + v) * dd
                for k in range(dd):
                    gb[k] += wprod[depth] * nxt[k]
        else:
            path[depth] = v
            visited[v] = 1
            _dfs_sums(depth + 1, c, n, d, start, w, rot, path, visited,
                      wprod, mprod, f, g, want_g)
            visited[v] = 0


def path_sums(double[:, ::1] w, rot, int c):
    """Weighted path counts and weighted block sums over simple c-vertex paths.

    ``rot`` is an ``(n, n, d, d)`` C-contiguous array or ``None``.
    """
    cdef int n = w.shape[0]
    cdef int d = 1
    cdef bint want_g = rot is not None
    cdef cnp.ndarray[cnp.float64_t, ndim=4, mode="c"] rot_arr
    cdef double* rot_ptr = NULL
    if want_g:
        rot_arr = np.ascontiguousarray(rot, dtype=np.float64)
        d = rot_arr.shape[2]
        rot_ptr = <double*> rot_arr.data
    f_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] f = f_arr
    g_arr = np.zeros((n, n, d, d), dtype=np.float64) if want_g else np.zeros((1, 1, 1, 1))
    cdef double* g_ptr = <double*> cnp.PyArray_DATA(g_arr)
    cdef int[::1] path = np.zeros(c, dtype=np.intc)
    cdef char[::1] visited = np.zeros(n, dtype=np.int8)
    cdef double[::1] wprod = np.zeros(c, dtype=np.float64)
    cdef double[::1] mprod = np.zeros(c * d * d, dtype=np.float64)
    cdef int i, k
    if c < 2 or c > n:
        return f_arr, (g_arr if want_g else None)
    with nogil:
        for i in range(n):
            memset(&visited[0], 0, n)
            path[0] = i
            visited[i] = 1
            wprod[0] = 1.0
            for k in range(d * d):
                mprod[k] = 0.0
            for k in range(d):
                mprod[k * d + k] = 1.0
            _dfs_sums(1, c, n, d, i, w, rot_ptr, &path[0], &visited[0],
                      &wprod[0], &mprod[0], f, g_ptr, want_g)
    return f_arr, (g_arr if want_g else None)


cdef Py_ssize_t _dfs_list(int depth, int c, int n, const unsigned char[:, ::1] s,
                          int* path, char* visited, long long* out,
                          Py_ssize_t count, bint write) noexcept nogil:
    cdef int last = path[depth - 1]
    cdef int v, k
    for v in range(n):
        if visited[v] or not s[last, v]:
            continue
        path[depth] = v
        if depth == c - 1:
            if write:
                for k in range(c):
                    out[count * c + k] = path[k]
            count += 1
        else:
            visited[v] = 1
            count = _dfs_list(depth + 1, c, n, s, path, visited, out, count, write)
            visited[v] = 0
    return count


def enumerate_paths(const unsigned char[:, ::1] support, int c):
    """All simple c-vertex paths as an ``(M, c)`` int64 array (lexicographic)."""
    cdef int n = support.shape[0]
    cdef int[::1] path = np.zeros(max(c, 1), dtype=np.intc)
    cdef char[::1] visited = np.zeros(max(n, 1), dtype=np.int8)
    cdef Py_ssize_t total = 0
    cdef int i
    if c < 2 or c > n:
        return np.zeros((0, max(c, 0)), dtype=np.int64)
    with nogil:
        for i in range(n):
            path[0] = i
            visited[i] = 1
            total = _dfs_list(1, c, n, support, &path[0], &visited[0], NULL, total, 0)
            visited[i] = 0
    out = np.empty((total, c), dtype=np.int64)
    cdef long long[:, ::1] ov = out
    cdef long long* optr = &ov[0, 0] if total > 0 else NULL
    total = 0
    with nogil:
        for i in range(n):
            path[0] = i
            visited[i] = 1
            total = _dfs_list(1, c, n, support, &path[0], &visited[0], optr, total, 1)
            visited[i] = 0
    return out
