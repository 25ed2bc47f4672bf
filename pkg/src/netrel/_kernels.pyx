# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: keyed Bernoulli sampling, s-t depth-first search, enumeration.

Every function here has a numpy twin in ``_fallback`` with the same signature
and bit-identical results (exact enumeration agrees to rounding only).
"""
import numpy as np

from libc.stdint cimport int32_t, int64_t, uint8_t, uint64_t

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, uint64_t counter) noexcept nogil:
    return <double>(_mix(key + (counter + 1) * GAMMA) >> 11) * TWO_M53


cdef inline int _st_dfs(const uint8_t* alive,
                        const int64_t[::1] indptr,
                        const int32_t[::1] nbr,
                        const int32_t[::1] lnk,
                        int source, int terminal,
                        int64_t[::1] visited, int64_t stamp,
                        int32_t[::1] stack) noexcept nogil:
    cdef int top, u, v
    cdef int64_t k
    if source == terminal:
        return 1
    visited[source] = stamp
    stack[0] = source
    top = 1
    while top > 0:
        top -= 1
        u = stack[top]
        for k in range(indptr[u], indptr[u + 1]):
            if alive[lnk[k]]:
                v = nbr[k]
                if visited[v] != stamp:
                    if v == terminal:
                        return 1
                    visited[v] = stamp
                    stack[top] = v
                    top += 1
    return 0


def uniforms(uint64_t key, int64_t start, int64_t count, int64_t n_links):
    """Counter-based uniforms in [0, 1), shape (count, n_links)."""
    out = np.empty((count, n_links), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef int64_t i, l
    cdef uint64_t base
    with nogil:
        for i in range(count):
            base = <uint64_t>(start + i) * <uint64_t>n_links
            for l in range(n_links):
                o[i, l] = _uniform(key, base + <uint64_t>l)
    return out


def sample_states(uint64_t key, int64_t start, int64_t count, const double[::1] probs):
    """Roadway states for samples start..start+count-1 (1 = survived)."""
    cdef int64_t n_links = probs.shape[0]
    out = np.empty((count, n_links), dtype=np.uint8)
    cdef uint8_t[:, ::1] o = out
    cdef int64_t i, l
    cdef uint64_t base
    with nogil:
        for i in range(count):
            base = <uint64_t>(start + i) * <uint64_t>n_links
            for l in range(n_links):
                o[i, l] = _uniform(key, base + <uint64_t>l) < probs[l]
    return out


def connected_batch(const uint8_t[:, ::1] states,
                    const int64_t[::1] indptr, const int32_t[::1] nbr,
                    const int32_t[::1] lnk, const int32_t[::1] link_u,
                    const int32_t[::1] link_v, int source, int terminal):
    """s-t connectivity indicator for every row of ``states``."""
    cdef int64_t m = states.shape[0]
    cdef int n_nodes = indptr.shape[0] - 1
    out = np.zeros(m, dtype=np.uint8)
    cdef uint8_t[::1] o = out
    cdef int64_t[::1] visited = np.zeros(n_nodes, dtype=np.int64)
    cdef int32_t[::1] stack = np.empty(max(n_nodes, 1), dtype=np.int32)
    cdef int64_t i
    with nogil:
        for i in range(m):
            o[i] = _st_dfs(&states[i, 0] if states.shape[1] > 0 else NULL,
                           indptr, nbr, lnk, source, terminal, visited, i + 1, stack)
    return out


def sample_and_check(uint64_t key, int64_t start, int64_t count, const double[::1] probs,
                     const int64_t[::1] indptr, const int32_t[::1] nbr,
                     const int32_t[::1] lnk, const int32_t[::1] link_u,
                     const int32_t[::1] link_v, int source, int terminal):
    """Fused draw + DFS: connectivity indicators for a block of samples."""
    cdef int64_t n_links = probs.shape[0]
    cdef int n_nodes = indptr.shape[0] - 1
    out = np.zeros(count, dtype=np.uint8)
    cdef uint8_t[::1] o = out
    cdef uint8_t[::1] alive = np.zeros(max(n_links, 1), dtype=np.uint8)
    cdef int64_t[::1] visited = np.zeros(n_nodes, dtype=np.int64)
    cdef int32_t[::1] stack = np.empty(max(n_nodes, 1), dtype=np.int32)
    cdef int64_t i, l
    cdef uint64_t base
    with nogil:
        for i in range(count):
            base = <uint64_t>(start + i) * <uint64_t>n_links
            for l in range(n_links):
                alive[l] = _uniform(key, base + <uint64_t>l) < probs[l]
            o[i] = _st_dfs(&alive[0], indptr, nbr, lnk, source, terminal,
                           visited, i + 1, stack)
    return out


def enumerate_reliability(const double[::1] probs,
                          const int64_t[::1] indptr, const int32_t[::1] nbr,
                          const int32_t[::1] lnk, const int32_t[::1] link_u,
                          const int32_t[::1] link_v, int source, int terminal):
    """Sum of P(state) over all 2**n_links states in which source reaches terminal."""
    cdef int64_t n_links = probs.shape[0]
    cdef int n_nodes = indptr.shape[0] - 1
    cdef uint8_t[::1] alive = np.zeros(max(n_links, 1), dtype=np.uint8)
    cdef int64_t[::1] visited = np.zeros(n_nodes, dtype=np.int64)
    cdef int32_t[::1] stack = np.empty(max(n_nodes, 1), dtype=np.int32)
    cdef int64_t state, l, n_states = (<int64_t>1) << n_links
    cdef double p, total = 0.0
    with nogil:
        for state in range(n_states):
            p = 1.0
            for l in range(n_links):
                if (state >> l) & 1:
                    alive[l] = 1
                    p *= probs[l]
                else:
                    alive[l] = 0
                    p *= 1.0 - probs[l]
            if p != 0.0 and _st_dfs(&alive[0], indptr, nbr, lnk, source, terminal,
                                    visited, state + 1, stack):
                total += p
    return total
