"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and bit-identical outputs. Connectivity here uses vectorized
reachability propagation across a whole block of samples instead of one DFS per
sample, which keeps the fallback usable at Monte Carlo scale.
"""
import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0**-53
_ENUM_CHUNK = 1 << 15


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(key, start, count, n_links):
    rows = np.arange(start, start + count, dtype=np.uint64)[:, None]
    counters = rows * np.uint64(n_links) + np.arange(n_links, dtype=np.uint64)
    z = np.uint64(key) + (counters + np.uint64(1)) * _GAMMA
    return (_mix(z) >> np.uint64(11)).astype(np.float64) * _TWO_M53


def sample_states(key, start, count, probs):
    probs = np.asarray(probs, dtype=np.float64)
    return (uniforms(key, start, count, probs.shape[0]) < probs).astype(np.uint8)


def _reach_terminal(alive_t, link_u, link_v, n_nodes, source, terminal):
    # alive_t: (n_links, m) bool
    m = alive_t.shape[1]
    if source == terminal:
        return np.ones(m, dtype=np.uint8)
    reach = np.zeros((n_nodes, m), dtype=bool)
    reach[source] = True
    changed = True
    while changed:
        changed = False
        for l in range(alive_t.shape[0]):
            u, v = link_u[l], link_v[l]
            a = alive_t[l]
            new_u = reach[v] & a & ~reach[u]
            if new_u.any():
                reach[u] |= new_u
                changed = True
            new_v = reach[u] & a & ~reach[v]
            if new_v.any():
                reach[v] |= new_v
                changed = True
    return reach[terminal].astype(np.uint8)


def connected_batch(states, indptr, nbr, lnk, link_u, link_v, source, terminal):
    states = np.asarray(states)
    alive_t = np.ascontiguousarray(states.T.astype(bool))
    return _reach_terminal(alive_t, link_u, link_v, len(indptr) - 1, source, terminal)


def sample_and_check(key, start, count, probs, indptr, nbr, lnk, link_u, link_v,
                     source, terminal):
    states = sample_states(key, start, count, probs)
    return connected_batch(states, indptr, nbr, lnk, link_u, link_v, source, terminal)


def enumerate_reliability(probs, indptr, nbr, lnk, link_u, link_v, source, terminal):
    probs = np.asarray(probs, dtype=np.float64)
    n_links = probs.shape[0]
    n_states = 1 << n_links
    shifts = np.arange(n_links, dtype=np.int64)
    total = 0.0
    for lo in range(0, n_states, _ENUM_CHUNK):
        idx = np.arange(lo, min(lo + _ENUM_CHUNK, n_states), dtype=np.int64)
        bits = ((idx[:, None] >> shifts) & 1).astype(bool)
        p = np.where(bits, probs, 1.0 - probs).prod(axis=1)
        ok = _reach_terminal(np.ascontiguousarray(bits.T), link_u, link_v,
                             len(indptr) - 1, source, terminal)
        total += float(p[ok.astype(bool)].sum())
    return total
