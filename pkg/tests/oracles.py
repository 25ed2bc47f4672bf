"""Reference implementations used only by the tests.

They are deliberately naive and share no code with the package.
"""
import itertools
import math

import numpy as np


def paths_exist(n_nodes, edges, states, s, t):
    """Enumerate simple paths from s by recursion; True once one reaches t."""
    adj = {v: [] for v in range(n_nodes)}
    for (u, v), alive in zip(edges, states):
        if alive:
            adj[u].append(v)
            adj[v].append(u)

    def walk(node, on_path):
        if node == t:
            return True
        return any(walk(nxt, on_path | {nxt}) for nxt in adj[node] if nxt not in on_path)

    return walk(s, {s})


def reliability_by_enumeration(n_nodes, edges, probs, s, t):
    total = 0.0
    for states in itertools.product((0, 1), repeat=len(edges)):
        weight = math.prod(p if x else 1.0 - p for x, p in zip(states, probs))
        if weight and paths_exist(n_nodes, edges, states, s, t):
            total += weight
    return total


def random_graph(rng, max_nodes=10, max_links=12):
    """Random multigraph with source 0 and terminal n-1 (may be disconnected)."""
    n = int(rng.integers(2, max_nodes + 1))
    m = int(rng.integers(1, max_links + 1))
    edges = []
    while len(edges) < m:
        u, v = (int(x) for x in rng.integers(0, n, 2))
        if u != v:
            edges.append((u, v))
    return n, edges


def as_dict(n, edges, s=0, t=None, bridges=None):
    t = n - 1 if t is None else t
    links = [{"id": i, "endpoints": list(e), "bridge_ids": list(bridges[i]) if bridges else []}
             for i, e in enumerate(edges)]
    return {"nodes": list(range(n)), "links": links, "source": s, "terminal": t}


def _ld_act(name, z):
    if name == "relu":
        return np.maximum(z, 0)
    if name == "sigmoid":
        return 1 / (1 + np.exp(-z))
    if name == "tanh":
        return np.tanh(z)
    return z


def ld_loss(params, acts, X, Y, loss):
    """Forward pass and loss in extended precision; params = [(W, b), ...]."""
    a = np.asarray(X, dtype=np.longdouble)
    for (W, b), act in zip(params, acts):
        a = _ld_act(act, a @ W + b)
    Y = np.asarray(Y, dtype=np.longdouble)
    if loss == "mse":
        return np.sum((Y - a) ** 2) / (2 * a.shape[0])
    p = np.clip(a, 1e-12, 1 - 1e-12)
    return -np.sum(Y * np.log(p) + (1 - Y) * np.log1p(-p))


def fd_gradients(model, X, Y, loss, h=1e-6):
    """Central differences of the loss w.r.t. every weight and bias, in extended precision."""
    params = [(l.weights.astype(np.longdouble), l.bias.astype(np.longdouble)) for l in model.layers]
    acts = [l.activation for l in model.layers]
    out = []
    for W, b in params:
        grads = []
        for arr in (W, b):
            g = np.zeros(arr.shape, dtype=np.longdouble)
            for i in range(arr.size):
                old = arr.flat[i]
                arr.flat[i] = old + h
                fp = ld_loss(params, acts, X, Y, loss)
                arr.flat[i] = old - h
                fm = ld_loss(params, acts, X, Y, loss)
                arr.flat[i] = old
                g.flat[i] = (fp - fm) / (2 * h)
            grads.append(g.astype(np.float64))
        out.append(tuple(grads))
    return out
