"""Undirected road network, two-terminal connectivity, and exact enumeration."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from ._backend import kernels
from .errors import DataError

#: enumeration visits 2**n states; beyond this it is impractical
MAX_ENUM_LINKS = 25


@dataclass(frozen=True)
class Roadway:
    id: int
    endpoints: tuple[int, int]
    bridge_ids: tuple[int, ...] = ()

    @property
    def invulnerable(self) -> bool:
        return not self.bridge_ids


class GraphArrays(NamedTuple):
    """Index-based adjacency (CSR) handed to the kernels."""

    indptr: np.ndarray   # int64, n_nodes + 1
    nbr: np.ndarray      # int32, neighbour node index per half-edge
    lnk: np.ndarray      # int32, link id per half-edge
    link_u: np.ndarray   # int32, first endpoint index per link
    link_v: np.ndarray   # int32
    source: int
    terminal: int


@dataclass(frozen=True)
class TransportNetwork:
    """Road network G = (V, E) with a designated source and terminal.

    Links are stored in id order, so ``links[i].id == i``. Parallel links
    between the same pair of nodes are allowed. Instances are immutable and
    safe to share between threads.
    """

    nodes: tuple[int, ...]
    links: tuple[Roadway, ...]
    source: int
    terminal: int
    name: str = field(default="", compare=False)

    def __post_init__(self):
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise DataError("duplicate node ids")
        if self.source not in node_set or self.terminal not in node_set:
            raise DataError("source and terminal must be listed in nodes")
        if self.source == self.terminal:
            raise DataError("source and terminal must differ")
        ids = [r.id for r in self.links]
        if sorted(ids) != list(range(len(ids))):
            raise DataError(f"link ids must be dense and unique 0..{len(ids) - 1}, got {sorted(ids)}")
        if ids != sorted(ids):
            object.__setattr__(self, "links", tuple(sorted(self.links, key=lambda r: r.id)))
        for r in self.links:
            a, b = r.endpoints
            if a not in node_set or b not in node_set:
                raise DataError(f"link {r.id} references unknown node ({a}, {b})")
            if a == b:
                raise DataError(f"link {r.id} is a self-loop on node {a}")
            if len(set(r.bridge_ids)) != len(r.bridge_ids):
                raise DataError(f"link {r.id} lists a bridge twice")

    @property
    def n_links(self) -> int:
        return len(self.links)

    @cached_property
    def node_index(self) -> dict[int, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    @cached_property
    def adjacency(self) -> dict[int, list[tuple[int, int]]]:
        """node id -> [(neighbour id, link id), ...]"""
        adj: dict[int, list[tuple[int, int]]] = {n: [] for n in self.nodes}
        for r in self.links:
            a, b = r.endpoints
            adj[a].append((b, r.id))
            adj[b].append((a, r.id))
        return adj

    @cached_property
    def arrays(self) -> GraphArrays:
        idx = self.node_index
        n = len(self.nodes)
        deg = np.zeros(n + 1, dtype=np.int64)
        for node, nbrs in self.adjacency.items():
            deg[idx[node] + 1] = len(nbrs)
        indptr = np.cumsum(deg)
        nbr = np.empty(indptr[-1], dtype=np.int32)
        lnk = np.empty(indptr[-1], dtype=np.int32)
        for node, nbrs in self.adjacency.items():
            start = indptr[idx[node]]
            for k, (other, link_id) in enumerate(nbrs):
                nbr[start + k] = idx[other]
                lnk[start + k] = link_id
        link_u = np.array([idx[r.endpoints[0]] for r in self.links], dtype=np.int32)
        link_v = np.array([idx[r.endpoints[1]] for r in self.links], dtype=np.int32)
        return GraphArrays(indptr, nbr, lnk, link_u, link_v,
                           idx[self.source], idx[self.terminal])

    @cached_property
    def bridge_ids(self) -> tuple[int, ...]:
        """All bridge ids carried by the network, sorted."""
        return tuple(sorted({b for r in self.links for b in r.bridge_ids}))

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "links": [{"id": r.id, "endpoints": list(r.endpoints),
                       "bridge_ids": list(r.bridge_ids)} for r in self.links],
            "source": self.source,
            "terminal": self.terminal,
        }


def network_from_dict(data: dict, name: str = "") -> TransportNetwork:
    try:
        links = tuple(
            Roadway(int(item["id"]), (int(item["endpoints"][0]), int(item["endpoints"][1])),
                    tuple(int(b) for b in item.get("bridge_ids", [])))
            for item in data["links"]
        )
        for item in data["links"]:
            if len(item["endpoints"]) != 2:
                raise DataError(f"link {item['id']} must have exactly two endpoints")
        return TransportNetwork(tuple(int(n) for n in data["nodes"]), links,
                                int(data["source"]), int(data["terminal"]), name=name)
    except (KeyError, TypeError, IndexError) as exc:
        raise DataError(f"malformed network description: {exc!r}") from exc


def load_network(text: str, name: str = "") -> TransportNetwork:
    """Parse and validate a network file (JSON text)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"network file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError("network file must hold a JSON object")
    return network_from_dict(data, name=name)


def as_topology(net: TransportNetwork, states) -> np.ndarray:
    """Validate a topology realization: a 0/1 vector with one entry per roadway."""
    arr = np.asarray(states)
    if arr.ndim != 1 or arr.shape[0] != net.n_links:
        raise DataError(f"topology has shape {arr.shape}, network has {net.n_links} links")
    if not np.all((arr == 0) | (arr == 1)):
        raise DataError("topology entries must be 0 or 1")
    return arr.astype(np.uint8)


def is_connected(net: TransportNetwork, topo) -> int:
    """1 if surviving roadways join source to terminal, else 0.

    Iterative depth-first search over the adjacency list, O(|V| + |E|).
    """
    states = as_topology(net, topo)
    adj = net.adjacency
    target = net.terminal
    seen = {net.source}
    stack = [net.source]
    while stack:
        node = stack.pop()
        for other, link_id in adj[node]:
            if states[link_id] and other not in seen:
                if other == target:
                    return 1
                seen.add(other)
                stack.append(other)
    return 0


def connected_batch(net: TransportNetwork, states) -> np.ndarray:
    """Vectorized ``is_connected`` over the rows of an (m, n_links) 0/1 matrix."""
    states = np.ascontiguousarray(states, dtype=np.uint8)
    if states.ndim != 2 or states.shape[1] != net.n_links:
        raise DataError(f"states have shape {states.shape}, network has {net.n_links} links")
    g = net.arrays
    return kernels.connected_batch(states, g.indptr, g.nbr, g.lnk, g.link_u, g.link_v,
                                   g.source, g.terminal)


def check_probs(probs: Sequence[float], n_links: int, what="survival probabilities") -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] != n_links:
        raise DataError(f"{what} have shape {p.shape}, expected ({n_links},)")
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise DataError(f"{what} must lie in [0, 1]")
    return np.ascontiguousarray(p)


def exact_reliability(net: TransportNetwork, probs: Sequence[float]) -> float:
    """Exact two-terminal reliability by enumerating all 2**n_links roadway states."""
    if net.n_links > MAX_ENUM_LINKS:
        raise DataError(f"exact enumeration limited to {MAX_ENUM_LINKS} links, network has {net.n_links}")
    p = check_probs(probs, net.n_links)
    g = net.arrays
    return float(kernels.enumerate_reliability(p, g.indptr, g.nbr, g.lnk, g.link_u, g.link_v,
                                               g.source, g.terminal))
