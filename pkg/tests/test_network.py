import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import WHEATSTONE_EDGES, make_net
from netrel import DataError
from netrel.fragility import roadway_survival_probs
from netrel.datasets import default_network, read_text
from netrel.network import (MAX_ENUM_LINKS, connected_batch, exact_reliability, is_connected,
                            load_network, network_from_dict)
from oracles import paths_exist, random_graph, reliability_by_enumeration


def test_minimal_network_loads():
    text = json.dumps({"nodes": [0, 1], "links": [{"id": 0, "endpoints": [0, 1], "bridge_ids": []}],
                       "source": 0, "terminal": 1})
    net = load_network(text)
    assert net.n_links == 1
    assert net.links[0].invulnerable


@pytest.mark.parametrize("mutate, match", [
    (lambda d: d["links"][0].update(endpoints=[0, 99]), "unknown"),
    (lambda d: d.update(terminal=0), "distinct|differ|same"),
    (lambda d: d["links"].append({"id": 0, "endpoints": [0, 1], "bridge_ids": []}), "id"),
    (lambda d: d["links"][0].update(endpoints=[1, 1]), "self"),
    (lambda d: d["links"][0].update(bridge_ids=[3, 3]), "twice"),
    (lambda d: d.update(source=7), "source"),
])
def test_validation_errors(mutate, match):
    data = {"nodes": [0, 1, 2], "links": [{"id": 0, "endpoints": [0, 1], "bridge_ids": []},
                                         {"id": 1, "endpoints": [1, 2], "bridge_ids": []}],
            "source": 0, "terminal": 2}
    mutate(data)
    with pytest.raises(DataError, match=match):
        network_from_dict(data)


def test_malformed_json():
    with pytest.raises(DataError):
        load_network("{not json")


def test_non_dense_link_ids_rejected():
    data = {"nodes": [0, 1], "links": [{"id": 1, "endpoints": [0, 1], "bridge_ids": []}],
            "source": 0, "terminal": 1}
    with pytest.raises(DataError):
        network_from_dict(data)


def test_shipped_network_shape():
    net = default_network()
    assert len(net.nodes) == 12 and net.n_links == 18
    assert sum(1 for r in net.links if r.bridge_ids) == 14
    assert len(net.bridge_ids) == 39
    assert "description" in json.loads(read_text("network.json"))


def test_parallel_links_allowed():
    net = make_net([(0, 1), (0, 1)])
    assert exact_reliability(net, [0.5, 0.5]) == pytest.approx(0.75)


def test_chain(chain):
    assert is_connected(chain, [1, 1]) == 1
    assert is_connected(chain, [0, 1]) == 0
    assert is_connected(chain, [1, 0]) == 0


def test_dimension_mismatch(chain):
    with pytest.raises(DataError):
        is_connected(chain, [1, 1, 1])
    with pytest.raises(DataError):
        is_connected(chain, [1, 2])


def test_wheatstone_diagonal_path(wheatstone):
    # links 0-2 and 2-3 are dead, 0-1, 1-2 ... exercise every state against the oracle
    for bits in range(32):
        states = [(bits >> i) & 1 for i in range(5)]
        assert is_connected(wheatstone, states) == paths_exist(4, WHEATSTONE_EDGES, states, 0, 3)
    # only the crossing path s-1-2-t: links 0 (0-1), 2 (1-2), 4 (2-3)
    assert is_connected(wheatstone, [1, 0, 1, 0, 1]) == 1


def test_exact_small_cases(wheatstone):
    assert exact_reliability(make_net([(0, 1), (0, 1)]), [0.5, 0.5]) == pytest.approx(0.75)
    assert exact_reliability(make_net([(0, 1), (1, 2)]), [0.9, 0.8]) == pytest.approx(0.72)
    ref = reliability_by_enumeration(4, WHEATSTONE_EDGES, [0.5] * 5, 0, 3)
    assert ref == pytest.approx(0.5)
    assert exact_reliability(wheatstone, [0.5] * 5) == pytest.approx(ref, abs=1e-15)


def test_exact_guard_and_range():
    big = make_net([(i, i + 1) for i in range(MAX_ENUM_LINKS + 1)])
    with pytest.raises(DataError):
        exact_reliability(big, [1.0] * big.n_links)
    with pytest.raises(DataError):
        exact_reliability(make_net([(0, 1)]), [1.5])


def test_is_connected_matches_brute_force_on_random_graphs():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n, edges = random_graph(rng)
        net = make_net(edges, n=n)
        states = rng.integers(0, 2, len(edges))
        expected = int(paths_exist(n, edges, states, 0, n - 1))
        assert is_connected(net, states) == expected
        assert connected_batch(net, states[None, :])[0] == expected


def test_exact_matches_naive_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n, edges = random_graph(rng, max_nodes=6, max_links=8)
        net = make_net(edges, n=n)
        p = rng.random(len(edges))
        assert exact_reliability(net, p) == pytest.approx(
            reliability_by_enumeration(n, edges, p, 0, n - 1), abs=1e-12)


graphs = st.integers(0, 2**32 - 1).map(lambda s: random_graph(np.random.default_rng(s), 7, 9))


@settings(max_examples=60, deadline=None)
@given(graphs, st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_exact_is_monotone(graph, seed, bump):
    n, edges = graph
    net = make_net(edges, n=n)
    rng = np.random.default_rng(seed)
    p = rng.random(len(edges))
    i = int(rng.integers(len(edges)))
    q = p.copy()
    q[i] = p[i] + bump * (1 - p[i])
    assert exact_reliability(net, q) >= exact_reliability(net, p) - 1e-12


@settings(max_examples=60, deadline=None)
@given(graphs)
def test_all_ones_reliability_is_connectivity(graph):
    n, edges = graph
    net = make_net(edges, n=n)
    assert exact_reliability(net, [1.0] * len(edges)) == is_connected(net, [1] * len(edges))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bridgeless_roadways_are_fixed_at_one(seed):
    rng = np.random.default_rng(seed)
    n, edges = random_graph(rng, 7, 9)
    bridges = [[i] if rng.random() < 0.6 else [] for i in range(len(edges))]
    net = make_net(edges, n=n, bridges=bridges)
    p = roadway_survival_probs(net, {i: float(rng.random()) for i in range(len(edges))})
    q = p.copy()
    for r in net.links:
        if r.invulnerable:
            q[r.id] = 1.0
    assert exact_reliability(net, p) == exact_reliability(net, q)
