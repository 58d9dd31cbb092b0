import json
import math
from collections import Counter

import numpy as np
import pytest

from hybridvod.content import PlacementMap
from hybridvod.errors import InvalidArgument, TopologyError
from hybridvod.topology import (LinkKind, LinkSlot, Node, NodeKind, PEER_SLOTS, Topology,
                                all_clusters, assign_adjacency, build_hybrid, export_topology,
                                form_clusters, from_json, select_adjacency, to_json, validate)


@pytest.fixture(scope="module")
def default():
    return build_hybrid(seed=3)


def test_default_counts(default):
    kinds = Counter(n.kind for n in default.nodes)
    assert len(default.nodes) == 58
    assert kinds == {NodeKind.ARCHIVE: 1, NodeKind.PEER: 52, NodeKind.BILLING: 1, NodeKind.PROXY: 4}
    assert default.levels == 15


def test_minimal_chain():
    t = build_hybrid(3, 1, 1, seed=0)
    validate(t)
    (peer,) = t.peers()
    assert t.nodes_at(0) == [0] and t.node(peer).level == 1
    (proxy,) = t.proxies()
    assert [s.endpoint for s in t.node(proxy).link_slots] == [peer]


def test_rejects_too_few_levels():
    with pytest.raises(InvalidArgument):
        build_hybrid(2)


def test_structure_invariants(default):
    validate(default)
    top = default.top
    for n in default.nodes:
        if n.kind is NodeKind.ARCHIVE:
            assert n.level == 0
        if n.kind is NodeKind.PROXY:
            assert n.level == top
        if n.kind is NodeKind.BILLING:
            assert n.level == 1 and not n.link_slots
        if n.kind is NodeKind.PEER:
            assert len(n.link_slots) == PEER_SLOTS
            assert [s.kind for s in n.link_slots] == [LinkKind.DOWN] * 4 + [LinkKind.UP] * 3 + [LinkKind.INTRA] * 3
            assert 1 <= len(default.active_slots(n.id)) <= 6
    for a, b, kind, kbps in default.links():
        assert 400 <= kbps <= 800
        na, nb = default.node(a), default.node(b)
        assert not (na.kind is NodeKind.PROXY and nb.kind is NodeKind.PROXY)
        delta = {LinkKind.DOWN: -1, LinkKind.UP: 1, LinkKind.INTRA: 0}[kind]
        assert nb.level - na.level == delta


def test_capacity_rule(default):
    for a, b, _, kbps in default.links():
        la, lb = default.node(a).level, default.node(b).level
        assert kbps == (800 if min(la, lb) == 0 else 600)


def test_down_links_acyclic(default):
    import networkx as nx
    g = nx.DiGraph((a, b) for a, b, k, _ in default.links() if k is LinkKind.DOWN)
    assert nx.is_directed_acyclic_graph(g)


def test_construction_deterministic():
    assert build_hybrid(seed=11) == build_hybrid(seed=11)
    assert to_json(build_hybrid(seed=11)) == to_json(build_hybrid(seed=11))


def test_validate_catches_proxy_link():
    nodes = (Node(0, NodeKind.ARCHIVE, 0, ()),
             Node(1, NodeKind.PEER, 1, tuple([LinkSlot(LinkKind.DOWN, 0, 800)] + [LinkSlot(LinkKind.DOWN)] * 9)),
             Node(2, NodeKind.PROXY, 2, (LinkSlot(LinkKind.DOWN, 3, 600),)),
             Node(3, NodeKind.PROXY, 2, ()))
    with pytest.raises(TopologyError):
        validate(Topology(3, nodes))


# --- adjacency --------------------------------------------------------------

def test_select_adjacency_sizes(default):
    peer = default.peers()[0]
    rng = np.random.default_rng(0)
    assert len(select_adjacency(default, peer, 1, rng)) == 1
    a = select_adjacency(default, peer, 6, np.random.default_rng(9))
    b = select_adjacency(default, peer, 6, np.random.default_rng(9))
    assert a == b and len(a) == 6
    for bad in (0, 7):
        with pytest.raises(InvalidArgument):
            select_adjacency(default, peer, bad, rng)
    with pytest.raises(InvalidArgument):
        select_adjacency(default, default.proxies()[0], 2, rng)


def test_select_adjacency_uniform_within_three_sigma(default):
    peer = default.peers()[5]
    rng = np.random.default_rng(2024)
    n = 10_000
    counts = Counter(next(iter(select_adjacency(default, peer, 1, rng))) for _ in range(n))
    sigma = math.sqrt(n * 0.1 * 0.9)
    assert set(counts) == set(range(PEER_SLOTS))
    for c in counts.values():
        assert abs(c - n / 10) <= 3 * sigma


def test_assign_adjacency_returns_new_state(default):
    rng = np.random.default_rng(1)
    t2 = assign_adjacency(default, 2, rng)
    assert t2.nodes is default.nodes
    assert all(len(t2.active_slots(p)) == 2 for p in t2.peers())
    assert all(len(default.active_slots(p)) == 6 for p in default.peers())
    validate(t2)


# --- clusters -------------------------------------------------------------------

def test_full_level_is_one_cluster(default):
    for lvl in range(1, default.top):
        (c,) = form_clusters(default, lvl)
        assert c.members == tuple(default.peers_at(lvl))
        assert c.head == min(c.members)


def test_isolated_peers_are_singletons():
    t = build_hybrid(4, 1, 1, seed=0)
    for lvl in (1, 2):
        (c,) = form_clusters(t, lvl)
        assert c.members == (c.head,)


def test_head_holds_most_chunks(default):
    lvl = 3
    peers = default.peers_at(lvl)
    pm = PlacementMap({peers[0]: {(0, 0)}, peers[2]: {(0, 0), (0, 1)}, peers[3]: {(0, 0), (0, 2)}})
    (c,) = form_clusters(default, lvl, pm)
    assert c.head == peers[2]


def test_form_clusters_rejects_empty_level(default):
    with pytest.raises(InvalidArgument):
        form_clusters(default, default.top)


def test_clusters_partition_levels(default):
    clusters = all_clusters(default)
    for lvl, cls in clusters.items():
        members = sorted(m for c in cls for m in c.members)
        assert members == default.peers_at(lvl)
        assert all(c.head in c.members for c in cls)


# --- export ------------------------------------------------------------------------

def test_json_round_trip(default):
    text = export_topology(default, "json")
    again = from_json(text)
    assert again == default
    doc = json.loads(text)
    assert len(doc["nodes"]) == 58
    assert len(doc["links"]) == len(default.links())
    assert {"levels", "nodes", "links", "clusters"} <= set(doc)


def test_dot_has_one_edge_per_link(default):
    dot = export_topology(default, "dot")
    assert dot.count("->") == len(default.links())
    assert dot.count("[label=") - dot.count("->") == 58


def test_unknown_format(default):
    with pytest.raises(InvalidArgument):
        export_topology(default, "yaml")
