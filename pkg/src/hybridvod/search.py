"""
Queue-driven heuristic content search from a proxy through cluster heads.

The search walks the cluster-head graph level by level:

* the FIFO queue is seeded with every cluster head on the level directly
  below the proxy;
* a dequeued head ``v`` is a hit if it holds the chunk, or if one of its
  cluster members joined to it by an *active* intra-level link does;
* otherwise the heads ``v`` reaches over its down-links are enqueued, each
  at most once per search.

Level-order exploration makes the reported hop count the depth of the
first covering head, i.e. the shortest distance in the head graph. Each
level of descent costs one query latency; once that exceeds the session
window the search gives up.

``bfs_distance_oracle`` recomputes the same distance with networkx and is
kept independent of the queue implementation so tests can compare them.
"""
import math
from collections import deque
from dataclasses import dataclass
from typing import Union

import networkx as nx

from .errors import InvalidArgument
from .topology import LinkKind, NodeKind

QUERY_LATENCY = 0.010  # seconds per level of descent


@dataclass(frozen=True)
class SearchQuery:
    target: tuple  # (asset id, chunk index)
    origin: int  # proxy id


@dataclass(frozen=True)
class SessionWindow:
    start: float = 0.0
    duration: float = 1.0

    def __post_init__(self):
        if self.duration <= 0:
            raise InvalidArgument("session duration must be > 0")


@dataclass(frozen=True)
class Found:
    hop_count: int
    source: int
    path: tuple  # head chain from the level below the proxy down to the source
    elapsed: float


@dataclass(frozen=True)
class NotFound:
    elapsed: float


SearchOutcome = Union[Found, NotFound]


def max_depth(window, latency):
    if latency <= 0:
        return math.inf
    return int(math.floor(window.duration / latency + 1e-9))


class PathSearcher:
    """Precomputed head graph for repeated searches on one wiring.

    The adjacency (which slots are active) is read from the topology passed
    to :meth:`search`, so a sweep can resample adjacency without rebuilding
    the index.
    """

    def __init__(self, topology, clusters, latency=QUERY_LATENCY):
        self.topology = topology
        self.latency = latency
        self.members = {}
        self.head_of = {}
        self.heads_at = {}
        for lvl, cls in clusters.items():
            for c in cls:
                self.members[c.head] = tuple(m for m in c.members if m != c.head)
                for m in c.members:
                    self.head_of[m] = c.head
                self.heads_at.setdefault(lvl, []).append(c.head)
        for a in topology.nodes_at(0, NodeKind.ARCHIVE):
            self.members[a] = ()
            self.head_of[a] = a
            self.heads_at.setdefault(0, []).append(a)
        for lvl in self.heads_at:
            self.heads_at[lvl].sort()

        self.down = {}
        self.intra_slot = {}
        for h in self.members:
            node = topology.node(h)
            self.down[h] = tuple(sorted({s.endpoint for s in node.link_slots
                                         if s.kind is LinkKind.DOWN and s.endpoint in self.members}))
        for lvl, cls in clusters.items():
            for c in cls:
                for m in c.members:
                    for i, s in enumerate(topology.node(m).link_slots):
                        if s.kind is LinkKind.INTRA and s.endpoint is not None:
                            self.intra_slot[(m, s.endpoint)] = i

    def linked(self, active, a, b):
        i = self.intra_slot.get((a, b))
        if i is not None and i in active.get(a, ()):
            return True
        j = self.intra_slot.get((b, a))
        return j is not None and j in active.get(b, ())

    def search(self, placement, query, window=SessionWindow(), topology=None):
        topo = topology if topology is not None else self.topology
        origin = topo.node(query.origin)
        if origin.kind is not NodeKind.PROXY:
            raise InvalidArgument(f"search origin {query.origin} is not a proxy")
        active = topo.active
        target = query.target
        limit = max_depth(window, self.latency)

        seeds = self.heads_at.get(origin.level - 1, [])
        queue = deque((h, 1) for h in seeds)
        parent = {h: None for h in seeds}
        while queue:
            v, depth = queue.popleft()
            if depth > limit:
                break
            hit = None
            if placement.holds(v, target):
                hit = v
            else:
                for w in self.members[v]:
                    if placement.holds(w, target) and self.linked(active, v, w):
                        hit = w
                        break
            if hit is not None:
                chain = []
                u = v
                while u is not None:
                    chain.append(u)
                    u = parent[u]
                chain.reverse()
                if hit != v:
                    chain.append(hit)
                return Found(depth, hit, tuple(chain), depth * self.latency)
            for h in self.down[v]:
                if h not in parent:
                    parent[h] = v
                    queue.append((h, depth + 1))
        return NotFound(window.duration)


def heuristic_path_search(topology, placement, clusters, query, window=SessionWindow(),
                          latency=QUERY_LATENCY) -> SearchOutcome:
    return PathSearcher(topology, clusters, latency).search(placement, query, window)


def transfer_route(topology, origin, outcome):
    """Node sequence a found chunk travels, source first, proxy last."""
    return tuple(reversed(outcome.path)) + (origin,)


# ----------------------------------------------------------------------
# Oracle
# ----------------------------------------------------------------------


def _active_intra(topology, a, b):
    for owner, other in ((a, b), (b, a)):
        for i, s in enumerate(topology.node(owner).link_slots):
            if s.kind is LinkKind.INTRA and s.endpoint == other and topology.is_active(owner, i):
                return True
    return False


def bfs_distance_oracle(topology, clusters, origin, target_nodes):
    """Shortest head-graph distance from ``origin`` to a head covering a target.

    A head covers a node if it is that node, or the node is in its cluster
    and the two share an active intra-level link. Returns ``None`` when no
    covering head is reachable.
    """
    heads = {c.head: c for cls in clusters.values() for c in cls}
    archives = set(topology.nodes_at(0, NodeKind.ARCHIVE))
    g = nx.DiGraph()
    src = ("origin", origin)
    g.add_node(src)
    below = topology.node(origin).level - 1
    for h in list(heads) + list(archives):
        g.add_node(h)
        if topology.node(h).level == below:
            g.add_edge(src, h)
        for s in topology.node(h).link_slots:
            if s.kind is LinkKind.DOWN and (s.endpoint in heads or s.endpoint in archives):
                g.add_edge(h, s.endpoint)

    covers = set()
    for t in target_nodes:
        if t in heads or t in archives:
            covers.add(t)
        for h, c in heads.items():
            if t != h and t in c.members and _active_intra(topology, h, t):
                covers.add(h)

    dist = nx.single_source_shortest_path_length(g, src)
    found = [dist[h] for h in covers if h in dist]
    return min(found) if found else None
