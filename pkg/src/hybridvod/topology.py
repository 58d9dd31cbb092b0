"""
Leveled hybrid P2P/mesh architecture.

Level 0 holds archive storage, level 1 additionally holds the (inert)
billing server, levels ``1..top-1`` hold peers and the top level holds
proxies. Every peer owns exactly ten link slots:

====  ============  ===============================
idx   kind          endpoint
====  ============  ===============================
0-3   UnicastDown   content node one level lower
4-6   ForwardUp     node one level higher
7-9   IntraLevel    peer on the same level
====  ============  ===============================

Slots whose role has no candidate endpoint (e.g. the down slots of a
level-1 peer when there is a single archive) stay empty. Proxies own one
down slot per peer of the level below them and nothing else; there are
never proxy-proxy links.

A ``Topology`` is immutable. Changing the active adjacency returns a new
object sharing the node table.
"""
import enum
import json
from dataclasses import dataclass, field, replace
from types import MappingProxyType

import numpy as np

from .errors import InvalidArgument, TopologyError

DOWN_SLOTS = 4
UP_SLOTS = 3
INTRA_SLOTS = 3
PEER_SLOTS = DOWN_SLOTS + UP_SLOTS + INTRA_SLOTS
MAX_ADJACENCY = 6


class NodeKind(enum.Enum):
    ARCHIVE = "ArchiveStorage"
    PEER = "Peer"
    PROXY = "ProxyServer"
    BILLING = "BillingServer"
    VIEWERS = "ViewerCluster"


class LinkKind(enum.Enum):
    DOWN = "UnicastDown"
    UP = "ForwardUp"
    INTRA = "IntraLevel"


@dataclass(frozen=True)
class LinkSlot:
    kind: LinkKind
    endpoint: int = None  # None for an unwired slot
    capacity: float = 0.0  # kbps


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    level: int
    link_slots: tuple = ()


@dataclass(frozen=True)
class VirtualCluster:
    level: int
    members: tuple
    head: int


@dataclass(frozen=True)
class Topology:
    levels: int
    nodes: tuple  # indexed by node id
    active: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    adjacency_size: int = None

    @property
    def top(self):
        return self.levels - 1

    def node(self, nid) -> Node:
        return self.nodes[nid]

    def nodes_at(self, level, kind=None):
        return [n.id for n in self.nodes
                if n.level == level and (kind is None or n.kind is kind)]

    def peers_at(self, level):
        return self.nodes_at(level, NodeKind.PEER)

    def proxies(self):
        return [n.id for n in self.nodes if n.kind is NodeKind.PROXY]

    def peers(self):
        return [n.id for n in self.nodes if n.kind is NodeKind.PEER]

    def links(self):
        """Every wired slot as ``(owner, endpoint, kind, kbps)``."""
        out = []
        for n in self.nodes:
            for s in n.link_slots:
                if s.endpoint is not None:
                    out.append((n.id, s.endpoint, s.kind, s.capacity))
        return out

    def is_active(self, nid, slot_index) -> bool:
        return slot_index in self.active.get(nid, ())

    def active_slots(self, nid):
        return self.active.get(nid, frozenset())

    def link_capacity(self, a, b) -> float:
        """Capacity of the link joining ``a`` and ``b`` (either owner)."""
        for owner, other in ((a, b), (b, a)):
            for s in self.nodes[owner].link_slots:
                if s.endpoint == other:
                    return s.capacity
        raise TopologyError(f"no link between {a} and {b}")

    def with_adjacency(self, active, size=None) -> "Topology":
        return replace(self, active=MappingProxyType(
            {k: frozenset(v) for k, v in active.items()}), adjacency_size=size)

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.levels == other.levels and self.nodes == other.nodes
                and dict(self.active) == dict(other.active))

    def __hash__(self):
        return hash((self.levels, self.nodes))


# ----------------------------------------------------------------------
# Construction
# ----------------------------------------------------------------------


def link_kbps(level_a, level_b, kbps_range=(400.0, 800.0)):
    """Storage-side links run at the top of the range, the rest at the midpoint.

    The bottom of the range is the viewer-to-proxy link, which never appears
    inside the architecture itself.
    """
    lo, hi = kbps_range
    if min(level_a, level_b) == 0:
        return float(hi)
    return (lo + hi) / 2.0


def _pick(rng, candidates, k):
    if len(candidates) <= k:
        return list(candidates)
    idx = rng.choice(len(candidates), size=k, replace=False)
    return sorted(candidates[i] for i in idx)


def build_hybrid(levels=15, peers_per_level=4, proxy_count=4, *, archive_count=1,
                 kbps_range=(400.0, 800.0), jitter=0.0, adjacency_size=6, seed=0):
    """Build the leveled architecture and select an initial adjacency.

    ``jitter`` perturbs each link capacity uniformly by up to +/- that many
    kbps, clipped to ``kbps_range``. Where a slot role has more candidates
    than slots, endpoints are sampled from ``seed``.
    """
    if levels < 3:
        raise InvalidArgument(f"need at least 3 levels, got {levels}")
    if peers_per_level < 1 or proxy_count < 1 or archive_count < 1:
        raise InvalidArgument("peer, proxy and archive counts must be >= 1")
    lo, hi = kbps_range
    if not 0 < lo <= hi:
        raise InvalidArgument("bad link capacity range")
    rng = np.random.default_rng(seed)
    top = levels - 1

    kinds = []  # (kind, level) by id
    kinds += [(NodeKind.ARCHIVE, 0)] * archive_count
    kinds.append((NodeKind.BILLING, 1))
    for lvl in range(1, top):
        kinds += [(NodeKind.PEER, lvl)] * peers_per_level
    kinds += [(NodeKind.PROXY, top)] * proxy_count

    by_level = {}
    for nid, (kind, lvl) in enumerate(kinds):
        if kind is not NodeKind.BILLING:
            by_level.setdefault(lvl, []).append(nid)

    pair_kbps = {}

    def capacity(a, b):
        key = (min(a, b), max(a, b))
        if key not in pair_kbps:
            c = link_kbps(kinds[a][1], kinds[b][1], kbps_range)
            if jitter:
                c = float(np.clip(c + rng.uniform(-jitter, jitter), lo, hi))
            pair_kbps[key] = c
        return pair_kbps[key]

    def slots(owner, kind, targets, width):
        out = [LinkSlot(kind, t, capacity(owner, t)) for t in targets]
        out += [LinkSlot(kind)] * (width - len(out))
        return out

    nodes = []
    for nid, (kind, lvl) in enumerate(kinds):
        link_slots = []
        if kind is NodeKind.PEER:
            same = [p for p in by_level[lvl] if p != nid]
            link_slots += slots(nid, LinkKind.DOWN, _pick(rng, by_level[lvl - 1], DOWN_SLOTS), DOWN_SLOTS)
            link_slots += slots(nid, LinkKind.UP, _pick(rng, by_level[lvl + 1], UP_SLOTS), UP_SLOTS)
            link_slots += slots(nid, LinkKind.INTRA, _pick(rng, same, INTRA_SLOTS), INTRA_SLOTS)
        elif kind is NodeKind.PROXY:
            below = by_level[top - 1]
            link_slots += slots(nid, LinkKind.DOWN, below, len(below))
        nodes.append(Node(nid, kind, lvl, tuple(link_slots)))

    topo = Topology(levels, tuple(nodes))
    return assign_adjacency(topo, adjacency_size, rng)


# ----------------------------------------------------------------------
# Adjacency
# ----------------------------------------------------------------------


def _check_size(size):
    if not 1 <= size <= MAX_ADJACENCY:
        raise InvalidArgument(f"adjacency size must lie in [1, {MAX_ADJACENCY}], got {size}")


def select_adjacency(topology, node, size, rng):
    """Pick ``size`` of a peer's slots uniformly without replacement."""
    _check_size(size)
    n = topology.node(node)
    if n.kind is not NodeKind.PEER:
        raise InvalidArgument(f"node {node} is not a peer")
    return frozenset(int(i) for i in rng.choice(len(n.link_slots), size=size, replace=False))


def assign_adjacency(topology, size, rng):
    """Return a copy of ``topology`` with a fresh adjacency for every peer."""
    _check_size(size)
    peers = topology.peers()
    if not peers:
        return topology.with_adjacency({}, size)
    # one argsort over a random matrix is a uniform k-subset per row
    order = np.argsort(rng.random((len(peers), PEER_SLOTS)), axis=1)[:, :size]
    active = {p: frozenset(row) for p, row in zip(peers, order.tolist())}
    return topology.with_adjacency(active, size)


# ----------------------------------------------------------------------
# Virtual clusters
# ----------------------------------------------------------------------


def form_clusters(topology, level, placement=None):
    """Partition a level's peers into virtual clusters.

    Clusters are the connected components of the wired intra-level links.
    The head is the member holding the most chunks in ``placement``, ties
    going to the lowest id.
    """
    peers = topology.peers_at(level)
    if not peers:
        raise InvalidArgument(f"level {level} hosts no peers")
    parent = {p: p for p in peers}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for p in peers:
        for s in topology.node(p).link_slots:
            if s.kind is LinkKind.INTRA and s.endpoint in parent:
                ra, rb = find(p), find(s.endpoint)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

    groups = {}
    for p in peers:
        groups.setdefault(find(p), []).append(p)

    def held(p):
        return placement.count(p) if placement is not None else 0

    out = []
    for members in groups.values():
        members = tuple(sorted(members))
        head = min(members, key=lambda p: (-held(p), p))
        out.append(VirtualCluster(level, members, head))
    return sorted(out, key=lambda c: c.members[0])


def all_clusters(topology, placement=None):
    """Clusters for every peer level, keyed by level."""
    return {lvl: form_clusters(topology, lvl, placement)
            for lvl in range(1, topology.top) if topology.peers_at(lvl)}


# ----------------------------------------------------------------------
# Validation and export
# ----------------------------------------------------------------------


def validate(topology):
    """Raise ``TopologyError`` if any structural invariant is broken."""
    nodes = topology.nodes
    top = topology.top
    for n in nodes:
        if n.kind is NodeKind.ARCHIVE and n.level != 0:
            raise TopologyError(f"archive {n.id} not at level 0")
        if n.kind is NodeKind.PROXY and n.level != top:
            raise TopologyError(f"proxy {n.id} not at top level")
        if n.kind is NodeKind.BILLING and n.level != 1:
            raise TopologyError(f"billing server {n.id} not at level 1")
        if n.kind is NodeKind.PEER and len(n.link_slots) != PEER_SLOTS:
            raise TopologyError(f"peer {n.id} has {len(n.link_slots)} slots")
        for s in n.link_slots:
            if s.endpoint is None:
                continue
            other = nodes[s.endpoint]
            if n.kind is NodeKind.PROXY and other.kind is NodeKind.PROXY:
                raise TopologyError(f"proxy-proxy link {n.id}-{other.id}")
            want = {LinkKind.DOWN: n.level - 1, LinkKind.UP: n.level + 1,
                    LinkKind.INTRA: n.level}[s.kind]
            if other.level != want:
                raise TopologyError(f"{s.kind.value} link {n.id}->{other.id} crosses wrong levels")
            if s.capacity <= 0:
                raise TopologyError(f"link {n.id}->{other.id} has no capacity")
        if n.kind is NodeKind.PEER and n.id in topology.active:
            act = topology.active[n.id]
            if not act <= set(range(len(n.link_slots))):
                raise TopologyError(f"peer {n.id} activates a slot it does not own")
            if not 1 <= len(act) <= MAX_ADJACENCY:
                raise TopologyError(f"peer {n.id} adjacency size {len(act)} out of range")


def to_json(topology, clusters=None) -> str:
    if clusters is None:
        clusters = all_clusters(topology)
    links = []
    for n in topology.nodes:
        for i, s in enumerate(n.link_slots):
            if s.endpoint is not None:
                links.append({"from": n.id, "to": s.endpoint, "kind": s.kind.value,
                              "kbps": s.capacity, "slot": i,
                              "active": topology.is_active(n.id, i)})
    doc = {
        "levels": topology.levels,
        "nodes": [_node_record(topology, n) for n in topology.nodes],
        "links": links,
        "clusters": [{"level": c.level, "head": c.head, "members": list(c.members)}
                     for lvl in sorted(clusters) for c in clusters[lvl]],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def _node_record(topology, n):
    rec = {"id": n.id, "kind": n.kind.value, "level": n.level, "slots": len(n.link_slots)}
    if n.kind is NodeKind.PEER:
        rec["active"] = sorted(topology.active_slots(n.id))
    return rec


def from_json(text) -> Topology:
    doc = json.loads(text)
    by_owner = {}
    for ln in doc["links"]:
        by_owner.setdefault(ln["from"], []).append(ln)
    nodes, active = [], {}
    for nd in sorted(doc["nodes"], key=lambda d: d["id"]):
        kind = NodeKind(nd["kind"])
        width = nd.get("slots", 0)
        owned = by_owner.get(nd["id"], [])
        if kind is NodeKind.PEER:
            kinds = [LinkKind.DOWN] * DOWN_SLOTS + [LinkKind.UP] * UP_SLOTS + [LinkKind.INTRA] * INTRA_SLOTS
        else:
            kinds = [LinkKind.DOWN] * width
        link_slots = [LinkSlot(k) for k in kinds]
        for ln in owned:
            link_slots[ln["slot"]] = LinkSlot(LinkKind(ln["kind"]), ln["to"], float(ln["kbps"]))
        if kind is NodeKind.PEER:
            active[nd["id"]] = set(nd.get("active", ()))
        nodes.append(Node(nd["id"], kind, nd["level"], tuple(link_slots)))
    return Topology(doc["levels"], tuple(nodes)).with_adjacency(active)


def to_dot(topology) -> str:
    lines = ["digraph hybrid {", "  rankdir=BT;"]
    for n in topology.nodes:
        lines.append(f'  n{n.id} [label="{n.kind.value} {n.id}\\nL{n.level}"];')
    for a, b, kind, kbps in topology.links():
        lines.append(f'  n{a} -> n{b} [label="{kbps:g}", kind="{kind.value}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_topology(topology, fmt="json", clusters=None) -> str:
    if fmt == "json":
        return to_json(topology, clusters)
    if fmt == "dot":
        return to_dot(topology)
    raise InvalidArgument(f"unknown export format {fmt!r}")
