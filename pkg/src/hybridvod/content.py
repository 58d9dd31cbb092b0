"""Video assets, chunk placement across tiers, and the proxy LRFU cache."""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidArgument
from .topology import NodeKind


@dataclass(frozen=True)
class VideoAsset:
    id: int
    duration: float  # seconds
    frame_rate: float = 30.0
    gop_length: int = 30  # frames per chunk
    avg_bitrate: float = 600.0  # kbps

    @property
    def chunk_count(self):
        return math.ceil(self.duration * self.frame_rate / self.gop_length - 1e-9)


@dataclass(frozen=True)
class Chunk:
    asset: int
    index: int
    size: float  # kilobits
    play_time: float  # seconds

    @property
    def key(self):
        return (self.asset, self.index)


def chunkify(asset: VideoAsset):
    """Split an asset into one chunk per group of pictures.

    The last chunk carries whatever partial GOP remains.
    """
    if asset.duration <= 0:
        raise InvalidArgument("asset duration must be > 0")
    if asset.frame_rate <= 0 or asset.gop_length <= 0:
        raise InvalidArgument("frame rate and GOP length must be > 0")
    gop_time = asset.gop_length / asset.frame_rate
    chunks = []
    for i in range(asset.chunk_count):
        play = min(gop_time, asset.duration - i * gop_time)
        chunks.append(Chunk(asset.id, i, play * asset.avg_bitrate, play))
    return chunks


def make_catalog(count, duration, frame_rate=30.0, gop_length=30, avg_bitrate=600.0):
    return [VideoAsset(i, duration, frame_rate, gop_length, avg_bitrate) for i in range(count)]


# ----------------------------------------------------------------------
# Placement
# ----------------------------------------------------------------------


class PlacementMap:
    """Node id -> set of ``(asset, chunk index)`` keys held locally."""

    def __init__(self, holdings=None):
        self._held = {int(k): frozenset(v) for k, v in (holdings or {}).items()}

    def holds(self, node, key):
        held = self._held.get(node)
        return held is not None and key in held

    def chunks(self, node):
        return self._held.get(node, frozenset())

    def count(self, node):
        return len(self._held.get(node, ()))

    def nodes(self):
        return sorted(self._held)

    def holders(self, key):
        return [n for n in sorted(self._held) if key in self._held[n]]

    def __eq__(self, other):
        return isinstance(other, PlacementMap) and self._held == other._held

    def to_json(self):
        doc = {str(n): sorted([list(k) for k in self._held[n]]) for n in sorted(self._held)}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls({int(n): {tuple(k) for k in keys} for n, keys in doc.items()})


def place_initial(catalog, topology, share_fraction, rng, profile="uniform"):
    """Distribute chunks over the architecture.

    Archives hold everything. Under ``"uniform"`` each peer keeps every
    chunk independently with probability ``share_fraction``; under
    ``"tiered"`` a peer at level ``l`` keeps it with probability
    ``share_fraction**l``, mirroring how the stream thins out as it climbs
    away from the archive.
    """
    if not 0.0 < share_fraction < 1.0:
        raise ConfigError(f"share fraction must lie in (0, 1), got {share_fraction}")
    if profile not in ("uniform", "tiered"):
        raise ConfigError(f"unknown placement profile {profile!r}")
    keys = [(a.id, i) for a in catalog for i in range(a.chunk_count)]
    holdings = {}
    for n in topology.nodes:
        if n.kind is NodeKind.ARCHIVE:
            holdings[n.id] = set(keys)
        elif n.kind is NodeKind.PEER:
            p = share_fraction if profile == "uniform" else share_fraction ** n.level
            mask = rng.random(len(keys)) < p
            holdings[n.id] = {k for k, m in zip(keys, mask) if m}
    return PlacementMap(holdings)


# ----------------------------------------------------------------------
# LRFU proxy cache
# ----------------------------------------------------------------------


@dataclass
class ProxyCache:
    """Cache scored by exponentially decayed access counts.

    Each access adds 1 to an entry's score and the score halves every
    ``half_life`` seconds. A long half-life approaches LFU, a short one
    approaches LRU.
    """
    capacity: int = 120  # chunks
    half_life: float = 60.0  # seconds
    entries: dict = field(default_factory=dict)  # key -> (last_access, score at last_access)

    def __post_init__(self):
        if self.capacity < 1:
            raise InvalidArgument("cache capacity must be >= 1")
        if self.half_life <= 0:
            raise InvalidArgument("half-life must be > 0")

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def score(self, key, now):
        last, s = self.entries[key]
        return s * 2.0 ** (-(now - last) / self.half_life)

    def _touch(self, key, now):
        if key in self.entries:
            self.entries[key] = (now, self.score(key, now) + 1.0)
        else:
            self.entries[key] = (now, 1.0)

    def lookup(self, key, now):
        if key not in self.entries:
            return False
        self._touch(key, now)
        return True

    def victim(self, now):
        # lowest score; on ties the staler entry, then the smaller key
        return min(self.entries,
                   key=lambda k: (self.score(k, now), self.entries[k][0], k))

    def admit(self, key, now):
        if key in self.entries:
            self._touch(key, now)
            return None
        evicted = None
        if len(self.entries) >= self.capacity:
            evicted = self.victim(now)
            del self.entries[evicted]
        self._touch(key, now)
        return evicted


def cache_lookup(cache: ProxyCache, key, now=0.0) -> bool:
    return cache.lookup(key, now)


def cache_admit(cache: ProxyCache, key, now=0.0):
    return cache.admit(key, now)
