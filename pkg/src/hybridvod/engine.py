"""
Discrete-event simulation of proxy admission and tiered content retrieval.

One run owns a topology, a chunk placement, and one proxy state per proxy.
Requests arrive per proxy and per service class as Poisson streams whose
rate scales with the proxy's viewer population. An admitted request holds
a port for its holding time; its chunk is streamed straight from the proxy
cache on a hit, or located with the heuristic head search and pulled up
the tiers store-and-forward on a miss.

Events are ordered by ``(time, sequence)`` so that identical configs and
seeds give identical reports.
"""
import enum
import heapq
import math
import time as _time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import analytic
from .content import ProxyCache, make_catalog, place_initial
from .errors import ConfigError, TopologyError
from .search import PathSearcher, SearchQuery, SessionWindow, transfer_route, Found
from .topology import all_clusters, assign_adjacency, build_hybrid

NOT_FOUND_HOP = 0  # histogram bin for searches that found nothing


@dataclass(frozen=True)
class SimConfig:
    # proxy ports
    ports_per_partition: int = 10
    partition_count: int = 20
    port_access_time: float = 120.0
    disk_bandwidth: float = 120000.0
    admission_threshold: int = 200
    # architecture
    levels: int = 15
    peers_per_level: int = 4
    proxy_count: int = 4
    archive_count: int = 1
    link_kbps_min: float = 400.0
    link_kbps_max: float = 800.0
    link_jitter: float = 0.0
    adjacency_size: int = 6
    # viewers and workload
    viewers_min: int = 20
    viewers_max: int = 40
    arrival_rates: tuple = (0.05, 0.02)  # requests / s per viewer, one entry per class
    playback_rates: tuple = (600.0,)  # kbps, one per class or a single shared value
    holding_times: tuple = ()  # s per class; empty means port_access_time
    holding: str = "exponential"
    burst: bool = False
    zipf_exponent: float = 0.8
    # content
    frame_rate: float = 30.0
    gop_length: int = 30
    avg_bitrate: float = 600.0
    catalog_size: int = 100
    asset_duration: float = 120.0
    share_fraction: float = 0.7
    placement: str = "tiered"
    cache_capacity: int = 120
    cache_half_life: float = 60.0
    # timing
    query_latency: float = 0.01
    propagation_delay: float = 0.01
    session_duration: float = 1.0
    sim_time: float = 480.0
    throughput_bucket: float = 1.0
    seed: int = 1

    def __post_init__(self):
        for name in ("arrival_rates", "playback_rates", "holding_times"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self.validate()

    @property
    def class_count(self):
        return len(self.arrival_rates)

    @property
    def viewer_link_kbps(self):
        return self.link_kbps_min

    def class_playback(self, i):
        rates = self.playback_rates
        return rates[0] if len(rates) == 1 else rates[i]

    def class_holding(self, i):
        return self.holding_times[i] if self.holding_times else self.port_access_time

    def validate(self):
        positive_ints = ("ports_per_partition", "partition_count", "peers_per_level",
                         "proxy_count", "archive_count", "viewers_min", "viewers_max",
                         "catalog_size", "cache_capacity", "admission_threshold", "gop_length")
        for name in positive_ints:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        positive = ("port_access_time", "disk_bandwidth", "sim_time", "frame_rate",
                    "avg_bitrate", "asset_duration", "cache_half_life", "session_duration")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("query_latency", "propagation_delay", "link_jitter",
                     "throughput_bucket", "zipf_exponent"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.levels < 3:
            raise ConfigError("levels must be >= 3")
        if not 1 <= self.adjacency_size <= 6:
            raise ConfigError("adjacency_size must lie in [1, 6]")
        if self.viewers_min > self.viewers_max:
            raise ConfigError("viewers_min exceeds viewers_max")
        if not 0 < self.link_kbps_min <= self.link_kbps_max:
            raise ConfigError("link capacity range must satisfy 0 < min <= max")
        if not 0 < self.share_fraction < 1:
            raise ConfigError("share_fraction must lie in (0, 1)")
        if not self.arrival_rates:
            raise ConfigError("need at least one service class")
        if any(r < 0 for r in self.arrival_rates):
            raise ConfigError("arrival rates must be >= 0")
        if len(self.playback_rates) not in (1, self.class_count):
            raise ConfigError("playback_rates must have one entry or one per class")
        if any(r <= 0 for r in self.playback_rates):
            raise ConfigError("playback rates must be > 0")
        if self.holding_times and len(self.holding_times) != self.class_count:
            raise ConfigError("holding_times must have one entry per class")
        if any(h <= 0 for h in self.holding_times):
            raise ConfigError("holding times must be > 0")
        if self.holding not in ("exponential", "fixed"):
            raise ConfigError("holding must be 'exponential' or 'fixed'")
        if self.placement not in ("uniform", "tiered"):
            raise ConfigError("placement must be 'uniform' or 'tiered'")

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return SimConfig(**d)


CONFIG_FIELDS = {f.name: f for f in fields(SimConfig)}


class EventKind(enum.IntEnum):
    REQUEST_ARRIVAL = 0
    PORT_RELEASE = 1
    SEARCH_COMPLETE = 2
    TRANSFER_COMPLETE = 3
    SESSION_END = 4


@dataclass(order=True)
class Event:
    time: float
    sequence: int
    kind: EventKind = field(compare=False)
    data: tuple = field(compare=False, default=())


class EventQueue:
    """Heap of events keyed by ``(time, insertion sequence)``."""

    def __init__(self):
        self._heap = []
        self._seq = 0

    def push(self, t, kind, data=()):
        if t < 0:
            raise ValueError("event time must be >= 0")
        heapq.heappush(self._heap, Event(t, self._seq, kind, data))
        self._seq += 1

    def pop(self):
        return heapq.heappop(self._heap)

    def __len__(self):
        return len(self._heap)


# ----------------------------------------------------------------------
# Workload
# ----------------------------------------------------------------------


def generate_arrivals(rates, horizon, rng):
    """Merged Poisson arrival stream as ``(times, classes)`` arrays."""
    if horizon <= 0:
        raise ConfigError("horizon must be > 0")
    times, classes = [], []
    for i, lam in enumerate(rates):
        if lam < 0:
            raise ConfigError(f"arrival rate {lam} is negative")
        if lam == 0:
            continue
        n = rng.poisson(lam * horizon)
        # given the count, Poisson arrival epochs are iid uniform on the horizon
        t = np.sort(rng.uniform(0.0, horizon, size=n))
        times.append(t)
        classes.append(np.full(n, i, dtype=int))
    if not times:
        return np.empty(0), np.empty(0, dtype=int)
    t = np.concatenate(times)
    c = np.concatenate(classes)
    order = np.lexsort((c, t))
    return t[order], c[order]


BURST_POINTS = ((0.24, 50), (0.36, 200))


def generate_burst(rng, points=BURST_POINTS):
    """Piecewise-constant Poisson burst passing through the given
    ``(time, expected cumulative requests)`` points."""
    out = []
    t0, n0 = 0.0, 0
    for t1, n1 in points:
        k = rng.poisson(n1 - n0)
        out.append(np.sort(rng.uniform(t0, t1, size=k)))
        t0, n0 = t1, n1
    return np.concatenate(out) if out else np.empty(0)


class Zipf:
    def __init__(self, n, exponent):
        w = 1.0 / np.arange(1, n + 1) ** exponent
        self.cdf = np.cumsum(w / w.sum())

    def sample(self, rng):
        return int(min(np.searchsorted(self.cdf, rng.random(), side="right"), len(self.cdf) - 1))


# ----------------------------------------------------------------------
# Proxy admission and transfer
# ----------------------------------------------------------------------


@dataclass
class ProxyState:
    plan: analytic.ProxyPortPlan
    cache: ProxyCache
    viewers: int
    policy: analytic.AdmissionPolicy


def admit_request(proxy, cls, playback_rate, rng):
    """Admit onto the first partition with a free port, or return ``None``.

    The scan starts at a uniformly random partition and wraps around. The
    request is also refused once the proxy serves as many streams as its
    disk bandwidth and admission threshold allow.
    """
    plan = proxy.plan
    if plan.occupied() >= analytic.admission_limit(proxy.policy, playback_rate):
        return None
    k = plan.partition_count
    start = int(rng.integers(k))
    for step in range(k):
        j = (start + step) % k
        if not plan.is_full(j):
            plan.acquire(cls, j)
            return j
    return None


def transfer_time(chunk, capacities, propagation_delay=0.01):
    """Store-and-forward delay of one chunk over a chain of links."""
    size = chunk if isinstance(chunk, (int, float)) else chunk.size
    total = 0.0
    for c in capacities:
        if c <= 0:
            raise TopologyError("link with zero capacity on transfer path")
        total += size / c + propagation_delay
    return total


# ----------------------------------------------------------------------
# Report
# ----------------------------------------------------------------------


@dataclass
class MetricsReport:
    arrivals: dict
    admitted: dict
    blocked: dict
    blocked_content: int
    cache_hits: int
    cache_misses: int
    hop_histogram: dict  # adjacency size -> {hop count: frequency}
    throughput: dict  # viewer-cluster size -> tuple of kbps per bucket
    throughput_bucket: float
    viewers: tuple  # per proxy
    level_volume: dict  # level -> kilobits received
    partition_blocking: dict  # (class, partition) -> fraction of arrivals seeing it full
    request_times: tuple
    placement_profile: dict  # level -> mean fraction of the catalog held per peer
    wall_time: float = field(default=0.0, compare=False)

    @property
    def total_arrivals(self):
        return sum(self.arrivals.values())

    @property
    def total_blocked(self):
        return sum(self.blocked.values())

    def blocking_probability(self, cls=None):
        if cls is None:
            n, b = self.total_arrivals, self.total_blocked
        else:
            n, b = self.arrivals.get(cls, 0), self.blocked.get(cls, 0)
        return b / n if n else 0.0

    def searches(self):
        return sum(sum(h.values()) for h in self.hop_histogram.values())

    def throughput_per_viewer(self):
        """Time-averaged delivered kbps per viewer over the whole run."""
        total = sum(float(np.sum(v)) for v in self.throughput.values())
        buckets = max((len(v) for v in self.throughput.values()), default=0)
        viewers = sum(self.viewers)
        if not buckets or not viewers:
            return 0.0
        return total / buckets / viewers


# ----------------------------------------------------------------------
# Simulation
# ----------------------------------------------------------------------


class _Streams:
    def __init__(self, horizon, bucket):
        self.bucket = bucket
        self.n = int(math.ceil(horizon / bucket - 1e-9)) if bucket > 0 else 0
        self.horizon = horizon

    def new(self):
        return np.zeros(self.n)

    def add(self, buf, start, end, rate):
        if self.n == 0:
            return
        end = min(end, self.horizon)
        if end <= start:
            return
        w = self.bucket
        b0, b1 = int(start // w), min(int(end // w), self.n - 1)
        if b0 == b1:
            buf[b0] += rate * (end - start) / w
            return
        buf[b0] += rate * ((b0 + 1) * w - start) / w
        buf[b0 + 1:b1] += rate
        buf[b1] += rate * (end - b1 * w) / w


def _streams(config):
    ss = np.random.SeedSequence(config.seed)
    names = ("topology", "placement", "viewers", "arrivals", "admission",
             "holding", "requests", "adjacency")
    return {n: np.random.default_rng(s) for n, s in zip(names, ss.spawn(len(names)))}


def build_world(config, rngs=None):
    """Topology, catalog, placement and clusters for one config."""
    rngs = rngs or _streams(config)
    topo = build_hybrid(config.levels, config.peers_per_level, config.proxy_count,
                        archive_count=config.archive_count,
                        kbps_range=(config.link_kbps_min, config.link_kbps_max),
                        jitter=config.link_jitter, adjacency_size=config.adjacency_size,
                        seed=rngs["topology"])
    catalog = make_catalog(config.catalog_size, config.asset_duration, config.frame_rate,
                           config.gop_length, config.avg_bitrate)
    placement = place_initial(catalog, topo, config.share_fraction, rngs["placement"],
                              profile=config.placement)
    clusters = all_clusters(topo, placement)
    return topo, catalog, placement, clusters


def placement_profile(topology, catalog, placement):
    total = sum(a.chunk_count for a in catalog)
    out = {}
    for lvl in range(1, topology.top):
        peers = topology.peers_at(lvl)
        if peers:
            out[lvl] = sum(placement.count(p) for p in peers) / (len(peers) * total)
    return out


def run(config: SimConfig) -> MetricsReport:
    wall0 = _time.perf_counter()
    config.validate()
    rngs = _streams(config)
    topo, catalog, placement, clusters = build_world(config, rngs)
    searcher = PathSearcher(topo, clusters, config.query_latency)
    chunks = {a.id: a for a in catalog}
    chunk_sizes = {}
    zipf = Zipf(len(catalog), config.zipf_exponent)
    window_len = config.session_duration
    level_of = {n.id: n.level for n in topo.nodes}

    proxies = {}
    for pid in topo.proxies():
        viewers = int(rngs["viewers"].integers(config.viewers_min, config.viewers_max + 1))
        plan = analytic.ProxyPortPlan([config.ports_per_partition] * config.partition_count,
                                      class_count=config.class_count)
        proxies[pid] = ProxyState(plan, ProxyCache(config.cache_capacity, config.cache_half_life),
                                  viewers, analytic.AdmissionPolicy(config.disk_bandwidth,
                                                                    config.admission_threshold))

    q = EventQueue()
    for pid, st in proxies.items():
        rates = [r * st.viewers for r in config.arrival_rates]
        times, classes = generate_arrivals(rates, config.sim_time, rngs["arrivals"])
        for t, c in zip(times.tolist(), classes.tolist()):
            q.push(t, EventKind.REQUEST_ARRIVAL, (pid, c))
    if config.burst:
        first = min(proxies)
        for t in generate_burst(rngs["arrivals"]).tolist():
            q.push(t, EventKind.REQUEST_ARRIVAL, (first, 0))
    q.push(config.sim_time, EventKind.SESSION_END)

    K = config.class_count
    arrivals = Counter({i: 0 for i in range(K)})
    admitted = Counter({i: 0 for i in range(K)})
    blocked = Counter({i: 0 for i in range(K)})
    seen_full = np.zeros((K, config.partition_count), dtype=np.int64)
    hops = Counter()
    level_volume = Counter()
    request_times = []
    hits = misses = failed = 0
    streams = _Streams(config.sim_time, config.throughput_bucket)
    tput = {pid: streams.new() for pid in proxies}
    requests = {}  # id -> [pid, cls, partition, stream_start, released]
    next_id = 0

    def chunk_size(key):
        if key not in chunk_sizes:
            a = chunks[key[0]]
            play = min(a.gop_length / a.frame_rate, a.duration - key[1] * a.gop_length / a.frame_rate)
            chunk_sizes[key] = play * a.avg_bitrate
        return chunk_sizes[key]

    def release(rid, now):
        req = requests.pop(rid, None)
        if req is None:
            return
        pid, cls, j, start, _ = req
        proxies[pid].plan.release(cls, j)
        if start is not None:
            rate = min(config.class_playback(cls), config.viewer_link_kbps)
            streams.add(tput[pid], start, now, rate)

    while q:
        ev = q.pop()
        now = ev.time
        if ev.kind is EventKind.SESSION_END or now > config.sim_time:
            break
        if ev.kind is EventKind.REQUEST_ARRIVAL:
            pid, cls = ev.data
            st = proxies[pid]
            arrivals[cls] += 1
            request_times.append(now)
            for j in range(config.partition_count):
                if st.plan.is_full(j):
                    seen_full[cls, j] += 1
            j = admit_request(st, cls, config.class_playback(cls), rngs["admission"])
            if j is None:
                blocked[cls] += 1
                continue
            admitted[cls] += 1
            mean_h = config.class_holding(cls)
            hold = mean_h if config.holding == "fixed" else float(rngs["holding"].exponential(mean_h))
            rid = next_id
            next_id += 1
            requests[rid] = [pid, cls, j, None, False]
            q.push(now + hold, EventKind.PORT_RELEASE, (rid,))

            asset = zipf.sample(rngs["requests"])
            idx = 0 if cls == 0 else int(rngs["requests"].integers(chunks[asset].chunk_count))
            key = (asset, idx)
            if st.cache.lookup(key, now):
                hits += 1
                requests[rid][3] = now
                continue
            misses += 1
            outcome = searcher.search(placement, SearchQuery(key, pid),
                                      SessionWindow(now, window_len))
            if isinstance(outcome, Found):
                hops[outcome.hop_count] += 1
                q.push(now + outcome.elapsed, EventKind.SEARCH_COMPLETE, (rid, key, outcome))
            else:
                hops[NOT_FOUND_HOP] += 1
                failed += 1
                q.push(now + outcome.elapsed, EventKind.SEARCH_COMPLETE, (rid, key, outcome))
        elif ev.kind is EventKind.PORT_RELEASE:
            release(ev.data[0], now)
        elif ev.kind is EventKind.SEARCH_COMPLETE:
            rid, key, outcome = ev.data
            if rid not in requests:
                continue
            if not isinstance(outcome, Found):
                release(rid, now)
                continue
            pid = requests[rid][0]
            route = transfer_route(topo, pid, outcome)
            caps = [topo.link_capacity(a, b) for a, b in zip(route, route[1:])]
            dt = transfer_time(chunk_size(key), caps, config.propagation_delay)
            q.push(now + dt, EventKind.TRANSFER_COMPLETE, (rid, key, route))
        elif ev.kind is EventKind.TRANSFER_COMPLETE:
            rid, key, route = ev.data
            size = chunk_size(key)
            for b in route[1:]:
                level_volume[level_of[b]] += size
            pid = route[-1]
            proxies[pid].cache.admit(key, now)
            if rid in requests:
                requests[rid][3] = now

    for rid in list(requests):
        pid, cls, j, start, _ = requests[rid]
        if start is not None:
            rate = min(config.class_playback(cls), config.viewer_link_kbps)
            streams.add(tput[pid], start, config.sim_time, rate)

    by_size = {}
    for pid, buf in tput.items():
        v = proxies[pid].viewers
        by_size[v] = by_size[v] + buf if v in by_size else buf.copy()

    part_block = {}
    for i in range(K):
        for j in range(config.partition_count):
            part_block[(i, j)] = float(seen_full[i, j] / arrivals[i]) if arrivals[i] else 0.0

    return MetricsReport(
        arrivals=dict(arrivals), admitted=dict(admitted), blocked=dict(blocked),
        blocked_content=failed, cache_hits=hits, cache_misses=misses,
        hop_histogram={config.adjacency_size: dict(sorted(hops.items()))} if misses else {},
        throughput={v: tuple(b.tolist()) for v, b in sorted(by_size.items())},
        throughput_bucket=config.throughput_bucket,
        viewers=tuple(proxies[p].viewers for p in sorted(proxies)),
        level_volume=dict(sorted(level_volume.items())),
        partition_blocking=part_block,
        request_times=tuple(request_times),
        placement_profile=placement_profile(topo, catalog, placement),
        wall_time=_time.perf_counter() - wall0,
    )


def sweep_adjacency(config: SimConfig, sizes=range(1, 7), trials=10000):
    """Hop-count histograms of cache-miss searches per adjacency size.

    The wiring and placement come from ``config``; every trial resamples
    every peer's adjacency and searches a uniformly random chunk from a
    random proxy. Not-found searches land in bin 0.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rngs = _streams(config)
    topo, catalog, placement, clusters = build_world(config, rngs)
    searcher = PathSearcher(topo, clusters, config.query_latency)
    keys = [(a.id, i) for a in catalog for i in range(a.chunk_count)]
    proxies = topo.proxies()
    window = SessionWindow(0.0, config.session_duration)
    out = {}
    for size in sizes:
        if not 1 <= size <= 6:
            raise ConfigError(f"adjacency size {size} outside [1, 6]")
        rng = np.random.default_rng([config.seed, size])
        hist = Counter()
        targets = rng.integers(len(keys), size=trials)
        origins = rng.integers(len(proxies), size=trials)
        for t in range(trials):
            adj = assign_adjacency(topo, size, rng)
            res = searcher.search(placement, SearchQuery(keys[targets[t]], proxies[origins[t]]),
                                  window, topology=adj)
            hist[res.hop_count if isinstance(res, Found) else NOT_FOUND_HOP] += 1
        out[size] = dict(sorted(hist.items()))
    return out


def histogram_stats(hist):
    """Mean and variance of found hop counts (bin 0 excluded)."""
    found = {h: n for h, n in hist.items() if h != NOT_FOUND_HOP}
    n = sum(found.values())
    if not n:
        return float("nan"), float("nan")
    mean = sum(h * c for h, c in found.items()) / n
    var = sum(c * (h - mean) ** 2 for h, c in found.items()) / n
    return mean, var
