"""
Closed-form models for proxy blocking, tier capacity and peer activity.

Everything here is a pure function of its arguments. The enumeration
helpers (``rademacher_mean_abs``, ``rademacher_moment``) are exact but
exponential in the vector length, so they are capped at 20 terms.

Conventions
-----------
* Loads are in Erlangs, rates in kbps, times in seconds.
* Tier capacities are abstract stream-equivalents (one full stream = 1.0
  when the archive capacity is normalised to 1).
"""
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, SizeLimitError

MAX_SIGN_TERMS = 20
MAX_ENUM_PEERS = 12


# ----------------------------------------------------------------------
# Domain types
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ServiceClass:
    arrival_rate: float  # requests / s
    holding_time: float  # s
    playback_rate: float = 600.0  # kbps

    def __post_init__(self):
        if self.arrival_rate < 0:
            raise InvalidArgument("arrival rate must be >= 0")
        if self.holding_time <= 0:
            raise InvalidArgument("holding time must be > 0")
        if self.playback_rate <= 0:
            raise InvalidArgument("playback rate must be > 0")


@dataclass(frozen=True)
class ServiceClassSet:
    classes: tuple

    def __post_init__(self):
        if len(self.classes) < 1:
            raise InvalidArgument("need at least one service class")
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def count(self):
        return len(self.classes)

    @classmethod
    def from_lists(cls, rates, holding_times, playback_rates=None):
        if len(rates) != len(holding_times):
            raise InvalidArgument("rates and holding times differ in length")
        if playback_rates is None:
            playback_rates = [600.0] * len(rates)
        return cls(tuple(ServiceClass(a, h, r)
                         for a, h, r in zip(rates, holding_times, playback_rates)))


@dataclass
class ProxyPortPlan:
    """Partitioned proxy ports.

    ``class_occupancy[i][j]`` is the number of ports of partition ``j``
    currently held by class ``i``. Partition occupancy is derived from it.
    """
    capacities: list
    class_count: int = 1
    total_ports: int = None
    class_occupancy: list = field(default=None)

    def __post_init__(self):
        self.capacities = [int(c) for c in self.capacities]
        if not self.capacities or any(c < 1 for c in self.capacities):
            raise InvalidArgument("every partition needs at least one port")
        if self.class_count < 1:
            raise InvalidArgument("class_count must be >= 1")
        if self.total_ports is None:
            self.total_ports = sum(self.capacities)
        if sum(self.capacities) > self.total_ports:
            raise InvalidArgument("partition capacities exceed total ports")
        if self.class_occupancy is None:
            self.class_occupancy = [[0] * len(self.capacities)
                                    for _ in range(self.class_count)]

    @property
    def partition_count(self):
        return len(self.capacities)

    def occupancy(self, j):
        return sum(row[j] for row in self.class_occupancy)

    def occupied(self):
        return sum(sum(row) for row in self.class_occupancy)

    def is_full(self, j):
        return self.occupancy(j) >= self.capacities[j]

    def acquire(self, cls, j):
        if self.is_full(j):
            raise InvalidArgument(f"partition {j} is full")
        self.class_occupancy[cls][j] += 1

    def release(self, cls, j):
        if self.class_occupancy[cls][j] <= 0:
            raise InvalidArgument(f"class {cls} holds no port in partition {j}")
        self.class_occupancy[cls][j] -= 1


@dataclass(frozen=True)
class AdmissionPolicy:
    disk_bandwidth: float  # kbps
    threshold: int  # max concurrent streams

    def __post_init__(self):
        if self.disk_bandwidth <= 0:
            raise InvalidArgument("disk bandwidth must be > 0")
        if self.threshold < 1:
            raise InvalidArgument("admission threshold must be >= 1")


@dataclass(frozen=True)
class TierCapacityParams:
    archive_streaming: float  # P(0)
    level1_sharing: float  # C_1 = N(1)
    share_fraction: float  # lambda
    levels: int = 0
    equivalent_capacity: float = None  # kbps, optional

    def __post_init__(self):
        _check_fraction(self.share_fraction)
        if self.archive_streaming < 0 or self.level1_sharing < 0:
            raise InvalidArgument("capacities must be >= 0")
        if self.levels < 0:
            raise InvalidArgument("levels must be >= 0")


@dataclass(frozen=True)
class ActivePeerParams:
    peer_count: int
    threshold: int
    activity_prob: float


def _check_fraction(lam):
    if not 0.0 < lam < 1.0:
        raise InvalidArgument(f"share fraction must lie in (0, 1), got {lam}")


# ----------------------------------------------------------------------
# Proxy admission and blocking
# ----------------------------------------------------------------------


def admission_limit(policy: AdmissionPolicy, playback_rate: float) -> int:
    """Maximum number of concurrent streams a proxy may admit.

    The disk can sustain ``floor(R_d / R_p)`` streams; the admission
    threshold caps that further.
    """
    if playback_rate <= 0:
        raise InvalidArgument("playback rate must be > 0")
    return int(min(policy.disk_bandwidth // playback_rate, policy.threshold))


def offered_load(classes: ServiceClassSet, busy_horizon: float) -> float:
    if busy_horizon <= 0:
        raise InvalidArgument("busy horizon must be > 0")
    return sum(c.arrival_rate * c.holding_time for c in classes.classes) / busy_horizon


def erlang_b(load: float, ports: int) -> float:
    """Erlang-B blocking probability of an M/M/C/C loss system.

    Uses the recurrence ``B(c) = E B(c-1) / (c + E B(c-1))`` with
    ``B(0) = 1``, which is stable for large ``C`` where the factorial
    form overflows.
    """
    if load < 0 or ports < 0:
        raise InvalidArgument("load and ports must be non-negative")
    if int(ports) != ports:
        raise InvalidArgument("ports must be an integer")
    b = 1.0
    for c in range(1, int(ports) + 1):
        eb = load * b
        b = eb / (c + eb)
    return b


def free_port_discovery_prob(partition_index: int, partition_count: int,
                             capacity: int, occupancy: int) -> float:
    """Probability the sequential scan first succeeds at partition ``j``.

    Geometric in the partition index with success parameter ``1/k``,
    scaled by the free fraction of partition ``j``.
    """
    j, k = partition_index, partition_count
    if j < 1 or k < 1:
        raise InvalidArgument("partition index and count must be >= 1")
    if capacity < 1:
        raise InvalidArgument("capacity must be >= 1")
    if occupancy < 0 or occupancy > capacity:
        raise InvalidArgument("occupancy must lie in [0, capacity]")
    q = 1.0 / k
    return (1.0 - q) ** (j - 1) * q * ((capacity - occupancy) / capacity)


def multi_partition_blocking(loads: Sequence[float], capacities: Sequence[int]) -> float:
    if len(loads) != len(capacities):
        raise InvalidArgument("loads and capacities differ in length")
    p = 1.0
    for e, c in zip(loads, capacities):
        p *= erlang_b(e, c)
    return p


# ----------------------------------------------------------------------
# Tier capacity
# ----------------------------------------------------------------------


def level_sharing_capacity(level1_sharing: float, share_fraction: float, level: int) -> float:
    """Sharing capacity at ``level``: ``lambda**(level-1) * C_1``."""
    if level < 1:
        raise InvalidArgument("level must be >= 1")
    _check_fraction(share_fraction)
    return share_fraction ** (level - 1) * level1_sharing


def tier_capacity_iterative(params: TierCapacityParams) -> float:
    _check_fraction(params.share_fraction)
    p = float(params.archive_streaming)
    n = float(params.level1_sharing)
    for _ in range(params.levels):
        p -= n
        n *= params.share_fraction
    return p


def tier_capacity_closed(params: TierCapacityParams) -> float:
    lam = params.share_fraction
    _check_fraction(lam)
    return params.archive_streaming - params.level1_sharing * (1.0 - lam ** params.levels) / (1.0 - lam)


def tier_profile(share_fraction: float, levels: int) -> np.ndarray:
    """Normalised capacity ``P(l)/P(0)`` for ``l = 0..levels``.

    With ``P(0) = 1`` and ``C_1 = 1 - lambda`` the recursion collapses to
    ``P(l) = lambda**l``: the fraction of a full stream still available
    after ``l`` sharing tiers.
    """
    _check_fraction(share_fraction)
    return np.array([
        tier_capacity_closed(TierCapacityParams(1.0, 1.0 - share_fraction, share_fraction, l))
        for l in range(levels + 1)
    ])


# ----------------------------------------------------------------------
# Active peers
# ----------------------------------------------------------------------


def active_peer_tail(peer_count: int, threshold: int, activity_prob: float) -> float:
    """P(more than ``threshold`` of ``peer_count`` peers are active)."""
    n, k, rho = int(peer_count), int(threshold), float(activity_prob)
    if n < 0 or k < 0:
        raise InvalidArgument("peer count and threshold must be >= 0")
    if k > n:
        raise InvalidArgument("threshold cannot exceed peer count")
    if not 0.0 <= rho <= 1.0:
        raise InvalidArgument("activity probability must lie in [0, 1]")
    total = 0.0
    for m in range(k + 1, n + 1):
        total += math.comb(n, m) * rho ** m * (1.0 - rho) ** (n - m)
    return min(total, 1.0)


def multilevel_active_product(levels: Sequence[ActivePeerParams]) -> float:
    if not levels:
        raise InvalidArgument("need at least one level")
    p = 1.0
    for lv in levels:
        p *= active_peer_tail(lv.peer_count, lv.threshold, lv.activity_prob)
    return p


# ----------------------------------------------------------------------
# Transfer-rate bounds
# ----------------------------------------------------------------------


def p_norm(x, p: float) -> float:
    if p < 1:
        raise InvalidArgument("p must be >= 1")
    a = np.abs(np.asarray(x, dtype=float))
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    m = a.max()
    if m == 0:
        return 0.0
    # scale first so large rates do not overflow x**p
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


def _signed_sums(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size > MAX_SIGN_TERMS:
        raise SizeLimitError(f"sign enumeration capped at {MAX_SIGN_TERMS} terms, got {x.size}")
    sums = np.zeros(1)
    for xi in x:
        sums = np.concatenate((sums + xi, sums - xi))
    return sums


def rademacher_moment(x, p: float = 1.0) -> float:
    """``(E|sum eps_i x_i|**p)**(1/p)`` over all ``2**n`` sign vectors."""
    if p <= 0:
        raise InvalidArgument("p must be > 0")
    s = np.abs(_signed_sums(x))
    if p == 1:
        return float(s.mean())
    return float(np.mean(s ** p) ** (1.0 / p))


def rademacher_mean_abs(x) -> float:
    """Exact ``E|sum eps_i x_i|`` with independent fair signs."""
    return rademacher_moment(x, 1.0)


def indicator_mean_sum(x, enumerate_all: bool = False) -> float:
    """``E sum z_i x_i`` with independent fair on/off link indicators.

    The expectation is simply ``sum(x) / 2``; ``enumerate_all`` computes it
    by brute force over every on/off pattern instead.
    """
    x = np.asarray(x, dtype=float).ravel()
    if not enumerate_all:
        return float(x.sum() / 2.0)
    if x.size > MAX_SIGN_TERMS:
        raise SizeLimitError(f"indicator enumeration capped at {MAX_SIGN_TERMS} terms")
    sums = np.zeros(1)
    for xi in x:
        sums = np.concatenate((sums + xi, sums))
    return float(sums.mean())


def _haagerup_switch():
    # p0 in (1, 2) solving Gamma((p+1)/2) = sqrt(pi)/2
    target = math.sqrt(math.pi) / 2.0
    lo, hi = 1.0, 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if math.gamma((mid + 1.0) / 2.0) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_P0 = _haagerup_switch()


def _gaussian_constant(p):
    return math.sqrt(2.0) * (math.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)) ** (1.0 / p)


def khintchine_constants(p: float):
    """Sharp (Haagerup) constants for the Rademacher ``L^p`` moment.

    Returns ``(lower, upper)`` such that
    ``lower * ||x||_2 <= (E|sum eps_i x_i|**p)**(1/p) <= upper * ||x||_2``.
    At ``p = 1`` this is ``(2**-0.5, 1)`` and at ``p = 2`` both are 1.
    """
    if p < 1:
        raise InvalidArgument("p must be >= 1")
    if p == 2:
        return 1.0, 1.0
    if p < 2:
        lower = 2.0 ** (0.5 - 1.0 / p) if p <= _P0 else _gaussian_constant(p)
        return lower, 1.0
    return 1.0, _gaussian_constant(p)


def khintchine_bounds(x, p: float = 1.0):
    lower, upper = khintchine_constants(p)
    norm = p_norm(x, 2.0)
    return lower * norm, upper * norm


def aggregate_transfer_feasible(means: Sequence[float], capacity: float) -> bool:
    """True iff the summed mean transfer rates fit the equivalent capacity."""
    return float(sum(means)) <= capacity
