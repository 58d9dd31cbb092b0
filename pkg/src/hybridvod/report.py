"""
Config parsing, CSV/manifest emission and analytic-vs-simulation checks.

CSV files are written with a fixed column order, a header row, ``\\n``
line endings and locale-independent number formatting, so identical
configs give byte-identical files.
"""
import csv
import io
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analytic
from .engine import (CONFIG_FIELDS, NOT_FOUND_HOP, SimConfig, build_world,
                     histogram_stats, placement_profile, run)
from .errors import ConfigError
from .search import Found, PathSearcher, SearchQuery, SessionWindow, bfs_distance_oracle, max_depth
from .topology import assign_adjacency

SCHEMAS = {
    "requests.csv": ("t", "cumulative_requests"),
    "throughput.csv": ("t", "kbps", "cluster_size"),
    "blocking.csv": ("class", "partition", "measured"),
    "hops.csv": ("adjacency_size", "hop_count", "frequency"),
    "hops_summary.csv": ("adjacency_size", "trials", "found", "mean", "variance"),
    "levels.csv": ("level", "received_kbit"),
    "validation.csv": ("quantity", "analytic", "measured", "deviation", "tolerance", "passed"),
}


# ----------------------------------------------------------------------
# Config
# ----------------------------------------------------------------------

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(name, raw):
    default = CONFIG_FIELDS[name].default
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {name}") from None


def _parse_assignment(text):
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text.strip()!r}")
    key, value = text.split("=", 1)
    key = key.strip()
    if key not in CONFIG_FIELDS:
        raise ConfigError(f"unknown key {key!r}")
    return key, _convert(key, value)


# keys whose validity depends on other keys, checked only on the full config
_CROSS_CHECKED = {"viewers_min", "viewers_max", "link_kbps_min", "link_kbps_max",
                  "arrival_rates", "playback_rates", "holding_times"}


def _check_alone(key, value):
    if key not in _CROSS_CHECKED:
        SimConfig(**{key: value})


def parse_config(text="", overrides=()) -> SimConfig:
    """Build a config from ``key=value`` lines plus ``key=value`` overrides.

    Blank lines and ``#`` comments are ignored; later assignments win, and
    overrides win over the file. Unset keys keep their defaults.
    """
    values = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            key, value = _parse_assignment(body)
            _check_alone(key, value)
        except ConfigError as exc:
            raise ConfigError(str(exc), line=lineno) from None
        values[key] = value
        lines[key] = lineno
    for item in overrides:
        try:
            key, value = _parse_assignment(item)
            _check_alone(key, value)
        except ConfigError as exc:
            raise ConfigError(f"override {item!r}: {exc}") from None
        values[key] = value
        lines.pop(key, None)
    try:
        return SimConfig(**values)
    except ConfigError as exc:
        raise ConfigError(str(exc), line=max(lines.values()) if lines else None) from None


def config_text(config: SimConfig) -> str:
    out = []
    for name, value in asdict(config).items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (tuple, list)):
            value = ",".join(repr(float(v)) for v in value)
        out.append(f"{name}={value}")
    return "\n".join(out) + "\n"


# ----------------------------------------------------------------------
# Manifest and CSV
# ----------------------------------------------------------------------


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str = __version__
    started: str = field(default_factory=_now)
    finished: str = None
    outputs: list = field(default_factory=list)
    parameters: dict = field(default_factory=dict)

    def write(self, directory):
        self.finished = _now()
        path = Path(directory) / "manifest.json"
        doc = asdict(self)
        doc["python"] = platform.python_version()
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path

    @staticmethod
    def load_config(path) -> SimConfig:
        doc = json.loads(Path(path).read_text())
        return SimConfig(**doc["config"])


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def csv_text(name, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCHEMAS[name])
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(directory, name, rows):
    path = Path(directory) / name
    path.write_text(csv_text(name, rows))
    return path


def report_rows(report, config):
    """CSV rows for each output of a single run."""
    requests = [(t, i + 1) for i, t in enumerate(report.request_times)]
    throughput = []
    if report.total_arrivals:
        w = report.throughput_bucket
        for size, series in sorted(report.throughput.items()):
            throughput += [(round(k * w, 9), round(kbps, 6), size) for k, kbps in enumerate(series)]
    blocking = []
    for cls in sorted(report.arrivals):
        if not report.arrivals[cls]:
            continue
        for j in range(config.partition_count):
            blocking.append((cls, j, report.partition_blocking[(cls, j)]))
        blocking.append((cls, "all", report.blocking_probability(cls)))
    hops = [(size, h, n) for size, hist in sorted(report.hop_histogram.items())
            for h, n in sorted(hist.items())]
    levels = [(lvl, kbit) for lvl, kbit in sorted(report.level_volume.items())]
    return {"requests.csv": requests, "throughput.csv": throughput,
            "blocking.csv": blocking, "hops.csv": hops, "levels.csv": levels}


def emit_run(config, directory, report=None, command="run"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command, asdict(config), config.seed)
    report = report if report is not None else run(config)
    for name, rows in report_rows(report, config).items():
        manifest.outputs.append(str(write_csv(directory, name, rows)))
    manifest.parameters["wall_time_s"] = round(report.wall_time, 3)
    manifest.write(directory)
    return report, manifest


def sweep_rows(histograms):
    hops, summary = [], []
    for size, hist in sorted(histograms.items()):
        hops += [(size, h, n) for h, n in sorted(hist.items())]
        mean, var = histogram_stats(hist)
        found = sum(n for h, n in hist.items() if h != NOT_FOUND_HOP)
        summary.append((size, sum(hist.values()), found, mean, var))
    return hops, summary


def merge_histograms(parts):
    out = {}
    for part in parts:
        for size, hist in part.items():
            acc = out.setdefault(size, {})
            for h, n in hist.items():
                acc[h] = acc.get(h, 0) + n
    return {s: dict(sorted(h.items())) for s, h in sorted(out.items())}


def is_unimodal(hist, noise_sigmas=3.0):
    """Single interior mode, ignoring dips smaller than sampling noise.

    ``hist`` maps hop count to frequency (the not-found bin is ignored).
    The mode must not sit on the first or last occupied bin, and walking
    away from it in either direction the counts may never climb back by
    more than ``noise_sigmas`` Poisson standard deviations above the
    running minimum.
    """
    found = sorted((h, n) for h, n in hist.items() if h != NOT_FOUND_HOP)
    if len(found) < 3:
        return False
    lo, hi = found[0][0], found[-1][0]
    counts = [hist.get(h, 0) for h in range(lo, hi + 1)]
    m = int(np.argmax(counts))
    if m == 0 or m == len(counts) - 1:
        return False

    def monotone(seq):
        low = seq[0]
        for c in seq[1:]:
            if c - low > noise_sigmas * math.sqrt(max(low, 1)):
                return False
            low = min(low, c)
        return True

    return monotone(counts[m::-1]) and monotone(counts[m:])


# ----------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------

EPS = 1e-12


@dataclass(frozen=True)
class ValidationRow:
    quantity: str
    analytic: float
    measured: float
    tolerance: float

    @property
    def deviation(self):
        return abs(self.measured - self.analytic) / max(abs(self.analytic), EPS)

    @property
    def passed(self):
        return self.deviation <= self.tolerance

    def as_tuple(self):
        return (self.quantity, self.analytic, self.measured, self.deviation,
                self.tolerance, self.passed)


def erlang_scenario(config, load=5.0, ports=10, arrivals=50000):
    """Single proxy, single class, one partition, exponential holding."""
    rate = load / config.port_access_time
    horizon = arrivals / rate * 1.04  # a few percent of headroom over the target count
    return config.replace(proxy_count=1, viewers_min=1, viewers_max=1, partition_count=1,
                          ports_per_partition=ports, arrival_rates=(rate,), playback_rates=(600.0,),
                          holding_times=(), holding="exponential", burst=False,
                          disk_bandwidth=max(config.disk_bandwidth, 600.0 * ports),
                          admission_threshold=max(config.admission_threshold, ports),
                          sim_time=horizon, throughput_bucket=horizon / 480)


def erlang_row(config, tolerance=0.10, load=5.0, ports=10, arrivals=50000):
    rep = run(erlang_scenario(config, load, ports, arrivals))
    return ValidationRow(f"erlang_b(load={load:g},ports={ports})",
                         analytic.erlang_b(load, ports), rep.blocking_probability(), tolerance), rep


def tier_row(config, tolerance=0.10):
    topo, catalog, placement, _ = build_world(config)
    measured = placement_profile(topo, catalog, placement)
    expected = analytic.tier_profile(config.share_fraction, topo.top - 1)
    return ValidationRow("tier_volume_stream_equivalents",
                         float(sum(expected[lvl] for lvl in measured)),
                         float(sum(measured.values())), tolerance)


def bfs_agreement(config, trials=1000, seed=None):
    """Fraction of random searches whose outcome matches the BFS oracle."""
    topo, catalog, placement, clusters = build_world(config)
    searcher = PathSearcher(topo, clusters, config.query_latency)
    keys = [(a.id, i) for a in catalog for i in range(a.chunk_count)]
    proxies = topo.proxies()
    rng = np.random.default_rng([config.seed if seed is None else seed, 7])
    window = SessionWindow(0.0, config.session_duration)
    limit = max_depth(window, config.query_latency)
    agree = 0
    for _ in range(trials):
        adj = assign_adjacency(topo, int(rng.integers(1, 7)), rng)
        key = keys[int(rng.integers(len(keys)))]
        origin = proxies[int(rng.integers(len(proxies)))]
        res = searcher.search(placement, SearchQuery(key, origin), window, topology=adj)
        dist = bfs_distance_oracle(adj, clusters, origin, placement.holders(key))
        reachable = dist is not None and dist <= limit
        if isinstance(res, Found):
            agree += reachable and res.hop_count == dist
        else:
            agree += not reachable
    return agree / trials


def khintchine_containment(config, samples=200, max_terms=16):
    lo, hi = config.link_kbps_min, config.link_kbps_max
    rng = np.random.default_rng([config.seed, 11])
    inside = 0
    for _ in range(samples):
        x = rng.uniform(lo, hi, size=int(rng.integers(1, max_terms + 1)))
        low, up = analytic.khintchine_bounds(x, 1.0)
        mean = analytic.rademacher_mean_abs(x)
        slack = 1e-12 * up
        inside += (low - slack) <= mean <= (up + slack)
    return inside / samples


def run_validation(config, tolerance=0.10, arrivals=50000, bfs_trials=1000, samples=200):
    rows = [erlang_row(config, tolerance, arrivals=arrivals)[0], tier_row(config, tolerance)]
    rows.append(ValidationRow("bfs_oracle_agreement_rate", 1.0,
                              bfs_agreement(config, bfs_trials), 0.0))
    rows.append(ValidationRow("khintchine_containment_rate", 1.0,
                              khintchine_containment(config, samples), 0.0))
    return rows


def format_rows(rows):
    head = f"{'quantity':<36} {'analytic':>12} {'measured':>12} {'deviation':>10} {'tol':>6}  result"
    out = [head]
    for r in rows:
        out.append(f"{r.quantity:<36} {r.analytic:>12.6g} {r.measured:>12.6g} "
                   f"{r.deviation:>10.4g} {r.tolerance:>6.3g}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(out)
