"""
Command-line front end.

Verbs: ``analytic``, ``topology``, ``search``, ``run``, ``sweep`` and
``validate``. Exit status is 0 on success, 1 on any configuration or
usage error and 2 when a validation check fails.
"""
import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

from . import analytic, report
from .engine import SimConfig, build_world, sweep_adjacency
from .errors import HybridVodError
from .search import Found, PathSearcher, SearchQuery, SessionWindow
from .topology import export_topology

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for validation
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _g(v):
    return f"{v:#.6g}"


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def load_config(args) -> SimConfig:
    text = ""
    if getattr(args, "manifest", None):
        base = report.RunManifest.load_config(args.manifest)
        text = report.config_text(base)
    if getattr(args, "config", None):
        try:
            text += Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}")
    return report.parse_config(text, args.set or [])


# ----------------------------------------------------------------------
# analytic
# ----------------------------------------------------------------------


def cmd_analytic(args, out):
    sub = args.model
    if sub == "erlang":
        print(f"blocking_probability: {_g(analytic.erlang_b(args.load, args.ports))}", file=out)
    elif sub == "load":
        classes = analytic.ServiceClassSet.from_lists(args.rates, args.holding)
        print(f"offered_load_erlangs: {_g(analytic.offered_load(classes, args.horizon))}", file=out)
    elif sub == "capacity":
        params = analytic.TierCapacityParams(args.p0, args.c1, args.lam, args.level)
        print(f"capacity: {_g(analytic.tier_capacity_closed(params))}", file=out)
        print(f"capacity_iterative: {_g(analytic.tier_capacity_iterative(params))}", file=out)
        if args.level >= 1:
            n = analytic.level_sharing_capacity(args.c1, args.lam, args.level)
            print(f"level_sharing: {_g(n)}", file=out)
    elif sub == "active-peers":
        print(f"active_tail: {_g(analytic.active_peer_tail(args.n, args.k, args.rho))}", file=out)
        if args.levels:
            levels = []
            for spec in args.levels.split(","):
                n, k = spec.split(":")
                levels.append(analytic.ActivePeerParams(int(n), int(k), args.rho))
            print(f"multilevel_product: {_g(analytic.multilevel_active_product(levels))}", file=out)
    elif sub == "khintchine":
        lower, upper = analytic.khintchine_bounds(args.rates, args.p)
        print(f"lower: {_g(lower)}", file=out)
        print(f"upper: {_g(upper)}", file=out)
        print(f"enumerated_moment: {_g(analytic.rademacher_moment(args.rates, args.p))}", file=out)
    elif sub == "admission":
        policy = analytic.AdmissionPolicy(args.disk_bandwidth, args.threshold)
        print(f"max_streams: {analytic.admission_limit(policy, args.playback_rate)}", file=out)
    return EXIT_OK


# ----------------------------------------------------------------------
# simulation verbs
# ----------------------------------------------------------------------


def cmd_topology(args, out):
    config = load_config(args)
    topo, _, _, clusters = build_world(config)
    text = export_topology(topo, args.format, clusters)
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_search(args, out):
    config = load_config(args)
    topo, catalog, placement, clusters = build_world(config)
    proxies = topo.proxies()
    origin = args.proxy if args.proxy is not None else proxies[0]
    searcher = PathSearcher(topo, clusters, config.query_latency)
    res = searcher.search(placement, SearchQuery((args.asset, args.chunk), origin),
                          SessionWindow(0.0, config.session_duration))
    if isinstance(res, Found):
        print(f"found: hop_count={res.hop_count} source={res.source} "
              f"path={','.join(map(str, res.path))} elapsed={_g(res.elapsed)}", file=out)
    else:
        print(f"not_found: elapsed={_g(res.elapsed)}", file=out)
    return EXIT_OK


def cmd_run(args, out):
    config = load_config(args)
    rep, manifest = report.emit_run(config, args.out)
    print(f"arrivals={rep.total_arrivals} blocked={rep.total_blocked} "
          f"searches={rep.searches()} outputs={args.out}", file=out)
    return EXIT_OK


def _sweep_one(job):
    config, sizes, trials = job
    return sweep_adjacency(config, sizes, trials)


def cmd_sweep(args, out):
    config = load_config(args)
    sizes = args.sizes
    if not sizes or any(not 1 <= s <= 6 for s in sizes):
        raise UsageError("sizes must be a non-empty subset of 1..6")
    seeds = [config.seed + i for i in range(args.seeds)]
    jobs = [(config.replace(seed=s), sizes, args.trials) for s in seeds]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            parts = list(pool.map(_sweep_one, jobs))
    else:
        parts = [_sweep_one(j) for j in jobs]
    merged = report.merge_histograms(parts)
    hops, summary = report.sweep_rows(merged)
    directory = Path(args.out)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = report.RunManifest("sweep", asdict(config), config.seed,
                                  parameters={"sizes": sizes, "trials": args.trials, "seeds": seeds})
    manifest.outputs.append(str(report.write_csv(directory, "hops.csv", hops)))
    manifest.outputs.append(str(report.write_csv(directory, "hops_summary.csv", summary)))
    manifest.write(directory)
    for size, trials, found, mean, var in summary:
        print(f"adjacency={size} trials={trials} found={found} mean={_g(mean)} variance={_g(var)}",
              file=out)
    return EXIT_OK


def cmd_validate(args, out):
    config = load_config(args)
    rows = report.run_validation(config, args.tolerance, args.arrivals, args.bfs_trials)
    print(report.format_rows(rows), file=out)
    if args.out:
        directory = Path(args.out)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = report.RunManifest("validate", asdict(config), config.seed,
                                      parameters={"tolerance": args.tolerance,
                                                  "arrivals": args.arrivals,
                                                  "bfs_trials": args.bfs_trials})
        manifest.outputs.append(str(report.write_csv(directory, "validation.csv",
                                                     [r.as_tuple() for r in rows])))
        manifest.write(directory)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_VALIDATION


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def _config_args(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable)")


def build_parser():
    parser = _Parser(prog="hybridvod", description=__doc__.strip().splitlines()[0])
    verbs = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = verbs.add_parser("analytic", help="evaluate closed-form models")
    models = p.add_subparsers(dest="model", required=True, parser_class=_Parser)
    m = models.add_parser("erlang")
    m.add_argument("--load", type=float, required=True)
    m.add_argument("--ports", type=int, required=True)
    m = models.add_parser("load")
    m.add_argument("--rates", type=_floats, required=True)
    m.add_argument("--holding", type=_floats, required=True)
    m.add_argument("--horizon", type=float, required=True)
    m = models.add_parser("capacity")
    m.add_argument("--p0", type=float, required=True)
    m.add_argument("--c1", type=float, required=True)
    m.add_argument("--lambda", dest="lam", type=float, required=True)
    m.add_argument("--level", type=int, required=True)
    m = models.add_parser("active-peers")
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--k", type=int, required=True)
    m.add_argument("--rho", type=float, required=True)
    m.add_argument("--levels", help="N:K pairs, comma separated, for the multilevel product")
    m = models.add_parser("khintchine")
    m.add_argument("--rates", type=_floats, required=True)
    m.add_argument("--p", type=float, default=1.0)
    m = models.add_parser("admission")
    m.add_argument("--disk-bandwidth", type=float, required=True)
    m.add_argument("--threshold", type=int, required=True)
    m.add_argument("--playback-rate", type=float, required=True)

    p = verbs.add_parser("topology", help="export the architecture")
    _config_args(p)
    p.add_argument("--format", choices=("json", "dot"), default="json")
    p.add_argument("--out")

    p = verbs.add_parser("search", help="run one heuristic search")
    _config_args(p)
    p.add_argument("--asset", type=int, required=True)
    p.add_argument("--chunk", type=int, required=True)
    p.add_argument("--proxy", type=int)

    p = verbs.add_parser("run", help="simulate and write CSV outputs")
    _config_args(p)
    p.add_argument("--manifest", help="start from the config recorded in a manifest")
    p.add_argument("--out", required=True)

    p = verbs.add_parser("sweep", help="hop histograms across adjacency sizes")
    _config_args(p)
    p.add_argument("--manifest")
    p.add_argument("--sizes", type=_ints, default=[1, 2, 3, 4, 5, 6])
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = verbs.add_parser("validate", help="compare simulation with analytic models")
    _config_args(p)
    p.add_argument("--manifest")
    p.add_argument("--tolerance", type=float, default=0.10)
    p.add_argument("--arrivals", type=int, default=50000)
    p.add_argument("--bfs-trials", type=int, default=1000)
    p.add_argument("--out")
    return parser


COMMANDS = {"analytic": cmd_analytic, "topology": cmd_topology, "search": cmd_search,
            "run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "trials", 1) < 1 or getattr(args, "seeds", 1) < 1:
            raise UsageError("trials and seeds must be >= 1")
        return COMMANDS[args.verb](args, out)
    except (UsageError, HybridVodError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
