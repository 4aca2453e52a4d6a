"""``dnsobs`` command line: reproducible experiments with self-describing reports.

JSON reports embed a manifest (command, parameters, input digests, seed,
versions).  Data products (stores, pattern DBs, CSVs) get the same manifest
in a ``<out>.manifest.json`` sidecar.  Exit codes: 0 ok, 1 usage, 2 data.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

from . import __version__, FORMAT_VERSION
from .errors import DataError
from .fingerprint import DEFAULT_WINDOW, PatternDB, detect_stream, uniqueness_report
from .linker import epoch_sweep, evaluate_linkage, restrict_vocabulary
from .model import (
    EpochSpec,
    SessionStore,
    default_origin,
    format_duration,
    parse_duration,
    parse_query_log,
    parse_timestamp,
    sessionize,
    write_query_log,
)
from .pushdns import PushConfig, bandwidth_report, coverage_curve, rank_domains, write_coverage_csv
from .rangequery import STRATEGIES, defense_benchmark
from .synth import PopulationConfig, generate_pattern_db, simulate

log = logging.getLogger("dnsobs")

# flags that never influence results
_NOT_IN_MANIFEST = {"out", "threads", "func", "log_out", "verbose"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(args, inputs):
    params = {
        k: v for k, v in sorted(vars(args).items())
        if k not in _NOT_IN_MANIFEST and k not in inputs
        and k != "command" and not k.endswith("_command") and k != "command_path"
    }
    return {
        "command": args.command_path,
        "params": params,
        "inputs": {
            k: {"name": os.path.basename(p), "sha256": _digest(p)} for k, p in sorted(inputs.items()) if p
        },
        "seed": params.get("seed"),
        "tool_version": __version__,
        "format_version": FORMAT_VERSION,
    }


def _say(args, message):
    # keep stdout clean when it carries the report itself
    print(message, file=sys.stdout if args.out else sys.stderr)


def _dumps(obj):
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def _emit_report(args, inputs, body):
    report = {"manifest": _manifest(args, inputs), **body}
    text = _dumps(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_product(args, inputs, writer):
    """Write a data file plus its manifest sidecar."""
    if not args.out:
        raise UsageError("--out is required for this command")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer(fh)
    with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
        fh.write(_dumps(_manifest(args, inputs)))


def _open_text(path):
    try:
        return open(path, encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"input file not found: {path}") from None


def _load_store(path):
    with _open_text(path) as fh:
        return SessionStore.load(fh)


def _load_db(path):
    with _open_text(path) as fh:
        return PatternDB.load(fh)


def _load_log(path, lenient=False):
    skipped = []
    with _open_text(path) as fh:
        queries = parse_query_log(fh, strict=not lenient, skipped=skipped)
    for exc in skipped:
        log.warning("skipped %s", exc)
    return queries, len(skipped)


# --- synth -----------------------------------------------------------------

def cmd_synth_population(args):
    cfg = {}
    if args.config:
        with _open_text(args.config) as fh:
            cfg = json.load(fh)
    for flag, key in (("users", "num_users"), ("epochs", "num_epochs"), ("seed", "seed")):
        if getattr(args, flag) is not None:
            cfg[key] = getattr(args, flag)
    try:
        config = PopulationConfig.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid population config: {exc}") from None
    args.resolved_config = config.to_dict()
    sim = simulate(config)
    store = sim.store()
    _emit_product(args, {"config": args.config}, store.dump)
    if args.log_out:
        with open(args.log_out, "w", encoding="utf-8", newline="") as fh:
            write_query_log(sim.queries, fh)
    _say(args, f"generated {len(sim.queries)} queries -> {store!r}")


def cmd_synth_patterns(args):
    db = generate_pattern_db(
        num_pages=args.pages,
        pattern_size_range=(args.min_size, args.max_size),
        pool_size=args.pool,
        overlap_rate=args.overlap,
        seed=args.seed,
        shared_pool_size=args.shared_pool,
        disjoint=args.disjoint,
    )
    _emit_product(args, {}, db.dump)
    _say(args, f"generated {len(db)} patterns over {len(db.universe())} domains")


# --- sessionize --------------------------------------------------------------

def cmd_sessionize(args):
    queries, skipped = _load_log(args.input, args.lenient)
    origin = parse_timestamp(args.origin) if args.origin else default_origin(queries)
    store = sessionize(queries, EpochSpec(parse_duration(args.epoch), origin))
    _emit_product(args, {"input": args.input}, store.dump)
    _say(args, f"{len(queries)} queries ({skipped} skipped) -> {store!r}")


# --- fingerprint ---------------------------------------------------------------

def cmd_fp_uniqueness(args):
    rep = uniqueness_report(_load_db(args.db))
    _emit_report(args, {"db": args.db}, rep.to_dict())
    _say(args, f"{rep.unique_count}/{rep.total} patterns unique ({rep.fraction_unique:.1%})")


def cmd_fp_detect(args):
    db = _load_db(args.db)
    queries, _ = _load_log(args.input, args.lenient)
    events = detect_stream(db, queries, args.window)
    _emit_report(args, {"db": args.db, "input": args.input},
                 {"window_seconds": args.window, "events": [e.to_dict() for e in events]})
    _say(args, f"{len(events)} detection events")


# --- link ----------------------------------------------------------------------

def cmd_link_eval(args):
    store = _load_store(args.input)
    dropped = 0
    if args.top_n:
        store, gone = restrict_vocabulary(store, args.top_n)
        dropped = len(gone)
    ev = evaluate_linkage(store, args.alpha, threads=args.threads)
    body = ev.to_dict()
    body["top_n"] = args.top_n
    body["dropped_sessions"] = dropped
    _emit_report(args, {"input": args.input}, body)
    _say(args, f"mean accuracy {ev.mean_accuracy:.4f} over {ev.epoch_pairs} epoch pairs; "
          f"{ev.perfect_user_fraction:.1%} of users always linked")


def cmd_link_sweep(args):
    queries, _ = _load_log(args.input, args.lenient)
    durations = [parse_duration(e) for e in (args.epoch or ["5min", "1h", "24h"])]
    origin = parse_timestamp(args.origin) if args.origin else None
    sweep = epoch_sweep(queries, durations, args.alpha, origin=origin, threads=args.threads)
    rows = [
        {"epoch": format_duration(d), "epoch_seconds": d, "mean_accuracy": ev.mean_accuracy,
         "perfect_user_fraction": ev.perfect_user_fraction, "epoch_pairs": ev.epoch_pairs}
        for d, ev in sweep.evaluations.items()
    ]
    _emit_report(args, {"input": args.input}, {"alpha": args.alpha, "sweep": rows})
    for r in rows:
        _say(args, f"{r['epoch']:>6}: mean accuracy {r['mean_accuracy']:.4f}")


def cmd_link_restrict(args):
    store, dropped = restrict_vocabulary(_load_store(args.input), args.top_n)
    _emit_product(args, {"input": args.input}, store.dump)
    _say(args, f"kept {len(store)} sessions, dropped {len(dropped)} emptied sessions")


# --- rangequery ----------------------------------------------------------------

def cmd_rq_bench(args):
    if args.db:
        db = _load_db(args.db)
    else:
        db = generate_pattern_db(seed=args.db_seed, disjoint=args.disjoint,
                                 pool_size=args.db_pool)
    rep = defense_benchmark(db, args.strategy, args.dummies, args.trials, seed=args.seed,
                            threads=args.threads)
    _emit_report(args, {"db": args.db}, rep.to_dict())
    _say(args, f"{args.strategy} n={args.dummies}: identified {rep.identification_rate:.1%} "
          f"of {rep.trials} page loads, {rep.mean_candidate_count:.2f} candidates on average")


# --- push ----------------------------------------------------------------------

def cmd_push_rank(args):
    ranking = rank_domains(_load_store(args.input))
    _emit_product(args, {"input": args.input}, ranking.write_csv)
    _say(args, f"ranked {len(ranking)} domains, {ranking.total} requests")


def cmd_push_coverage(args):
    store = _load_store(args.input)
    rows = coverage_curve(rank_domains(store), store, args.k)
    _emit_product(args, {"input": args.input}, lambda fh: write_coverage_csv(rows, fh))
    for r in rows:
        _say(args, f"k={r.k}: aggregate {r.aggregate:.4f}, per-user mean {r.per_user_mean:.4f}")


def cmd_push_bandwidth(args):
    try:
        cfg = PushConfig(args.k, args.record_size, args.change_interval)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    rep = bandwidth_report(cfg)
    _emit_report(args, {}, rep)
    _say(args, f"{rep['bytes_per_second']:g} B/s per subscriber")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dnsobs", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"dnsobs {__version__} (report format {FORMAT_VERSION})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def leaf(parent, name, func, help_):
        q = parent.add_parser(name, help=help_)
        q.set_defaults(func=func)
        q.add_argument("--out", help="output file (JSON reports go to stdout if omitted)")
        q.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        return q

    def group(name, help_):
        g = sub.add_parser(name, help=help_)
        return g.add_subparsers(dest=f"{name}_command", required=True, parser_class=_Parser)

    s = group("synth", "generate synthetic workloads")
    q = leaf(s, "population", cmd_synth_population, "user population -> session store JSON")
    q.add_argument("--config", help="PopulationConfig JSON")
    q.add_argument("--users", type=int)
    q.add_argument("--epochs", type=int)
    q.add_argument("--seed", type=int)
    q.add_argument("--log-out", help="also write the raw query log CSV here")
    q = leaf(s, "patterns", cmd_synth_patterns, "page access patterns -> pattern DB JSON")
    q.add_argument("--pages", type=int, default=500)
    q.add_argument("--min-size", type=int, default=10)
    q.add_argument("--max-size", type=int, default=20)
    q.add_argument("--pool", type=int, default=5000)
    q.add_argument("--overlap", type=float, default=0.2)
    q.add_argument("--shared-pool", type=int, default=50)
    q.add_argument("--disjoint", action="store_true")
    q.add_argument("--seed", type=int, default=0)

    q = leaf(sub, "sessionize", cmd_sessionize, "query log CSV -> session store JSON")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--epoch", default="24h")
    q.add_argument("--origin", help="RFC 3339 epoch origin (default: midnight before first query)")
    q.add_argument("--lenient", action="store_true", help="skip malformed lines instead of failing")

    f = group("fingerprint", "website fingerprinting")
    q = leaf(f, "uniqueness", cmd_fp_uniqueness, "pattern uniqueness report")
    q.add_argument("--db", required=True)
    q = leaf(f, "detect", cmd_fp_detect, "detect page loads in a query log")
    q.add_argument("--db", required=True)
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--window", type=float, default=DEFAULT_WINDOW)
    q.add_argument("--lenient", action="store_true")

    lk = group("link", "behavioral session linkage")
    q = leaf(lk, "eval", cmd_link_eval, "link consecutive epochs of a session store")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--top-n", type=int)
    q = leaf(lk, "sweep", cmd_link_sweep, "linkage accuracy versus epoch length")
    q.add_argument("--in", dest="input", required=True, help="query log CSV")
    q.add_argument("--epoch", action="append", help="epoch length, repeatable (e.g. 5min, 1h, 24h)")
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--origin")
    q.add_argument("--lenient", action="store_true")
    q = leaf(lk, "restrict", cmd_link_restrict, "keep only the global top-n domains")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--top-n", type=int, required=True)

    rq = group("rangequery", "range-query defenses")
    q = leaf(rq, "bench", cmd_rq_bench, "identification rate under dummy traffic")
    q.add_argument("--db", help="pattern DB JSON (default: synthetic DB)")
    q.add_argument("--db-seed", type=int, default=0)
    q.add_argument("--db-pool", type=int, default=5000)
    q.add_argument("--disjoint", action="store_true", help="synthetic DB with disjoint patterns")
    q.add_argument("--strategy", choices=STRATEGIES, default="random")
    q.add_argument("--dummies", type=int, default=9)
    q.add_argument("--trials", type=int, default=1000)
    q.add_argument("--seed", type=int, default=0)

    ps = group("push", "push-service analysis")
    q = leaf(ps, "rank", cmd_push_rank, "domain popularity ranking CSV")
    q.add_argument("--in", dest="input", required=True)
    q = leaf(ps, "coverage", cmd_push_coverage, "top-k coverage CSV")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--k", type=int, action="append", required=True, help="push-set size, repeatable")
    q = leaf(ps, "bandwidth", cmd_push_bandwidth, "push bandwidth estimate")
    q.add_argument("--k", type=int, default=10_000)
    q.add_argument("--record-size", type=int, default=80)
    q.add_argument("--change-interval", type=float, default=1000.0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    args.command_path = " ".join(
        v for k, v in vars(args).items() if k == "command" or k.endswith("_command")
    )
    if args.threads < 1:
        print("dnsobs: error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except UsageError as exc:
        print(f"dnsobs: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, json.JSONDecodeError) as exc:
        print(f"dnsobs: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"dnsobs: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
