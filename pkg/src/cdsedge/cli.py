"""Command-line entry point: ``cdsedge <subcommand>``.

Service subcommands accept ``--config FILE`` with ``key = value`` lines whose keys are
flag names (``max-records = 650``).  Explicit flags override the file, which overrides
built-in defaults.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import signal
import sys
from pathlib import Path

from . import bench as bench_mod
from .codec import DEFAULT_BASE_INTERVAL, CodecConfig, IdEncoding, decode_payload, encode_batch, serialize_compact
from .dictionary import build_dictionary, load_dictionary, save_dictionary
from .errors import CdsError, MalformedLine, UnknownKey
from .records import GeneratorConfig, default_key_universe, full_key_universe, gen_records, parse_record, render_lines
from .service.models import DEFAULT_MAX_RECORDS, Mode

log = logging.getLogger("cdsedge")


class CliError(Exception):
    pass


def load_config(path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string("[cdsedge]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise CliError(f"bad config {path}: {exc}") from None
    return dict(cp["cdsedge"])


def _amounts(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("record amounts must be non-negative")
    return values


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="cdsedge", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic raw price file prices-<n>.tsv", formatter_class=fmt)
    p.add_argument("--n", type=int, required=True, help="number of records")
    p.add_argument("--seed", type=int, default=1, help="generator seed")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--universe", default=None,
                   help="dictionary file whose keys are drawn from (default: built-in 48-key sample)")
    p.add_argument("--max-step", type=_positive, default=300, help="max seconds between records")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("dict", help="write a lookup table file", formatter_class=fmt)
    p.add_argument("--out", required=True, help="output path")
    p.add_argument("--scope", choices=["full", "sample"], default="full",
                   help="full 402x8x56 universe, or only the built-in 48-key sample")
    p.set_defaults(func=cmd_dict)

    p = sub.add_parser("serve-source", help="host raw price files over HTTP", formatter_class=fmt)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--data-dir", default=".", help="directory holding prices-<N>.tsv files")
    p.add_argument("--host", default="127.0.0.1", help="bind address")
    p.add_argument("--port", type=int, default=8000, help="bind port")
    p.set_defaults(func=cmd_serve_source)

    p = sub.add_parser("serve-edge", help="run the edge node", formatter_class=fmt)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--dictionary", default=None, help="lookup table file injected at startup (required)")
    p.add_argument("--source-url", default="http://127.0.0.1:8000", help="data source base URL")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.CDS.value,
                   help="mode used when a request does not name one")
    p.add_argument("--max-records", type=_positive, default=DEFAULT_MAX_RECORDS,
                   help="largest request the node accepts")
    p.add_argument("--id-encoding", choices=[e.value for e in IdEncoding], default=IdEncoding.BYTEWISE.value,
                   help="how composite-key ids are written")
    p.add_argument("--interval", type=_positive, default=DEFAULT_BASE_INTERVAL,
                   help="base timestamp interval in seconds")
    p.add_argument("--timer", choices=["cpu", "wall"], default="cpu",
                   help="clock for processing latency: thread CPU time, or wall time for a dedicated host")
    p.add_argument("--host", default="127.0.0.1", help="bind address")
    p.add_argument("--port", type=int, default=8001, help="bind port")
    p.set_defaults(func=cmd_serve_edge)

    p = sub.add_parser("encode", help="compact a raw price file offline", formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True, help="raw price file")
    p.add_argument("--out", required=True, help="compact output file")
    p.add_argument("--dict", dest="dictionary", required=True, help="lookup table file")
    p.add_argument("--id-encoding", choices=[e.value for e in IdEncoding], default=IdEncoding.BYTEWISE.value,
                   help="how composite-key ids are written")
    p.add_argument("--interval", type=_positive, default=DEFAULT_BASE_INTERVAL,
                   help="base timestamp interval in seconds")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="restore a raw price file from its compact form", formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True, help="compact file")
    p.add_argument("--out", required=True, help="raw output file")
    p.add_argument("--dict", dest="dictionary", required=True, help="lookup table file")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", help="sweep record amounts against a running edge node", formatter_class=fmt)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--edge-url", default="http://127.0.0.1:8001", help="edge node base URL")
    p.add_argument("--amounts", type=_amounts, default=list(bench_mod.DEFAULT_AMOUNTS),
                   help="comma-separated record amounts")
    p.add_argument("--reps", type=_positive, default=bench_mod.DEFAULT_REPETITIONS, help="repetitions per point")
    p.add_argument("--warmup", type=int, default=0, help="discarded requests before each point")
    p.add_argument("--order", choices=["interleaved", "blocked"], default="interleaved",
                   help="interleave repetitions across points, or run each point's repetitions back to back")
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.add_argument("--format", choices=["csv", "markdown"], default="csv", help="report format")
    p.add_argument("--assert-trends", action="store_true",
                   help="exit non-zero when the processing-latency trend checks fail")
    p.add_argument("--max-violations", type=int, default=1,
                   help="allowed non-monotone adjacent pairs per mode")
    p.add_argument("--rel-tol", type=float, default=0.10, help="allowed relative drop per violation")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fixture", help="check ratios over the published latency table", formatter_class=fmt)
    p.set_defaults(func=cmd_fixture)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = load_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in subparser._actions}
        converted = {}
        for key, raw in values.items():
            dest = key.replace("-", "_")
            action = known.get(dest)
            if action is None or dest in ("config", "help", "func"):
                raise CliError(f"unknown config key {key!r} for {args.command}")
            value = action.type(raw) if action.type else raw
            if action.choices and value not in action.choices:
                raise CliError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
            converted[dest] = value
        subparser.set_defaults(**converted)
        args = parser.parse_args(argv)
    return args


# -- subcommands ------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.n < 0:
        raise CliError("--n must be non-negative")
    if args.universe:
        universe = load_dictionary(args.universe).entries
    else:
        universe = default_key_universe()
    cfg = GeneratorConfig(seed=args.seed, max_step_seconds=args.max_step, key_universe=tuple(universe))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"prices-{args.n}.tsv"
    path.write_bytes(render_lines(gen_records(args.n, cfg)).encode("utf-8"))
    print(path)
    return 0


def cmd_dict(args) -> int:
    keys = full_key_universe() if args.scope == "full" else default_key_universe()
    d = build_dictionary(keys)
    written = save_dictionary(d, args.out)
    print(f"{args.out}: {len(d)} entries, {written} bytes")
    return 0


def _serve(app, host, port):
    import uvicorn

    # uvicorn re-raises the stop signal after a graceful shutdown; catch it so the
    # command exits 0
    received = []
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda signum, frame: received.append(signum))
    uvicorn.run(app, host=host, port=port, log_level="warning", access_log=False)
    if received:
        log.info("stopped on %s", signal.Signals(received[0]).name)


def cmd_serve_source(args) -> int:
    from .service.source import create_source_app

    try:
        app = create_source_app(args.data_dir)
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from None
    log.info("source serving %s on http://%s:%d", Path(args.data_dir).resolve(), args.host, args.port)
    _serve(app, args.host, args.port)
    return 0


def cmd_serve_edge(args) -> int:
    from .service.edge import create_edge_app
    from .service.models import EdgeConfig

    if not args.dictionary:
        raise CliError("serve-edge needs a lookup table: pass --dictionary PATH")
    if not Path(args.dictionary).is_file():
        raise CliError(f"dictionary file not found: {args.dictionary}")
    cfg = EdgeConfig(
        source_url=args.source_url,
        mode=args.mode,
        max_records=args.max_records,
        dictionary_path=args.dictionary,
        base_interval_seconds=args.interval,
        id_encoding=args.id_encoding,
        timer=args.timer,
    )
    log.info("loading lookup table %s; cascade requests go to %s", args.dictionary, cfg.source_url)
    app = create_edge_app(cfg)
    _serve(app, args.host, args.port)
    return 0


def cmd_encode(args) -> int:
    d = load_dictionary(args.dictionary)
    records = _read_raw(args.input)
    cfg = CodecConfig(args.interval, IdEncoding(args.id_encoding))
    try:
        batch = encode_batch(records, d, cfg)
    except UnknownKey as exc:
        raise CliError(f"{args.input}: line {exc.index + 1}: {exc}") from None
    payload = serialize_compact(batch)
    Path(args.out).write_bytes(payload)
    log.info("%s: %d records, %d -> %d bytes", args.input, len(records), Path(args.input).stat().st_size, len(payload))
    return 0


def cmd_decode(args) -> int:
    d = load_dictionary(args.dictionary)
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}") from None
    records = decode_payload(data, d)
    Path(args.out).write_bytes(render_lines(records).encode("utf-8"))
    return 0


def _read_raw(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        try:
            records.append(parse_record(line))
        except MalformedLine as exc:
            raise CliError(f"{path}: line {lineno}: {type(exc).__name__}: {exc}") from None
    return records


def cmd_bench(args) -> int:
    status = 0
    try:
        report = bench_mod.run_sweep(args.amounts, args.reps, args.edge_url, warmup=args.warmup,
                                     order=args.order, corpus_descriptor=args.edge_url)
    except bench_mod.SweepAborted as exc:
        report = exc.report
        print(f"error: {exc}", file=sys.stderr)
        status = 1
    body = bench_mod.emit_report(report, args.format)
    if not report.complete and args.format == "csv":
        body += f"# INCOMPLETE: {report.error}\n".encode("utf-8")
    if args.out:
        Path(args.out).write_bytes(body)
    else:
        sys.stdout.write(body.decode("utf-8"))
    if report.complete and args.assert_trends:
        failures = bench_mod.check_trends(report, args.max_violations, args.rel_tol)
        for f in failures:
            print(f"trend check failed: {f}", file=sys.stderr)
        if failures:
            status = 1
    return status


def cmd_fixture(args) -> int:
    result = bench_mod.paper_fixture_check()
    for (n, *_), cr, rr in zip(bench_mod.TABLE_I, result.cds_ratios, result.relay_ratios):
        print(f"{n:>4} records  cds_ratio={cr:.6f}  relay_ratio={rr:.6f}")
    for f in result.failures:
        print(f"FAIL: {f}", file=sys.stderr)
    print("fixture: " + ("pass" if result.passed else "fail"))
    return 0 if result.passed else 1


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if args.command.startswith("serve") else 1
    except CdsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
