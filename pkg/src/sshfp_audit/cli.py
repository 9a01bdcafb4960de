"""Command-line interface: scan, verify, gen, and analyze.

Exit codes: 0 success, 1 verification-negative, 2 usage error, 3 runtime or
configuration error. Human-readable output goes to stdout, diagnostics and
progress to stderr, machine-readable output only to files.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from pathlib import Path

from sshfp_audit import __version__, analysis, dnsclient, figures, pipeline
from sshfp_audit.analysis import DnssecStatus
from sshfp_audit.dnsclient import Outcome, ResolverConfig
from sshfp_audit.keyscan import DEFAULT_ALGOS, KeyscanTarget, collect_host_keys
from sshfp_audit.pipeline import Dedup, InvalidNameError, ScanConfig
from sshfp_audit.scanlog import STATUS_OK
from sshfp_audit.sshfp import HashType, generate_records, serialize_record

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

ENV_RESOLVER = "SSHFP_AUDIT_RESOLVER"
ENV_VALIDATING_RESOLVER = "SSHFP_AUDIT_VALIDATING_RESOLVER"

ALGO_SHORTHAND = {
    "dsa": ("ssh-dss",),
    "rsa": ("ssh-rsa",),
    "ecdsa": ("ecdsa-sha2-nistp256", "ecdsa-sha2-nistp384", "ecdsa-sha2-nistp521"),
    "ed25519": ("ssh-ed25519",),
}


def _endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host:
        return text, 53
    try:
        return host, int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad endpoint {text!r}, expected HOST:PORT")


def _algo_list(text: str) -> tuple[str, ...]:
    algos: list[str] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        algos.extend(ALGO_SHORTHAND.get(item, (item,)))
    if not algos:
        raise argparse.ArgumentTypeError("empty algorithm list")
    return tuple(algos)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sshfp-audit",
        description="Audit DNS-published SSH host key fingerprints (SSHFP records).",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--config",
        help="JSON config file; keys mirror the long flag names one-to-one",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_resolver_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--resolver", type=_endpoint, help="plain recursive resolver HOST:PORT")
        p.add_argument(
            "--validating-resolver",
            type=_endpoint,
            help="DNSSEC-validating recursive resolver HOST:PORT",
        )
        p.add_argument("--timeout", type=float, default=5.0, help="DNS/SSH timeout in seconds")
        p.add_argument("--retries", type=int, default=2, help="DNS retry count")
        p.add_argument(
            "--allow-same-resolver",
            action="store_true",
            help="permit identical plain and validating resolver endpoints",
        )

    p_scan = sub.add_parser("scan", help="scan a stream of domain names")
    add_resolver_flags(p_scan)
    p_scan.add_argument("--input", required=True, help="input names file, or - for stdin")
    p_scan.add_argument("--output", required=True, help="JSON Lines results file (appended)")
    p_scan.add_argument("--workers", type=int, default=50, help="DNS query workers")
    p_scan.add_argument("--ssh-workers", type=int, default=10, help="SSH keyscan workers")
    p_scan.add_argument("--qps", type=float, default=200.0, help="DNS queries per second")
    p_scan.add_argument(
        "--dedup",
        choices=[d.value for d in Dedup],
        default=Dedup.EXACT_NAME.value,
        help="input deduplication mode",
    )
    p_scan.add_argument("--psl", help="public suffix list snapshot path")
    p_scan.add_argument("--checkpoint", help="checkpoint file (default: OUTPUT.checkpoint)")
    p_scan.add_argument("--ssh-port", type=int, default=22)
    p_scan.add_argument("--types", type=_algo_list, default=DEFAULT_ALGOS, help="host key algorithms")

    p_verify = sub.add_parser("verify", help="verify one domain's SSHFP deployment")
    add_resolver_flags(p_verify)
    p_verify.add_argument("domain")
    p_verify.add_argument("--ssh-port", type=int, default=22)
    p_verify.add_argument("--types", type=_algo_list, default=DEFAULT_ALGOS)

    p_gen = sub.add_parser("gen", help="print SSHFP zone lines for a host's keys")
    p_gen.add_argument("host", help="hostname or literal IPv4 address")
    p_gen.add_argument("--port", type=int, default=22)
    p_gen.add_argument("--types", type=_algo_list, default=DEFAULT_ALGOS)
    p_gen.add_argument("--timeout", type=float, default=5.0)

    p_analyze = sub.add_parser("analyze", help="aggregate scan logs into a report")
    p_analyze.add_argument("logs", nargs="+", help="one or more JSON Lines scan logs")
    p_analyze.add_argument("--report", required=True, help="report output directory")
    p_analyze.add_argument(
        "--no-figures", action="store_true", help="skip rendering figure images"
    )
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Pre-scan for --config and fold its keys in as parser defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            data = json.loads(Path(known.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"unreadable config file {known.config}: {exc}")
        defaults = {}
        for key, value in data.items():
            dest = key.replace("-", "_")
            if dest in ("resolver", "validating_resolver") and isinstance(value, str):
                value = _endpoint(value)
            if dest == "types" and isinstance(value, str):
                value = _algo_list(value)
            defaults[dest] = value
        for action in parser._subparsers._group_actions:  # noqa: SLF001
            for subparser in action.choices.values():
                subparser.set_defaults(**defaults)
    return argv


def _resolver_config(args: argparse.Namespace) -> ResolverConfig:
    plain = args.resolver
    validating = args.validating_resolver
    if os.environ.get(ENV_RESOLVER):
        plain = _endpoint(os.environ[ENV_RESOLVER])
    if os.environ.get(ENV_VALIDATING_RESOLVER):
        validating = _endpoint(os.environ[ENV_VALIDATING_RESOLVER])
    if plain is None or validating is None:
        raise ValueError(
            "resolver endpoints required (flags, config file, or "
            f"{ENV_RESOLVER}/{ENV_VALIDATING_RESOLVER})"
        )
    return ResolverConfig(
        plain_resolver=plain,
        validating_resolver=validating,
        timeout=args.timeout,
        retries=args.retries,
        allow_same_endpoint=args.allow_same_resolver,
    )


def _probe_resolver(endpoint: tuple[str, int], timeout: float) -> bool:
    """A resolver is reachable if any reply comes back, NXDOMAIN included."""
    result = dnsclient.query_a("startup-probe.example.com", endpoint, timeout=timeout, retries=0)
    return result.outcome not in (Outcome.TIMEOUT, Outcome.BROKEN)


def cmd_scan(args: argparse.Namespace) -> int:
    if args.input != "-" and not Path(args.input).exists():
        print(f"input file not found: {args.input}", file=sys.stderr)
        return EXIT_USAGE
    try:
        resolver = _resolver_config(args)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_RUNTIME
    for endpoint in {resolver.plain_resolver, resolver.validating_resolver}:
        if not _probe_resolver(endpoint, min(resolver.timeout, 3.0)):
            print(f"resolver unreachable: {endpoint[0]}:{endpoint[1]}", file=sys.stderr)
            return EXIT_RUNTIME
    config = ScanConfig(
        resolver=resolver,
        output_path=args.output,
        query_workers=args.workers,
        ssh_workers=args.ssh_workers,
        qps_limit=args.qps,
        dedup=Dedup(args.dedup),
        psl_path=args.psl,
        checkpoint_path=args.checkpoint,
        keyscan_algos=args.types,
        keyscan_timeout=args.timeout,
        ssh_port=args.ssh_port,
    )

    def progress(done: int) -> None:
        if done % 100 == 0:
            print(f"scanned {done} names", file=sys.stderr)

    try:
        names = pipeline.ingest(sys.stdin if args.input == "-" else args.input)
        written = pipeline.run_scan(config, names, progress=progress)
    except OSError as exc:
        print(f"scan failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {written} result lines to {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        domain = pipeline.normalize_domain(args.domain)
    except InvalidNameError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        resolver = _resolver_config(args)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_RUNTIME
    config = ScanConfig(
        resolver=resolver,
        output_path="/dev/null",
        keyscan_algos=args.types,
        keyscan_timeout=args.timeout,
        ssh_port=args.ssh_port,
    )
    result = pipeline.scan_domain(domain, config)

    if result.status != STATUS_OK:
        print(f"{domain}: {result.status}")
        return EXIT_RUNTIME

    records = result.records
    keys = result.all_keys()
    print(f"{domain}: {len(records)} SSHFP record(s), {len(keys)} host key(s) collected")
    matched_indices = {m.record_index for m in result.matches if m.outcome.matched}
    for index, (record, verdict) in enumerate(zip(records, result.record_verdicts)):
        if verdict is not None:
            state = f"invalid ({verdict.value})"
        elif index in matched_indices:
            state = "match"
        else:
            reasons = {
                m.outcome.reason.value for m in result.matches if m.record_index == index
            }
            notes = [m.outcome.note for m in result.matches if m.record_index == index and m.outcome.note]
            state = "no match" + (f" ({', '.join(sorted(reasons))})" if reasons else "")
            if notes:
                state += f" [{notes[0]}]"
        print(f"  SSHFP {serialize_record(record)}: {state}")

    valid_records = result.valid_records()
    status = analysis.dnssec_status(result.sshfp_lookup, result.validating_lookup)
    any_match = bool(matched_indices)
    if valid_records and keys:
        match_class = analysis.classify_domain_match(valid_records, keys)
        print(f"match class: {match_class.kind.value} ({match_class.ratio})")
    print(f"dnssec status: {status.value}")

    if any_match and status is DnssecStatus.SECURE:
        print("verdict: verified (matching record, DNSSEC secure)")
        return EXIT_OK
    if not keys:
        print("verdict: inconclusive (no SSH host keys collected)")
        return EXIT_RUNTIME
    if any_match:
        print(f"verdict: insecure (matching record, but DNSSEC status is {status.value})")
    else:
        print("verdict: mismatch (no SSHFP record matches a presented key)")
    return EXIT_NEGATIVE


def cmd_gen(args: argparse.Namespace) -> int:
    try:
        socket.inet_aton(args.host)
        address = args.host
    except OSError:
        try:
            infos = socket.getaddrinfo(args.host, None, socket.AF_INET, socket.SOCK_STREAM)
        except socket.gaierror as exc:
            print(f"cannot resolve {args.host}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        address = infos[0][4][0]

    target = KeyscanTarget(
        address=address, port=args.port, algos=args.types, timeout=args.timeout
    )
    result = collect_host_keys(target)
    if not result.keys:
        statuses = ", ".join(f"{a}={s.value}" for a, s in result.per_algo_status.items())
        print(f"no host keys retrievable from {args.host} ({statuses})", file=sys.stderr)
        return EXIT_RUNTIME
    records = generate_records(result.keys, (HashType.SHA1, HashType.SHA256))
    owner = args.host if args.host != address else address
    for record in records:
        print(f"{owner} IN SSHFP {serialize_record(record)}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    results = []
    schema_errors = 0
    for log_path in args.logs:
        if not Path(log_path).exists():
            print(f"unreadable log: {log_path}", file=sys.stderr)
            return EXIT_RUNTIME
        chunk, errors = analysis.read_log_tolerant(log_path)
        results.extend(chunk)
        schema_errors += errors

    report = analysis.aggregate_stats(results, schema_errors=schema_errors)
    out_dir = Path(args.report)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    tables = analysis.render_tables(report)
    (out_dir / "tables.txt").write_text(tables, encoding="utf-8")
    if not args.no_figures:
        for path in figures.render_all(report, out_dir):
            print(f"wrote {path}", file=sys.stderr)
    sys.stdout.write(tables)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    _apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    handlers = {
        "scan": cmd_scan,
        "verify": cmd_verify,
        "gen": cmd_gen,
        "analyze": cmd_analyze,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
