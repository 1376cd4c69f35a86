"""``authprobe`` command line: scan an API for broken authentication.

Exit codes: 0 = scan ran, no findings; 2 = scan ran, findings reported;
1 = usage or execution error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from jsonschema import ValidationError

from .api_model import load_specification
from .errors import AuthProbeError, NoLoginOperationError
from .http_engine import DEFAULT_TIMEOUT_MS, HttpEngine, persist_trace
from .oracles import DEFAULT_THRESHOLD
from .report import SecurityReport, utc_now, write_report
from .scenarios import ScenarioConfig, run_credential_stuffing, run_password_brute_force, \
    run_unchecked_token

log = logging.getLogger("authprobe")

EXIT_CLEAN, EXIT_ERROR, EXIT_FINDINGS = 0, 1, 2

STRATEGY_FLAGS = {
    "stuffing": ["credential_stuffing"],
    "bruteforce": ["password_brute_force"],
    "token": ["unchecked_token"],
    "all": ["credential_stuffing", "password_brute_force", "unchecked_token"],
}
RUNNERS = {
    "credential_stuffing": run_credential_stuffing,
    "password_brute_force": run_password_brute_force,
    "unchecked_token": run_unchecked_token,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="authprobe",
                description="Black-box tests for credential stuffing, password brute "
                            "forcing and unchecked token authenticity.")
    p.add_argument("--spec", required=True, help="OpenAPI 3.x document (JSON or YAML)")
    p.add_argument("--base-url", help="override the document's first server URL")
    p.add_argument("--strategy", choices=sorted(STRATEGY_FLAGS), default="all")
    p.add_argument("--token", help="valid authentication token (token strategy)")
    p.add_argument("--user-id", help="fixed user identifier for brute forcing")
    p.add_argument("--requests", type=int, default=100, help="login attempts per run")
    p.add_argument("--window-ms", type=int, default=10_000,
                   help="time window the attempts are spread over")
    p.add_argument("--similarity-threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="authprobe-out", help="directory for report and traces")
    p.add_argument("--timeout-ms", type=int, default=DEFAULT_TIMEOUT_MS)
    p.add_argument("--no-connection-reuse", action="store_true",
                   help="open a fresh connection per request")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_CLEAN
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    strategies = STRATEGY_FLAGS[args.strategy]
    if args.strategy == "token" and not args.token:
        parser.print_usage(sys.stderr)
        print("authprobe: error: --strategy token needs --token", file=sys.stderr)
        return EXIT_ERROR
    if args.requests < 3:
        print("authprobe: error: --requests must be at least 3", file=sys.stderr)
        return EXIT_ERROR

    try:
        spec = load_specification(args.spec, args.base_url)
    except (AuthProbeError, OSError) as exc:
        print(f"authprobe: cannot load {args.spec}: {exc}", file=sys.stderr)
        return EXIT_ERROR

    out = Path(args.out)
    report = SecurityReport(
        target_base_url=spec.base_url, spec_path=str(args.spec), seed=args.seed,
        started_at=utc_now(),
        settings={
            "requests": args.requests, "window_ms": args.window_ms,
            "similarity_threshold": args.similarity_threshold,
            "timeout_ms": args.timeout_ms, "connection_reuse": not args.no_connection_reuse,
        },
    )
    try:
        out.mkdir(parents=True, exist_ok=True)
        with HttpEngine(args.timeout_ms, not args.no_connection_reuse) as engine:
            for strategy in strategies:
                if strategy == "unchecked_token" and not args.token:
                    report.skipped.append({"strategy": strategy, "reason": "no --token given"})
                    continue
                cfg = ScenarioConfig(
                    strategy=strategy, request_count=args.requests, window_ms=args.window_ms,
                    similarity_threshold=args.similarity_threshold, valid_token=args.token,
                    fixed_user_id=args.user_id, seed=args.seed, timeout_ms=args.timeout_ms,
                    reuse_connections=not args.no_connection_reuse,
                )
                try:
                    result = RUNNERS[strategy](spec, cfg, engine)
                except NoLoginOperationError as exc:
                    if args.strategy != "all":
                        raise
                    report.skipped.append({"strategy": strategy, "reason": str(exc)})
                    log.warning("%s skipped: %s", strategy, exc)
                    continue
                report.strategies_run.append(strategy)
                for label, trace in result.traces.items():
                    name = f"{label}.jsonl"
                    persist_trace(trace, out / name)
                    report.trace_files[label] = name
                report.verdicts.update(result.verdicts)
                report.findings.extend(result.findings)
        report.ended_at = utc_now()
        write_report(report, out / "report.json")
    except (AuthProbeError, OSError, ValueError, ValidationError) as exc:
        print(f"authprobe: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR

    for finding in report.findings:
        print(f"[{finding.severity}] {finding.vulnerability}: {finding.operation_id}")
    print(f"{len(report.findings)} finding(s); report written to {out / 'report.json'}")
    return EXIT_FINDINGS if report.findings else EXIT_CLEAN


def main() -> None:
    raise SystemExit(run_cli())


if __name__ == "__main__":
    main()
