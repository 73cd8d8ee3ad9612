"""Benchmark and history-checking command line interface.

Exit status 0 means every audit and every recorded-window verdict passed;
nonzero means a violation or error, with diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .bench import AuditFailure, BenchConfig, run_benchmark
from .history import MalformedHistory, load_file
from .lincheck import check_linearizable, initial_state_from_metadata


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wfstack-bench",
        description="Run stack benchmarks with quiescent audits, or re-check dumped histories.",
    )
    p.add_argument("--impl", choices=("wf", "treiber", "lock"), default="wf",
                   help="stack implementation under test")
    p.add_argument("--threads", type=int, default=4, metavar="N")
    p.add_argument("--ops", type=int, default=10000, metavar="M",
                   help="operations per thread (0 = unbounded, needs --duration)")
    p.add_argument("--push-ratio", type=float, default=0.5, metavar="F")
    p.add_argument("--w", type=int, default=8, metavar="W", help="cleanup range width")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--cleanup-mode", choices=("paper", "corrected"), default="corrected")
    p.add_argument("--record-history", type=int, default=0, metavar="K",
                   help="record and check linearizability in windows of K operations (0 = off)")
    p.add_argument("--report", metavar="PATH", help="write the JSON report here")
    p.add_argument("--dump-history", metavar="PATH",
                   help="write recorded window histories here (needs --record-history)")
    p.add_argument("--check", metavar="PATH",
                   help="re-check a dumped history file and exit (no benchmark run)")
    p.add_argument("--duration", type=float, default=0.0, metavar="SECONDS",
                   help="stop issuing new operations after this many seconds")
    return p


def _check_file(path: str) -> int:
    try:
        histories = load_file(path)
    except (OSError, MalformedHistory, ValueError) as exc:
        print(f"error: cannot read history file {path}: {exc}", file=sys.stderr)
        return 2
    if not histories:
        print(f"error: no histories in {path}", file=sys.stderr)
        return 2
    bad = 0
    for i, history in enumerate(histories):
        try:
            verdict = check_linearizable(
                history, initial_state=initial_state_from_metadata(history)
            )
        except (MalformedHistory, ValueError) as exc:
            print(f"history {i}: error: {exc}", file=sys.stderr)
            bad += 1
            continue
        label = "linearizable" if verdict.linearizable else "NOT linearizable"
        print(f"history {i}: {len(history.events)} events: {label}")
        if not verdict.linearizable:
            bad += 1
            print("minimal violating prefix:", file=sys.stderr)
            for ev in verdict.violating_prefix.events:
                print(f"  {ev}", file=sys.stderr)
    print(f"{len(histories) - bad}/{len(histories)} histories linearizable")
    return 0 if bad == 0 else 1


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)

    if args.check:
        return _check_file(args.check)

    if args.dump_history and not args.record_history:
        print("error: --dump-history requires --record-history", file=sys.stderr)
        return 2

    config = BenchConfig(
        implementation=args.impl,
        threads=args.threads,
        ops_per_thread=args.ops,
        push_ratio=args.push_ratio,
        w=args.w,
        seed=args.seed,
        cleanup_mode=args.cleanup_mode,
        record_history=args.record_history,
        duration_cap=args.duration,
        keep_histories=bool(args.dump_history),
    )
    try:
        config.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    exit_code = 0
    try:
        report = run_benchmark(config)
    except AuditFailure as exc:
        report = exc.report
        print(f"AUDIT FAILURE: {exc}", file=sys.stderr)
        for key, value in exc.diagnostic.items():
            print(f"  {key}: {value}", file=sys.stderr)
        exit_code = 1

    if report.violating_windows:
        print(
            f"LINEARIZABILITY VIOLATIONS in {len(report.violating_windows)} recorded window(s):",
            file=sys.stderr,
        )
        for v in report.violating_windows:
            print(f"-- window {v['window']} minimal violating prefix --", file=sys.stderr)
            print(v["minimal_prefix"], file=sys.stderr)
        exit_code = 1

    if args.dump_history:
        with open(args.dump_history, "w", encoding="ascii", newline="\n") as f:
            f.write("\n".join(report.window_histories))
        print(f"wrote {len(report.window_histories)} histories to {args.dump_history}")

    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            f.write(report.to_json())
            f.write("\n")
        print(f"wrote report to {args.report}")

    _print_summary(report)
    return exit_code


def _print_summary(report) -> None:
    print(f"impl={report.config['implementation']} threads={report.config['threads']} "
          f"w={report.config['w']} seed={report.config['seed']} mode={report.config['cleanup_mode']}")
    print(f"total_ops={report.total_ops} throughput={report.throughput_ops_per_sec:.0f}/s "
          f"fairness={report.fairness:.4f}")
    print(f"pop_traversal max={report.pop_traversal_max} mean={report.pop_traversal_mean:.2f} "
          f"max_op_seconds={report.max_op_seconds:.4f}")
    if report.final_structure is not None:
        fs = report.final_structure
        print(f"structure physical={fs['physical_len']} logical={fs['logical_size']} "
              f"ratio={fs['ratio']:.2f} residue={fs['residue']} "
              f"max_ratio_observed={report.max_ratio_observed:.2f}")
        print(f"cleanup cleans={report.clean_count} unlinks={report.unlink_count}")
    if report.windows_checked:
        print(f"windows checked={report.windows_checked} "
              f"linearizable={report.windows_linearizable}")
    print(f"audit_passed={report.audit_passed} checks={report.audit_checks}")


if __name__ == "__main__":
    sys.exit(main())
