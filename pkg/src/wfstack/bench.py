"""Workload generation, metrics, quiescent audits, and fairness reporting.

The harness owns the thread lifecycle: it spawns one worker per registered
thread id, each flipping a seeded biased coin per operation (values encode
``(tid, sequence)`` so uniqueness checks are free), joins them, drains any
pending cleanups, and runs the quiescent audits. Any audit failure aborts
with a diagnostic dump that includes the most recent recorded window.

When history recording is on, the run is sharded into small windows: all
workers rendezvous at a barrier, the main thread snapshots the stack's
logical content, the workers perform a few recorded operations each, and the
window's history is checked against the sequential model started from that
snapshot. Checking one huge history would be intractable; many small windows
keep the exhaustive search instant while still exercising live concurrency.
"""

from __future__ import annotations

import json
import math
import random
import sys
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from . import atomics, cleanup
from .baselines import LockedStack, SequentialStackModel, TreiberStack
from .core import CORRECTED, EMPTY, PAPER, StructuralError, WaitFreeStack
from .history import History, HistoryRecorder, POP, PUSH, dumps
from .hooks import StackHooks
from .lincheck import check_linearizable, initial_state_to_metadata

IMPLEMENTATIONS = ("wf", "treiber", "lock")


class AuditFailure(RuntimeError):
    """A quiescent audit failed; carries the report and a diagnostic dump."""

    def __init__(self, message: str, report=None, diagnostic: Optional[dict] = None):
        super().__init__(message)
        self.report = report
        self.diagnostic = diagnostic or {}


@dataclass
class BenchConfig:
    implementation: str = "wf"  # wf | treiber | lock
    threads: int = 4
    ops_per_thread: int = 1000  # 0 = unbounded (requires duration_cap > 0)
    push_ratio: float = 0.5
    w: int = 8
    seed: int = 0
    cleanup_mode: str = CORRECTED
    record_history: int = 0  # total ops per recorded window; 0 = off
    duration_cap: float = 0.0  # seconds; 0 = no cap
    sample_every_pow2: int = 12  # structure sampling every 2**k ops per thread; 0 = off
    op_watchdog_seconds: float = 10.0
    keep_histories: bool = False  # retain every recorded window's text in the report

    def validate(self) -> None:
        if self.implementation not in IMPLEMENTATIONS:
            raise ValueError(f"implementation must be one of {IMPLEMENTATIONS}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not 0.0 <= self.push_ratio <= 1.0:
            raise ValueError("push_ratio must be in [0, 1]")
        if self.w < 2:
            raise ValueError("w must be >= 2")
        if self.ops_per_thread < 0:
            raise ValueError("ops_per_thread must be >= 0")
        if self.ops_per_thread == 0 and self.duration_cap <= 0:
            raise ValueError("unbounded ops need a duration_cap")
        if self.record_history < 0:
            raise ValueError("record_history must be >= 0")
        if self.record_history and self.ops_per_thread == 0:
            raise ValueError("history recording needs a fixed ops_per_thread")


@dataclass
class StructureStats:
    physical_len: int
    logical_size: int
    ratio: float
    residue: int

    def to_dict(self) -> dict:
        return {
            "physical_len": self.physical_len,
            "logical_size": self.logical_size,
            "ratio": self.ratio,
            "residue": self.residue,
        }


@dataclass
class BenchReport:
    config: dict
    duration_seconds: float
    throughput_ops_per_sec: float
    total_ops: int
    per_thread_ops: List[int]
    fairness: float
    pop_traversal_max: int
    pop_traversal_mean: float
    max_op_seconds: float
    max_ratio_observed: float
    clean_count: int
    unlink_count: int
    final_structure: Optional[dict]
    windows_checked: int
    windows_linearizable: int
    violating_windows: List[dict]
    audit_passed: bool
    audit_checks: Dict[str, bool]
    window_histories: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "duration_seconds": self.duration_seconds,
            "throughput_ops_per_sec": self.throughput_ops_per_sec,
            "total_ops": self.total_ops,
            "per_thread_ops": self.per_thread_ops,
            "fairness": self.fairness,
            "pop_traversal_max": self.pop_traversal_max,
            "pop_traversal_mean": self.pop_traversal_mean,
            "max_op_seconds": self.max_op_seconds,
            "max_ratio_observed": self.max_ratio_observed,
            "clean_count": self.clean_count,
            "unlink_count": self.unlink_count,
            "final_structure": self.final_structure,
            "windows_checked": self.windows_checked,
            "windows_linearizable": self.windows_linearizable,
            "violating_windows": self.violating_windows,
            "audit_passed": self.audit_passed,
            "audit_checks": self.audit_checks,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def deterministic_fields(self) -> dict:
        """Report content that must be identical across same-seed reruns
        of a single-threaded configuration (timing excluded)."""
        d = self.to_dict()
        for key in ("duration_seconds", "throughput_ops_per_sec", "max_op_seconds"):
            d.pop(key)
        return d


class CountingHooks(StackHooks):
    """Instrumentation counters shared by all workers.

    Per-event counters take one small lock; rare events (votes reaching the
    threshold, cleans, unlinks) record full detail for the audits.
    """

    def __init__(self, w: int):
        self.w = w
        self._lock = threading.Lock()
        self.top_cas_count = 0
        self.top_cas_max_index = 0
        self.mark_count = 0
        self.traversal_count = 0
        self.traversal_sum = 0
        self.traversal_max = 0
        self.vote_violations: List[tuple] = []  # (base_index, count) with count > w+1
        self.full_bases: set = set()  # bases whose counter reached w+1
        self.clean_counts: Dict[int, int] = {}
        self.unlinks: List[tuple] = []  # (base_index, right_index)

    def on_top_cas(self, index: int) -> None:
        with self._lock:
            self.top_cas_count += 1
            if index > self.top_cas_max_index:
                self.top_cas_max_index = index

    def on_mark(self, index: int) -> None:
        with self._lock:
            self.mark_count += 1

    def on_traversal(self, length: int) -> None:
        with self._lock:
            self.traversal_count += 1
            self.traversal_sum += length
            if length > self.traversal_max:
                self.traversal_max = length

    def on_vote(self, base_index: int, count: int) -> None:
        if count > self.w + 1:
            with self._lock:
                self.vote_violations.append((base_index, count))
        elif count == self.w + 1:
            with self._lock:
                self.full_bases.add(base_index)

    def on_clean(self, base_index: int) -> None:
        with self._lock:
            self.clean_counts[base_index] = self.clean_counts.get(base_index, 0) + 1

    def on_unlink(self, base_index: int, right_index: int) -> None:
        with self._lock:
            self.unlinks.append((base_index, right_index))


def make_stack(
    implementation: str,
    threads: int,
    w: int,
    cleanup_mode: str,
    hooks: Optional[StackHooks] = None,
):
    if implementation == "wf":
        return WaitFreeStack(threads, w=w, cleanup_mode=cleanup_mode, hooks=hooks)
    if implementation == "treiber":
        return TreiberStack(threads, hooks=hooks)
    if implementation == "lock":
        return LockedStack(threads, hooks=hooks)
    raise ValueError(f"unknown implementation {implementation!r}")


def compute_fairness(counts: Sequence[int]) -> float:
    """Mean per-thread completed operations divided by the fastest thread's.

    All-zero counts make the ratio undefined; NaN is returned as the error
    sentinel. Empty or negative inputs are rejected outright.
    """
    if not counts:
        raise ValueError("counts must be nonempty")
    if any(c < 0 for c in counts):
        raise ValueError("counts must be >= 0")
    fastest = max(counts)
    if fastest == 0:
        return float("nan")
    return (sum(counts) / len(counts)) / fastest


def remaining_values(stack) -> List[Any]:
    """Logical content still in the stack, top first."""
    if isinstance(stack, WaitFreeStack):
        return [n.value for n in stack.chain_from_top() if not n.mark.get()]
    if isinstance(stack, TreiberStack):
        out = []
        node = stack.top.get()
        while node is not None:
            out.append(node.value)
            node = node.next
        return out
    if isinstance(stack, LockedStack):
        return list(reversed(stack._items))
    if isinstance(stack, SequentialStackModel):
        return list(reversed(stack.snapshot()))
    raise TypeError(f"unsupported stack type {type(stack)!r}")


def structure_stats(
    stack: WaitFreeStack,
    pushed_count: Optional[int] = None,
    popped_count: Optional[int] = None,
) -> StructureStats:
    """Walk the prev-chain and report physical/logical size measures.

    ``logical_size`` comes from the instrumentation counters when provided
    (pushes minus successful pops); otherwise it is derived from the chain as
    the number of reachable unmarked nodes. ``residue`` counts the chained
    nodes with index below w, which the cleanup protocol never removes. A
    detected cycle raises StructuralError.
    """
    physical = 0
    residue = 0
    unmarked = 0
    w = stack.w
    for node in stack.chain_from_top():
        physical += 1
        if 1 <= node.index < w:
            residue += 1
        if not node.mark.get():
            unmarked += 1
    if pushed_count is not None and popped_count is not None:
        logical = pushed_count - popped_count
    else:
        logical = unmarked
    ratio = physical / max(logical, 1)
    return StructureStats(physical, logical, ratio, residue)


# -- benchmark run ------------------------------------------------------------


class _WindowPlan:
    """Shared per-window coordination when history recording is on."""

    def __init__(self, threads: int, window_ops: int, ops_per_thread: int):
        self.per_thread = max(1, window_ops // threads)
        self.count = math.ceil(ops_per_thread / self.per_thread)
        self.start = threading.Barrier(threads + 1)
        self.end = threading.Barrier(threads + 1)
        self.recorder: Optional[HistoryRecorder] = None


class _Worker(threading.Thread):
    def __init__(self, tid: int, stack, config: BenchConfig, plan: Optional[_WindowPlan], t0: float):
        super().__init__(name=f"bench-{tid}", daemon=True)
        self.tid = tid
        self.stack = stack
        self.config = config
        self.plan = plan
        self.t0 = t0
        self.rng = random.Random(f"{config.seed}:{tid}")
        self.pushed: List[int] = []
        self.popped: List[int] = []
        self.empties = 0
        self.completed = 0
        self.max_op_seconds = 0.0
        self.max_ratio = 0.0
        self.error: Optional[BaseException] = None

    def _one_op(self, recorder: Optional[HistoryRecorder]) -> None:
        cfg = self.config
        tid = self.tid
        push = self.rng.random() < cfg.push_ratio
        if push:
            value = (tid << 32) | len(self.pushed)
            if recorder is not None:
                recorder.invoke(tid, PUSH, value=value)
            t0 = time.perf_counter()
            self.stack.push(tid, value)
            dt = time.perf_counter() - t0
            if recorder is not None:
                recorder.respond(tid, PUSH)
            self.pushed.append(value)
        else:
            if recorder is not None:
                recorder.invoke(tid, POP)
            t0 = time.perf_counter()
            result = self.stack.pop(tid)
            dt = time.perf_counter() - t0
            if recorder is not None:
                recorder.respond(tid, POP, result=result)
            if result is EMPTY:
                self.empties += 1
            else:
                self.popped.append(result)
        if dt > self.max_op_seconds:
            self.max_op_seconds = dt
        self.completed += 1
        k = cfg.sample_every_pow2
        if k and self.completed % (1 << k) == 0 and isinstance(self.stack, WaitFreeStack):
            hooks = self.stack.hooks
            if isinstance(hooks, CountingHooks):
                stats = structure_stats(self.stack, hooks.top_cas_count, hooks.mark_count)
                if stats.ratio > self.max_ratio:
                    self.max_ratio = stats.ratio

    def run(self) -> None:
        try:
            cfg = self.config
            if self.plan is not None:
                remaining = cfg.ops_per_thread
                for _ in range(self.plan.count):
                    self.plan.start.wait()
                    recorder = self.plan.recorder
                    batch = min(self.plan.per_thread, remaining)
                    for _ in range(batch):
                        if cfg.duration_cap and time.monotonic() - self.t0 > cfg.duration_cap:
                            break
                        self._one_op(recorder)
                        remaining -= 1
                    self.plan.end.wait()
            else:
                i = 0
                while cfg.ops_per_thread == 0 or i < cfg.ops_per_thread:
                    if cfg.duration_cap and time.monotonic() - self.t0 > cfg.duration_cap:
                        break
                    self._one_op(None)
                    i += 1
        except BaseException as exc:  # surfaced after join
            self.error = exc
            if self.plan is not None:
                # Unblock everyone parked at a barrier; the run aborts.
                self.plan.start.abort()
                self.plan.end.abort()


def run_benchmark(config: BenchConfig) -> BenchReport:
    """Run one configured benchmark and return its report.

    Raises AuditFailure (report attached) if a quiescent audit fails; window
    linearizability verdicts are data in the report either way.
    """
    config.validate()
    counting = CountingHooks(config.w)
    stack = make_stack(config.implementation, config.threads, config.w, config.cleanup_mode, counting)
    is_wf = isinstance(stack, WaitFreeStack)

    plan = None
    if config.record_history:
        plan = _WindowPlan(config.threads, config.record_history, config.ops_per_thread)

    t0 = time.monotonic()
    workers = [_Worker(tid, stack, config, plan, t0) for tid in range(config.threads)]
    for wk in workers:
        wk.start()

    windows_checked = 0
    windows_linearizable = 0
    violating_windows: List[dict] = []
    window_histories: List[str] = []
    last_window_text = ""

    if plan is not None:
        try:
            for window_idx in range(plan.count):
                # Workers are parked at the start barrier: the stack is
                # quiescent and its logical content (bottom-to-top) is the
                # window's initial state for the checker.
                initial = tuple(reversed(remaining_values(stack)))
                plan.recorder = HistoryRecorder(
                    config.threads,
                    metadata={
                        "impl": config.implementation,
                        "w": str(config.w),
                        "seed": str(config.seed),
                        "mode": config.cleanup_mode,
                        "window": str(window_idx),
                        "initial": initial_state_to_metadata(initial),
                    },
                )
                plan.start.wait()
                plan.end.wait()
                history = plan.recorder.merge()
                if not history.events:
                    continue
                last_window_text = dumps(history)
                if config.keep_histories:
                    window_histories.append(last_window_text)
                verdict = check_linearizable(history, initial_state=initial)
                windows_checked += 1
                if verdict.linearizable:
                    windows_linearizable += 1
                else:
                    violating_windows.append(
                        {
                            "window": window_idx,
                            "history": dumps(history),
                            "minimal_prefix": dumps(verdict.violating_prefix),
                        }
                    )
        except threading.BrokenBarrierError:
            pass  # a worker aborted; its error is raised after the join

    for wk in workers:
        wk.join()
    duration = time.monotonic() - t0
    for wk in workers:
        if wk.error is not None:
            raise wk.error

    if is_wf:
        cleanup.drain(stack)

    per_thread = [wk.completed for wk in workers]
    total = sum(per_thread)
    pushed_all = [v for wk in workers for v in wk.pushed]
    popped_all = [v for wk in workers for v in wk.popped]

    final_structure = None
    if is_wf:
        final_structure = structure_stats(stack, len(pushed_all), len(popped_all)).to_dict()

    max_ratio = max([wk.max_ratio for wk in workers] + [0.0])
    if final_structure is not None:
        max_ratio = max(max_ratio, final_structure["ratio"])

    report = BenchReport(
        config=vars(config).copy(),
        duration_seconds=duration,
        throughput_ops_per_sec=total / duration if duration > 0 else float("nan"),
        total_ops=total,
        per_thread_ops=per_thread,
        fairness=compute_fairness(per_thread),
        pop_traversal_max=counting.traversal_max,
        pop_traversal_mean=(
            counting.traversal_sum / counting.traversal_count if counting.traversal_count else 0.0
        ),
        max_op_seconds=max(wk.max_op_seconds for wk in workers),
        max_ratio_observed=max_ratio,
        clean_count=sum(counting.clean_counts.values()),
        unlink_count=len(counting.unlinks),
        final_structure=final_structure,
        windows_checked=windows_checked,
        windows_linearizable=windows_linearizable,
        violating_windows=violating_windows,
        audit_passed=True,
        audit_checks={},
        window_histories=window_histories,
    )

    checks, failures = _audit_quiescent(stack, pushed_all, popped_all, counting, report)
    report.audit_checks = checks
    report.audit_passed = not failures
    if failures:
        diagnostic = {
            "failed_checks": failures,
            "last_recorded_window": last_window_text,
            "remaining_top_first": remaining_values(stack)[:50],
            "pushed_count": len(pushed_all),
            "popped_count": len(popped_all),
        }
        raise AuditFailure(
            "quiescent audit failed: " + ", ".join(failures), report=report, diagnostic=diagnostic
        )
    return report


def _audit_quiescent(stack, pushed: List[int], popped: List[int], counting: CountingHooks, report) -> tuple:
    """Uniqueness, conservation, structure, and cleanup-discipline checks."""
    checks: Dict[str, bool] = {}
    watchdog = report.config.get("op_watchdog_seconds", 0)

    checks["no_duplicate_pops"] = len(popped) == len(set(popped))

    try:
        remaining = remaining_values(stack)
        checks["chain_walk"] = True
    except StructuralError:
        remaining = []
        checks["chain_walk"] = False
    popped_set = set(popped)
    remaining_set = set(remaining)
    checks["conservation"] = (
        popped_set | remaining_set == set(pushed) and not popped_set & remaining_set
    )

    if isinstance(stack, WaitFreeStack):
        indices = [n.index for n in stack.chain_from_top()] if checks["chain_walk"] else []
        checks["indices_strictly_decreasing"] = all(
            a > b for a, b in zip(indices, indices[1:])
        )
        checks["counters_bounded"] = not counting.vote_violations and all(
            n.counter.get() <= stack.w + 1 for n in stack.chain_from_top()
        )
        checks["single_clean_per_full_base"] = (
            set(counting.clean_counts) == counting.full_bases
            and all(c == 1 for c in counting.clean_counts.values())
        )
        segments = [(b, b + stack.w - 1) for b, _r in counting.unlinks]
        segments.sort()
        checks["unlinked_segments_disjoint"] = all(
            prev_hi < lo for (_, prev_hi), (lo, _) in zip(segments, segments[1:])
        )
        checks["no_pending_deletes"] = not cleanup.pending_requests(stack)
        checks["top_cas_complete"] = counting.top_cas_count == counting.top_cas_max_index

    if watchdog:
        checks["op_watchdog"] = report.max_op_seconds < watchdog

    failures = [name for name, ok in checks.items() if not ok]
    return checks, failures


# -- linearizability sweep -----------------------------------------------------


@dataclass
class SweepResult:
    cleanup_mode: str
    windows_checked: int
    windows_linearizable: int
    violations: List[dict] = field(default_factory=list)
    audit_failures: int = 0
    elapsed_seconds: float = 0.0

    @property
    def clean(self) -> bool:
        return self.windows_checked == self.windows_linearizable


def linearizability_sweep(
    windows: int,
    cleanup_mode: str = CORRECTED,
    seed: int = 0,
    threads_choices: Sequence[int] = (2, 3, 4),
    ops_per_window: int = 12,
    w: int = 2,
    jitter: float = 0.05,
) -> SweepResult:
    """Check ``windows`` recorded windows from live concurrent runs.

    Each inner run uses a fresh stack and a handful of windows; thread
    counts rotate through ``threads_choices``. A small scheduling jitter
    (an occasional GIL yield at atomic accesses) plus a short switch
    interval makes genuinely overlapping executions common.
    """
    result = SweepResult(cleanup_mode=cleanup_mode, windows_checked=0, windows_linearizable=0)
    rng = random.Random(seed)

    def jitter_hook(cell, op):
        if rng.random() < jitter:
            time.sleep(0)

    t0 = time.monotonic()
    old_interval = sys.getswitchinterval()
    sys.setswitchinterval(1e-5)
    try:
        with atomics.step_hook(jitter_hook if jitter > 0 else None):
            run_idx = 0
            while result.windows_checked < windows:
                threads = threads_choices[run_idx % len(threads_choices)]
                per_thread_slice = max(1, ops_per_window // threads)
                windows_per_run = 8
                cfg = BenchConfig(
                    implementation="wf",
                    threads=threads,
                    ops_per_thread=per_thread_slice * windows_per_run,
                    push_ratio=0.6,
                    w=w,
                    seed=seed + run_idx,
                    cleanup_mode=cleanup_mode,
                    record_history=ops_per_window,
                    sample_every_pow2=0,
                )
                try:
                    report = run_benchmark(cfg)
                except AuditFailure as exc:
                    report = exc.report
                    result.audit_failures += 1
                result.windows_checked += report.windows_checked
                result.windows_linearizable += report.windows_linearizable
                for v in report.violating_windows:
                    v = dict(v)
                    v["run"] = run_idx
                    result.violations.append(v)
                run_idx += 1
    finally:
        sys.setswitchinterval(old_interval)
    result.elapsed_seconds = time.monotonic() - t0
    return result


def comparison_table(
    seed: int = 0,
    threads: int = 4,
    duration: float = 0.2,
    w: int = 8,
    ops_per_thread: int = 0,
) -> tuple:
    """Run the wait-free, Treiber, and locked stacks under one seed and
    return (text table, rows). Rows carry per-implementation fairness,
    throughput, and per-thread counts for side-by-side comparison."""
    rows = []
    for impl in IMPLEMENTATIONS:
        cfg = BenchConfig(
            implementation=impl,
            threads=threads,
            ops_per_thread=ops_per_thread,
            push_ratio=0.5,
            w=w,
            seed=seed,
            cleanup_mode=CORRECTED,
            duration_cap=duration,
            sample_every_pow2=0,
        )
        report = run_benchmark(cfg)
        rows.append(
            {
                "impl": impl,
                "total_ops": report.total_ops,
                "fairness": report.fairness,
                "throughput_ops_per_sec": report.throughput_ops_per_sec,
                "per_thread_ops": report.per_thread_ops,
            }
        )
    header = f"{'impl':8s} {'ops':>10s} {'fairness':>9s} {'ops/sec':>12s}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['impl']:8s} {r['total_ops']:>10d} {r['fairness']:>9.4f} "
            f"{r['throughput_ops_per_sec']:>12.0f}"
        )
    return "\n".join(lines), rows
