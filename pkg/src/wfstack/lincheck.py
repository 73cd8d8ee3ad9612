"""Brute-force linearizability checking against the sequential stack model.

The checker does an exhaustive depth-first search over linearization orders:
at each step any operation may be linearized next provided no other
unlinearized operation's response precedes its invocation (real-time order
is preserved), and provided the sequential model reproduces its recorded
result. Visited (chosen-set, model-state) pairs are memoized. Invocations
without responses are allowed to take effect with whatever result the model
gives, or to be left out - the standard completion semantics, which is what
makes prefix checking sound.

Checking is offline and single-threaded; histories are immutable values.
The search refuses histories above the operation bound instead of
approximating.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

from .baselines import SequentialStackModel
from .core import EMPTY
from .history import History, HistoryEvent, INV, MalformedHistory, POP, PUSH, RESP

DEFAULT_MAX_OPS = 16


class OpBoundExceeded(ValueError):
    """The history holds more completed operations than the checker allows."""


@dataclass(frozen=True)
class Operation:
    """A matching inv/resp pair (resp_seq None while the call is pending)."""

    op_id: int
    thread: int
    op: str  # PUSH or POP
    value: Any  # push argument
    result: Any  # recorded response payload (None for pending)
    inv_seq: int
    resp_seq: Optional[int]

    @property
    def pending(self) -> bool:
        return self.resp_seq is None


@dataclass
class Verdict:
    """Outcome of a check: a witness order, or a minimal violating prefix."""

    linearizable: bool
    witness: Optional[Tuple[Operation, ...]] = None
    violating_prefix: Optional[History] = None


def operations(history: History) -> List[Operation]:
    """Pair up events into operations; pending invocations keep resp_seq=None."""
    open_inv: dict = {}
    ops: List[Operation] = []
    for ev in sorted(history.events, key=lambda e: e.seq):
        if ev.kind == INV:
            if ev.thread in open_inv:
                raise MalformedHistory(
                    f"thread {ev.thread} has overlapping invocations at seq {ev.seq}"
                )
            open_inv[ev.thread] = ev
        elif ev.kind == RESP:
            inv = open_inv.pop(ev.thread, None)
            if inv is None:
                raise MalformedHistory(f"response without invocation at seq {ev.seq}")
            if inv.op != ev.op:
                raise MalformedHistory(
                    f"thread {ev.thread}: response op {ev.op} != invocation op {inv.op}"
                )
            ops.append(
                Operation(
                    op_id=len(ops),
                    thread=ev.thread,
                    op=inv.op,
                    value=inv.value,
                    result=ev.result,
                    inv_seq=inv.seq,
                    resp_seq=ev.seq,
                )
            )
        else:
            raise MalformedHistory(f"unknown event kind {ev.kind!r}")
    for inv in open_inv.values():
        ops.append(
            Operation(
                op_id=len(ops),
                thread=inv.thread,
                op=inv.op,
                value=inv.value,
                result=None,
                inv_seq=inv.seq,
                resp_seq=None,
            )
        )
    return ops


def _results_match(model_result: Any, recorded: Any) -> bool:
    if model_result is EMPTY or recorded is EMPTY:
        return model_result is recorded
    return model_result == recorded


def _search(ops: List[Operation], initial_state: tuple) -> Optional[Tuple[Operation, ...]]:
    """Return a witness order for the completed ops, or None."""
    n = len(ops)
    completed_mask = 0
    for o in ops:
        if not o.pending:
            completed_mask |= 1 << o.op_id
    resp_of = [o.resp_seq if o.resp_seq is not None else float("inf") for o in ops]
    seen: set = set()
    order: List[Operation] = []

    def dfs(done: int, state: tuple) -> bool:
        if done & completed_mask == completed_mask:
            return True
        key = (done, state)
        if key in seen:
            return False
        min_resp = min(resp_of[i] for i in range(n) if not done & (1 << i))
        for o in ops:
            bit = 1 << o.op_id
            if done & bit:
                continue
            # o may be linearized first iff no unlinearized operation's
            # response precedes o's invocation.
            if o.inv_seq > min_resp:
                continue
            result, new_state = SequentialStackModel.apply(state, o.op, o.value)
            if not o.pending and o.op == POP and not _results_match(result, o.result):
                continue
            order.append(o)
            if dfs(done | bit, new_state):
                return True
            order.pop()
        seen.add(key)
        return False

    if dfs(0, tuple(initial_state)):
        return tuple(order)
    return None


def check_linearizable(
    history: History,
    max_ops: int = DEFAULT_MAX_OPS,
    initial_state: tuple = (),
) -> Verdict:
    """Decide linearizability of ``history`` starting from ``initial_state``.

    ``initial_state`` is the stack's logical content bottom-to-top when
    recording began (empty for fresh stacks); the harness stores it in the
    history metadata so dumped windows re-check identically.

    Returns a Verdict carrying either a witness ordering (its replay on the
    sequential model reproduces every recorded response) or the shortest
    event prefix that is already non-linearizable.
    """
    ops = operations(history)
    n_completed = sum(1 for o in ops if not o.pending)
    if n_completed > max_ops:
        raise OpBoundExceeded(
            f"history has {n_completed} completed operations, bound is {max_ops}; "
            f"shard the run into smaller recorded windows instead"
        )
    witness = _search(ops, tuple(initial_state))
    if witness is not None:
        return Verdict(linearizable=True, witness=witness)
    prefix = _minimal_violating_prefix(history, initial_state)
    return Verdict(linearizable=False, violating_prefix=prefix)


def _minimal_violating_prefix(history: History, initial_state: tuple) -> History:
    """Shortest event prefix that is non-linearizable.

    Linearizability is prefix-closed, so scanning forward for the first
    failing prefix yields a minimal witness; pending invocations inside the
    prefix are handled by the search's completion semantics.
    """
    events = sorted(history.events, key=lambda e: e.seq)
    for j in range(1, len(events) + 1):
        prefix_events = events[:j]
        ops = operations(History(prefix_events, dict(history.metadata)))
        if _search(ops, tuple(initial_state)) is None:
            return History(prefix_events, dict(history.metadata))
    return History(events, dict(history.metadata))


def replay_witness(witness: Tuple[Operation, ...], initial_state: tuple = ()) -> List[Any]:
    """Apply a witness order to the sequential model; returns the results."""
    state = tuple(initial_state)
    results = []
    for o in witness:
        result, state = SequentialStackModel.apply(state, o.op, o.value)
        results.append(result)
    return results


def initial_state_from_metadata(history: History) -> tuple:
    """Decode the ``initial`` metadata key written by the harness."""
    raw = history.metadata.get("initial", "")
    if not raw:
        return ()
    return tuple(int(tok) for tok in raw.split(","))


def initial_state_to_metadata(state: tuple) -> str:
    return ",".join(str(v) for v in state)
