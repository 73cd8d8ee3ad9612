"""History recording and the line-delimited history file format.

A history is a chronological sequence of invocation and response events.
Recording is concurrent: each thread appends to its own buffer and stamps
events from one shared atomic counter, so merging is just a sort by stamp.
The recorder never drops events silently - exceeding a buffer's capacity
aborts the run with a diagnostic.

File format (text, one event per line, stable across platforms)::

    # key=value            metadata lines, order preserved
    seq thread kind op value result

with ``kind`` in {inv, resp}, ``op`` in {push, pop}, and ``value`` /
``result`` encoded as a decimal integer, ``empty`` (the empty-pop result) or
``-`` (absent). Multiple histories in one file are separated by a single
blank line. Files dump and re-ingest bit-exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Any, Iterable, List, Optional

from .atomics import AtomicInt
from .core import EMPTY

INV = "inv"
RESP = "resp"
PUSH = "push"
POP = "pop"


class MalformedHistory(ValueError):
    """A history violated well-formedness (alternation / matching pairs)."""


class RecorderOverflow(RuntimeError):
    """A per-thread event buffer exceeded its capacity."""


@dataclass(frozen=True)
class HistoryEvent:
    """One invocation or response; ``seq`` is the global order stamp."""

    seq: int
    thread: int
    kind: str  # INV or RESP
    op: str  # PUSH or POP
    value: Any = None  # push argument (on both inv and resp lines)
    result: Any = None  # response payload: pop value, EMPTY, or None


@dataclass
class History:
    """An ordered event list plus free-form metadata (impl, w, seed, ...)."""

    events: List[HistoryEvent]
    metadata: dict

    def __len__(self):
        return len(self.events)


class HistoryRecorder:
    """Concurrent inv/resp recorder with per-thread buffers.

    ``invoke``/``respond`` must be called by the owning thread only; the
    global stamp comes from one atomic counter, so cross-thread order is
    captured without any shared buffer.
    """

    def __init__(self, num_threads: int, capacity: int = 1_000_000, metadata: Optional[dict] = None):
        self.num_threads = num_threads
        self.capacity = capacity
        self.metadata = dict(metadata or {})
        self._stamp = AtomicInt(0, name="historyStamp")
        self._buffers: List[List[HistoryEvent]] = [[] for _ in range(num_threads)]

    def record(self, thread: int, kind: str, op: str, value: Any = None, result: Any = None) -> None:
        buf = self._buffers[thread]
        if len(buf) >= self.capacity:
            raise RecorderOverflow(
                f"thread {thread} exceeded recorder capacity {self.capacity}; "
                f"raise the capacity or shorten the recorded window"
            )
        seq = self._stamp.get_and_increment()
        buf.append(HistoryEvent(seq, thread, kind, op, value, result))

    def invoke(self, thread: int, op: str, value: Any = None) -> None:
        self.record(thread, INV, op, value=value)

    def respond(self, thread: int, op: str, result: Any = None) -> None:
        self.record(thread, RESP, op, result=result)

    def merge(self) -> History:
        """Merge buffers by stamp, validate well-formedness, truncate tails.

        Trailing invocations without responses (a thread stopped mid-call)
        are dropped so the result is a complete history. A response without
        an open invocation, mismatched ops, or double invocations raise
        MalformedHistory.
        """
        events = sorted((ev for buf in self._buffers for ev in buf), key=lambda e: e.seq)
        open_inv: dict = {}
        for ev in events:
            if ev.kind == INV:
                if ev.thread in open_inv:
                    raise MalformedHistory(
                        f"thread {ev.thread} invoked {ev.op} at seq {ev.seq} "
                        f"with a previous invocation still open"
                    )
                open_inv[ev.thread] = ev
            elif ev.kind == RESP:
                inv = open_inv.pop(ev.thread, None)
                if inv is None:
                    raise MalformedHistory(
                        f"thread {ev.thread} responded {ev.op} at seq {ev.seq} without an open invocation"
                    )
                if inv.op != ev.op:
                    raise MalformedHistory(
                        f"thread {ev.thread} response op {ev.op} does not match invocation op {inv.op}"
                    )
            else:
                raise MalformedHistory(f"unknown event kind {ev.kind!r}")
        if open_inv:
            pending = set(id(ev) for ev in open_inv.values())
            events = [ev for ev in events if id(ev) not in pending]
        return History(events, dict(self.metadata))


# -- serialization -----------------------------------------------------------


def _encode_payload(x: Any) -> str:
    if x is None:
        return "-"
    if x is EMPTY:
        return "empty"
    if isinstance(x, int) and not isinstance(x, bool):
        return str(x)
    raise ValueError(f"history payloads must be ints, EMPTY or None; got {x!r}")


def _decode_payload(token: str) -> Any:
    if token == "-":
        return None
    if token == "empty":
        return EMPTY
    return int(token)


def dumps(history: History) -> str:
    """Serialize one history to text; inverse of :func:`loads`."""
    out = io.StringIO()
    for key, value in history.metadata.items():
        key = str(key)
        value = str(value)
        if any(c in key for c in " =\n") or "\n" in value:
            raise ValueError(f"metadata key/value not serializable: {key!r}={value!r}")
        out.write(f"# {key}={value}\n")
    for ev in history.events:
        out.write(
            f"{ev.seq} {ev.thread} {ev.kind} {ev.op} "
            f"{_encode_payload(ev.value)} {_encode_payload(ev.result)}\n"
        )
    return out.getvalue()


def loads(text: str) -> History:
    """Parse one history from text produced by :func:`dumps`."""
    metadata: dict = {}
    events: List[HistoryEvent] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, sep, value = body.partition("=")
            if not sep:
                raise MalformedHistory(f"line {line_no}: bad metadata line {line!r}")
            metadata[key] = value
            continue
        parts = line.split(" ")
        if len(parts) != 6:
            raise MalformedHistory(f"line {line_no}: expected 6 fields, got {len(parts)}: {line!r}")
        seq, thread, kind, op, value, result = parts
        if kind not in (INV, RESP):
            raise MalformedHistory(f"line {line_no}: bad kind {kind!r}")
        if op not in (PUSH, POP):
            raise MalformedHistory(f"line {line_no}: bad op {op!r}")
        events.append(
            HistoryEvent(
                int(seq), int(thread), kind, op, _decode_payload(value), _decode_payload(result)
            )
        )
    return History(events, metadata)


def dump_file(histories: Iterable[History], path) -> None:
    """Write histories to ``path``, blank-line separated."""
    chunks = [dumps(h) for h in histories]
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("\n".join(chunks))


def load_file(path) -> List[History]:
    """Read a file written by :func:`dump_file`."""
    with open(path, "r", encoding="ascii") as f:
        text = f.read()
    return [loads(chunk) for chunk in text.split("\n\n") if chunk.strip()]
