"""Reference stacks: Treiber lock-free, coarse-locked, and a sequential model.

All variants share the wait-free stack's calling convention - ``push(tid,
value)`` / ``pop(tid) -> value | EMPTY`` - so harness and audit code is
generic over implementations. They accept the same hooks object for
interface compatibility; only events that are meaningful for the variant are
emitted (the Treiber stack reports top compare-and-set successes, the locked
stack and the model report nothing).
"""

from __future__ import annotations

import threading
from typing import Any, Optional

from .atomics import AtomicReference
from .core import EMPTY
from .hooks import StackHooks


class _TreiberNode:
    __slots__ = ("value", "next")

    def __init__(self, value: Any, next_node=None):
        self.value = value
        self.next = next_node


class TreiberStack:
    """Lock-free stack: push and pop both retry a compare-and-set on top.

    Nodes are unlinked by the pop CAS and reclaimed by the host garbage
    collector, the same reclamation contract as the wait-free stack.
    """

    def __init__(self, num_threads: int = 0, hooks: Optional[StackHooks] = None):
        self.num_threads = num_threads
        self.hooks = hooks
        self.top = AtomicReference(None, name="treiber.top")

    def push(self, tid: int, value: Any) -> None:
        node = _TreiberNode(value)
        while True:
            old = self.top.get()
            node.next = old
            if self.top.compare_and_set(old, node):
                h = self.hooks
                if h is not None:
                    h.on_top_cas(-1)
                return

    def pop(self, tid: int) -> Any:
        while True:
            old = self.top.get()
            if old is None:
                return EMPTY
            if self.top.compare_and_set(old, old.next):
                h = self.hooks
                if h is not None:
                    h.on_top_cas(-1)
                return old.value


class LockedStack:
    """One mutual-exclusion region guarding an ordinary list."""

    def __init__(self, num_threads: int = 0, hooks: Optional[StackHooks] = None):
        self.num_threads = num_threads
        self.hooks = hooks
        self._lock = threading.Lock()
        self._items: list = []

    def push(self, tid: int, value: Any) -> None:
        with self._lock:
            self._items.append(value)

    def pop(self, tid: int) -> Any:
        with self._lock:
            if not self._items:
                return EMPTY
            return self._items.pop()


class SequentialStackModel:
    """Plain LIFO list; the sequential specification used by oracles.

    Single-threaded only. ``apply`` is the pure transition function the
    linearizability checker searches over: states are tuples ordered
    bottom-to-top.
    """

    def __init__(self, initial=()):
        self._items = list(initial)

    def push(self, tid: int, value: Any) -> None:
        self._items.append(value)

    def pop(self, tid: int) -> Any:
        if not self._items:
            return EMPTY
        return self._items.pop()

    def snapshot(self) -> tuple:
        return tuple(self._items)

    @staticmethod
    def apply(state: tuple, op: str, value: Any = None) -> tuple:
        """Return (result, new_state) for one operation on a tuple state."""
        if op == "push":
            return None, state + (value,)
        if op == "pop":
            if not state:
                return EMPTY, state
            return state[-1], state[:-1]
        raise ValueError(f"unknown operation {op!r}")
