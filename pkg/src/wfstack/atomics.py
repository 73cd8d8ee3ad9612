"""Atomic cells with sequentially consistent semantics for CPython threads.

Every read-modify-write operation runs under a per-cell lock. Plain loads
and stores are single attribute accesses, which the GIL already makes atomic
and sequentially consistent; stores still take the lock so they serialize
with concurrent compare-and-set calls on the same cell. (A free-threaded
build would need the lock on loads as well.)

A process-wide *step hook* can be installed with :func:`set_step_hook`. When
present it is invoked as ``hook(cell, op)`` immediately before every atomic
access. Test schedulers use it to pause threads at atomic-access granularity
and drive explicit interleavings; instrumentation can use it to trace steps.
The hook must not touch the cell's lock.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Any, Optional

_hook = None


def set_step_hook(hook) -> None:
    """Install ``hook(cell, op)`` as the global pre-access callback (or None)."""
    global _hook
    _hook = hook


def get_step_hook():
    return _hook


@contextmanager
def step_hook(hook):
    """Temporarily install a step hook; restores the previous one on exit."""
    prev = get_step_hook()
    set_step_hook(hook)
    try:
        yield
    finally:
        set_step_hook(prev)


class AtomicReference:
    """A reference cell; compare_and_set compares by identity."""

    __slots__ = ("name", "_value", "_lock")

    def __init__(self, value: Any = None, name: str = "ref"):
        self.name = name
        self._value = value
        self._lock = threading.Lock()

    def get(self) -> Any:
        h = _hook
        if h is not None:
            h(self, "get")
        return self._value

    def set(self, value: Any) -> None:
        h = _hook
        if h is not None:
            h(self, "set")
        with self._lock:
            self._value = value

    def get_and_set(self, value: Any) -> Any:
        h = _hook
        if h is not None:
            h(self, "get_and_set")
        with self._lock:
            old = self._value
            self._value = value
            return old

    def compare_and_set(self, expected: Any, new: Any) -> bool:
        h = _hook
        if h is not None:
            h(self, "cas")
        with self._lock:
            if self._value is expected:
                self._value = new
                return True
            return False

    def __repr__(self):
        return f"<AtomicReference {self.name}={self._value!r}>"


class AtomicBool:
    """A boolean flag with test-and-set."""

    __slots__ = ("name", "_value", "_lock")

    def __init__(self, value: bool = False, name: str = "flag"):
        self.name = name
        self._value = bool(value)
        self._lock = threading.Lock()

    def get(self) -> bool:
        h = _hook
        if h is not None:
            h(self, "get")
        return self._value

    def set(self, value: bool) -> None:
        h = _hook
        if h is not None:
            h(self, "set")
        with self._lock:
            self._value = bool(value)

    def get_and_set(self, value: bool) -> bool:
        h = _hook
        if h is not None:
            h(self, "get_and_set")
        with self._lock:
            old = self._value
            self._value = bool(value)
            return old

    def __repr__(self):
        return f"<AtomicBool {self.name}={self._value!r}>"


class AtomicInt:
    """An integer cell with fetch-and-increment."""

    __slots__ = ("name", "_value", "_lock")

    def __init__(self, value: int = 0, name: str = "int"):
        self.name = name
        self._value = value
        self._lock = threading.Lock()

    def get(self) -> int:
        h = _hook
        if h is not None:
            h(self, "get")
        return self._value

    def set(self, value: int) -> None:
        h = _hook
        if h is not None:
            h(self, "set")
        with self._lock:
            self._value = value

    def get_and_increment(self) -> int:
        h = _hook
        if h is not None:
            h(self, "get_and_increment")
        with self._lock:
            old = self._value
            self._value = old + 1
            return old

    def increment_and_get(self) -> int:
        h = _hook
        if h is not None:
            h(self, "increment_and_get")
        with self._lock:
            self._value += 1
            return self._value

    def add_and_get(self, delta: int) -> int:
        h = _hook
        if h is not None:
            h(self, "add_and_get")
        with self._lock:
            self._value += delta
            return self._value

    def compare_and_set(self, expected: int, new: int) -> bool:
        h = _hook
        if h is not None:
            h(self, "cas")
        with self._lock:
            if self._value == expected:
                self._value = new
                return True
            return False

    def __repr__(self):
        return f"<AtomicInt {self.name}={self._value!r}>"


class AtomicMarkableReference:
    """A (reference, flag) pair that changes in one atomic step.

    Represented as an immutable tuple behind one cell, so readers always see
    a consistent pair. The reference is compared by identity, the flag by
    value, mirroring the usual markable-reference contract.
    """

    __slots__ = ("name", "_pair", "_lock")

    def __init__(self, reference: Any = None, mark: bool = False, name: str = "markable"):
        self.name = name
        self._pair = (reference, mark)
        self._lock = threading.Lock()

    def get(self) -> tuple:
        """Return the current (reference, mark) pair."""
        h = _hook
        if h is not None:
            h(self, "get")
        return self._pair

    def get_reference(self) -> Any:
        h = _hook
        if h is not None:
            h(self, "get")
        return self._pair[0]

    def set(self, reference: Any, mark: bool) -> None:
        h = _hook
        if h is not None:
            h(self, "set")
        with self._lock:
            self._pair = (reference, mark)

    def compare_and_set(
        self,
        expected_reference: Any,
        new_reference: Any,
        expected_mark: bool,
        new_mark: bool,
    ) -> bool:
        h = _hook
        if h is not None:
            h(self, "cas")
        with self._lock:
            ref, mark = self._pair
            if ref is expected_reference and mark == expected_mark:
                self._pair = (new_reference, new_mark)
                return True
            return False

    def __repr__(self):
        ref, mark = self._pair
        return f"<AtomicMarkableReference {self.name}=({ref!r}, {mark!r})>"
