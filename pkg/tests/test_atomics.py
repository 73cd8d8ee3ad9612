"""Atomic cell semantics, including the step hook used by the schedulers."""

import threading

from wfstack import atomics
from wfstack.atomics import (
    AtomicBool,
    AtomicInt,
    AtomicMarkableReference,
    AtomicReference,
    step_hook,
)


class Box:
    pass


def test_reference_cas_is_identity_based():
    a, b = Box(), Box()
    cell = AtomicReference(a)
    lookalike = Box()
    assert not cell.compare_and_set(lookalike, b)
    assert cell.get() is a
    assert cell.compare_and_set(a, b)
    assert cell.get() is b


def test_reference_get_and_set():
    cell = AtomicReference(1)
    assert cell.get_and_set(2) == 1
    assert cell.get() == 2


def test_bool_test_and_set_once():
    flag = AtomicBool(False)
    assert flag.get_and_set(True) is False
    assert flag.get_and_set(True) is True
    assert flag.get() is True


def test_int_increment_uniqueness_under_threads():
    counter = AtomicInt(0)
    seen = [[] for _ in range(8)]

    def worker(i):
        for _ in range(2000):
            seen[i].append(counter.get_and_increment())

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    everything = [x for chunk in seen for x in chunk]
    assert sorted(everything) == list(range(8 * 2000))
    assert counter.get() == 8 * 2000


def test_markable_reference_pair_changes_in_one_step():
    node = Box()
    cell = AtomicMarkableReference(None, False)
    assert cell.get() == (None, False)
    # wrong expected mark: no change
    assert not cell.compare_and_set(None, node, True, False)
    assert cell.compare_and_set(None, node, False, False)
    assert cell.get() == (node, False)
    assert cell.compare_and_set(node, None, False, True)
    assert cell.get() == (None, True)


def test_markable_reference_identity_on_reference_part():
    cell = AtomicMarkableReference([1], False)
    assert not cell.compare_and_set([1], None, False, True)  # equal but not identical


def test_step_hook_receives_cell_and_op():
    events = []

    def hook(cell, op):
        events.append((cell.name, op))

    cell = AtomicReference(0, name="probe")
    with step_hook(hook):
        cell.get()
        cell.set(1)
        cell.compare_and_set(1, 2)
    cell.get()  # hook restored: not recorded
    assert events == [("probe", "get"), ("probe", "set"), ("probe", "cas")]
    assert atomics.get_step_hook() is None


def test_step_hook_restored_on_error():
    with step_hook(lambda c, o: None):
        try:
            with step_hook(lambda c, o: 1 / 0):
                AtomicInt(0).get()
        except ZeroDivisionError:
            pass
        assert atomics.get_step_hook() is not None
    assert atomics.get_step_hook() is None
