"""Instrumentation hook interface shared by the stack implementations.

``StackHooks`` is a no-op base class; consumers (the benchmark harness, the
history recorder, tests) subclass it and override the events they care
about. Stacks hold either a hooks object or ``None``; emitting an event is a
single method call, and passing ``None`` disables instrumentation entirely.

Events and their meaning:

* ``on_top_cas(index)`` - a top compare-and-set succeeded; ``index`` is the
  index of the node that just became the top (the push pass point).
* ``on_mark(index)`` - a pop claimed the node with this index (the pop pass
  point).
* ``on_traversal(length)`` - a pop finished after examining ``length`` nodes
  (also emitted for pops that report empty).
* ``on_vote(base_index, count)`` - a cleanup vote landed on a base node;
  ``count`` is the counter value produced by this increment.
* ``on_clean(base_index)`` - a range deletion was initiated for this base.
* ``on_unlink(base_index, right_index)`` - the unlink compare-and-set for the
  range starting at ``base_index`` succeeded; ``right_index`` identifies the
  node whose predecessor link was redirected.
"""


class StackHooks:
    """No-op instrumentation callbacks; subclass and override as needed."""

    def on_top_cas(self, index: int) -> None:
        pass

    def on_mark(self, index: int) -> None:
        pass

    def on_traversal(self, length: int) -> None:
        pass

    def on_vote(self, base_index: int, count: int) -> None:
        pass

    def on_clean(self, base_index: int) -> None:
        pass

    def on_unlink(self, base_index: int, right_index: int) -> None:
        pass
