"""Wait-free stack: helping-based push, mark-based pop.

The stack is a linked list of nodes reached from an atomically updated
``top`` reference. A push announces a request in a per-thread slot, then
every thread helps the announced request with the lowest phase number until
its node is attached. Attachment happens in a fixed order that concurrent
helpers rely on:

1. the current top's successor pair flips from (None, False) to
   (node, False), claiming the attach point;
2. the node's predecessor link and index are filled in;
3. the request's ``pushed`` flag becomes True;
4. ``top`` moves to the node (the operation's pass point);
5. the old top's successor pair flips to (None, True), telling late helpers
   the attach completed and they must re-read ``top``.

Pops never touch ``top``: a pop walks predecessor links from its snapshot of
``top`` and claims the first node whose ``mark`` it flips, leaving physical
removal to the lazy range cleanup in :mod:`wfstack.cleanup`.
"""

from __future__ import annotations

from typing import Any, Iterator, Optional

from . import cleanup as _cleanup
from .atomics import AtomicBool, AtomicInt, AtomicMarkableReference, AtomicReference
from .cleanup import CLEANUP_MODES, CORRECTED, PAPER
from .hooks import StackHooks


class _Empty:
    """Singleton result of popping an empty stack."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Empty"

    def __reduce__(self):
        return (_Empty, ())


EMPTY = _Empty()


class Node:
    """One stack cell.

    ``next_done`` is only used to reach consensus on which node attaches
    next; traversals use ``prev``. ``index`` is written (to the same value)
    by every helper completing the attach, strictly before ``top`` moves to
    the node, so any node reachable by a prev-walk has its final index.
    """

    __slots__ = ("value", "next_done", "prev", "mark", "push_tid", "index", "counter")

    def __init__(self, value: Any, push_tid: int):
        self.value = value
        self.next_done = AtomicMarkableReference(None, False, name="nextDone")
        self.prev = AtomicReference(None, name="prev")
        self.mark = AtomicBool(False, name="mark")
        self.push_tid = push_tid
        self.index = 0
        self.counter = AtomicInt(0, name="counter")

    def __repr__(self):
        return f"<Node index={self.index} value={self.value!r} marked={self.mark.get()}>"


class PushOp:
    """An announced push request: phase orders requests by age."""

    __slots__ = ("phase", "pushed", "node")

    def __init__(self, phase: int, pushed: bool, node: Optional[Node]):
        self.phase = phase
        self.pushed = AtomicBool(pushed, name="pushed")
        self.node = node

    def __repr__(self):
        return f"<PushOp phase={self.phase} pushed={self.pushed.get()}>"


class StructuralError(RuntimeError):
    """A chain walk detected a broken structural invariant (e.g. a cycle)."""


class WaitFreeStack:
    """Wait-free LIFO stack for a fixed set of registered threads.

    Thread ids are dense integers in ``[0, num_threads)``; each id must be
    used by exactly one thread. ``w`` is the cleanup range width: once the
    vote counter of a node whose index is a multiple of ``w`` reaches
    ``w + 1``, the ``w`` nodes starting at it are unlinked in one step.

    ``cleanup_mode`` selects the vote accounting (see
    :func:`wfstack.cleanup.try_clean_up`): ``"paper"`` tallies pop votes one
    node below the popped node, which can unlink a still-unpopped base node;
    ``"corrected"`` lets a pop vote for its own node so the counted range
    equals the removed range. The constructor default is ``"paper"``; the
    benchmark harness defaults to ``"corrected"``.
    """

    def __init__(
        self,
        num_threads: int,
        w: int = 8,
        cleanup_mode: str = PAPER,
        hooks: Optional[StackHooks] = None,
    ):
        if num_threads < 1:
            raise ValueError(f"num_threads must be >= 1, got {num_threads}")
        if w < 2:
            raise ValueError(f"w must be >= 2, got {w}")
        if cleanup_mode not in CLEANUP_MODES:
            raise ValueError(f"cleanup_mode must be one of {CLEANUP_MODES}, got {cleanup_mode!r}")
        self.num_threads = num_threads
        self.w = w
        self.cleanup_mode = cleanup_mode
        self.hooks = hooks

        self.sentinel = Node(None, -1)
        # sentinel.prev -> sentinel: traversals and the cleanup target walk
        # terminate here without ever dereferencing None.
        self.sentinel.prev.set(self.sentinel)
        self.top = AtomicReference(self.sentinel, name="top")
        self.global_phase = AtomicInt(0, name="globalPhase")
        self.announce = [
            AtomicReference(PushOp(-1, True, None), name="announce") for _ in range(num_threads)
        ]

        # Range-deletion state, operated on by wfstack.cleanup.
        self.delete_phase = AtomicInt(0, name="deletePhase")
        self.all_delete_requests = [
            AtomicReference(None, name="allDeleteRequests") for _ in range(num_threads)
        ]
        dummy = _cleanup.DeleteRequest(-1, -1, False, None)
        self.unique_request = AtomicReference(dummy, name="uniqueRequest")

    # -- operations ---------------------------------------------------------

    def push(self, tid: int, value: Any) -> None:
        """Attach a new node carrying ``value``; total and wait-free."""
        self._check_tid(tid)
        phase = self.global_phase.get_and_increment()
        request = PushOp(phase, False, Node(value, tid))
        self.announce[tid].set(request)
        self.help(request, tid)

    def pop(self, tid: int) -> Any:
        """Claim and return the value nearest the top, or EMPTY.

        Walks predecessor links from a single snapshot of ``top`` and claims
        the first node whose mark it flips; ``top`` itself is never modified.
        """
        self._check_tid(tid)
        curr = self.top.get()
        hops = 0
        while curr is not self.sentinel:
            hops += 1
            already_marked = curr.mark.get_and_set(True)
            if not already_marked:
                break
            curr = curr.prev.get()
        h = self.hooks
        if curr is self.sentinel:
            if h is not None:
                h.on_traversal(hops)
            return EMPTY
        if h is not None:
            h.on_mark(curr.index)
            h.on_traversal(hops)
        _cleanup.try_clean_up(self, curr, tid, from_push=False)
        return curr.value

    def help(self, request: PushOp, tid: int) -> None:
        """Drive the lowest-phase announced request, then ``request`` itself."""
        min_req = None
        for slot in self.announce:
            req = slot.get()
            if req is not None and not req.pushed.get():
                # Phases are unique (fetch-and-increment), so strict < also
                # resolves hypothetical ties in favor of the lowest tid.
                if min_req is None or req.phase < min_req.phase:
                    min_req = req
        if min_req is None or min_req.phase > request.phase:
            return
        self.attach_node(min_req, tid)
        if min_req is not request:
            self.attach_node(request, tid)

    def attach_node(self, request: PushOp, tid: int) -> None:
        """Loop until ``request``'s node is attached (by us or a helper)."""
        while not request.pushed.get():
            last = self.top.get()
            next_node, done = last.next_done.get()
            if last is self.top.get():
                if next_node is None and not done:
                    # done=True would mean top already moved past `last`;
                    # abort the iteration and re-read top in that case.
                    if not request.pushed.get():
                        my_node = request.node
                        if last.next_done.compare_and_set(None, my_node, False, False):
                            self.update_top(tid)
                            # Clear the consensus pair so late readers learn
                            # the attach completed and dead nodes are not
                            # retained through stale successor links.
                            last.next_done.compare_and_set(my_node, None, False, True)
                            return
                # Someone else claimed the attach point: push them through.
                self.update_top(tid)

    def update_top(self, tid: int) -> None:
        """Complete a half-attached node, if any: prev, index, pushed, top.

        Every failure path is benign (another helper already performed the
        step). ``pushed`` must become True strictly before ``top`` moves;
        helpers and the owner rely on that order.
        """
        last = self.top.get()
        next_node, _done = last.next_done.get()
        if next_node is None:
            return
        request = self.announce[next_node.push_tid].get()
        if last is self.top.get() and request is not None and request.node is next_node:
            next_node.prev.compare_and_set(None, last)
            next_node.index = last.index + 1
            request.pushed.set(True)
            stat = self.top.compare_and_set(last, next_node)
            if stat:
                h = self.hooks
                if h is not None:
                    h.on_top_cas(next_node.index)
            if next_node.index % self.w == 0 and stat:
                # Only the winner of the top CAS votes, so each range's
                # right-node push contributes exactly one vote.
                _cleanup.try_clean_up(self, next_node, tid, from_push=True)

    # -- inspection helpers (audits, statistics, tests) ----------------------

    def chain_from_top(self) -> Iterator[Node]:
        """Yield nodes from the current top down to (excluding) the sentinel.

        Raises StructuralError if the walk exceeds the number of nodes that
        can possibly be linked (a cycle).
        """
        cap = self.global_phase.get() + self.num_threads + 2
        node = self.top.get()
        hops = 0
        while node is not self.sentinel:
            hops += 1
            if hops > cap:
                raise StructuralError(f"prev-chain exceeded {cap} hops: cycle suspected")
            yield node
            node = node.prev.get()

    def _check_tid(self, tid: int) -> None:
        if not 0 <= tid < self.num_threads:
            raise ValueError(f"tid must be in [0, {self.num_threads}), got {tid}")


def new_stack(
    num_threads: int,
    w: int = 8,
    cleanup_mode: str = PAPER,
    hooks: Optional[StackHooks] = None,
) -> WaitFreeStack:
    """Construct a WaitFreeStack; rejects w < 2 or num_threads < 1."""
    return WaitFreeStack(num_threads, w=w, cleanup_mode=cleanup_mode, hooks=hooks)
