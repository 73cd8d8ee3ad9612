"""Lazy physical deletion: vote counting, serialized requests, range unlink.

Nodes are removed in ranges of ``w`` consecutive indices ``[base, base+w-1]``
where ``base.index`` is a multiple of ``w``. Four nodes describe a range:
``base``; ``left_node`` (index ``base.index + w - 1``); ``target`` (the node
``base`` currently precedes, read at unlink time); and ``right_node`` (the
node whose predecessor link currently points at ``left_node``). ``base`` and
``left_node`` are fixed once pushed; ``target`` and ``right_node`` change as
neighbouring ranges are removed. The unlink is one compare-and-set that
redirects ``right_node.prev`` from ``left_node`` to ``target``.

A range is removed only after its base node collects ``w + 1`` votes. Votes
arrive from pops (each pop votes once, for the first base at or below the
node it claimed, depending on the accounting mode) and from the push that
attaches the next range's base node. That push vote doubles as a guarantee
that ``top`` sits strictly above ``left_node`` before any unlink starts, so
the top-down search in :func:`help_finish_delete` can only miss ``left_node``
when another helper has already removed the segment.

The winner of the vote race announces a DeleteRequest; requests are helped
lowest-phase-first like pushes, and adoption through ``unique_request``
ensures only one request is in the unlink stage at a time.
"""

from __future__ import annotations

from typing import Optional

from .atomics import AtomicBool

PAPER = "paper"
CORRECTED = "corrected"
CLEANUP_MODES = (PAPER, CORRECTED)


class DeleteRequest:
    """An announced range deletion: pending stays True until the unlink."""

    __slots__ = ("phase", "thread_id", "pending", "node")

    def __init__(self, phase: int, thread_id: int, pending: bool, node):
        self.phase = phase
        self.thread_id = thread_id
        self.pending = AtomicBool(pending, name="pending")
        self.node = node

    def __repr__(self):
        base = self.node.index if self.node is not None else None
        return f"<DeleteRequest phase={self.phase} tid={self.thread_id} pending={self.pending.get()} base={base}>"


def try_clean_up(stack, my_node, tid: int, from_push: bool = False) -> None:
    """Walk toward the sentinel and vote on the first base node found.

    In ``paper`` mode the walk always starts at ``my_node.prev``, so the
    w + 1 votes for a base come from pops of the w indices *above* it plus
    the next base's push; the counted set and the removed set then differ by
    one node at each end, and a base can be unlinked while still unpopped.
    In ``corrected`` mode a pop's walk starts at ``my_node`` itself, aligning
    the counted pops with the removed range ``[base, base+w-1]``. Push-origin
    walks start at ``my_node.prev`` in both modes: the pushed node is itself
    a base, and its vote must land one range below.

    The walk stops at the sentinel without voting, which permanently exempts
    the first w - 1 indices from cleanup (a bounded residue).
    """
    if from_push or stack.cleanup_mode == PAPER:
        temp = my_node.prev.get()
    else:
        temp = my_node
    sentinel = stack.sentinel
    w = stack.w
    while temp is not sentinel:
        if temp.index % w == 0:
            count = temp.counter.increment_and_get()
            h = stack.hooks
            if h is not None:
                h.on_vote(temp.index, count)
            if count == w + 1:
                clean(stack, tid, temp)
            break
        temp = temp.prev.get()


def clean(stack, tid: int, base) -> None:
    """Announce a deletion of the range starting at ``base`` and drive it.

    Called exactly once per base: only the thread whose vote raises the
    counter to w + 1 gets here.
    """
    h = stack.hooks
    if h is not None:
        h.on_clean(base.index)
    phase = stack.delete_phase.get_and_increment()
    request = DeleteRequest(phase, tid, True, base)
    stack.all_delete_requests[tid].set(request)
    help_delete(stack, request)


def help_delete(stack, request: DeleteRequest) -> None:
    """Drive the lowest-phase pending deletion, then ``request`` itself."""
    min_req = None
    for slot in stack.all_delete_requests:
        req = slot.get()
        if req is not None and req.pending.get():
            if min_req is None or req.phase < min_req.phase:
                min_req = req
    if min_req is None or min_req.phase > request.phase:
        return
    unique_delete(stack, min_req)
    if min_req is not request:
        unique_delete(stack, request)


def unique_delete(stack, request: DeleteRequest) -> None:
    """Loop until ``request`` completes, adopting it when the slot frees up.

    Competing helpers may have picked different minimum-phase requests; the
    compare-and-set on ``unique_request`` lets exactly one candidate set
    through per adopted request, and everyone else helps finish the adopted
    one first.
    """
    while request.pending.get():
        curr_request = stack.unique_request.get()
        if not curr_request.pending.get():
            if request.pending.get():
                if request is curr_request:
                    stat = True
                else:
                    stat = stack.unique_request.compare_and_set(curr_request, request)
                help_finish_delete(stack)
                if stat:
                    return
        else:
            help_finish_delete(stack)


def help_finish_delete(stack) -> None:
    """Unlink the adopted request's range; safe for any thread to call.

    The search walks from the current top looking for ``left_node`` by
    index. Hitting the sentinel means another helper already removed the
    segment (and that helper sets pending to False). The pending flag is
    cleared even when our unlink compare-and-set loses the race.
    """
    curr_request = stack.unique_request.get()
    if not curr_request.pending.get():
        return
    end_idx = curr_request.node.index + stack.w - 1

    right_node = stack.top.get()
    left_node = right_node.prev.get()
    while left_node.index != end_idx and left_node is not stack.sentinel:
        right_node = left_node
        left_node = left_node.prev.get()
    if left_node is stack.sentinel:
        return

    # target is w hops below left_node; sentinel.prev = sentinel keeps the
    # hop loop safe even near the bottom.
    target = left_node
    for _ in range(stack.w):
        target = target.prev.get()

    if right_node.prev.compare_and_set(left_node, target):
        h = stack.hooks
        if h is not None:
            h.on_unlink(curr_request.node.index, right_node.index)
    curr_request.pending.set(False)


def drain(stack) -> None:
    """Drive every announced deletion to completion (quiescent audits).

    Operations finish their own cleanups before returning, so under normal
    shutdown this finds nothing pending; it exists as a safety net for
    audits that must not observe in-flight deletions.
    """
    for slot in stack.all_delete_requests:
        req = slot.get()
        if req is not None and req.pending.get():
            unique_delete(stack, req)


def pending_requests(stack) -> list:
    """Return announced DeleteRequests that are still pending."""
    out = []
    for slot in stack.all_delete_requests:
        req = slot.get()
        if req is not None and req.pending.get():
            out.append(req)
    return out
