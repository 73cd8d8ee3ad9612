"""wfstack: a wait-free concurrent stack with lazy range cleanup.

The package bundles the stack itself, baseline implementations for
comparison, a history-recording linearizability checker, and a benchmark
harness with quiescent audits (see ``wfstack-bench``).
"""

from .baselines import LockedStack, SequentialStackModel, TreiberStack
from .cleanup import CLEANUP_MODES, CORRECTED, PAPER, DeleteRequest
from .core import EMPTY, Node, PushOp, StructuralError, WaitFreeStack, new_stack
from .history import (
    History,
    HistoryEvent,
    HistoryRecorder,
    MalformedHistory,
    RecorderOverflow,
)
from .hooks import StackHooks
from .lincheck import OpBoundExceeded, Operation, Verdict, check_linearizable

__all__ = [
    "CLEANUP_MODES",
    "CORRECTED",
    "PAPER",
    "EMPTY",
    "DeleteRequest",
    "History",
    "HistoryEvent",
    "HistoryRecorder",
    "LockedStack",
    "MalformedHistory",
    "Node",
    "OpBoundExceeded",
    "Operation",
    "PushOp",
    "RecorderOverflow",
    "SequentialStackModel",
    "StackHooks",
    "StructuralError",
    "TreiberStack",
    "Verdict",
    "WaitFreeStack",
    "check_linearizable",
    "new_stack",
]

__version__ = "0.1.0"
