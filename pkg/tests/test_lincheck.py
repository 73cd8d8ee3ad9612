"""Linearizability checker: soundness, violations, prefixes, cross-validation."""

import itertools
import random

import pytest

from wfstack import EMPTY, SequentialStackModel, check_linearizable
from wfstack.history import History, HistoryEvent, INV, POP, PUSH, RESP, dumps, loads
from wfstack.lincheck import (
    OpBoundExceeded,
    initial_state_from_metadata,
    operations,
    replay_witness,
)


def H(*rows, meta=None):
    """Build a history from (thread, kind, op, payload) rows; seq = position.

    Payload is the pushed value on 'inv push' rows and the result on
    'resp pop' rows.
    """
    events = []
    for seq, row in enumerate(rows):
        thread, kind, op = row[:3]
        payload = row[3] if len(row) > 3 else None
        value = payload if (kind == INV and op == PUSH) else None
        result = payload if kind == RESP else None
        events.append(HistoryEvent(seq, thread, kind, op, value=value, result=result))
    return History(events, dict(meta or {}))


def seq_ops(*pairs):
    """Rows for non-overlapping (op, payload) calls, all by thread 0."""
    rows = []
    for op, payload in pairs:
        if op == PUSH:
            rows.append((0, INV, PUSH, payload))
            rows.append((0, RESP, PUSH))
        else:
            rows.append((0, INV, POP))
            rows.append((0, RESP, POP, payload))
    return rows


# -- acceptance of legal histories ----------------------------------------------


def test_sequential_push_pop_accepted():
    h = H(*seq_ops((PUSH, 1), (POP, 1)))
    v = check_linearizable(h)
    assert v.linearizable
    assert [o.op for o in v.witness] == [PUSH, POP]


def test_pop_empty_on_fresh_stack_accepted():
    h = H(*seq_ops((POP, EMPTY)))
    assert check_linearizable(h).linearizable


def test_overlapping_pops_reordered_accepted():
    # four ops: two complete pushes, then two overlapping pops where the
    # later-invoked pop responds first with the newer value
    h = H(
        *seq_ops((PUSH, 1), (PUSH, 2)),
        (1, INV, POP),
        (2, INV, POP),
        (2, RESP, POP, 2),
        (1, RESP, POP, 1),
    )
    v = check_linearizable(h)
    assert v.linearizable
    results = replay_witness(v.witness)
    recorded = [o.result for o in v.witness if o.op == POP]
    replayed = [r for o, r in zip(v.witness, results) if o.op == POP]
    assert recorded == replayed


def test_deep_pop_three_op_construction_accepted():
    # one complete push, then two overlapping pops: the first-invoked pop
    # walks past the node the other pop claimed and reports empty - legal
    # because the overlapping pops may be ordered either way
    h = H(
        *seq_ops((PUSH, 1)),
        (1, INV, POP),
        (2, INV, POP),
        (2, RESP, POP, 1),
        (1, RESP, POP, EMPTY),
    )
    v = check_linearizable(h)
    assert v.linearizable
    kinds = [(o.op, o.result) for o in v.witness]
    assert kinds == [(PUSH, None), (POP, 1), (POP, EMPTY)]


def test_pending_push_may_take_effect():
    h = H(
        (0, INV, PUSH, 7),  # never responds
        (1, INV, POP),
        (1, RESP, POP, 7),
    )
    assert check_linearizable(h).linearizable


def test_pending_push_may_be_ignored():
    h = H(
        (0, INV, PUSH, 7),  # never responds
        (1, INV, POP),
        (1, RESP, POP, EMPTY),
    )
    assert check_linearizable(h).linearizable


# -- canonical violations --------------------------------------------------------


def test_rejects_duplicate_pop_of_one_value():
    h = H(*seq_ops((PUSH, 1), (POP, 1), (POP, 1)))
    assert not check_linearizable(h).linearizable


def test_rejects_pop_empty_after_completed_unpopped_push():
    h = H(*seq_ops((PUSH, 1), (POP, EMPTY)))
    assert not check_linearizable(h).linearizable


def test_rejects_fifo_order_on_real_time_chain():
    h = H(*seq_ops((PUSH, 1), (PUSH, 2), (POP, 1), (POP, 2)))
    assert not check_linearizable(h).linearizable


def test_rejects_value_never_pushed():
    h = H(*seq_ops((PUSH, 1), (POP, 99)))
    assert not check_linearizable(h).linearizable


# -- violating prefixes -----------------------------------------------------------


def test_minimal_violating_prefix_is_minimal_and_violating():
    h = H(*seq_ops((PUSH, 1), (PUSH, 2), (POP, 1), (POP, 2)))
    v = check_linearizable(h)
    assert not v.linearizable
    prefix = v.violating_prefix
    # the violation appears exactly at the first pop's response
    assert len(prefix.events) == 6
    assert prefix.events[-1].kind == RESP and prefix.events[-1].result == 1
    assert prefix.events == sorted(h.events, key=lambda e: e.seq)[:6]
    assert not check_linearizable(prefix).linearizable
    one_shorter = History(prefix.events[:-1], dict(prefix.metadata))
    assert check_linearizable(one_shorter).linearizable


def test_recheck_is_deterministic_and_survives_serialization():
    h = H(*seq_ops((PUSH, 1), (PUSH, 2), (POP, 1), (POP, 2)))
    v1 = check_linearizable(h)
    v2 = check_linearizable(h)
    assert v1.violating_prefix.events == v2.violating_prefix.events
    reloaded = loads(dumps(h))
    v3 = check_linearizable(reloaded)
    assert not v3.linearizable
    assert dumps(v3.violating_prefix) == dumps(v1.violating_prefix)


# -- initial state ----------------------------------------------------------------


def test_initial_state_allows_pops_of_prior_content():
    h = H(*seq_ops((POP, 3), (POP, 2)))
    assert check_linearizable(h, initial_state=(1, 2, 3)).linearizable
    assert not check_linearizable(h, initial_state=(3, 2, 1)).linearizable


def test_initial_state_metadata_round_trip():
    h = H(*seq_ops((POP, 3)), meta={"initial": "1,2,3"})
    assert initial_state_from_metadata(h) == (1, 2, 3)
    assert check_linearizable(h, initial_state=initial_state_from_metadata(h)).linearizable


# -- bounds and malformed input ----------------------------------------------------


def test_refuses_histories_above_op_bound():
    rows = []
    for i in range(17):
        rows.extend(seq_ops((PUSH, i)))
    with pytest.raises(OpBoundExceeded):
        check_linearizable(H(*rows))


def test_operations_pairs_and_pendings():
    h = H(
        (0, INV, PUSH, 5),
        (1, INV, POP),
        (0, RESP, PUSH),
        # thread 1's pop never responds
    )
    ops = operations(h)
    assert len(ops) == 2
    completed = [o for o in ops if not o.pending]
    assert len(completed) == 1 and completed[0].op == PUSH
    assert [o for o in ops if o.pending][0].op == POP


# -- model-generated histories and brute-force cross-validation ---------------------


def generate_legal_history(rng, threads=3, total_ops=5):
    """Simulate a legal overlapping execution against the model."""
    model_state = ()
    plans = [rng.randrange(1, 3) for _ in range(threads)]
    open_ops = {}
    rows = []
    remaining = total_ops
    budget = {t: plans[t] for t in range(threads)}
    while remaining > 0 or open_ops:
        choices = []
        for t in range(threads):
            if t in open_ops:
                choices.append(("finish", t))
            elif remaining > 0 and budget[t] > 0:
                choices.append(("invoke", t))
        if not choices:
            break
        action, t = rng.choice(choices)
        if action == "invoke":
            op = PUSH if rng.random() < 0.5 else POP
            value = rng.randrange(100) if op == PUSH else None
            rows.append((t, INV, op, value))
            open_ops[t] = (op, value, len(rows))
            remaining -= 1
            budget[t] -= 1
        else:
            op, value, _ = open_ops.pop(t)
            result, model_state = SequentialStackModel.apply(model_state, op, value)
            rows.append((t, RESP, op, result if op == POP else None))
    return H(*rows)


def brute_force_linearizable(history, initial_state=()):
    """Permutation search: the independent oracle for small histories."""
    ops = operations(history)
    assert all(not o.pending for o in ops)
    for perm in itertools.permutations(ops):
        position = {o.op_id: i for i, o in enumerate(perm)}
        respects_time = all(
            not (a.resp_seq < b.inv_seq and position[a.op_id] > position[b.op_id])
            for a in ops
            for b in ops
        )
        if not respects_time:
            continue
        state = tuple(initial_state)
        legal = True
        for o in perm:
            result, state = SequentialStackModel.apply(state, o.op, o.value)
            if o.op == POP:
                if (result is EMPTY) != (o.result is EMPTY) or (
                    result is not EMPTY and result != o.result
                ):
                    legal = False
                    break
        if legal:
            return True
    return False


def test_model_generated_histories_all_accepted():
    rng = random.Random(5)
    for _ in range(150):
        h = generate_legal_history(rng, threads=3, total_ops=rng.randrange(1, 7))
        assert check_linearizable(h).linearizable


def test_checker_agrees_with_brute_force_on_mutated_histories():
    rng = random.Random(6)
    linearizable_seen = 0
    rejected_seen = 0
    for _ in range(200):
        h = generate_legal_history(rng, threads=3, total_ops=rng.randrange(2, 7))
        # corrupt some pop results; corrupted histories are usually illegal
        events = []
        for ev in h.events:
            if ev.kind == RESP and ev.op == POP and rng.random() < 0.4:
                new_result = EMPTY if rng.random() < 0.3 else rng.randrange(100)
                ev = HistoryEvent(ev.seq, ev.thread, ev.kind, ev.op, ev.value, new_result)
            events.append(ev)
        mutated = History(events, {})
        expected = brute_force_linearizable(mutated)
        got = check_linearizable(mutated).linearizable
        assert got == expected
        linearizable_seen += got
        rejected_seen += not got
    assert linearizable_seen > 10
    assert rejected_seen > 10


def test_witness_replay_reproduces_every_response():
    rng = random.Random(7)
    for _ in range(80):
        h = generate_legal_history(rng, threads=3, total_ops=rng.randrange(1, 7))
        v = check_linearizable(h)
        assert v.linearizable
        results = replay_witness(v.witness)
        for o, r in zip(v.witness, results):
            if o.op == POP:
                assert (r is EMPTY and o.result is EMPTY) or r == o.result
