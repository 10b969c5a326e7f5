"""DOT rendering of one observer's view of a recorded execution."""

from __future__ import annotations

from dataclasses import replace

from .dag import GENESIS, DagStore, PendingBuffer, parse_id, to_dot
from .trace import BASE, CLOSURE, ExecutionTrace


class UnknownRound(ValueError):
    pass


def view_at(trace: ExecutionTrace, round_: int, observer: int) -> DagStore:
    """Blocks the observer mined or received up to ``round_``, with weak references.

    Traces recorded without receive events fall back to every block mined
    before ``round_``.
    """
    blocks = trace.blocks
    has_receives = any(e["kind"] == "receive" for e in trace.events)
    seen = {GENESIS.id}
    for e in trace.events:
        if e["round"] > round_:
            break
        if e["kind"] == "mine" and (
                e["actor"] == observer or (not has_receives and e["round"] < round_)):
            seen.add(parse_id(e["block"]["id"]))
        elif e["kind"] == "receive" and e["actor"] == observer:
            seen.add(parse_id(e["block"]))
    store = DagStore.with_genesis()
    pending = PendingBuffer()
    for bid in sorted(seen - {GENESIS.id}, key=lambda b: (blocks[b].mined_round, b)):
        b = blocks[bid]
        # references the observer cannot resolve yet are left out of the picture
        weak = tuple(w for w in b.weak_refs if w in seen)
        pending.add(store, replace(b, weak_refs=weak))
    return store


def export_dot(trace: ExecutionTrace, round_: int, observer: int) -> str:
    if not 0 <= round_ <= trace.rounds:
        raise UnknownRound(f"round {round_} outside 0..{trace.rounds}")
    if observer not in trace.honest:
        raise ValueError(f"process {observer} is not an honest process of this trace")
    store = view_at(trace, round_, observer)
    layer = CLOSURE if CLOSURE in trace.layers() else BASE
    delivered = [b for r, b in trace.deliveries(observer, layer) if r <= round_]
    return to_dot(store, delivered, trace.labels, name=f"view_p{observer}_r{round_}")
