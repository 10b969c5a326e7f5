"""The throughput closure: weak references to abandoned blocks, delivered in tau order.

A process running the closure mines exactly the blocks its base protocol mines,
but augments each with weak references to the leaves of ``abandoned(b)``. When
the base protocol delivers ``b``, every not-yet-delivered block reachable from
``b`` over strong and weak references is delivered first, sorted by tau.
"""

from __future__ import annotations

from enum import Enum
from typing import Callable, Iterable

from .dag import GENESIS, STRONG, Block, BlockId, DagStore, PendingBuffer, fmt_id
from .protocols import valid_block


class ClosureMode(str, Enum):
    OFF = "off"
    LEAVES_OF_ABANDONED = "closure"
    GREEDY = "greedy"


class UnresolvedAncestry(Exception):
    pass


class MissingTwin(Exception):
    pass


def tau(blocks: Iterable[Block] | Iterable[BlockId], store: DagStore) -> list[Block]:
    """Order by (depth, id); depth grows along every edge, so this is a linear extension."""
    out = [store[b] if isinstance(b, int) else b for b in blocks]
    out.sort(key=lambda b: (store.depth(b.id), b.id))
    return out


def chain_incompatible(store: DagStore, b: Block, other: BlockId) -> bool:
    """For chain protocols a block conflicts with every block off its strong ancestry."""
    return other not in _strong_closure(store, b)


def _strong_closure(store: DagStore, b: Block) -> set[BlockId]:
    out = set()
    for p in b.parents:
        out.add(p)
        out |= store.ancestors(p, STRONG)
    return out


def _ref_closure(store: DagStore, b: Block) -> set[BlockId]:
    """ancestors'(b) for a block that may not be stored yet."""
    out = set()
    todo = list(b.refs)
    blocks = store.blocks
    while todo:
        x = todo.pop()
        if x in out:
            continue
        if x not in blocks:
            raise UnresolvedAncestry(fmt_id(x))
        out.add(x)
        todo.extend(blocks[x].refs)
    return out


Incompatible = Callable[[DagStore, Block, BlockId], bool]


class ClosureState:
    """Per-process state of the closure layer.

    ``dag`` holds every structurally resolvable block received; blocks failing
    the closure validity check at receipt are kept for reference resolution but
    tracked in ``invalid`` and treated as outside the mined set.
    """

    def __init__(self, index: int, m: int = 10,
                 mode: ClosureMode = ClosureMode.LEAVES_OF_ABANDONED,
                 incompatible: Incompatible | None = None):
        self.index = index
        self.m = m
        self.mode = ClosureMode(mode)
        if self.mode is ClosureMode.OFF:
            raise ValueError("closure state requires an active mode")
        # None selects the chain rule, which every non-ancestor already satisfies
        self.incompatible = incompatible
        self.dag = DagStore.with_genesis()
        self.pending = PendingBuffer()
        self.invalid: set[BlockId] = set()
        self.delivered: list[BlockId] = []
        self.delivered_set: set[BlockId] = set()
        # delivered or skipped as invalid; downward closed
        self.processed: set[BlockId] = {GENESIS.id}
        self.delivered_txs: set[int] = set()
        self.last_delivered: BlockId | None = None
        # stored blocks not yet processed; the only candidates for abandoned()
        self.unprocessed: set[BlockId] = set()
        # processed == ancestors'(last) + {last} while base deliveries form a chain
        self._processed_is_cone = True
        self._awaiting_twin: list[Block] = []
        self._replayed: list[Block] = []

    # -- validity ------------------------------------------------------------

    def vb_prime(self, b: Block) -> bool:
        # valid_block only looks at strong structure and transactions
        if not valid_block(b, self.m):
            return False
        return any(t.id not in self.delivered_txs for t in b.txs)

    # -- abandoned set -------------------------------------------------------

    def _ancestry_outside_processed(self, b: Block) -> set[BlockId] | None:
        """ancestors'(b) minus processed blocks, or None if processed is not inside it."""
        if not self._processed_is_cone:
            return None
        last = GENESIS.id if self.last_delivered is None else self.last_delivered
        blocks = self.dag.blocks
        seen: set[BlockId] = set()
        hit_last = False
        todo = list(b.refs)
        while todo:
            x = todo.pop()
            if x == last:
                hit_last = True
            if x in seen or x in self.processed:
                continue
            if x not in blocks:
                raise UnresolvedAncestry(fmt_id(x))
            seen.add(x)
            todo.extend(blocks[x].refs)
        return seen if hit_last else None

    def abandoned(self, b: Block) -> set[BlockId]:
        """Valid blocks of the local DAG that cannot be base-delivered alongside ``b``."""
        anc = self._ancestry_outside_processed(b)
        if anc is None:
            anc = _ref_closure(self.dag, b)
            pool = self.dag.blocks
        else:
            pool = self.unprocessed
        out = set()
        for x in pool:
            if x in anc or x == b.id or x in self.invalid:
                continue
            if self.incompatible is None or self.incompatible(self.dag, b, x):
                out.add(x)
        return out

    def weak_refs_for(self, b: Block) -> list[BlockId]:
        if self.mode is ClosureMode.GREEDY:
            return self.greedy_weak_refs(b)
        aband = self.abandoned(b)
        # descendants of an abandoned block are abandoned or unprocessed-invalid,
        # so the leaf search never has to leave the unprocessed region
        within = self.unprocessed if self.incompatible is None else None
        weak = self.dag.leaves(aband, within=within)
        return [x.id for x in tau(weak, self.dag)]

    def greedy_weak_refs(self, b: Block) -> list[BlockId]:
        """Leaves of every mined block that is not a strong ancestor of ``b``."""
        strong = _strong_closure(self.dag, b)
        cands = {x for x in self.dag.blocks
                 if x not in strong and x != b.id and x not in self.invalid}
        return [x.id for x in tau(self.dag.leaves(cands), self.dag)]

    # -- events --------------------------------------------------------------

    def on_base_mined(self, b: Block, miner: int, self_index: int | None = None) -> Block | None:
        """Augment an own base block with weak references and record it."""
        if self_index is None:
            self_index = self.index
        if miner != self_index:
            return None
        b2 = b.with_weak_refs(self.weak_refs_for(b))
        self._insert(b2)
        return b2

    def on_foreign_mined(self, b: Block) -> None:
        if b.id in self.dag or b.id in self.pending:
            return
        self._insert(b)

    def _insert(self, b: Block) -> None:
        for x in self.pending.add(self.dag, b):
            self.unprocessed.add(x.id)
            if x.miner != self.index and not self.vb_prime(x):
                self.invalid.add(x.id)
        if self._awaiting_twin:
            waiting, self._awaiting_twin = self._awaiting_twin, []
            for w in waiting:
                self._replayed.extend(self.on_base_deliver(w))

    def take_replayed(self) -> list[Block]:
        out, self._replayed = self._replayed, []
        return out

    def on_base_deliver(self, b: Block) -> list[Block]:
        """Deliver the ready set of ``b`` in tau order, ``b`` itself last."""
        twin = self.dag.get(b.id)
        if twin is None or self._awaiting_twin:
            self._awaiting_twin.append(b)
            return []
        last = GENESIS.id if self.last_delivered is None else self.last_delivered
        hit_last = False
        ready = []
        todo = [twin.id]
        seen = set()
        blocks = self.dag.blocks
        while todo:
            x = todo.pop()
            if x == last:
                hit_last = True
            if x in seen or x in self.processed:
                continue
            seen.add(x)
            ready.append(blocks[x])
            todo.extend(blocks[x].refs)
        if not hit_last:
            self._processed_is_cone = False
        out = []
        for x in tau(ready, self.dag):
            self.processed.add(x.id)
            self.unprocessed.discard(x.id)
            if x.id in self.invalid or not self.vb_prime(x):
                continue
            self.delivered.append(x.id)
            self.delivered_set.add(x.id)
            self.delivered_txs.update(t.id for t in x.txs)
            out.append(x)
        self.last_delivered = twin.id
        return out

