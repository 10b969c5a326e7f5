"""Forkable chain protocols (longest chain, GHOST) behind the BAB event interface."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np

from .dag import GENESIS, Block, BlockId, DagStore, PendingBuffer, Transaction

# rng stream tags; each stream is derived independently from the run seed
MINING_STREAM = 1
TX_STREAM = 2
ADVERSARY_STREAM = 3


def stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


class RuleKind(str, Enum):
    LONGEST_CHAIN = "nakamoto"
    GHOST = "ghost"


@dataclass(frozen=True)
class DeliveryRule:
    confirmation_depth: int = 6
    kind: RuleKind = RuleKind.LONGEST_CHAIN

    def __post_init__(self):
        if self.confirmation_depth < 1:
            raise ValueError("confirmation depth must be >= 1")
        object.__setattr__(self, "kind", RuleKind(self.kind))


class MiningLottery:
    """Bernoulli proof-of-work stand-in: one independent coin per (round, process)."""

    def __init__(self, q: float, n: int, rounds: int, seed: int):
        if not 0 <= q <= 1:
            raise ValueError("q must lie in [0, 1]")
        self.q = q
        self.n = n
        self.rounds = rounds
        self.seed = seed
        self._wins = stream(seed, MINING_STREAM).random((rounds, n)) < q

    def wins(self, round_: int, p: int) -> bool:
        return bool(self._wins[round_, p])

    def winners(self, round_: int) -> list[int]:
        return [int(p) for p in np.flatnonzero(self._wins[round_])]

    @staticmethod
    def forked_round_probability(q: float, n: int) -> float:
        """P(at least two of ``n`` miners succeed in one round)."""
        return 1 - (1 - q) ** n - n * q * (1 - q) ** (n - 1)


def tip_selection_longest(view: DagStore) -> BlockId:
    """Deepest strong-edge leaf; ties go to the smaller id."""
    return min(view.tips(), key=lambda b: (-view.height(b), b))


def subtree_sizes(view: DagStore) -> dict[BlockId, int]:
    sizes: dict[BlockId, int] = {}
    for bid in reversed(view.topological_order_strong()):
        sizes[bid] = 1 + sum(sizes[c] for c in view.strong_children[bid])
    return sizes


def tip_selection_ghost(view: DagStore, genesis: BlockId = GENESIS.id) -> BlockId:
    """Greedy heaviest-subtree walk from genesis; ties go to the smaller id."""
    sizes = subtree_sizes(view)
    cur = genesis
    while view.strong_children[cur]:
        cur = min(view.strong_children[cur], key=lambda c: (-sizes[c], c))
    return cur


def valid_block(b: Block, m: int) -> bool:
    """Base external validity: chain shape, capacity, exactly one leading coinbase."""
    if b.is_genesis:
        return True
    if len(b.parents) != 1 or len(b.txs) > m or not b.txs:
        return False
    if not b.txs[0].coinbase or any(t.coinbase for t in b.txs[1:]):
        return False
    return len({t.id for t in b.txs}) == len(b.txs)


def valid_tx(tx: Transaction, delivered_txs: set[int]) -> bool:
    return tx.id not in delivered_txs


class LongestChainTracker:
    """Incremental longest-chain tip; equivalent to ``tip_selection_longest``."""

    def __init__(self, view: DagStore):
        self.view = view
        self.best = tip_selection_longest(view)

    def update(self, b: Block) -> None:
        h = self.view.height(b.id)
        bh = self.view.height(self.best)
        if h > bh or (h == bh and b.id < self.best):
            self.best = b.id

    def tip(self) -> BlockId:
        return self.best


class GhostTracker:
    def __init__(self, view: DagStore):
        self.view = view
        self._tip = None

    def update(self, b: Block) -> None:
        self._tip = None

    def tip(self) -> BlockId:
        if self._tip is None:
            self._tip = tip_selection_ghost(self.view)
        return self._tip


@dataclass
class ChainProcess:
    """One honest process running a chain protocol.

    The base view stores stripped blocks only; a closure layer, when attached,
    sees the full blocks and the base delivery stream.
    """

    index: int
    rule: DeliveryRule = field(default_factory=DeliveryRule)
    m: int = 10
    view: DagStore = field(default_factory=DagStore.with_genesis)
    pending: PendingBuffer = field(default_factory=PendingBuffer)
    delivered: list[BlockId] = field(default_factory=list)
    delivered_set: set[BlockId] = field(default_factory=lambda: {GENESIS.id})
    delivered_txs: set[int] = field(default_factory=set)
    mempool: dict[int, Transaction] = field(default_factory=dict)
    closure: object | None = None
    _dirty: bool = True

    def __post_init__(self):
        tracker = (LongestChainTracker if self.rule.kind is RuleKind.LONGEST_CHAIN
                   else GhostTracker)
        self.tracker = tracker(self.view)

    # -- receipt -------------------------------------------------------------

    def receive_block(self, b: Block) -> list[Block]:
        """Insert a received block; returns blocks newly added to the base view."""
        if self.closure is not None:
            self.closure.on_foreign_mined(b)
        inserted = self.pending.add(self.view, b.stripped())
        for x in inserted:
            self.tracker.update(x)
        if inserted:
            self._dirty = True
        return inserted

    def receive_tx(self, tx: Transaction) -> None:
        if tx.id not in self.delivered_txs:
            self.mempool.setdefault(tx.id, tx)

    # -- delivery ------------------------------------------------------------

    def tip(self) -> BlockId:
        return self.tracker.tip()

    def deliver_step(self) -> list[tuple[Block, list[Block]]]:
        """Deliver every block at least ``k`` strong edges below the tip.

        Returns ``(base_block, closure_deliveries)`` pairs in delivery order.
        """
        if not self._dirty:
            return []
        self._dirty = False
        tip = self.tip()
        k = self.rule.confirmation_depth
        target_height = self.view.height(tip) - k
        if target_height < 1:
            return []
        target = tip
        blocks = self.view.blocks
        while self.view.height(target) > target_height:
            target = blocks[target].parents[0]
        return self.deliver_through(target)

    def deliver_through(self, target: BlockId) -> list[tuple[Block, list[Block]]]:
        blocks = self.view.blocks
        fresh = []
        cur = target
        while cur not in self.delivered_set:
            fresh.append(cur)
            cur = blocks[cur].parents[0]
        out = []
        for bid in reversed(fresh):
            b = blocks[bid]
            self.delivered.append(bid)
            self.delivered_set.add(bid)
            for t in b.txs:
                self.delivered_txs.add(t.id)
                self.mempool.pop(t.id, None)
            closure_out = []
            if self.closure is not None:
                closure_out = self.closure.on_base_deliver(b)
            out.append((b, closure_out))
        return out

    # -- mining --------------------------------------------------------------

    def select_txs(self, parent: BlockId) -> list[Transaction]:
        """The ``m - 1`` oldest mempool transactions not already on the chain."""
        on_chain: set[int] = set()
        blocks = self.view.blocks
        cur = parent
        while cur not in self.delivered_set:
            on_chain.update(t.id for t in blocks[cur].txs)
            cur = blocks[cur].parents[0]
        cands = sorted((t for t in self.mempool.values() if t.id not in on_chain),
                       key=lambda t: (t.broadcast_round, t.id))
        return cands[: self.m - 1]

    def make_block(self, round_: int, parent: BlockId | None = None,
                   txs: Iterable[Transaction] | None = None) -> Block:
        parent = self.tip() if parent is None else parent
        if txs is None:
            txs = self.select_txs(parent)
        txs = [Transaction.coinbase_for(self.index, round_), *txs]
        return Block.make((parent,), txs, self.index, round_)

    def mine_attempt(self, round_: int, lottery: MiningLottery) -> Block | None:
        if not lottery.wins(round_, self.index):
            return None
        return self.adopt_own(self.make_block(round_))

    def adopt_own(self, b: Block) -> Block:
        """Record a freshly mined base block; returns the block to broadcast."""
        out = b
        if self.closure is not None:
            out = self.closure.on_base_mined(b, b.miner, self.index)
        self.pending.add(self.view, b)
        self.tracker.update(b)
        self._dirty = True
        return out


def detect_forked_round(trace, r: int) -> bool:
    """True iff two distinct honest processes mined a block in round ``r``."""
    return len({e["actor"] for e in trace.mines() if e["round"] == r and e["honest"]}) >= 2


def forked_rounds(trace) -> list[int]:
    by_round: dict[int, set[int]] = {}
    for e in trace.mines():
        if e["honest"]:
            by_round.setdefault(e["round"], set()).add(e["actor"])
    return sorted(r for r, actors in by_round.items() if len(actors) >= 2)

