"""Content-addressed blocks and the block DAG store.

Blocks carry strong references (``parents``, the base protocol's links) and
weak references (``weak_refs``, added by the throughput closure). A block's id
is a 64-bit digest of its strong content only, so a closure block and its
stripped twin share one id.
"""

from __future__ import annotations

import hashlib
import struct
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable

BlockId = int

STRONG = "strong"
STRONG_WEAK = "strong+weak"


class DagError(Exception):
    pass


class DanglingReference(DagError):
    def __init__(self, block_id: BlockId, missing: list[BlockId]):
        super().__init__(f"block {fmt_id(block_id)} references unknown "
                         + ", ".join(fmt_id(m) for m in missing))
        self.block_id = block_id
        self.missing = missing


class DuplicateBlock(DagError):
    pass


class UnknownBlock(DagError, KeyError):
    pass


def fmt_id(x: int) -> str:
    return f"{x:016x}"


def parse_id(s: str) -> int:
    return int(s, 16)


def digest64(*parts: bytes) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(struct.pack(">I", len(p)))
        h.update(p)
    return int.from_bytes(h.digest(), "big")


@dataclass(frozen=True, slots=True)
class Transaction:
    id: int
    broadcast_round: int
    payload_size: int = 1
    coinbase: bool = False

    @classmethod
    def user(cls, seed: int, round_: int, index: int) -> "Transaction":
        tid = digest64(b"tx", struct.pack(">qqq", seed, round_, index))
        return cls(tid, round_)

    @classmethod
    def coinbase_for(cls, miner: int, round_: int) -> "Transaction":
        tid = digest64(b"coinbase", struct.pack(">qq", miner, round_))
        return cls(tid, round_, coinbase=True)


def block_digest(parents: Iterable[BlockId], tx_ids: Iterable[int], miner: int,
                 mined_round: int) -> BlockId:
    parents = list(parents)
    tx_ids = list(tx_ids)
    return digest64(
        b"block",
        struct.pack(f">{len(parents)}Q", *parents),
        struct.pack(f">{len(tx_ids)}Q", *tx_ids),
        struct.pack(">qq", miner, mined_round),
    )


@dataclass(frozen=True, slots=True)
class Block:
    id: BlockId
    parents: tuple[BlockId, ...]
    weak_refs: tuple[BlockId, ...] = ()
    txs: tuple[Transaction, ...] = ()
    miner: int = -1
    mined_round: int = 0

    @classmethod
    def make(cls, parents, txs=(), miner: int = -1, mined_round: int = 0,
             weak_refs=()) -> "Block":
        parents = tuple(parents)
        txs = tuple(txs)
        bid = block_digest(parents, (t.id for t in txs), miner, mined_round)
        return cls(bid, parents, tuple(weak_refs), txs, miner, mined_round)

    @property
    def refs(self) -> tuple[BlockId, ...]:
        return self.parents + self.weak_refs

    @property
    def is_genesis(self) -> bool:
        return not self.parents

    def with_weak_refs(self, weak_refs) -> "Block":
        weak_refs = tuple(weak_refs)
        if len(set(weak_refs)) != len(weak_refs):
            raise ValueError("duplicate weak reference")
        if set(weak_refs) & set(self.parents):
            raise ValueError("weak reference duplicates a parent")
        return replace(self, weak_refs=weak_refs)

    def stripped(self) -> "Block":
        return self if not self.weak_refs else replace(self, weak_refs=())

    def to_json(self) -> dict:
        return {
            "id": fmt_id(self.id),
            "parents": [fmt_id(p) for p in self.parents],
            "weak_refs": [fmt_id(w) for w in self.weak_refs],
            "txs": [fmt_id(t.id) for t in self.txs],
            "tx_rounds": [t.broadcast_round for t in self.txs],
            "coinbase": [t.coinbase for t in self.txs],
            "miner": self.miner,
            "round": self.mined_round,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Block":
        txs = tuple(
            Transaction(parse_id(t), r, coinbase=c)
            for t, r, c in zip(d["txs"], d["tx_rounds"], d["coinbase"])
        )
        return cls(parse_id(d["id"]), tuple(parse_id(p) for p in d["parents"]),
                   tuple(parse_id(w) for w in d["weak_refs"]), txs,
                   d["miner"], d["round"])


GENESIS = Block.make((), (), miner=-1, mined_round=0)


@dataclass
class DagStore:
    """Append-only block set with reachability queries.

    ``depth`` is the longest strong+weak path from genesis; ``height`` the
    strong-edge distance (chain length) used by fork-choice rules.
    """

    blocks: dict[BlockId, Block] = field(default_factory=dict)
    children_index: dict[BlockId, set[BlockId]] = field(default_factory=dict)
    strong_children: dict[BlockId, set[BlockId]] = field(default_factory=dict)
    _depth: dict[BlockId, int] = field(default_factory=dict)
    _height: dict[BlockId, int] = field(default_factory=dict)

    @classmethod
    def with_genesis(cls, genesis: Block = GENESIS) -> "DagStore":
        store = cls()
        store.insert(genesis)
        return store

    def __contains__(self, bid: BlockId) -> bool:
        return bid in self.blocks

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, bid: BlockId) -> Block:
        try:
            return self.blocks[bid]
        except KeyError:
            raise UnknownBlock(fmt_id(bid)) from None

    def get(self, bid: BlockId) -> Block | None:
        return self.blocks.get(bid)

    def missing_refs(self, b: Block) -> list[BlockId]:
        return [r for r in b.refs if r not in self.blocks]

    def insert(self, b: Block) -> "DagStore":
        bid = b.id
        if bid in self.blocks:
            raise DuplicateBlock(fmt_id(bid))
        refs = b.parents + b.weak_refs
        missing = [r for r in refs if r not in self.blocks]
        if missing:
            raise DanglingReference(bid, missing)
        self.blocks[bid] = b
        self.children_index[bid] = set()
        self.strong_children[bid] = set()
        depth, height = self._depth, self._height
        for r in refs:
            self.children_index[r].add(bid)
        for p in b.parents:
            self.strong_children[p].add(bid)
        depth[bid] = 1 + max(depth[r] for r in refs) if refs else 0
        height[bid] = 1 + max(height[p] for p in b.parents) if b.parents else 0
        return self

    def depth(self, bid: BlockId) -> int:
        try:
            return self._depth[bid]
        except KeyError:
            raise UnknownBlock(fmt_id(bid)) from None

    def height(self, bid: BlockId) -> int:
        try:
            return self._height[bid]
        except KeyError:
            raise UnknownBlock(fmt_id(bid)) from None

    def ancestors(self, bid: BlockId, edge_set: str = STRONG_WEAK) -> set[BlockId]:
        """Blocks reachable from ``bid`` by following references, excluding itself."""
        b = self[bid]
        weak = edge_set == STRONG_WEAK
        blocks = self.blocks
        seen: set[BlockId] = set()
        todo = list(b.refs if weak else b.parents)
        while todo:
            x = todo.pop()
            if x in seen:
                continue
            seen.add(x)
            xb = blocks[x]
            todo.extend(xb.refs if weak else xb.parents)
        return seen

    def leaves(self, subset: Iterable[BlockId],
               within: set[BlockId] | None = None) -> set[BlockId]:
        """Members of ``subset`` with no descendant inside ``subset``.

        ``within`` optionally bounds the search to a region known to contain
        every path between members of ``subset``.
        """
        subset = set(subset)
        for x in subset:
            if x not in self.blocks:
                raise UnknownBlock(fmt_id(x))
        # x has a descendant in subset iff some block of subset reaches x.
        covered: set[BlockId] = set()
        for x in subset:
            todo = list(self.blocks[x].refs)
            while todo:
                y = todo.pop()
                if y in covered or (within is not None and y not in within):
                    continue
                covered.add(y)
                todo.extend(self.blocks[y].refs)
        return subset - covered

    def tips(self) -> set[BlockId]:
        """Strong-edge leaves."""
        return {b for b, ch in self.strong_children.items() if not ch}

    def chain(self, bid: BlockId) -> list[BlockId]:
        """Strong chain from genesis (exclusive) to ``bid`` (inclusive)."""
        out = []
        b = self[bid]
        while b.parents:
            out.append(b.id)
            b = self.blocks[b.parents[0]]
        out.reverse()
        return out

    def topological_order(self) -> list[BlockId]:
        """Kahn's algorithm; raises if the store is cyclic."""
        indeg = {b: len(blk.refs) for b, blk in self.blocks.items()}
        queue = deque(sorted(b for b, d in indeg.items() if d == 0))
        order = []
        while queue:
            b = queue.popleft()
            order.append(b)
            for c in sorted(self.children_index[b]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if len(order) != len(self.blocks):
            raise DagError("cycle detected")
        return order

    def topological_order_strong(self) -> list[BlockId]:
        # heights strictly increase along strong edges
        return sorted(self.blocks, key=lambda b: (self._height[b], b))

    def copy(self) -> "DagStore":
        return DagStore(
            dict(self.blocks),
            {k: set(v) for k, v in self.children_index.items()},
            {k: set(v) for k, v in self.strong_children.items()},
            dict(self._depth),
            dict(self._height),
        )


class PendingBuffer:
    """Holds blocks whose references have not arrived yet."""

    def __init__(self):
        self._waiting: dict[BlockId, list[Block]] = {}
        self._ids: set[BlockId] = set()

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, bid: BlockId) -> bool:
        return bid in self._ids

    def add(self, store: DagStore, b: Block) -> list[Block]:
        """Insert ``b`` (or park it); returns every block that got inserted."""
        if b.id in store or b.id in self._ids:
            return []
        missing = store.missing_refs(b)
        if missing:
            self._ids.add(b.id)
            self._waiting.setdefault(missing[0], []).append(b)
            return []
        store.insert(b)
        inserted = [b]
        todo = [b.id]
        while todo:
            arrived = todo.pop()
            for w in self._waiting.pop(arrived, ()):
                missing = store.missing_refs(w)
                if missing:
                    self._waiting.setdefault(missing[0], []).append(w)
                    continue
                self._ids.discard(w.id)
                store.insert(w)
                inserted.append(w)
                todo.append(w.id)
        return inserted


def to_dot(store: DagStore, delivered: Iterable[BlockId] = (),
           labels: dict[BlockId, str] | None = None, name: str = "dag") -> str:
    """Graphviz rendering: solid strong edges, dashed weak edges."""
    labels = labels or {}
    delivered = set(delivered)
    lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=box];"]
    for bid in store.topological_order():
        b = store.blocks[bid]
        label = labels.get(bid, "genesis" if b.is_genesis else fmt_id(bid)[:8])
        if b.is_genesis or bid in delivered:
            style = 'style=filled, fillcolor="lightblue"'
        else:
            style = 'style=dashed, color="grey"'
        lines.append(f'  "{fmt_id(bid)}" [label="{label}", {style}];')
    for bid in store.topological_order():
        b = store.blocks[bid]
        for p in b.parents:
            lines.append(f'  "{fmt_id(bid)}" -> "{fmt_id(p)}" [style=solid];')
        for w in b.weak_refs:
            lines.append(f'  "{fmt_id(bid)}" -> "{fmt_id(w)}" '
                         '[style=dashed, color="blue"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
