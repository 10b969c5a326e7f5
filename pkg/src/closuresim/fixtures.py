"""Hand-scripted executions with exact, checkable outcomes.

A script names blocks and transactions, picks parents, routes every block to
chosen processes and triggers deliveries explicitly. Mining still goes through
the regular process code, so weak references and closure deliveries are the
ones the closure would compute in a simulated run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .closure import ClosureMode, ClosureState
from .dag import GENESIS, Block, BlockId, Transaction, fmt_id
from .engine import log_deliveries, log_replayed
from .protocols import ChainProcess, DeliveryRule
from .trace import ExecutionTrace


@dataclass
class ScriptedRun:
    n: int
    m: int = 10
    k: int = 1
    closure: str = "closure"
    name: str = "scripted"
    procs: dict[int, ChainProcess] = field(init=False)
    trace: ExecutionTrace = field(init=False)
    ids: dict[str, BlockId] = field(default_factory=lambda: {"g": GENESIS.id})
    full: dict[str, Block] = field(default_factory=dict)
    txs: dict[str, Transaction] = field(default_factory=dict)
    # abandoned(b) as the miner computed it, by label; closure mode only
    abandoned_at_mining: dict[str, set[BlockId]] = field(default_factory=dict)
    _round: int = 0

    def __post_init__(self):
        mode = ClosureMode(self.closure)
        rule = DeliveryRule(self.k)
        self.procs = {}
        for p in range(self.n):
            state = None if mode is ClosureMode.OFF else ClosureState(p, self.m, mode)
            self.procs[p] = ChainProcess(p, rule, self.m, closure=state)
        self.trace = ExecutionTrace({
            "seed": 0, "n": self.n, "f": 0, "rounds": 0, "q": 0.0, "m": self.m,
            "k": self.k, "protocol": "nakamoto", "closure": mode.value,
            "adversary": self.name, "adversary_params": {}, "tx_rate": 0.0,
            "honest": list(range(self.n)), "corrupted": [], "labels": {},
        })

    def _at(self, r: int) -> None:
        if r < self._round:
            raise ValueError(f"script went back from round {self._round} to {r}")
        self._round = r

    def label(self, bid: BlockId) -> str:
        return self.trace.header["labels"].get(fmt_id(bid), fmt_id(bid))

    def mine(self, r: int, p: int, label: str, parent: str = "g") -> Block:
        self._at(r)
        proc = self.procs[p]
        b = proc.make_block(r, parent=self.ids[parent])
        if proc.closure is not None:
            self.abandoned_at_mining[label] = proc.closure.abandoned(b)
        full = proc.adopt_own(b)
        self.ids[label] = b.id
        self.full[label] = full
        self.trace.header["labels"][fmt_id(b.id)] = label
        self.trace.record(r, "mine", actor=p, honest=True, block=full.to_json())
        return full

    def send(self, r: int, label: str, to) -> None:
        self._at(r)
        for p in to:
            proc = self.procs[p]
            for x in proc.receive_block(self.full[label]):
                self.trace.record(r, "receive", actor=p, block=fmt_id(x.id))
            log_replayed(self.trace, r, p, proc)

    def broadcast(self, r: int, p: int, label: str, to=None) -> Transaction:
        self._at(r)
        tx = Transaction.user(0, r, len(self.txs))
        self.txs[label] = tx
        self.trace.record(r, "broadcast", actor=p, tx=fmt_id(tx.id))
        for q in {p, *(to if to is not None else self.procs)}:
            self.procs[q].receive_tx(tx)
        return tx

    def deliver(self, r: int, label: str, procs=None) -> None:
        self._at(r)
        for p in (self.procs if procs is None else procs):
            log_deliveries(self.trace, r, p, self.procs[p].deliver_through(self.ids[label]))

    def finish(self, rounds: int) -> ExecutionTrace:
        self.trace.header["rounds"] = rounds
        self.trace.finish(rounds)
        return self.trace


def figure2(closure: str = "closure") -> ScriptedRun:
    """Eleven blocks, four processes; the main chain is b1 b2 b3 b5 b6 b10 b11.

    b4/b5 and b9/b10 are forked rounds, b7 and b8 extend the losing b4 branch.
    Routing keeps b4, b7 and b8 away from P0 until round 8, so b9 carries no
    weak reference, while b10 (P1) covers b4 b7 b8 and b11 (P2) picks up b9.
    """
    s = ScriptedRun(4, m=10, k=1, closure=closure, name="figure2")
    everyone = range(4)
    s.mine(1, 0, "b1")
    s.send(2, "b1", everyone)
    s.mine(2, 1, "b2", "b1")
    s.send(3, "b2", everyone)
    s.mine(3, 2, "b3", "b2")
    s.send(4, "b3", everyone)
    s.mine(4, 3, "b4", "b3")
    s.mine(4, 1, "b5", "b3")
    s.send(5, "b4", [2])
    s.send(5, "b5", [0])
    s.mine(5, 1, "b6", "b5")
    s.mine(5, 2, "b7", "b4")
    s.mine(5, 3, "b8", "b4")
    s.send(6, "b4", [1])
    s.send(6, "b5", [2, 3])
    s.send(6, "b6", [0, 2, 3])
    s.send(6, "b7", [1, 3])
    s.send(6, "b8", [1, 2])
    s.deliver(7, "b6")
    s.mine(7, 0, "b9", "b6")
    s.mine(7, 1, "b10", "b6")
    s.send(8, "b4", [0])
    s.send(8, "b7", [0])
    s.send(8, "b8", [0])
    s.send(8, "b9", [1, 2, 3])
    s.send(8, "b10", [0, 2, 3])
    s.mine(8, 2, "b11", "b10")
    s.send(9, "b11", [0, 1, 3])
    s.deliver(9, "b11")
    s.finish(10)
    return s


def latency_scenario(closure: str = "closure") -> ScriptedRun:
    """Three transactions on two processes with capacity for one each.

    ``A`` only reaches P0 and lands in the abandoned block ``a``; the base
    re-includes it in ``c3`` while the closure delivers ``a`` right before
    ``c2``. Base latencies are A=5, B=3, C=4; closure latencies A=4, B=3, C=4.
    """
    s = ScriptedRun(2, m=2, k=1, closure=closure, name="latency")
    s.broadcast(1, 0, "A", to=[])
    s.mine(2, 0, "a")
    s.mine(2, 1, "c1")
    s.broadcast(2, 1, "B")
    s.send(3, "a", [1])
    s.send(3, "c1", [0])
    s.broadcast(3, 1, "C", to=[1])
    s.mine(3, 1, "c2", "c1")
    s.send(4, "c2", [0])
    s.mine(4, 0, "c3", "c2")
    s.deliver(4, "c1")
    s.send(5, "c3", [1])
    s.deliver(5, "c2")
    s.mine(5, 1, "c4", "c3")
    s.deliver(6, "c3")
    s.send(7, "c4", [0])
    s.deliver(7, "c4")
    s.finish(8)
    return s


FIXTURES = {"figure2": figure2, "latency": latency_scenario}
