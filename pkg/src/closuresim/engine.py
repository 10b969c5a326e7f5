"""Round engine: honest turns in index order, then the adversary, then end of round."""

from __future__ import annotations

import numpy as np

from .adversaries import AdversaryProgram, make_adversary
from .closure import ClosureMode, ClosureState
from .config import ExperimentConfig
from .dag import GENESIS, Block, BlockId, DagStore, Transaction, fmt_id
from .diffusion import Kind, Message, RoundMailbox
from .protocols import (
    ADVERSARY_STREAM,
    TX_STREAM,
    ChainProcess,
    DeliveryRule,
    MiningLottery,
    stream,
)
from .trace import BASE, CLOSURE, ExecutionTrace


def log_deliveries(trace: ExecutionTrace, r: int, p: int, pairs) -> None:
    for b, closure_out in pairs:
        trace.record(r, "deliver", actor=p, layer=BASE, block=fmt_id(b.id))
        for x in closure_out:
            trace.record(r, "deliver", actor=p, layer=CLOSURE, block=fmt_id(x.id))


def log_replayed(trace: ExecutionTrace, r: int, p: int, proc: ChainProcess) -> None:
    """Closure deliveries that waited for a block's full (weak-referencing) twin."""
    if proc.closure is None:
        return
    for x in proc.closure.take_replayed():
        trace.record(r, "deliver", actor=p, layer=CLOSURE, block=fmt_id(x.id))


class AdversaryContext:
    """What the adversary may see and do during its turn."""

    def __init__(self, sim: "Simulation"):
        self._sim = sim
        self.rng = sim.adv_rng
        self.view: DagStore = sim.global_view
        self.public: DagStore = sim.public_view
        self.honest = sim.honest
        self.corrupted = sorted(sim.adversary.corrupted)
        self.round = 0

    def winners(self) -> list[int]:
        return [p for p in self._sim.lottery.winners(self.round) if p in self._sim.corrupted]

    def observed(self) -> list[Message]:
        return self._sim.mailbox.observed()

    def public_best(self) -> BlockId:
        return self._sim.public_best

    def mine(self, p: int, parent: BlockId) -> Block:
        if p not in self._sim.corrupted:
            raise ValueError(f"process {p} is not corrupted")
        b = Block.make((parent,), [Transaction.coinbase_for(p, self.round)], p, self.round)
        self._sim.trace.record(self.round, "mine", actor=p, honest=False, block=b.to_json())
        self.view.insert(b)
        return b

    def inject(self, target: int, b: Block) -> None:
        self._sim.mailbox.adversary_inject(target, Message.block(b, "adversary"))
        self._sim.trace.record(self.round, "inject", target=target, block=fmt_id(b.id))
        self._sim.publish(b)


class Simulation:
    def __init__(self, config: ExperimentConfig, seed: int,
                 closure: str | None = None, adversary: AdversaryProgram | None = None,
                 record_receives: bool = True):
        self.config = config
        self.seed = seed
        self.mode = ClosureMode(config.closure if closure is None else closure)
        self.record_receives = record_receives
        n = config.n
        if adversary is None:
            params = dict(config.adversary_params)
            if config.adversary != "honest":
                params.setdefault("f", config.f)
            adversary = make_adversary(config.adversary, **params)
        self.adversary = adversary
        self.adv_rng = stream(seed, ADVERSARY_STREAM)
        self.corrupted = adversary.corrupt(n, self.adv_rng)
        self.honest = [p for p in range(n) if p not in self.corrupted]
        self.lottery = MiningLottery(config.q, n, config.rounds, seed)
        self.rule = DeliveryRule(config.k, config.protocol)
        self.procs: dict[int, ChainProcess] = {}
        for p in self.honest:
            closure_state = None
            if self.mode is not ClosureMode.OFF:
                closure_state = ClosureState(p, config.m, self.mode)
            self.procs[p] = ChainProcess(p, self.rule, config.m, closure=closure_state)
        self.mailbox = RoundMailbox(list(self.honest))
        self.global_view = DagStore.with_genesis()
        self.public_view = DagStore.with_genesis()
        self.public_best = GENESIS.id
        self.trace = ExecutionTrace(self._header())
        self._tx_schedule = self._draw_txs()

    def _header(self) -> dict:
        c = self.config
        return {
            "seed": self.seed, "n": c.n, "f": len(self.corrupted), "rounds": c.rounds,
            "q": c.q, "m": c.m, "k": c.k, "protocol": c.protocol,
            "closure": self.mode.value, "adversary": self.adversary.name,
            "adversary_params": self.adversary.params(), "tx_rate": c.tx_rate,
            "honest": list(self.honest), "corrupted": sorted(self.corrupted),
        }

    def _draw_txs(self) -> dict[int, list[tuple[int, Transaction]]]:
        rng = stream(self.seed, TX_STREAM)
        counts = rng.poisson(self.config.tx_rate, self.config.rounds)
        owners = rng.integers(0, len(self.honest), int(counts.sum())) if self.honest else []
        out: dict[int, list] = {}
        i = 0
        for r in np.flatnonzero(counts):
            r = int(r)
            for j in range(int(counts[r])):
                out.setdefault(r, []).append(
                    (self.honest[int(owners[i])], Transaction.user(self.seed, r, j)))
                i += 1
        return out

    def publish(self, b: Block) -> None:
        if b.id in self.public_view:
            return
        self.public_view.insert(b.stripped())
        h = self.public_view.height(b.id)
        bh = self.public_view.height(self.public_best)
        if h > bh or (h == bh and b.id < self.public_best):
            self.public_best = b.id

    def step(self, r: int) -> None:
        rec = self.trace.record
        new_txs: dict[int, list[Transaction]] = {}
        for owner, tx in self._tx_schedule.get(r, ()):
            new_txs.setdefault(owner, []).append(tx)
        for p in self.honest:
            proc = self.procs[p]
            for msg in self.mailbox.begin_round(p):
                if msg.kind is Kind.BLOCK:
                    for x in proc.receive_block(msg.payload):
                        if self.record_receives:
                            rec(r, "receive", actor=p, block=fmt_id(x.id))
                    log_replayed(self.trace, r, p, proc)
                else:
                    proc.receive_tx(msg.payload)
            out = []
            for tx in new_txs.get(p, ()):
                proc.receive_tx(tx)
                rec(r, "broadcast", actor=p, tx=fmt_id(tx.id))
                out.append(Message.tx(tx, p))
            log_deliveries(self.trace, r, p, proc.deliver_step())
            if self.lottery.wins(r, p):
                b = proc.mine_attempt(r, self.lottery)
                rec(r, "mine", actor=p, honest=True, block=b.to_json())
                self.global_view.insert(b.stripped())
                self.publish(b)
                out.append(Message.block(b, p))
            self.mailbox.broadcast(p, out)
        ctx = self._ctx
        ctx.round = r
        self.adversary.act(ctx)
        self.mailbox.conclude_adversary()
        self.mailbox.end_round()

    def run(self) -> ExecutionTrace:
        self._ctx = AdversaryContext(self)
        for r in range(self.config.rounds):
            self.step(r)
        self.trace.finish(self.config.rounds)
        return self.trace


def simulate(config: ExperimentConfig, seed: int, closure: str | None = None,
             **kw) -> ExecutionTrace:
    """One execution of the configured protocol; ``closure`` overrides the config mode."""
    return Simulation(config, seed, closure, **kw).run()


def simulate_pair(config: ExperimentConfig, seed: int,
                  closure: str | None = None) -> tuple[ExecutionTrace, ExecutionTrace]:
    """Base and closure executions on identical mining, transaction and adversary randomness."""
    mode = config.closure if closure is None else closure
    if mode == ClosureMode.OFF.value:
        mode = ClosureMode.LEAVES_OF_ABANDONED.value
    return simulate(config, seed, "off"), simulate(config, seed, mode)
