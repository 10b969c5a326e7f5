"""Atomic-broadcast property checks over a recorded trace, one layer at a time."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .dag import GENESIS, fmt_id
from .protocols import valid_block, valid_tx
from .trace import BASE, ExecutionTrace

NO_DUPLICATION = "no_duplication"
INTEGRITY = "integrity"
AGREEMENT = "agreement"
TOTAL_ORDER = "total_order"
VALIDITY = "validity"
EXTERNAL_VALIDITY = "external_validity"
CHAIN = "chain"

PROPERTIES = (NO_DUPLICATION, INTEGRITY, AGREEMENT, TOTAL_ORDER, VALIDITY,
              EXTERNAL_VALIDITY, CHAIN)


@dataclass(frozen=True)
class Violation:
    prop: str
    layer: str
    observer: int | None
    detail: str


@dataclass
class PropertyReport:
    violations: list[Violation] = field(default_factory=list)
    layers: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def counts(self) -> dict[str, int]:
        c = Counter(v.prop for v in self.violations)
        return {p: c.get(p, 0) for p in PROPERTIES}

    def failed(self, prop: str) -> list[Violation]:
        return [v for v in self.violations if v.prop == prop]

    def extend(self, other: "PropertyReport") -> None:
        self.violations.extend(other.violations)
        self.layers = sorted(set(self.layers) | set(other.layers))


def _check_layer(trace: ExecutionTrace, layer: str, out: list[Violation],
                 validity_tail: int, agreement_slack: int) -> None:
    honest = trace.honest
    blocks = trace.blocks
    m = trace.header.get("m", 10)
    lam = trace.rounds
    mine_at = {b.id: b.mined_round for b in blocks.values()}
    seqs = {p: trace.deliveries(p, layer) for p in honest}

    def bad(prop, p, detail):
        out.append(Violation(prop, layer, p, detail))

    for p, dl in seqs.items():
        ids = [b for _, b in dl]
        dups = [b for b, c in Counter(ids).items() if c > 1]
        for b in dups:
            bad(NO_DUPLICATION, p, f"{fmt_id(b)} delivered {ids.count(b)} times")
        seen_txs: set[int] = set()
        prev = GENESIS.id
        for r, b in dl:
            if b not in blocks or b == GENESIS.id:
                bad(INTEGRITY, p, f"{fmt_id(b)} delivered but never mined")
                continue
            blk = blocks[b]
            if mine_at[b] > r:
                bad(INTEGRITY, p, f"{fmt_id(b)} delivered in round {r} before being mined")
            fresh = [valid_tx(t, seen_txs) for t in blk.txs]
            # the closure only asks for one not-yet-delivered transaction
            ok = valid_block(blk.stripped(), m) and (
                all(fresh) if layer == BASE else any(fresh))
            if not ok:
                bad(EXTERNAL_VALIDITY, p, f"{fmt_id(b)} fails block validity on delivery")
            seen_txs.update(t.id for t in blk.txs)
            if layer == BASE and blk.parents != (prev,):
                bad(CHAIN, p, f"{fmt_id(b)} does not extend the previous delivery")
            prev = b

    # total order: any two delivered sequences are prefix-related
    order = sorted(honest, key=lambda p: len(seqs[p]))
    for i, p in enumerate(order):
        a = [b for _, b in seqs[p]]
        for q in order[i + 1:]:
            bseq = [b for _, b in seqs[q]]
            if bseq[: len(a)] != a:
                k = next(j for j, (x, y) in enumerate(zip(a, bseq)) if x != y)
                bad(TOTAL_ORDER, p, f"diverges from process {q} at position {k}")

    # agreement: whatever one honest process delivers early enough, all do
    cutoff = lam - 1 - agreement_slack
    got = {p: {b for _, b in seqs[p]} for p in honest}
    early = {}
    for p, dl in seqs.items():
        for r, b in dl:
            if r <= cutoff and b not in early:
                early[b] = p
    for b, p in early.items():
        missing = [q for q in honest if b not in got[q]]
        if missing:
            bad(AGREEMENT, p, f"{fmt_id(b)} never delivered by {missing}")

    # validity: honest transactions broadcast early enough get delivered everywhere
    sent = trace.tx_broadcasts()
    due = {t for t, r in sent.items() if r < lam - validity_tail}
    for p in honest:
        have = set()
        for b in got[p]:
            if b in blocks:
                have.update(t.id for t in blocks[b].txs)
        lost = due - have
        if lost:
            first = min(sent[t] for t in lost)
            bad(VALIDITY, p, f"{len(lost)} transactions undelivered, earliest from round {first}")


def check_properties(trace: ExecutionTrace, *, validity_tail: int = 50,
                     agreement_slack: int = 2, layers: list[str] | None = None
                     ) -> PropertyReport:
    """Check every delivery layer of ``trace``.

    ``agreement_slack`` is the diffusion bound: deliveries in the last
    ``agreement_slack + 1`` rounds need not have reached everyone yet.
    Transactions broadcast in the last ``validity_tail`` rounds are exempt
    from validity, which only holds eventually.
    """
    layers = trace.layers() if layers is None else layers
    out: list[Violation] = []
    for layer in layers:
        _check_layer(trace, layer, out, validity_tail, agreement_slack)
    return PropertyReport(out, list(layers))
