"""Adversary programs and the closure-to-base execution mapping.

Adversaries act after every honest process has completed its round, so they
see that round's honest broadcasts (rushing). They only look at strong
structure and draw from their own rng stream, which keeps a base execution
and its closure twin in lockstep.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from .dag import Block
from .trace import BASE, CLOSURE, ExecutionTrace

if TYPE_CHECKING:
    from .engine import AdversaryContext


class NotAClosureTrace(ValueError):
    pass


class AdversaryProgram:
    """Base class; corrupts nobody and does nothing."""

    name = "honest"

    def __init__(self, f: int = 0):
        if f < 0:
            raise ValueError("f must be non-negative")
        self.f = f
        self.corrupted: frozenset[int] = frozenset()

    def corrupt(self, n: int, rng: np.random.Generator) -> frozenset[int]:
        if self.f > n:
            raise ValueError(f"cannot corrupt {self.f} of {n} processes")
        picked = rng.choice(n, size=self.f, replace=False) if self.f else []
        self.corrupted = frozenset(int(p) for p in picked)
        return self.corrupted

    def act(self, ctx: "AdversaryContext") -> None:
        pass

    def params(self) -> dict:
        return {"f": self.f}


def honest_adversary() -> AdversaryProgram:
    prog = AdversaryProgram(0)
    return prog


def _split(ctx: "AdversaryContext") -> list[int]:
    honest = ctx.honest
    if len(honest) <= 1:
        return list(honest)
    picked = ctx.rng.choice(len(honest), size=len(honest) // 2, replace=False)
    return sorted(honest[i] for i in picked)


class ForkAmplifier(AdversaryProgram):
    """Corrupted miners extend the runner-up tip and release to half the honest set."""

    name = "fork_amplifier"

    def act(self, ctx):
        for p in ctx.winners():
            tips = sorted(ctx.public.tips(), key=lambda b: (-ctx.public.height(b), b))
            if len(tips) >= 2:
                parent = tips[1]
            else:
                best = ctx.public[tips[0]]
                parent = best.parents[0] if best.parents else best.id
            b = ctx.mine(p, parent)
            for t in _split(ctx):
                ctx.inject(t, b)


class SelectiveRelease(AdversaryProgram):
    """Withholds a private chain and releases it to a subset once honest miners catch up."""

    name = "selective_release"

    def __init__(self, f: int = 0, lead: int = 1):
        super().__init__(f)
        self.lead = lead
        self.private: list[Block] = []

    def params(self):
        return {"f": self.f, "lead": self.lead}

    def act(self, ctx):
        best = ctx.public_best()
        best_h = ctx.public.height(best)
        if self.private and best_h > ctx.view.height(self.private[-1].id):
            self.private = []
        for p in ctx.winners():
            parent = self.private[-1].id if self.private else best
            self.private.append(ctx.mine(p, parent))
        if self.private and best_h >= ctx.view.height(self.private[-1].id) - self.lead:
            targets = _split(ctx)
            for b in self.private:
                for t in targets:
                    ctx.inject(t, b)
            self.private = []


ADVERSARIES = {
    "honest": AdversaryProgram,
    "fork_amplifier": ForkAmplifier,
    "selective_release": SelectiveRelease,
}


def fork_amplifier(f: int) -> ForkAmplifier:
    return ForkAmplifier(f)


def make_adversary(name: str, **params) -> AdversaryProgram:
    try:
        cls = ADVERSARIES[name]
    except KeyError:
        raise ValueError(f"unknown adversary {name!r}; "
                         f"choose from {sorted(ADVERSARIES)}") from None
    if cls is AdversaryProgram:
        return honest_adversary()
    return cls(**params)


def strip_to_equivalent(trace: ExecutionTrace) -> ExecutionTrace:
    """The equivalent base execution: weak references and closure deliveries removed."""
    if trace.header.get("closure") == "off":
        return trace.copy()
    base_delivers = any(e["kind"] == "deliver" and e["layer"] == BASE for e in trace.events)
    closure_delivers = any(e["kind"] == "deliver" and e["layer"] == CLOSURE
                           for e in trace.events)
    if closure_delivers and not base_delivers:
        raise NotAClosureTrace("closure deliveries without the base delivery stream")
    header = dict(trace.header)
    header["closure"] = "off"
    events = []
    for e in trace.events:
        if e["kind"] == "deliver" and e["layer"] != BASE:
            continue
        if e["kind"] == "mine":
            e = dict(e)
            e["block"] = dict(e["block"], weak_refs=[])
        events.append(e)
    return ExecutionTrace(header, events)


__all__ = [
    "ADVERSARIES", "AdversaryProgram", "ForkAmplifier", "NotAClosureTrace",
    "SelectiveRelease", "fork_amplifier", "honest_adversary", "make_adversary",
    "strip_to_equivalent",
]
