"""Reference implementations written independently of the package internals.

They read only the serialized trace (plain dicts) and recompute things the
package computes incrementally, so agreement is evidence, not tautology.
"""

from __future__ import annotations

from math import comb


def forked_round_probability(q: float, n: int) -> float:
    """P(#successes >= 2) for Binomial(n, q), summed term by term."""
    return sum(comb(n, j) * q**j * (1 - q) ** (n - j) for j in range(2, n + 1))


def _blocks(trace) -> dict[str, dict]:
    return {e["block"]["id"]: e["block"] for e in trace.events if e["kind"] == "mine"}


def depths(blocks: dict[str, dict]) -> dict[str, int]:
    """Longest path to genesis over strong and weak references."""
    memo: dict[str, int] = {}

    def refs(b):
        return blocks[b]["parents"] + blocks[b]["weak_refs"] if b in blocks else []

    for start in blocks:
        stack = [start]
        while stack:
            b = stack[-1]
            if b in memo:
                stack.pop()
                continue
            todo = [r for r in refs(b) if r not in memo]
            if todo:
                stack.extend(todo)
                continue
            memo[b] = 1 + max((memo[r] for r in refs(b)), default=-1)
            stack.pop()
    return memo


def replay_closure(trace, observer: int) -> list[str]:
    """Closure delivery sequence rebuilt from the base deliveries and the mined blocks.

    For each base-delivered block, everything it reaches that was not handled
    before is sorted by (depth, id) and delivered if it still carries a
    transaction nobody delivered yet.
    """
    blocks = _blocks(trace)
    depth = depths(blocks)
    base = [e["block"] for e in trace.events
            if e["kind"] == "deliver" and e["actor"] == observer and e["layer"] == "base"]
    handled: set[str] = set()
    seen_txs: set[str] = set()
    out = []
    for b in base:
        ready, todo = set(), [b]
        while todo:
            x = todo.pop()
            if x in handled or x in ready or x not in blocks:
                continue
            ready.add(x)
            todo.extend(blocks[x]["parents"] + blocks[x]["weak_refs"])
        for x in sorted(ready, key=lambda x: (depth[x], int(x, 16))):
            handled.add(x)
            txs = blocks[x]["txs"]
            if any(t not in seen_txs for t in txs):
                out.append(x)
                seen_txs.update(txs)
    return out


def chain_abandoned(trace, observer: int) -> set[str]:
    """Honest blocks off the final delivered chain and older than its last honest block."""
    blocks = _blocks(trace)
    honest = {e["block"]["id"] for e in trace.events if e["kind"] == "mine" and e["honest"]}
    base = [e["block"] for e in trace.events
            if e["kind"] == "deliver" and e["actor"] == observer and e["layer"] == "base"]
    last = [b for b in base if b in honest]
    if not last:
        return set()
    cutoff = blocks[last[-1]]["round"]
    return {b for b in honest if b not in set(base) and blocks[b]["round"] < cutoff}
