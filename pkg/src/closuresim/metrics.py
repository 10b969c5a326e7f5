"""Throughput, latency and abandonment over execution traces.

All quantities are exact (``Fraction``) and per observer; reports aggregate
across honest observers (min/mean/max) and across seeds (mean with a 95%
normal-approximation interval, an estimate of the expectation over executions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import fmean, stdev

from .dag import BlockId
from .trace import BASE, CLOSURE, EmptyTrace, ExecutionTrace


class UnpairedTraces(ValueError):
    pass


def _rounds(trace: ExecutionTrace) -> int:
    lam = trace.rounds
    if lam < 1:
        raise EmptyTrace("trace covers no rounds")
    return lam


def default_observer(trace: ExecutionTrace) -> int:
    if not trace.honest:
        raise EmptyTrace("trace has no honest process")
    return min(trace.honest)


def delivered_count(trace: ExecutionTrace, observer: int, layer: str = BASE) -> int:
    return len(set(trace.delivered_sequence(observer, layer)))


def throughput_of(trace: ExecutionTrace, observer: int, layer: str = BASE) -> Fraction:
    """Distinct delivered blocks per round."""
    return Fraction(delivered_count(trace, observer, layer), _rounds(trace))


def tx_throughput_of(trace: ExecutionTrace, observer: int, layer: str = BASE) -> Fraction:
    """Distinct delivered user transactions per round (coinbases excluded)."""
    return Fraction(len(tx_latencies(trace, observer, layer)), _rounds(trace))


def tx_latencies(trace: ExecutionTrace, observer: int, layer: str = BASE) -> dict[int, int]:
    """tx id -> rounds from broadcast to the first delivered block containing it."""
    sent = trace.tx_broadcasts()
    blocks = trace.blocks
    out: dict[int, int] = {}
    for r, bid in trace.deliveries(observer, layer):
        for t in blocks[bid].txs:
            if t.id in sent and t.id not in out:
                out[t.id] = r - sent[t.id]
    return out


def unresolved_txs(trace: ExecutionTrace, observer: int, layer: str = BASE) -> set[int]:
    done = tx_latencies(trace, observer, layer)
    return {t for t in trace.tx_broadcasts() if t not in done}


def latency_of(trace: ExecutionTrace, observer: int, layer: str = BASE) -> Fraction:
    """Mean latency over delivered transactions; undelivered ones are left out."""
    _rounds(trace)
    lat = tx_latencies(trace, observer, layer)
    if not lat:
        raise EmptyTrace("no transaction was delivered")
    return Fraction(sum(lat.values()), len(lat))


def horizon(trace: ExecutionTrace, observer: int) -> int | None:
    """Round in which the observer's last base-delivered honest block was mined."""
    honest = trace.honest_mined
    blocks = trace.blocks
    for _, bid in reversed(trace.deliveries(observer, BASE)):
        if bid in honest:
            return blocks[bid].mined_round
    return None


def stale_blocks(trace: ExecutionTrace, observer: int | None = None,
                 layer: str = BASE, honest_only: bool = False) -> set[BlockId]:
    """Blocks mined before the horizon that the layer never delivered.

    Once a chain protocol delivers a block mined in round r, no block mined
    before r outside its ancestry can be delivered any more, so these blocks
    are abandoned for good, not merely late.
    """
    if observer is None:
        observer = default_observer(trace)
    h = horizon(trace, observer)
    if h is None:
        return set()
    got = set(trace.delivered_sequence(observer, layer))
    pool = trace.honest_mined if honest_only else trace.blocks.keys()
    blocks = trace.blocks
    return {b for b in pool
            if b not in got and not blocks[b].is_genesis and blocks[b].mined_round < h}


def abandoned_blocks(trace: ExecutionTrace, observer: int | None = None,
                     layer: str = BASE) -> set[BlockId]:
    """Honestly mined blocks the observer never delivers.

    A finite trace only witnesses abandonment in its prefix; blocks mined after
    the observer's horizon are undecided and left out.
    """
    return stale_blocks(trace, observer, layer, honest_only=True)


def _schedule(trace: ExecutionTrace) -> list[tuple]:
    return [(e["round"], e["actor"], e["block"]["id"]) for e in trace.mines()]


def _pair_header(trace: ExecutionTrace) -> dict:
    return {k: v for k, v in trace.header.items() if k not in ("closure", "labels")}


@dataclass
class PairedComparison:
    observer: int
    base_count: int
    closure_count: int
    rounds: int
    latency_deltas: dict[int, int]
    abandoned: set[BlockId]
    stale: set[BlockId]
    violations: list[str] = field(default_factory=list)

    @property
    def throughput_delta(self) -> Fraction:
        return Fraction(self.closure_count - self.base_count, self.rounds)

    @property
    def ok(self) -> bool:
        return not self.violations


def compare_paired(base: ExecutionTrace, closure: ExecutionTrace,
                   observer: int | None = None) -> PairedComparison:
    """Per-transaction latency and per-execution throughput of a (base, closure) pair.

    ``closure`` may be a closure trace (its closure layer is compared) and
    ``base`` must be an execution with the same mining schedule.
    """
    if base.header.get("closure") != "off":
        raise UnpairedTraces("first trace must be a base execution")
    if closure.header.get("closure") == "off":
        raise UnpairedTraces("second trace must be a closure execution")
    if _pair_header(base) != _pair_header(closure):
        raise UnpairedTraces("traces differ in seed, config or adversary")
    if _schedule(base) != _schedule(closure):
        raise UnpairedTraces("traces differ in their mining schedule")
    if observer is None:
        observer = default_observer(base)
    lat_b = tx_latencies(base, observer, BASE)
    lat_c = tx_latencies(closure, observer, CLOSURE)
    deltas = {t: lat_c[t] - lat_b[t] for t in lat_b if t in lat_c}
    cmp = PairedComparison(
        observer=observer,
        base_count=delivered_count(base, observer, BASE),
        closure_count=delivered_count(closure, observer, CLOSURE),
        rounds=_rounds(base),
        latency_deltas=deltas,
        abandoned=abandoned_blocks(base, observer),
        stale=stale_blocks(base, observer),
    )
    late = sorted(t for t, d in deltas.items() if d > 0)
    if late:
        cmp.violations.append(f"latency grew for {len(late)} transactions")
    lost = [t for t in lat_b if t not in lat_c]
    if lost:
        cmp.violations.append(f"{len(lost)} transactions delivered by the base only")
    if cmp.closure_count < cmp.base_count:
        cmp.violations.append("closure delivered fewer blocks")
    if cmp.abandoned and cmp.closure_count <= cmp.base_count:
        cmp.violations.append("abandoned blocks exist but throughput did not grow")
    if not cmp.stale and cmp.closure_count != cmp.base_count:
        cmp.violations.append("fork-free execution but block counts differ")
    return cmp


# -- reports -----------------------------------------------------------------


def mean_ci(values: list[float]) -> tuple[float, float, float]:
    """Mean and a 95% normal-approximation interval."""
    if not values:
        return (math.nan, math.nan, math.nan)
    mu = fmean(values)
    if len(values) < 2:
        return (mu, mu, mu)
    half = 1.96 * stdev(values) / math.sqrt(len(values))
    return (mu, mu - half, mu + half)


@dataclass
class MetricsReport:
    """One execution, one layer; spreads are across honest observers."""

    seed: int
    adversary: str
    protocol: str
    layer: str
    rounds: int
    throughput_min: float
    throughput_mean: float
    throughput_max: float
    tx_throughput: float
    latency: float | None
    unresolved: int
    abandoned_count: int
    delivered: int

    @classmethod
    def of(cls, trace: ExecutionTrace, layer: str = BASE) -> "MetricsReport":
        obs = trace.honest
        tps = [float(throughput_of(trace, p, layer)) for p in obs]
        p0 = default_observer(trace)
        try:
            lat = float(latency_of(trace, p0, layer))
        except EmptyTrace:
            lat = None
        return cls(
            seed=trace.header.get("seed", 0),
            adversary=trace.header.get("adversary", "honest"),
            protocol=trace.header.get("protocol", "nakamoto"),
            layer=layer,
            rounds=_rounds(trace),
            throughput_min=min(tps),
            throughput_mean=fmean(tps),
            throughput_max=max(tps),
            tx_throughput=float(tx_throughput_of(trace, p0, layer)),
            latency=lat,
            unresolved=len(unresolved_txs(trace, p0, layer)),
            abandoned_count=len(abandoned_blocks(trace, p0, layer)),
            delivered=delivered_count(trace, p0, layer),
        )
