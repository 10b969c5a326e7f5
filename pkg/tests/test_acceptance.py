"""Acceptance suite at desk scale: n=10, 2000 rounds, 100 seeds.

Each test records one PASS/FAIL line that is printed in the terminal summary.
Sweeps are computed once per session and shared between criteria.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import pytest

from closuresim.adversaries import strip_to_equivalent
from closuresim.config import ExperimentConfig
from closuresim.engine import simulate, simulate_pair
from closuresim.fixtures import figure2
from closuresim.metrics import PairedComparison, abandoned_blocks, compare_paired, throughput_of
from closuresim.properties import PROPERTIES, VALIDITY, check_properties
from closuresim.protocols import MiningLottery, forked_rounds

from conftest import ACCEPTANCE
from oracles import forked_round_probability, replay_closure

SEEDS = range(1, 101)
ROUNDS = 2000
VALIDITY_TAIL = 50
REPLAY_SEEDS = 20

# adversaries within the envelope where the base protocol itself is safe at k=6
MENU = {
    "honest": dict(adversary="honest"),
    "fork_amplifier": dict(adversary="fork_amplifier", f=1),
    "selective_release": dict(adversary="selective_release", f=1,
                              adversary_params={"lead": 1}),
}
MENU_Q = 0.05
DEFAULT = ExperimentConfig(n=10, rounds=ROUNDS, q=0.02, k=6)
BASELINE = Path(__file__).parent / "fixtures" / "fork_amplifier_baseline.json"


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)


def menu_trace(name: str, seed: int):
    c = ExperimentConfig(n=10, rounds=ROUNDS, q=MENU_Q, k=6, **MENU[name])
    return simulate(c, seed, "closure", record_receives=False)


@dataclass
class PairSummary:
    """What the default-sweep criteria need from one paired run; traces are dropped."""
    comparison: PairedComparison
    forks: int
    base_tp: Fraction
    closure_tp: Fraction
    delivered: dict[int, frozenset]
    weak_refs: int
    replay_mismatches: list[int] | None


def weak_ref_count(trace) -> int:
    return sum(len(e["block"]["weak_refs"]) for e in trace.mines())


@lru_cache(maxsize=None)
def default_pair(seed: int) -> PairSummary:
    base, closure = simulate_pair(DEFAULT, seed)
    obs = min(base.honest)
    replay = None
    if seed <= REPLAY_SEEDS:
        replay = [p for p in closure.honest
                  if [f"{b:016x}" for b in closure.delivered_sequence(p, "closure")]
                  != replay_closure(closure, p)]
    return PairSummary(
        comparison=compare_paired(base, closure),
        forks=len(forked_rounds(base)),
        base_tp=throughput_of(base, obs),
        closure_tp=throughput_of(closure, obs, "closure"),
        delivered={p: frozenset(closure.delivered_sequence(p, "closure")) for p in closure.honest},
        weak_refs=weak_ref_count(closure),
        replay_mismatches=replay,
    )


def test_criterion_1_bab_properties_over_the_menu():
    totals = {p: 0 for p in PROPERTIES}
    failing = []
    for name in MENU:
        for seed in SEEDS:
            rep = check_properties(menu_trace(name, seed), validity_tail=VALIDITY_TAIL)
            for p, c in rep.counts().items():
                totals[p] += c
            if not rep.ok:
                failing.append((name, seed))
    ok = not failing
    shown = ", ".join(f"{p}={c}" for p, c in totals.items())
    record(1, ok, f"{len(MENU)} adversaries x {len(SEEDS)} seeds, q={MENU_Q}; "
                  f"violations {shown}")
    assert ok, failing[:10]
    assert totals[VALIDITY] == 0


def test_criterion_2_latency_never_grows():
    worst = -math.inf
    compared = violations = 0
    for seed in SEEDS:
        cmp = default_pair(seed).comparison
        deltas = cmp.latency_deltas.values()
        compared += len(deltas)
        violations += sum(1 for d in deltas if d > 0)
        worst = max(worst, max(deltas, default=0))
    ok = violations == 0
    record(2, ok, f"{compared} paired transactions, {violations} with positive delta, "
                  f"max delta {worst}")
    assert ok


def test_criterion_3_throughput_dominance_and_fork_rate():
    strict = equal_when_clean = bad = with_abandoned = 0
    forks = 0
    for seed in SEEDS:
        cmp = default_pair(seed).comparison
        forks += default_pair(seed).forks
        if cmp.abandoned:
            with_abandoned += 1
            if cmp.closure_count > cmp.base_count:
                strict += 1
            else:
                bad += 1
        elif cmp.closure_count == cmp.base_count:
            equal_when_clean += 1
        else:
            bad += 1
    total_rounds = ROUNDS * len(SEEDS)
    p = forked_round_probability(DEFAULT.q, DEFAULT.n)
    rate = forks / total_rounds
    se = math.sqrt(p * (1 - p) / total_rounds)
    within = abs(rate - p) <= 3 * se
    closed_form = abs(MiningLottery.forked_round_probability(DEFAULT.q, DEFAULT.n) - p) < 1e-12
    share = with_abandoned / len(SEEDS)
    ok = bad == 0 and share >= 0.99 and strict == with_abandoned and within and closed_form
    record(3, ok, f"abandoned in {with_abandoned}/{len(SEEDS)} seeds, strict gain in {strict}, "
                  f"{bad} dominance violations; forked-round rate {rate:.5f} vs {p:.5f} "
                  f"(|diff| {abs(rate - p) / se:.2f} SE)")
    assert bad == 0
    assert share >= 0.99
    assert within and closed_form


def test_criterion_4_goodput_under_honest_adversary():
    base_tp, closure_tp, signs = [], [], []
    forked = False
    for seed in SEEDS:
        run = default_pair(seed)
        b, c = run.base_tp, run.closure_tp
        base_tp.append(b)
        closure_tp.append(c)
        signs.append("+" if c > b else "0" if c == b else "-")
        forked = forked or run.forks > 0
    mb, mc = sum(base_tp) / len(SEEDS), sum(closure_tp) / len(SEEDS)
    ok = mc >= mb and (mc > mb or not forked) and "-" not in signs
    record(4, ok, f"mean base {float(mb):.5f}, mean closure {float(mc):.5f} blocks/round; "
                  f"signs {''.join(signs)}")
    assert ok


def test_criterion_5_figure2_golden():
    base, clo = figure2("off"), figure2("closure")
    ids = clo.ids
    seq = [clo.label(b) for b in clo.trace.delivered_sequence(0, "closure")]
    i = seq.index("b9")
    checks = {
        "abandoned(b11)": clo.abandoned_at_mining["b11"] == {ids["b9"]},
        "weak_refs(b11)": clo.full["b11"].weak_refs == (ids["b9"],),
        "b9 placement": seq[i - 1] == "b10" and seq[i + 1] == "b11",
        "base abandoned": {base.label(b) for b in abandoned_blocks(base.trace)}
                          == {"b4", "b7", "b8", "b9"},
    }
    ok = all(checks.values())
    record(5, ok, ", ".join(f"{k} {'ok' if v else 'WRONG'}" for k, v in checks.items()))
    assert ok


def test_criterion_6_fork_amplifier_abandons():
    frozen = json.loads(BASELINE.read_text())
    c = ExperimentConfig(**frozen["config"])
    counts = {}
    for seed in SEEDS:
        t = simulate(c, seed, "off", record_receives=False)
        counts[str(seed)] = len(abandoned_blocks(t))
    hit = sum(1 for v in counts.values() if v > 0)
    matches = counts == frozen["abandoned_per_seed"]
    ok = hit / len(SEEDS) >= 0.95 and matches
    record(6, ok, f"{hit}/{len(SEEDS)} seeds abandon a base block (f=3, q={c.q}); "
                  f"frozen baseline {'reproduced' if matches else 'DIFFERS'}")
    assert matches
    assert hit / len(SEEDS) >= 0.95


def test_criterion_7_replay_oracle():
    mismatches = [(seed, p) for seed in range(1, REPLAY_SEEDS + 1)
                  for p in default_pair(seed).replay_mismatches]
    ok = not mismatches
    record(7, ok, f"{REPLAY_SEEDS} seeds x 10 observers, {len(mismatches)} sequence mismatches")
    assert ok, mismatches[:5]


def test_criterion_8_determinism(tmp_path):
    def sha(path):
        return hashlib.sha256(path.read_bytes()).hexdigest()

    cases = [(DEFAULT, "closure", 1), (DEFAULT, "off", 2), (DEFAULT, "greedy", 3)]
    cases += [(ExperimentConfig(n=10, rounds=ROUNDS, q=MENU_Q, **MENU[name]), "closure", 4)
              for name in MENU if name != "honest"]
    same = 0
    for i, (c, mode, seed) in enumerate(cases):
        a, b = tmp_path / f"{i}a.jsonl", tmp_path / f"{i}b.jsonl"
        simulate(c, seed, mode).write(a)
        simulate(c, seed, mode).write(b)
        same += sha(a) == sha(b)
    # the closure trace, stripped, reproduces the base trace byte for byte
    base, closure = simulate_pair(DEFAULT, 5)
    stripped = strip_to_equivalent(closure).digest() == base.digest()
    ok = same == len(cases) and stripped
    record(8, ok, f"{same}/{len(cases)} reruns byte-identical; "
                  f"stripped closure == base: {stripped}")
    assert ok


def test_criterion_9_greedy_equivalence():
    differ = 0
    leaves_refs = greedy_refs = 0
    for seed in SEEDS:
        leaves = default_pair(seed)
        greedy = simulate(DEFAULT, seed, "greedy", record_receives=False)
        differ += sum(1 for p, seen in leaves.delivered.items()
                      if seen != frozenset(greedy.delivered_sequence(p, "closure")))
        leaves_refs += leaves.weak_refs
        greedy_refs += weak_ref_count(greedy)
    ok = differ == 0 and greedy_refs >= leaves_refs
    record(9, ok, f"delivered sets differ for {differ} (seed, observer) pairs; weak refs "
                  f"greedy {greedy_refs} vs leaves {leaves_refs}")
    assert ok


@pytest.fixture(scope="module", autouse=True)
def _clear_caches():
    yield
    default_pair.cache_clear()
