from __future__ import annotations

import numpy as np
import pytest

from closuresim.adversaries import (
    NotAClosureTrace,
    fork_amplifier,
    honest_adversary,
    make_adversary,
    strip_to_equivalent,
)
from closuresim.config import ExperimentConfig
from closuresim.engine import simulate, simulate_pair
from closuresim.trace import ExecutionTrace


@pytest.mark.parametrize("adversary,f", [("honest", 0), ("fork_amplifier", 2),
                                         ("selective_release", 2)])
def test_stripping_a_closure_run_gives_the_base_run(adversary, f):
    c = ExperimentConfig(n=8, rounds=400, q=0.05, k=3, adversary=adversary, f=f)
    base, closure = simulate_pair(c, 11)
    assert any(e["block"]["weak_refs"] for e in closure.mines())
    assert strip_to_equivalent(closure).to_jsonl() == base.to_jsonl()


def test_strip_is_identity_on_base_traces(small_config):
    base = simulate(small_config, 2, "off")
    assert strip_to_equivalent(base).to_jsonl() == base.to_jsonl()


def test_strip_rejects_closure_only_streams(small_config):
    t = simulate(small_config, 2, "closure")
    cut = ExecutionTrace(t.header, [e for e in t.events
                                    if not (e["kind"] == "deliver" and e["layer"] == "base")])
    with pytest.raises(NotAClosureTrace):
        strip_to_equivalent(cut)


def test_corruption_is_seeded_and_bounded():
    a = fork_amplifier(3).corrupt(10, np.random.default_rng(4))
    b = fork_amplifier(3).corrupt(10, np.random.default_rng(4))
    assert a == b and len(a) == 3
    with pytest.raises(ValueError):
        fork_amplifier(11).corrupt(10, np.random.default_rng(0))
    assert honest_adversary().corrupt(10, np.random.default_rng(0)) == frozenset()


def test_make_adversary():
    assert make_adversary("selective_release", f=1, lead=2).params() == {"f": 1, "lead": 2}
    with pytest.raises(ValueError):
        make_adversary("nope")


def test_fork_amplifier_injects_corrupted_blocks():
    c = ExperimentConfig(n=10, rounds=300, q=0.05, adversary="fork_amplifier", f=3)
    t = simulate(c, 1, "off")
    assert t.header["corrupted"] and len(t.header["corrupted"]) == 3
    adv = [e for e in t.mines() if not e["honest"]]
    assert adv and all(e["actor"] in t.header["corrupted"] for e in adv)
    injected = {e["block"] for e in t.of_kind("inject")}
    assert {e["block"]["id"] for e in adv} <= injected
    # injected blocks reach a target at r+1 and everyone else by r+2
    rounds = {e["block"]["id"]: e["round"] for e in adv}
    for h in t.honest:
        got = {e["block"]: e["round"] for e in t.of_kind("receive") if e["actor"] == h}
        for bid, r in rounds.items():
            if r + 2 < t.rounds:
                assert got[bid] <= r + 2


def test_selective_release_withholds_then_publishes():
    c = ExperimentConfig(n=10, rounds=600, q=0.05, adversary="selective_release", f=2)
    t = simulate(c, 2, "off")
    adv = {e["block"]["id"]: e["round"] for e in t.mines() if not e["honest"]}
    first_inject = {}
    for e in t.of_kind("inject"):
        first_inject.setdefault(e["block"], e["round"])
    delays = [first_inject[b] - r for b, r in adv.items() if b in first_inject]
    assert delays and max(delays) > 0
