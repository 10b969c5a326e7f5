from __future__ import annotations

import pytest

from closuresim.config import ExperimentConfig
from closuresim.engine import simulate, simulate_pair
from closuresim.harness import run
from closuresim.properties import check_properties
from closuresim.trace import ExecutionTrace, MalformedTrace


def test_trace_round_trip(small_config, tmp_path):
    t = simulate(small_config, 4, "closure")
    p = tmp_path / "t.jsonl"
    t.write(p)
    back = ExecutionTrace.read(p)
    assert back.to_jsonl() == t.to_jsonl()
    assert back.digest() == t.digest()
    assert back.layers() == ["base", "closure"]


@pytest.mark.parametrize("text", ["", '{"kind": "mine", "round": 0}\n',
                                  '{"kind": "header", "honest": []}\n', "not json\n"])
def test_malformed_traces(text):
    with pytest.raises(MalformedTrace):
        ExecutionTrace.from_jsonl(text)


def test_same_seed_same_bytes(small_config):
    assert simulate(small_config, 9).digest() == simulate(small_config, 9).digest()
    assert simulate(small_config, 9).digest() != simulate(small_config, 10).digest()


def test_no_mining_no_delivery(tmp_path):
    c = ExperimentConfig(rounds=50, q=0.0, closure="off", seeds=(1,))
    sweep = run(c, out_dir=tmp_path, write_traces=False)
    (res,) = sweep.seeds
    assert res.base.delivered == 0 and res.base.throughput_mean == 0


@pytest.mark.parametrize("protocol", ["nakamoto", "ghost"])
def test_both_fork_choice_rules_are_safe_when_honest(protocol):
    c = ExperimentConfig(n=8, rounds=400, q=0.04, k=4, protocol=protocol)
    base, closure = simulate_pair(c, 2)
    rep = check_properties(closure, validity_tail=100)
    assert rep.ok, rep.violations[:3]
    assert len(closure.delivered_sequence(0, "closure")) >= len(base.delivered_sequence(0))


def test_every_honest_process_mines_its_lottery_wins(small_config):
    from closuresim.protocols import MiningLottery
    t = simulate(small_config, 6, "off")
    lot = MiningLottery(small_config.q, small_config.n, small_config.rounds, 6)
    mined = {(e["round"], e["actor"]) for e in t.mines()}
    wins = {(r, p) for r in range(small_config.rounds) for p in lot.winners(r)}
    assert mined == wins
