"""Execution traces: one JSON record per event, one header line first.

Record kinds::

    header     run parameters, honest and corrupted process lists
    broadcast  bab-broadcast of a transaction       {actor, tx}
    mine       bab-mine of a block                  {actor, honest, block}
    receive    block reached an honest view         {actor, block}
    inject     adversarial selective delivery       {target, block}
    deliver    bab-deliver                          {actor, layer, block}
    end        final record                         {rounds}

``layer`` is ``"base"`` for the chain protocol and ``"closure"`` for the
throughput closure running on top of it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .dag import GENESIS, Block, BlockId, fmt_id, parse_id

BASE = "base"
CLOSURE = "closure"


class MalformedTrace(ValueError):
    pass


class EmptyTrace(ValueError):
    pass


def _dumps(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


@dataclass
class ExecutionTrace:
    header: dict
    events: list[dict] = field(default_factory=list)

    # -- recording -----------------------------------------------------------

    def record(self, round_: int, kind: str, **fields) -> None:
        fields["round"] = round_
        fields["kind"] = kind
        self.events.append(fields)

    def finish(self, rounds: int) -> None:
        self.record(rounds, "end", rounds=rounds)

    # -- serialization -------------------------------------------------------

    def to_jsonl(self) -> str:
        lines = [_dumps({"kind": "header", **self.header})]
        lines.extend(_dumps(e) for e in self.events)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "ExecutionTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise MalformedTrace("empty trace file")
        try:
            recs = [json.loads(ln) for ln in lines]
        except json.JSONDecodeError as e:
            raise MalformedTrace(str(e)) from None
        head = recs[0]
        if head.get("kind") != "header":
            raise MalformedTrace("first record must be the header")
        head = {k: v for k, v in head.items() if k != "kind"}
        for key in ("honest", "corrupted", "closure"):
            if key not in head:
                raise MalformedTrace(f"header lacks {key!r}")
        for i, e in enumerate(recs[1:], 2):
            if "kind" not in e or "round" not in e:
                raise MalformedTrace(f"line {i}: record lacks kind/round")
        return cls(head, recs[1:])

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def read(cls, path) -> "ExecutionTrace":
        return cls.from_jsonl(Path(path).read_text())

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    # -- queries -------------------------------------------------------------

    @property
    def rounds(self) -> int:
        for e in reversed(self.events):
            if e["kind"] == "end":
                return e["rounds"]
        return self.header.get("rounds", 0)

    @property
    def honest(self) -> list[int]:
        return list(self.header["honest"])

    @property
    def corrupted(self) -> list[int]:
        return list(self.header["corrupted"])

    @property
    def labels(self) -> dict[BlockId, str]:
        return {parse_id(k): v for k, v in self.header.get("labels", {}).items()}

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["kind"] == kind]

    def mines(self) -> list[dict]:
        return self.of_kind("mine")

    @cached_property
    def blocks(self) -> dict[BlockId, Block]:
        out = {GENESIS.id: GENESIS}
        for e in self.mines():
            b = Block.from_json(e["block"])
            out[b.id] = b
        return out

    @cached_property
    def honest_mined(self) -> set[BlockId]:
        return {parse_id(e["block"]["id"]) for e in self.mines() if e["honest"]}

    def layers(self) -> list[str]:
        return sorted({layer for _, layer in self._delivery_index} | {BASE})

    @cached_property
    def _delivery_index(self) -> dict[tuple[int, str], list[tuple[int, BlockId]]]:
        out: dict[tuple[int, str], list] = {}
        for e in self.events:
            if e["kind"] == "deliver":
                out.setdefault((e["actor"], e["layer"]), []).append(
                    (e["round"], parse_id(e["block"])))
        return out

    def deliveries(self, observer: int, layer: str = BASE) -> list[tuple[int, BlockId]]:
        """``(round, block id)`` in delivery order."""
        return list(self._delivery_index.get((observer, layer), ()))

    def delivered_sequence(self, observer: int, layer: str = BASE) -> list[BlockId]:
        return [b for _, b in self.deliveries(observer, layer)]

    def tx_broadcasts(self) -> dict[int, int]:
        """tx id -> bab-broadcast round."""
        return {parse_id(e["tx"]): e["round"] for e in self.of_kind("broadcast")}

    def copy(self) -> "ExecutionTrace":
        return ExecutionTrace(json.loads(json.dumps(self.header)),
                              [dict(e) for e in self.events])


def block_label(trace: ExecutionTrace, bid: BlockId) -> str:
    return trace.labels.get(bid, fmt_id(bid))
