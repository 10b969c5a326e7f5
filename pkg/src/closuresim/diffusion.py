"""Synchronous-round diffusion functionality with a rushing adversary.

Honest broadcasts in round ``r`` land in every honest ``RECEIVE`` string at
round ``r + 1``. Adversarial injections land at the target at ``r + 1`` and are
echoed to every other honest process at ``r + 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .dag import Block, Transaction

ADVERSARY = "adversary"


class DiffusionError(Exception):
    pass


class AlreadyRead(DiffusionError):
    pass


class AlreadyCompleted(DiffusionError):
    pass


class NotStarted(DiffusionError):
    pass


class IncompleteRound(DiffusionError):
    pass


class Kind(str, Enum):
    BLOCK = "BlockAnnounce"
    TX = "TxAnnounce"


@dataclass(frozen=True, slots=True)
class Message:
    kind: Kind
    payload: Union[Block, Transaction]
    origin: Union[int, str]

    @classmethod
    def block(cls, b: Block, origin) -> "Message":
        return cls(Kind.BLOCK, b, origin)

    @classmethod
    def tx(cls, t: Transaction, origin) -> "Message":
        return cls(Kind.TX, t, origin)

    def sort_key(self):
        # honest messages: (origin, kind, id)
        return (self.origin, self.kind.value, self.payload.id)


@dataclass
class RoundMailbox:
    """Per-process RECEIVE strings plus the bookkeeping of one round."""

    processes: list[int]
    round: int = 0
    receive: dict[int, list[Message]] = field(default_factory=dict)
    pending_broadcasts: list[Message] = field(default_factory=list)
    adversary_injections: list[tuple[int, Message, int]] = field(default_factory=list)
    _injected_next: dict[int, list[Message]] = field(default_factory=dict)
    _echo_next: dict[int, list[Message]] = field(default_factory=dict)
    _echo_later: dict[int, list[Message]] = field(default_factory=dict)
    _begun: set[int] = field(default_factory=set)
    _completed: set[int] = field(default_factory=set)
    _adversary_done: bool = False

    def __post_init__(self):
        for p in self.processes:
            self.receive.setdefault(p, [])
            self._injected_next.setdefault(p, [])
            self._echo_next.setdefault(p, [])
            self._echo_later.setdefault(p, [])

    def begin_round(self, p: int) -> list[Message]:
        if p in self._begun:
            raise AlreadyRead(f"process {p} already read round {self.round}")
        self._begun.add(p)
        msgs = self.receive[p]
        self.receive[p] = []
        return msgs

    def broadcast(self, p: int, msgs: list[Message]) -> None:
        if p in self._completed:
            raise AlreadyCompleted(f"process {p} already completed round {self.round}")
        if p not in self._begun:
            raise NotStarted(f"process {p} has not begun round {self.round}")
        self._completed.add(p)
        self.pending_broadcasts.extend(msgs)

    def observed(self) -> list[Message]:
        """Honest traffic of the current round, visible to the rushing adversary."""
        return list(self.pending_broadcasts)

    def adversary_inject(self, target: int, msg: Message) -> None:
        self.adversary_injections.append((target, msg, self.round))
        self._injected_next[target].append(msg)
        for q in self.processes:
            if q != target:
                self._echo_later[q].append(msg)

    def conclude_adversary(self) -> None:
        self._adversary_done = True

    def end_round(self) -> "RoundMailbox":
        incomplete = [p for p in self.processes if p not in self._completed]
        if incomplete:
            raise IncompleteRound(f"processes {incomplete} did not complete "
                                  f"round {self.round}")
        if not self._adversary_done:
            raise IncompleteRound(f"adversary did not conclude round {self.round}")
        honest = sorted(self.pending_broadcasts, key=Message.sort_key)
        for p in self.processes:
            seen: set = set()
            merged = []
            for m in self._injected_next[p] + self._echo_next[p]:
                key = (m.kind, m.payload.id)
                if key not in seen:
                    seen.add(key)
                    merged.append(m)
            self.receive[p].extend(merged + honest)
            self._injected_next[p] = []
        self._echo_next, self._echo_later = self._echo_later, {p: [] for p in self.processes}
        self.pending_broadcasts = []
        self._begun.clear()
        self._completed.clear()
        self._adversary_done = False
        self.round += 1
        return self
