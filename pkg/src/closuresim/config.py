"""Experiment configuration (JSON file, CLI overrides on top)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .adversaries import ADVERSARIES
from .closure import ClosureMode
from .protocols import RuleKind


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 10
    f: int = 0
    rounds: int = 2000
    q: float = 0.02
    m: int = 10
    k: int = 6
    protocol: str = "nakamoto"
    closure: str = "closure"
    adversary: str = "honest"
    adversary_params: dict = field(default_factory=dict)
    seeds: tuple[int, ...] = (1,)
    tx_rate: float = 0.5
    out_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        errors = []
        if self.n < 1:
            errors.append("n must be >= 1")
        if not 0 <= self.f < self.n:
            errors.append("f must satisfy 0 <= f < n")
        if not 0 <= self.q < 1:
            errors.append("q must lie in [0, 1)")
        if self.rounds < 1:
            errors.append("rounds must be >= 1")
        if self.k < 1:
            errors.append("k must be >= 1")
        if self.m < 1:
            errors.append("m must be >= 1")
        if self.tx_rate < 0:
            errors.append("tx_rate must be >= 0")
        if not self.seeds:
            errors.append("seeds must not be empty")
        try:
            RuleKind(self.protocol)
        except ValueError:
            errors.append(f"unknown protocol {self.protocol!r}")
        try:
            ClosureMode(self.closure)
        except ValueError:
            errors.append(f"unknown closure mode {self.closure!r}")
        if self.adversary not in ADVERSARIES:
            errors.append(f"unknown adversary {self.adversary!r}")
        if errors:
            raise InvalidConfig("; ".join(errors))

    @property
    def adversary_f(self) -> int:
        if self.adversary == "honest":
            return 0
        return int(self.adversary_params.get("f", self.f))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "seeds" in d:
            d["seeds"] = parse_seeds(d["seeds"])
        try:
            return cls(**d)
        except TypeError as e:
            raise InvalidConfig(str(e)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidConfig(f"cannot read {path}: {e}") from None
        if not isinstance(raw, dict):
            raise InvalidConfig("config root must be an object")
        return cls.from_dict(raw)

    def override(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "seeds" in kw:
            kw["seeds"] = parse_seeds(kw["seeds"])
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d


def parse_seeds(value) -> tuple[int, ...]:
    """Accepts a list, ``{"start": s, "count": c}``, ``"a..b"`` (inclusive) or an int."""
    if isinstance(value, int):
        return (value,)
    if isinstance(value, dict):
        try:
            return tuple(range(value["start"], value["start"] + value["count"]))
        except KeyError as e:
            raise InvalidConfig(f"seed range lacks {e}") from None
    if isinstance(value, str):
        if ".." in value:
            a, b = value.split("..", 1)
            try:
                return tuple(range(int(a), int(b) + 1))
            except ValueError:
                raise InvalidConfig(f"bad seed range {value!r}") from None
        try:
            return tuple(int(s) for s in value.split(","))
        except ValueError:
            raise InvalidConfig(f"bad seed list {value!r}") from None
    try:
        return tuple(int(s) for s in value)
    except (TypeError, ValueError):
        raise InvalidConfig(f"bad seeds {value!r}") from None
