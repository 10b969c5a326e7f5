"""Seeded sweeps of paired base/closure executions and their reports."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .config import ExperimentConfig
from .engine import simulate_pair
from .metrics import MetricsReport, PairedComparison, compare_paired, mean_ci
from .properties import PropertyReport, check_properties
from .trace import BASE, CLOSURE

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "seed", "adversary", "protocol", "layer", "rounds", "delivered",
    "throughput_min", "throughput_mean", "throughput_max", "tx_throughput",
    "latency", "unresolved", "abandoned_count", "throughput_delta",
    "max_latency_delta", "paired_ok", "properties_ok",
)


class IoFailure(OSError):
    pass


@dataclass
class SeedResult:
    seed: int
    base: MetricsReport
    closure: MetricsReport
    paired: PairedComparison
    properties: PropertyReport
    trace_paths: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        max_delta = max(self.paired.latency_deltas.values(), default=0)
        out = []
        for rep in (self.base, self.closure):
            row = asdict(rep)
            row.update(
                throughput_delta=float(self.paired.throughput_delta),
                max_latency_delta=max_delta,
                paired_ok=self.paired.ok,
                properties_ok=self.properties.ok,
            )
            out.append({k: row[k] for k in CSV_COLUMNS})
        return out


@dataclass
class SweepResult:
    config: ExperimentConfig
    seeds: list[SeedResult]

    @property
    def ok(self) -> bool:
        return all(s.paired.ok and s.properties.ok for s in self.seeds)

    def summary(self) -> dict:
        def layer_stats(pick):
            tp = [pick(s).throughput_mean for s in self.seeds]
            lat = [pick(s).latency for s in self.seeds if pick(s).latency is not None]
            return {
                "throughput": dict(zip(("mean", "ci_low", "ci_high"), mean_ci(tp))),
                "latency": dict(zip(("mean", "ci_low", "ci_high"), mean_ci(lat))),
                "unresolved": sum(pick(s).unresolved for s in self.seeds),
            }

        signs = []
        for s in self.seeds:
            d = s.paired.throughput_delta
            signs.append("+" if d > 0 else "0" if d == 0 else "-")
        violations = {}
        for s in self.seeds:
            for prop, c in s.properties.counts().items():
                violations[prop] = violations.get(prop, 0) + c
        return {
            "note": "means over seeds with 95% normal-approximation intervals; "
                    "estimates of expectations over executions for this adversary only",
            # the output location is not a run parameter; keep reports location-independent
            "config": {k: v for k, v in self.config.to_dict().items() if k != "out_dir"},
            "seeds": [s.seed for s in self.seeds],
            BASE: layer_stats(lambda s: s.base),
            CLOSURE: layer_stats(lambda s: s.closure),
            "throughput_sign_pattern": "".join(signs),
            "paired_violations": sum(len(s.paired.violations) for s in self.seeds),
            "property_violations": violations,
        }

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            csv_path = out / "report.csv"
            with csv_path.open("w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
                w.writeheader()
                for s in self.seeds:
                    w.writerows(s.rows())
            json_path = out / "summary.json"
            json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        except OSError as e:
            raise IoFailure(f"cannot write reports to {out}: {e}") from None
        return csv_path, json_path


def run_seed(config: ExperimentConfig, seed: int, trace_dir: Path | None = None,
             **check_kw) -> SeedResult:
    base, closure = simulate_pair(config, seed)
    paths = []
    if trace_dir is not None:
        try:
            trace_dir.mkdir(parents=True, exist_ok=True)
            for t in (base, closure):
                p = trace_dir / f"seed{seed}_{t.header['closure']}.jsonl"
                t.write(p)
                paths.append(str(p))
        except OSError as e:
            raise IoFailure(f"cannot write traces to {trace_dir}: {e}") from None
    return SeedResult(
        seed=seed,
        base=MetricsReport.of(base, BASE),
        closure=MetricsReport.of(closure, CLOSURE),
        paired=compare_paired(base, closure),
        properties=check_properties(closure, **check_kw),
        trace_paths=paths,
    )


def run(config: ExperimentConfig, out_dir=None, write_traces: bool = True,
        **check_kw) -> SweepResult:
    """Paired runs for every seed; reports and traces land in ``out_dir``."""
    out = Path(config.out_dir if out_dir is None else out_dir)
    trace_dir = out / "traces" if write_traces else None
    results = []
    for seed in config.seeds:
        log.info("seed %d", seed)
        results.append(run_seed(config, seed, trace_dir, **check_kw))
    sweep = SweepResult(config, results)
    sweep.write(out)
    return sweep
