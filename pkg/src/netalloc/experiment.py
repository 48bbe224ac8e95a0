"""Seeded batch experiments: many dynamics runs, one quality histogram.

Run r of a batch uses base_seed + r both for its random initial profile and
for its random player order, so two batches over the same instance (e.g. an
all-optimistic and an all-pessimistic sweep) are paired run by run.  Runs are
independent; aggregation orders results by run index, so the report is
identical whether runs execute serially or across worker processes.
"""

from __future__ import annotations

import dataclasses
import json
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import OptimizerConfig, global_optimum
from .dynamics import (
    Converged,
    DynamicsConfig,
    RandomFeasible,
    RandomSeeded,
    Trace,
    init_profile,
    run_sequential,
)
from .game import GameSpec, social_welfare
from .instances import InstanceDocument


@dataclass(frozen=True)
class ExperimentConfig:
    runs: int
    seed: int = 0
    behavior: str | None = None  # None: use the instance's per-player list
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    bins: int = 40
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.behavior not in (None, "pessimistic", "optimistic"):
            raise ValueError(f"unknown behavior {self.behavior!r}")


@dataclass(frozen=True)
class RunOutcome:
    run: int
    seed: int
    converged: bool
    rounds: int
    final_welfare: float
    ratio: float


@dataclass(frozen=True)
class HistogramReport:
    """Equal-width histogram of quality ratios over [min ratio, 1].

    ``mode_count`` counts strict local maxima of the 3-bin moving average of
    the counts (1 means unimodal).  Non-converged runs are excluded from the
    histogram and the mean/stddev but kept in ``runs``.
    """

    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    mean: float
    std: float
    mode_count: int
    non_converged: int
    opt_welfare: float
    runs: tuple[RunOutcome, ...]


def _single_run(
    spec: GameSpec, dynamics: DynamicsConfig, opt_sw: float, run: int, seed: int
) -> RunOutcome:
    init = init_profile(spec, RandomFeasible(seed))
    cfg = dataclasses.replace(dynamics, order=RandomSeeded(seed))
    final, _, status = run_sequential(spec, init, cfg, trace_detail="light")
    sw = social_welfare(spec, final)
    converged = isinstance(status, Converged)
    rounds = status.t if converged else dynamics.max_rounds
    return RunOutcome(
        run=run,
        seed=seed,
        converged=converged,
        rounds=rounds,
        final_welfare=sw,
        ratio=sw / opt_sw,
    )


_POOL_STATE: dict = {}


def _pool_init(doc_json: dict, behavior, dynamics, opt_sw) -> None:
    doc = InstanceDocument.from_json_dict(doc_json)
    _POOL_STATE["spec"] = doc.to_game_spec(behavior_override=behavior)
    _POOL_STATE["dynamics"] = dynamics
    _POOL_STATE["opt_sw"] = opt_sw


def _pool_run(args: tuple[int, int]) -> RunOutcome:
    run, seed = args
    return _single_run(
        _POOL_STATE["spec"],
        _POOL_STATE["dynamics"],
        _POOL_STATE["opt_sw"],
        run,
        seed,
    )


def smoothed_mode_count(counts) -> int:
    """Strict local maxima of the 3-bin moving average of the counts."""
    counts = list(counts)
    k = len(counts)
    smoothed = []
    for idx in range(k):
        window = counts[max(0, idx - 1) : idx + 2]
        smoothed.append(sum(window) / len(window))
    modes = 0
    for idx in range(k):
        left = smoothed[idx - 1] if idx > 0 else -1.0
        right = smoothed[idx + 1] if idx < k - 1 else -1.0
        if smoothed[idx] > left and smoothed[idx] > right:
            modes += 1
    return modes


def run_batch_experiment(
    doc: InstanceDocument, config: ExperimentConfig
) -> HistogramReport:
    """Sequential dynamics from ``runs`` random starts; ratios vs the
    instance's global optimum, binned over [min ratio, 1]."""
    spec = doc.to_game_spec(behavior_override=config.behavior)
    opt = global_optimum(spec, config.optimizer)
    opt_sw = opt.welfare

    tasks = [(r, config.seed + r) for r in range(config.runs)]
    if config.n_jobs > 1:
        with multiprocessing.Pool(
            processes=config.n_jobs,
            initializer=_pool_init,
            initargs=(
                doc.to_json_dict(),
                config.behavior,
                config.dynamics,
                opt_sw,
            ),
        ) as pool:
            outcomes = pool.map(_pool_run, tasks)
    else:
        outcomes = [
            _single_run(spec, config.dynamics, opt_sw, r, s) for (r, s) in tasks
        ]

    ratios = [o.ratio for o in outcomes if o.converged]
    non_converged = sum(1 for o in outcomes if not o.converged)
    if ratios:
        lo = min(ratios)
        if lo >= 1.0:
            lo = 1.0 - 1e-9
        clipped = np.minimum(np.asarray(ratios), 1.0)
        counts, edges = np.histogram(
            clipped, bins=config.bins, range=(lo, 1.0)
        )
        mean = float(np.mean(ratios))
        std = float(np.std(ratios))
    else:
        counts = np.zeros(config.bins, dtype=int)
        edges = np.linspace(0.0, 1.0, config.bins + 1)
        mean = float("nan")
        std = float("nan")

    return HistogramReport(
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
        mean=mean,
        std=std,
        mode_count=smoothed_mode_count(counts),
        non_converged=non_converged,
        opt_welfare=opt_sw,
        runs=tuple(outcomes),
    )


# -- report / trace output -------------------------------------------------------


def write_histogram_csv(report: HistogramReport, path: str | Path) -> None:
    lines = ["bin_lo,bin_hi,count"]
    for k, c in enumerate(report.counts):
        lines.append(
            f"{report.bin_edges[k]!r},{report.bin_edges[k + 1]!r},{c}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary_json(report: HistogramReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(
            {
                "mean": report.mean,
                "std": report.std,
                "mode_count": report.mode_count,
                "non_converged_count": report.non_converged,
                "opt_welfare": report.opt_welfare,
                "runs": len(report.runs),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )


def write_runs_jsonl(report: HistogramReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for o in report.runs:
            fh.write(
                json.dumps(
                    {
                        "run": o.run,
                        "seed": o.seed,
                        "converged": o.converged,
                        "rounds": o.rounds,
                        "final_welfare": o.final_welfare,
                        "ratio": o.ratio,
                    }
                )
                + "\n"
            )


def write_trace_jsonl(
    trace: Trace, path: str | Path, profiles: str = "full"
) -> None:
    """One JSON record per round; ``profiles`` "hash" drops full profiles."""
    if profiles not in ("full", "hash"):
        raise ValueError(f"unknown profile mode {profiles!r}")
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace.records:
            row: dict = {
                "t": rec.t,
                "mover": rec.mover,
                "total_slack": rec.total_slack,
                "welfare": rec.welfare,
                "potential": rec.potential,
                "stable_players": sorted(rec.stable_players),
            }
            if profiles == "full" and rec.profile is not None:
                row["profile"] = [
                    [i, j, c] for (i, j), c in sorted(rec.profile.counts.items())
                ]
            else:
                row["profile_hash"] = rec.profile_hash
            fh.write(json.dumps(row) + "\n")
