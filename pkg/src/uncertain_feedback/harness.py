"""Seeded experiment runner, metrics, and machine-readable result emission.

Episodes are fully determined by (configuration, seed): the trainer and
ground-truth optimum derive from a stream that ignores the learner, so one
simulated trainer faces every learner of a comparison, while environment
draws and the learner's policy initialization use learner-specific streams.
Results land as one CSV row per episode plus per-cell summaries.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .environments import (
    DOG,
    Episode,
    ModelFollowingTrainer,
    RandomTableTrainer,
    ScenarioConfig,
    TrainerSpec,
    env_step,
    gen_model_trainer,
    gen_random_table_trainer,
    trainer_from_dict,
)
from .feedback_model import FeedbackKind
from .learners import QUERY, LearnerKind, LearnerSession
from .rng import derive_rng, stable_digest

CSV_HEADER = [
    "cell_id",
    "scenario",
    "learner",
    "trainer",
    "n_states",
    "n_actions",
    "seed",
    "steps_used",
    "rats_per_step",
    "policy_gap",
    "accum_distance",
    "sigma_final",
]

SUMMARY_METRICS = ["steps_used", "rats_per_step", "policy_gap", "accum_distance", "sigma_final"]


def policy_gap(lam_hat: Sequence[int], lam_star: Sequence[int]) -> float:
    """Euclidean norm between the learned and true preferred-action vectors."""
    a = np.asarray(lam_hat, dtype=float)
    b = np.asarray(lam_star, dtype=float)
    if a.shape != b.shape:
        raise ValueError("policy lengths differ")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def accumulative_distance(trace, lam_star: Sequence[int]) -> float:
    """Sum of squared gaps to the optimum per state block, trimming the tail.

    Within each contiguous block of one state, the trailing run of identical
    actions counts only once: steps spent verifying a settled choice are not
    exploration cost.
    """
    total = 0.0
    i = 0
    steps = list(trace)
    while i < len(steps):
        j = i
        while j < len(steps) and steps[j].s == steps[i].s:
            j += 1
        block = steps[i:j]
        k = len(block) - 1
        while k > 0 and block[k - 1].a == block[-1].a:
            k -= 1
        for step in block[: k + 1]:
            total += float((step.a - int(lam_star[step.s])) ** 2)
        i = j
    return total


def rats_per_step(trace) -> float:
    """Fraction of steps in which the rat was caught."""
    steps = list(trace)
    if not steps:
        raise ValueError("empty trace")
    if any(step.caught is None for step in steps):
        raise ValueError("trace has steps without a catch flag; not a dog-scenario trace")
    return sum(1 for step in steps if step.caught) / len(steps)


def welch_t(sample_a: Sequence[float], sample_b: Sequence[float]) -> tuple[float, float]:
    """Welch two-sample t statistic and two-sided p value.

    Requires both samples to have at least two points and at least one of
    them nonzero variance.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least 2 observations")
    if np.var(a, ddof=1) == 0.0 and np.var(b, ddof=1) == 0.0:
        if np.mean(a) == np.mean(b):
            return 0.0, 1.0
        raise ValueError("both samples are degenerate (zero variance)")
    t, p = scipy_stats.ttest_ind(a, b, equal_var=False)
    return float(t), float(p)


@dataclass(frozen=True)
class EpisodeConfig:
    """One experiment cell: scenario x trainer x learner.

    ``trainer`` may be a concrete spec (shared by every seed) or one of the
    generator tags "model_following_random" / "random_table_random", drawn
    per seed from the trainer stream.
    """

    scenario: ScenarioConfig
    trainer: TrainerSpec | str
    learner: LearnerKind

    def trainer_dict(self) -> dict:
        return {"kind": self.trainer} if isinstance(self.trainer, str) else self.trainer.to_dict()

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "trainer": self.trainer_dict(),
            "learner": self.learner.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeConfig":
        trainer_d = d["trainer"]
        if trainer_d["kind"] in ("model_following_random", "random_table_random", "human"):
            trainer = trainer_d["kind"]
        else:
            trainer = trainer_from_dict(trainer_d)
        return cls(ScenarioConfig.from_dict(d["scenario"]), trainer, LearnerKind.from_dict(d["learner"]))

    def cell_id(self) -> str:
        return (
            f"{self.scenario.kind}_s{self.scenario.n_states}a{self.scenario.n_actions}"
            f"_{self.trainer_dict()['kind']}_{self.learner.label()}"
        )


@dataclass
class EpisodeResult:
    """Everything one episode produced, recomputable from the stored trace."""

    seed: int
    config: dict
    state_order: list[int]
    optimal_policy: list[int]
    trainer: dict
    trace: list[dict]
    final_policy: list[int]
    metrics: dict
    sigma_trace: Optional[list[float]]

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, separators=(",", ":"))


def _resolve_trainer(config: EpisodeConfig, seed: int, master_seed: int):
    """Ground truth and trainer come from a learner-independent stream."""
    scen = config.scenario
    trainer_rng = derive_rng(master_seed, "trainer", scen.to_dict(), config.trainer_dict(), seed)
    if scen.optimal_policy is not None:
        optimal = np.asarray(scen.optimal_policy, dtype=np.int64)
    else:
        optimal = trainer_rng.integers(0, scen.n_actions, size=scen.n_states)
    if config.trainer == "model_following_random":
        trainer = gen_model_trainer(trainer_rng)
    elif config.trainer == "random_table_random":
        trainer = gen_random_table_trainer(trainer_rng, scen.n_states, scen.n_actions, optimal)
    elif isinstance(config.trainer, str):
        raise ValueError(f"unknown trainer tag: {config.trainer!r}")
    else:
        trainer = config.trainer
        if isinstance(trainer, RandomTableTrainer):
            trainer.validate(optimal)
    return optimal, trainer


def run_episode(
    config: EpisodeConfig,
    seed: int,
    master_seed: int = 0,
    selection_script: Sequence[int] | None = None,
) -> EpisodeResult:
    """Run one fully simulated episode, deterministic in (config, seed).

    Direct-selection learners need a ``selection_script`` supplying one
    action per step; every other learner is driven by the simulated trainer.
    """
    scen = config.scenario
    optimal, trainer = _resolve_trainer(config, seed, master_seed)
    cell = config.to_dict()
    env_rng = derive_rng(master_seed, "env", cell, seed)
    learner_rng = derive_rng(master_seed, "learner", cell, seed)
    learner = LearnerSession(config.learner, scen.n_states, scen.n_actions, seed=learner_rng)
    episode = Episode(scen, learner, env_rng, optimal=optimal)

    if config.learner.name == QUERY:
        if selection_script is None:
            raise ValueError("direct-selection episodes need a selection_script")
        script = list(selection_script)
        total = scen.n_states * scen.steps_per_state
        if len(script) < total:
            raise ValueError(f"selection_script too short: need {total} entries")
        for t in range(total):
            episode.apply_selection(int(script[t]))
            if episode.state_exhausted and not episode.finished:
                episode.advance_state()
        if not episode.finished:
            episode.advance_state()
    else:
        while not episode.finished:
            env_step(episode, trainer, env_rng)

    final_policy = learner.policy_estimate()
    metrics = {
        "steps_used": episode.steps,
        "policy_gap": policy_gap(final_policy, optimal),
        "accum_distance": accumulative_distance(episode.trace, optimal),
    }
    if scen.kind == DOG:
        metrics["rats_per_step"] = rats_per_step(episode.trace)
    sigma_trace = list(learner.sigma_state.trace) if learner.sigma_state is not None else None
    if sigma_trace is not None:
        metrics["sigma_final"] = sigma_trace[-1]
    return EpisodeResult(
        seed=seed,
        config=cell,
        state_order=[int(s) for s in episode.state_order],
        optimal_policy=[int(a) for a in optimal],
        trainer=trainer.to_dict(),
        trace=[step.to_dict() for step in episode.trace],
        final_policy=[int(a) for a in final_policy],
        metrics=metrics,
        sigma_trace=sigma_trace,
    )


@dataclass(frozen=True)
class ExperimentGrid:
    """Cells to run, seeds per cell, and the master seed tying streams together."""

    cells: tuple[EpisodeConfig, ...]
    seeds_per_cell: int = 100
    master_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "seeds_per_cell": self.seeds_per_cell,
            "cells": [c.to_dict() for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentGrid":
        return cls(
            tuple(EpisodeConfig.from_dict(c) for c in d["cells"]),
            int(d.get("seeds_per_cell", 100)),
            int(d.get("master_seed", 0)),
        )


def _episode_row(config: EpisodeConfig, result: EpisodeResult) -> dict:
    m = result.metrics
    return {
        "cell_id": config.cell_id(),
        "scenario": config.scenario.kind,
        "learner": config.learner.label(),
        "trainer": config.trainer_dict()["kind"],
        "n_states": config.scenario.n_states,
        "n_actions": config.scenario.n_actions,
        "seed": result.seed,
        "steps_used": m["steps_used"],
        "rats_per_step": m.get("rats_per_step", ""),
        "policy_gap": m["policy_gap"],
        "accum_distance": m["accum_distance"],
        "sigma_final": m.get("sigma_final", ""),
    }


def _run_cell_episode(args) -> dict:
    config_dict, seed, master_seed = args
    config = EpisodeConfig.from_dict(config_dict)
    return _episode_row(config, run_episode(config, seed, master_seed))


def run_grid(grid: ExperimentGrid, out_dir, workers: int = 1) -> list[dict]:
    """Run every cell x seed, write episodes.csv and summary.csv, return the rows.

    Workers only change wall time: each episode's streams are keyed by
    (master_seed, cell, seed), and rows are sorted before writing.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [
        (cell.to_dict(), seed, grid.master_seed)
        for cell in grid.cells
        for seed in range(grid.seeds_per_cell)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell_episode, jobs, chunksize=4))
    else:
        rows = [_run_cell_episode(job) for job in jobs]
    rows.sort(key=lambda r: (r["cell_id"], r["seed"]))
    try:
        with open(out / "episodes.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_HEADER)
            writer.writeheader()
            writer.writerows(rows)
        write_summary(rows, out / "summary.csv")
    except OSError as exc:
        raise OSError(f"failed writing results under {out}: {exc}") from exc
    return rows


def summarize_rows(rows: list[dict]) -> list[dict]:
    """Per-cell mean, standard deviation, and count for every metric."""
    cells: dict[str, list[dict]] = {}
    for row in rows:
        cells.setdefault(row["cell_id"], []).append(row)
    summary = []
    for cell_id in sorted(cells):
        for metric in SUMMARY_METRICS:
            values = [float(r[metric]) for r in cells[cell_id] if r[metric] != ""]
            if not values:
                continue
            arr = np.asarray(values)
            summary.append(
                {
                    "cell_id": cell_id,
                    "metric": metric,
                    "mean": float(arr.mean()),
                    "std": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
                    "count": len(arr),
                }
            )
    return summary


def write_summary(rows: list[dict], path) -> list[dict]:
    summary = summarize_rows(rows)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["cell_id", "metric", "mean", "std", "count"])
        writer.writeheader()
        writer.writerows(summary)
    return summary


def read_episode_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def default_grid(seeds_per_cell: int = 100, master_seed: int = 0) -> ExperimentGrid:
    """The synthetic benchmark matrix: size sweeps for both scenarios.

    Dog settings vary actions {3, 6, 9} at 4 states and states {2, 6} at 3
    actions; lighting mirrors it. Learners: adaptive, three fixed-width
    ablations, the all-or-nothing baseline, and the bandit.
    """
    learners = [
        LearnerKind("abluf", sigma0=2.0),
        LearnerKind("bluf", sigma_fixed=0.1),
        LearnerKind("bluf", sigma_fixed=1.0),
        LearnerKind("bluf", sigma_fixed=3.0),
        LearnerKind("isabl"),
        LearnerKind("ucb"),
    ]
    shapes = [(4, 3), (4, 6), (4, 9), (2, 3), (6, 3)]
    cells = []
    for kind in (DOG, "lighting"):
        for n_states, n_actions in shapes:
            scen = ScenarioConfig(kind, n_states, n_actions, steps_per_state=15)
            for learner in learners:
                cells.append(EpisodeConfig(scen, "model_following_random", learner))
    return ExperimentGrid(tuple(cells), seeds_per_cell, master_seed)


# --- episode logs and replay -------------------------------------------------


def write_episode_log(path, result: EpisodeResult) -> None:
    """Meta line plus one record line per step, replayable later."""
    meta = {
        "type": "meta",
        "seed": result.seed,
        "config": result.config,
        "state_order": result.state_order,
        "optimal_policy": result.optimal_policy,
        "trainer": result.trainer,
        "final_policy": result.final_policy,
        "sigma_trace": result.sigma_trace,
        "metrics": result.metrics,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for step in result.trace:
            fh.write(json.dumps(step, sort_keys=True) + "\n")


@dataclass
class ReplayResult:
    final_policy: list[int]
    sigma_trace: Optional[list[float]]
    policy_matches: Optional[bool]
    sigma_matches: Optional[bool]
    action_mismatches: int


def replay_episode_log(path, master_seed: int = 0) -> ReplayResult:
    """Rebuild the learner from the log's config and feed it the recorded steps.

    The learner re-acts at every step; divergence from the recorded action is
    counted (it should be zero for logs produced by this package).
    """
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    meta = lines[0]
    steps = lines[1:]
    config = EpisodeConfig.from_dict(meta["config"])
    scen = config.scenario
    learner_rng = derive_rng(master_seed, "learner", meta["config"], meta["seed"])
    learner = LearnerSession(config.learner, scen.n_states, scen.n_actions, seed=learner_rng)
    mismatches = 0
    for step in steps:
        s, a, f = int(step["s"]), int(step["a"]), FeedbackKind(step["f"])
        if config.learner.name == QUERY:
            learner.query_select(a)
        acted = learner.act(s)
        if acted != a:
            mismatches += 1
            learner._last_act = None  # keep feeding the recorded trajectory
        learner.observe_feedback(s, a, f)
    final_policy = [int(x) for x in learner.policy_estimate()]
    sigma_trace = list(learner.sigma_state.trace) if learner.sigma_state is not None else None
    policy_matches = final_policy == meta.get("final_policy") if meta.get("final_policy") is not None else None
    stored_sigma = meta.get("sigma_trace")
    sigma_matches = sigma_trace == stored_sigma if stored_sigma is not None else None
    return ReplayResult(final_policy, sigma_trace, policy_matches, sigma_matches, mismatches)


def grid_signature(grid: ExperimentGrid) -> str:
    return f"{stable_digest(grid.to_dict()):x}"[:16]
