"""Scenario simulators and simulated trainers that close the training loop.

Two scenarios: a virtual dog choosing one of K points per edge to catch a
rat whose position clusters around the preferred point, and a lighting
panel where actions are discrete brightness levels. Two trainer models:
one that follows the gaussian feedback model, and an arbitrary per-cell
probability table whose only structure is that the preferred action is the
most praised and least criticized.

An Episode presents block-scheduled states and accepts feedback one step
at a time, so the same machinery drives both automated experiments and the
live session service.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .feedback_model import GAUSSIAN, FeedbackKind, FeedbackModelParams, feedback_probs, validate_params
from .history import InteractionRecord
from .learners import QUERY, LearnerSession, ProtocolError

DOG = "dog"
LIGHTING = "lighting"

BRIGHTNESS_STEP_PERCENT = 11  # level k displays as (11 * k)% brightness


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario dimensions, per-state step cap, and an optional pinned optimum."""

    kind: str
    n_states: int
    n_actions: int
    steps_per_state: int = 15
    optimal_policy: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.kind not in (DOG, LIGHTING):
            raise ValueError(f"unknown scenario kind: {self.kind!r}")
        if self.n_states < 1:
            raise ValueError("n_states must be >= 1")
        if self.n_actions < 2:
            raise ValueError("n_actions must be >= 2")
        if self.steps_per_state < 1:
            raise ValueError("steps_per_state must be >= 1")
        if self.optimal_policy is not None:
            if len(self.optimal_policy) != self.n_states:
                raise ValueError("optimal_policy length must equal n_states")
            if any(not 0 <= a < self.n_actions for a in self.optimal_policy):
                raise ValueError("optimal_policy entries out of action range")

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "steps_per_state": self.steps_per_state,
        }
        if self.optimal_policy is not None:
            d["optimal_policy"] = list(self.optimal_policy)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        pinned = d.get("optimal_policy")
        return cls(
            d["kind"],
            int(d["n_states"]),
            int(d["n_actions"]),
            int(d.get("steps_per_state", 15)),
            tuple(int(a) for a in pinned) if pinned is not None else None,
        )


def dog_default() -> ScenarioConfig:
    return ScenarioConfig(DOG, n_states=4, n_actions=6, steps_per_state=15)


def lighting_default() -> ScenarioConfig:
    return ScenarioConfig(LIGHTING, n_states=3, n_actions=10, steps_per_state=15)


@dataclass(frozen=True)
class ModelFollowingTrainer:
    """Simulated trainer drawing feedback from the gaussian model itself."""

    sigma_star: float = 1.0
    mu_plus: float = 0.8
    mu_minus: float = 0.6
    epsilon: float = 0.01

    def __post_init__(self):
        violations = validate_params(self.params)
        if violations:
            raise ValueError("invalid trainer model: " + "; ".join(violations))

    @property
    def params(self) -> FeedbackModelParams:
        return FeedbackModelParams(self.mu_plus, self.mu_minus, self.sigma_star, self.epsilon)

    def to_dict(self) -> dict:
        return {
            "kind": "model_following",
            "sigma_star": self.sigma_star,
            "mu_plus": self.mu_plus,
            "mu_minus": self.mu_minus,
            "epsilon": self.epsilon,
        }


@dataclass(frozen=True)
class RandomTableTrainer:
    """Arbitrary per-(state, action) praise/criticism probabilities.

    The preferred action must strictly maximize praise and strictly
    minimize criticism within every state row.
    """

    table: tuple  # nested tuples (n_states, n_actions, 2)

    def probs(self, s: int, a: int) -> tuple[float, float]:
        p_plus, p_minus = self.table[s][a]
        return float(p_plus), float(p_minus)

    def validate(self, optimal: Sequence[int]) -> None:
        arr = np.asarray(self.table, dtype=float)
        if np.any(arr < 0) or np.any(arr.sum(axis=2) > 1.0):
            raise ValueError("each cell needs p_plus + p_minus <= 1")
        for s, best in enumerate(optimal):
            plus, minus = arr[s, :, 0], arr[s, :, 1]
            others = np.arange(arr.shape[1]) != best
            if not (np.all(plus[best] > plus[others]) and np.all(minus[best] < minus[others])):
                raise ValueError(f"state {s}: preferred action must maximize praise and minimize criticism")

    def to_dict(self) -> dict:
        return {"kind": "random_table", "table": [[list(cell) for cell in row] for row in self.table]}


TrainerSpec = Union[ModelFollowingTrainer, RandomTableTrainer]


def trainer_from_dict(d: dict) -> TrainerSpec:
    if d["kind"] == "model_following":
        return ModelFollowingTrainer(
            d.get("sigma_star", 1.0), d.get("mu_plus", 0.8), d.get("mu_minus", 0.6), d.get("epsilon", 0.01)
        )
    if d["kind"] == "random_table":
        return RandomTableTrainer(tuple(tuple(tuple(c) for c in row) for row in d["table"]))
    raise ValueError(f"unknown trainer kind: {d['kind']!r}")


def gen_model_trainer(rng: np.random.Generator, epsilon: float = 0.01) -> ModelFollowingTrainer:
    """Width 1 with uniformly drawn peak rates; always a valid model."""
    return ModelFollowingTrainer(1.0, rng.uniform(0.0, 1.0 - epsilon), rng.uniform(0.0, 1.0), epsilon)


def gen_random_table_trainer(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    optimal: Sequence[int],
    max_tries: int = 10**6,
) -> RandomTableTrainer:
    """Rejection-sample rows until the preferred action dominates both columns."""
    rows = []
    for s in range(n_states):
        best = int(optimal[s])
        for _ in range(max_tries):
            p_plus = rng.uniform(0.0, 1.0, size=n_actions)
            p_minus = rng.uniform(0.0, 1.0, size=n_actions) * (1.0 - p_plus)
            others = np.arange(n_actions) != best
            if np.all(p_plus[best] > p_plus[others]) and np.all(p_minus[best] < p_minus[others]):
                rows.append(tuple((float(pp), float(pm)) for pp, pm in zip(p_plus, p_minus)))
                break
        else:
            raise RuntimeError(f"could not generate a trainer row for state {s} within {max_tries} tries")
    return RandomTableTrainer(tuple(rows))


def _draw(rng: np.random.Generator, p_plus: float, p_minus: float) -> FeedbackKind:
    u = rng.random()
    if u < p_plus:
        return FeedbackKind.POSITIVE
    if u < p_plus + p_minus:
        return FeedbackKind.NEGATIVE
    return FeedbackKind.NONE


def trainer_feedback(
    spec: TrainerSpec, s: int, a: int, optimal: Sequence[int], rng: np.random.Generator
) -> FeedbackKind:
    """One feedback draw for action ``a`` in state ``s``."""
    if isinstance(spec, ModelFollowingTrainer):
        probs = feedback_probs(a, int(optimal[s]), spec.params, GAUSSIAN)
        return _draw(rng, probs.p_plus, probs.p_minus)
    p_plus, p_minus = spec.probs(s, a)
    return _draw(rng, p_plus, p_minus)


def rat_distribution(preferred: int, n_actions: int) -> np.ndarray:
    """Normalized unit-width gaussian weights of the rat's landing point."""
    k = np.arange(n_actions)
    w = np.exp(-((k - preferred) ** 2) / 2.0)
    return w / w.sum()


def sample_rat(s: int, optimal: Sequence[int], n_actions: int, rng: np.random.Generator) -> int:
    probs = rat_distribution(int(optimal[s]), n_actions)
    return int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))


def catch_outcome(a_rat: int, a_dog: int, rng: np.random.Generator) -> bool:
    """Bernoulli catch with probability decaying in the squared gap."""
    return bool(rng.random() < np.exp(-((a_rat - a_dog) ** 2) / 2.0))


@dataclass(frozen=True)
class Presentation:
    """One presented action plus the dog scenario's observables."""

    t: int
    s: int
    a: int
    rat: Optional[int] = None
    caught: Optional[bool] = None


@dataclass
class TraceStep:
    t: int
    s: int
    a: int
    f: str
    rat: Optional[int] = None
    caught: Optional[bool] = None

    def to_dict(self) -> dict:
        d = {"t": self.t, "s": self.s, "a": self.a, "f": self.f}
        if self.rat is not None:
            d["rat"] = self.rat
        if self.caught is not None:
            d["caught"] = self.caught
        return d


class Episode:
    """Block-scheduled interactive episode over one learner.

    States appear one after another in an order shuffled from the episode
    stream; each accepts up to steps_per_state judged interactions. The
    trainer side (simulated or human) lives outside: the episode only
    presents actions and records the feedback it is handed.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        learner: LearnerSession,
        rng: np.random.Generator,
        optimal: Sequence[int] | None = None,
    ):
        if (learner.n_states, learner.n_actions) != (config.n_states, config.n_actions):
            raise ValueError("learner dimensions do not match the scenario")
        self.config = config
        self.learner = learner
        self.rng = rng
        if optimal is not None:
            self.optimal = np.asarray(optimal, dtype=np.int64)
        elif config.optimal_policy is not None:
            self.optimal = np.asarray(config.optimal_policy, dtype=np.int64)
        else:
            self.optimal = rng.integers(0, config.n_actions, size=config.n_states)
        self.state_order = rng.permutation(config.n_states)
        self._block = 0
        self.step_in_state = 0
        self.steps = 0
        self.trace: list[TraceStep] = []
        self._pending: Optional[Presentation] = None
        self.last_presentation: Optional[Presentation] = None

    @property
    def finished(self) -> bool:
        return self._block >= self.config.n_states

    @property
    def current_state(self) -> int:
        if self.finished:
            raise ProtocolError("episode is finished")
        return int(self.state_order[self._block])

    @property
    def state_exhausted(self) -> bool:
        return self.step_in_state >= self.config.steps_per_state

    def present(self) -> Presentation:
        """Sample the scene, let the learner act, and stage the step for feedback."""
        if self.finished:
            raise ProtocolError("cannot present on a finished episode")
        if self.state_exhausted:
            raise ProtocolError("state step cap reached; advance to the next state")
        if self._pending is not None:
            return self._pending
        s = self.current_state
        if self.config.kind == DOG:
            rat = sample_rat(s, self.optimal, self.config.n_actions, self.rng)
            a = self.learner.act(s)
            caught = catch_outcome(rat, a, self.rng)
            self._pending = Presentation(self.steps, s, a, rat, caught)
        else:
            a = self.learner.act(s)
            self._pending = Presentation(self.steps, s, a)
        self.last_presentation = self._pending
        return self._pending

    def apply_feedback(self, f: FeedbackKind) -> InteractionRecord:
        """Judge the staged presentation and run the learner's update."""
        if self._pending is None:
            raise ProtocolError("no presented action awaiting feedback")
        p = self._pending
        self._pending = None
        self.learner.observe_feedback(p.s, p.a, f)
        self.trace.append(TraceStep(p.t, p.s, p.a, f.value, p.rat, p.caught))
        self.steps += 1
        self.step_in_state += 1
        return InteractionRecord(p.t, p.s, p.a, f)

    def apply_selection(self, a: int) -> InteractionRecord:
        """Direct-selection step: take the chosen action and log it as unjudged."""
        if self.learner.kind.name != QUERY:
            raise ProtocolError("selection applies only to the direct-selection learner")
        if self.finished:
            raise ProtocolError("cannot select on a finished episode")
        s = self.current_state
        self.learner.query_select(a)
        if self.config.kind == DOG:
            rat = sample_rat(s, self.optimal, self.config.n_actions, self.rng)
            taken = self.learner.act(s)
            caught = catch_outcome(rat, taken, self.rng)
            pres = Presentation(self.steps, s, taken, rat, caught)
        else:
            taken = self.learner.act(s)
            pres = Presentation(self.steps, s, taken)
        self.learner.observe_feedback(pres.s, pres.a, FeedbackKind.NONE)
        self.trace.append(TraceStep(pres.t, pres.s, pres.a, FeedbackKind.NONE.value, pres.rat, pres.caught))
        self.steps += 1
        self.step_in_state += 1
        self.last_presentation = pres
        return InteractionRecord(pres.t, pres.s, pres.a, FeedbackKind.NONE)

    def advance_state(self) -> None:
        """Move to the next scheduled state (early or at the cap)."""
        if self.finished:
            raise ProtocolError("episode is already finished")
        self._pending = None
        self._block += 1
        self.step_in_state = 0


def env_step(episode: Episode, trainer: TrainerSpec, rng: np.random.Generator) -> tuple[InteractionRecord, Presentation]:
    """One fully simulated step: present, draw trainer feedback, record, schedule."""
    pres = episode.present()
    f = trainer_feedback(trainer, pres.s, pres.a, episode.optimal, rng)
    rec = episode.apply_feedback(f)
    if episode.state_exhausted and not episode.finished:
        episode.advance_state()
    return rec, pres
