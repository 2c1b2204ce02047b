"""Interactive learners sharing one act/observe contract.

Five ways to turn a stream of evaluative feedback into a preferred-action
map: the adaptive EM learner that also fits the feedback decay width, its
fixed-width ablation, the all-or-nothing EM baseline, a UCB1 bandit over
feedback values, and direct selection where the user just picks actions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .em import QuadratureGrid, em_fixpoint
from .feedback_model import GAUSSIAN, FeedbackKind, KernelKind, isabl_indicator
from .history import InteractionHistory
from .sigma import SIGMA_MAX_DEFAULT, SIGMA_MIN_DEFAULT, SigmaState, sigma_step


class ProtocolError(RuntimeError):
    """An operation arrived out of order or on the wrong learner kind."""


class SelectionRequired(ProtocolError):
    """A direct-selection learner was asked to act before any selection."""


ABLUF = "abluf"
BLUF = "bluf"
ISABL = "isabl"
UCB = "ucb"
QUERY = "query"

FEEDBACK_REWARD = {FeedbackKind.POSITIVE: 1.0, FeedbackKind.NEGATIVE: -1.0, FeedbackKind.NONE: 0.0}


@dataclass(frozen=True)
class LearnerKind:
    """Which learner to run plus its scalar knobs; irrelevant knobs are ignored.

    sigma0 seeds the adaptive width estimate, sigma_fixed pins the ablation's
    width, error_rate shapes the all-or-nothing kernel.
    """

    name: str
    sigma0: float = 2.0
    sigma_fixed: float = 1.0
    error_rate: float = 0.1

    def __post_init__(self):
        if self.name not in (ABLUF, BLUF, ISABL, UCB, QUERY):
            raise ValueError(f"unknown learner kind: {self.name!r}")
        if self.name == ABLUF and not (SIGMA_MIN_DEFAULT <= self.sigma0 <= SIGMA_MAX_DEFAULT):
            raise ValueError("sigma0 must lie inside the clamp bounds")
        if self.name == BLUF and not self.sigma_fixed > 0:
            raise ValueError("sigma_fixed must be positive")
        if self.name == ISABL and not (0.0 < self.error_rate < 0.5):
            raise ValueError("error_rate must be in (0, 0.5)")

    def to_dict(self) -> dict:
        d = {"kind": self.name}
        if self.name == ABLUF:
            d["sigma0"] = self.sigma0
        elif self.name == BLUF:
            d["sigma_fixed"] = self.sigma_fixed
        elif self.name == ISABL:
            d["error_rate"] = self.error_rate
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerKind":
        kw = {k: v for k, v in d.items() if k in ("sigma0", "sigma_fixed", "error_rate")}
        return cls(d["kind"], **kw)

    def label(self) -> str:
        if self.name == ABLUF:
            return f"abluf_sigma0_{self.sigma0:g}"
        if self.name == BLUF:
            return f"bluf_sigma_{self.sigma_fixed:g}"
        if self.name == ISABL:
            return f"isabl_err_{self.error_rate:g}"
        return self.name


def abluf(sigma0: float = 2.0) -> LearnerKind:
    return LearnerKind(ABLUF, sigma0=sigma0)


def bluf(sigma_fixed: float) -> LearnerKind:
    return LearnerKind(BLUF, sigma_fixed=sigma_fixed)


def isabl(error_rate: float = 0.1) -> LearnerKind:
    return LearnerKind(ISABL, error_rate=error_rate)


def ucb() -> LearnerKind:
    return LearnerKind(UCB)


def query() -> LearnerKind:
    return LearnerKind(QUERY)


class UcbStats:
    """Per-(state, action) reward sums and visit counts for the bandit."""

    def __init__(self, n_states: int, n_actions: int):
        self.reward_sum = np.zeros((n_states, n_actions))
        self.visits = np.zeros((n_states, n_actions), dtype=np.int64)

    def state_visits(self, s: int) -> int:
        return int(self.visits[s].sum())

    def add(self, s: int, a: int, reward: float) -> None:
        self.reward_sum[s, a] += reward
        self.visits[s, a] += 1


def ucb_value(stats: UcbStats, s: int, a: int) -> float:
    """Mean reward plus the UCB1 exploration bonus; +inf for an untried action."""
    n_sa = int(stats.visits[s, a])
    if n_sa == 0:
        return float("inf")
    t_s = stats.state_visits(s)
    mean = stats.reward_sum[s, a] / n_sa
    return float(mean + np.sqrt(2.0 * np.log(t_s) / n_sa))


class LearnerSession:
    """One learner's mutable state across an interactive episode.

    Deterministic given (kind, dimensions, seed): the only randomness is the
    EM learners' initial policy draw.
    """

    def __init__(
        self,
        kind: LearnerKind,
        n_states: int,
        n_actions: int,
        seed: int | np.random.Generator | None = 0,
        epsilon: float = 0.01,
        grid: QuadratureGrid | None = None,
        em_max_iters: int = 50,
    ):
        if n_states < 1 or n_actions < 2:
            raise ValueError("need n_states >= 1 and n_actions >= 2")
        self.kind = kind
        self.n_states = n_states
        self.n_actions = n_actions
        self.epsilon = epsilon
        self.em_max_iters = em_max_iters
        self.history = InteractionHistory(n_states, n_actions)
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

        self.kernel: KernelKind | None = None
        self.sigma_state: Optional[SigmaState] = None
        self.ucb_stats: Optional[UcbStats] = None
        self._pending_selection: Optional[int] = None
        self._last_act: Optional[tuple[int, int]] = None
        self.last_action: Optional[int] = None

        if kind.name in (ABLUF, BLUF, ISABL):
            self.policy = rng.integers(0, n_actions, size=n_states)
            self.kernel = isabl_indicator(kind.error_rate) if kind.name == ISABL else GAUSSIAN
            self.grid = grid if grid is not None else QuadratureGrid.trapezoid(epsilon=epsilon)
            if kind.name == ABLUF:
                self.sigma_state = SigmaState(kind.sigma0)
        else:
            self.policy = np.zeros(n_states, dtype=np.int64)
            self.grid = grid
            if kind.name == UCB:
                self.ucb_stats = UcbStats(n_states, n_actions)

    @property
    def sigma(self) -> float | None:
        """Current decay-width estimate, for kinds that have one."""
        if self.kind.name == ABLUF:
            return self.sigma_state.sigma
        if self.kind.name == BLUF:
            return self.kind.sigma_fixed
        return None

    def _em_sigma(self) -> float:
        if self.kind.name == ABLUF:
            return self.sigma_state.sigma
        if self.kind.name == BLUF:
            return self.kind.sigma_fixed
        return 1.0  # indicator kernel ignores the width

    def act(self, s: int) -> int:
        """Choose the action to present in state ``s``."""
        if not 0 <= s < self.n_states:
            raise IndexError(f"state {s} out of range")
        if self.kind.name == UCB:
            values = [ucb_value(self.ucb_stats, s, a) for a in range(self.n_actions)]
            a = int(np.argmax(values))
        elif self.kind.name == QUERY:
            if self._pending_selection is not None:
                a = self._pending_selection
                self._pending_selection = None
            elif self.last_action is not None:
                a = self.last_action
            else:
                raise SelectionRequired("a selection must be supplied before acting")
        else:
            a = int(self.policy[s])
        self._last_act = (s, a)
        self.last_action = a
        return a

    def observe_feedback(self, s: int, a: int, f: FeedbackKind) -> None:
        """Record feedback for (s, a) and run the kind's update rule.

        When an act is pending, (s, a) must match it; scripted training that
        never calls act is also accepted.
        """
        if self._last_act is not None and self._last_act != (s, a):
            raise ProtocolError(f"feedback for {(s, a)} but last action was {self._last_act}")
        self._last_act = None
        self.history.record(s, a, f)
        if self.kind.name in (ABLUF, BLUF, ISABL):
            self.policy = em_fixpoint(
                self.history,
                self.policy,
                self._em_sigma(),
                kind=self.kernel,
                grid=self.grid,
                max_iters=self.em_max_iters,
                epsilon=self.epsilon,
            )
            if self.kind.name == ABLUF:
                sigma_step(self.sigma_state, self.history, self.policy, self.epsilon)
        elif self.kind.name == UCB:
            self.ucb_stats.add(s, a, FEEDBACK_REWARD[f])

    def query_select(self, a: int) -> None:
        """Stage a direct selection; the next act returns it (last write wins)."""
        if self.kind.name != QUERY:
            raise ProtocolError("selection is only supported by the direct-selection learner")
        if not 0 <= a < self.n_actions:
            raise IndexError(f"action {a} out of range [0, {self.n_actions})")
        self._pending_selection = a

    def policy_estimate(self) -> np.ndarray:
        """The action each learner would play next in every state.

        This is the policy every kind is judged by: the EM learners report
        their inferred map, the bandit reports its UCB-maximizing arm, and
        direct selection reports the last selection made in each state
        (defaulting to action 0).
        """
        if self.kind.name == UCB:
            est = np.zeros(self.n_states, dtype=np.int64)
            for s in range(self.n_states):
                values = [ucb_value(self.ucb_stats, s, a) for a in range(self.n_actions)]
                est[s] = int(np.argmax(values))
            return est
        if self.kind.name == QUERY:
            est = np.zeros(self.n_states, dtype=np.int64)
            for rec in self.history.records:
                est[rec.s] = rec.a
            return est
        return self.policy.copy()
