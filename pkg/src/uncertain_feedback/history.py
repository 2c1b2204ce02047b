"""Append-only record of (state, action, feedback) interactions.

Keeps per-cell feedback counts so likelihood evaluation and the empirical
ratio queries used by the width estimator stay O(1) per cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .feedback_model import FeedbackKind

_SLOT = {FeedbackKind.POSITIVE: 0, FeedbackKind.NEGATIVE: 1, FeedbackKind.NONE: 2}


@dataclass(frozen=True)
class InteractionRecord:
    t: int
    s: int
    a: int
    f: FeedbackKind

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "s": self.s, "a": self.a, "f": self.f.value})


class FeedbackCounts(NamedTuple):
    n_plus: int
    n_minus: int
    n_none: int


def most_disliked_action(preferred: int, n_actions: int) -> int:
    """Grid endpoint farthest from the preferred action; ties take the larger index."""
    hi = n_actions - 1
    return hi if (hi - preferred) >= preferred else 0


class InteractionHistory:
    """Time-ordered feedback log with per-(state, action) count tables."""

    def __init__(self, n_states: int, n_actions: int):
        if n_states < 1 or n_actions < 1:
            raise ValueError("n_states and n_actions must be >= 1")
        self.n_states = n_states
        self.n_actions = n_actions
        self.records: list[InteractionRecord] = []
        # counts[kind_slot, s, a]
        self._counts = np.zeros((3, n_states, n_actions), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.records)

    def record(self, s: int, a: int, f: FeedbackKind) -> None:
        if not 0 <= s < self.n_states:
            raise IndexError(f"state {s} out of range [0, {self.n_states})")
        if not 0 <= a < self.n_actions:
            raise IndexError(f"action {a} out of range [0, {self.n_actions})")
        self.records.append(InteractionRecord(len(self.records), s, a, f))
        self._counts[_SLOT[f], s, a] += 1

    def counts(self, s: int, a: int) -> FeedbackCounts:
        c = self._counts[:, s, a]
        return FeedbackCounts(int(c[0]), int(c[1]), int(c[2]))

    def visits(self, s: int, a: int) -> int:
        return int(self._counts[:, s, a].sum())

    @property
    def count_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(n_plus, n_minus, n_none) arrays of shape (n_states, n_actions)."""
        return self._counts[0], self._counts[1], self._counts[2]

    def empirical_prob(self, s: int, a: int, f: FeedbackKind) -> float | None:
        """Observed frequency of ``f`` at (s, a); None when the cell was never visited."""
        total = self.visits(s, a)
        if total == 0:
            return None
        return int(self._counts[_SLOT[f], s, a]) / total

    def empirical_ratio(self, s: int, a: int, f: FeedbackKind, lam: Sequence[int]) -> float | None:
        """Observed rate at ``a`` relative to the action where ``f`` peaks.

        Praise is referenced to the preferred action ``lam[s]``; criticism to
        the grid endpoint farthest from it. None when either frequency is
        unknown or the reference rate is zero. Deliberately not clamped:
        sampling noise can push the ratio above 1 and the squared loss that
        consumes it copes.
        """
        if f is FeedbackKind.POSITIVE:
            ref = int(lam[s])
        elif f is FeedbackKind.NEGATIVE:
            ref = most_disliked_action(int(lam[s]), self.n_actions)
        else:
            raise ValueError("empirical_ratio is defined for positive/negative feedback only")
        num = self.empirical_prob(s, a, f)
        den = self.empirical_prob(s, ref, f)
        if num is None or den is None or den == 0.0:
            return None
        return num / den

    def to_jsonl(self) -> str:
        """One record per line: {"t":..., "s":..., "a":..., "f":"+"|"-"|"0"}."""
        return "\n".join(r.to_json() for r in self.records)

    @classmethod
    def from_jsonl(cls, lines: Iterable[str], n_states: int, n_actions: int) -> "InteractionHistory":
        h = cls(n_states, n_actions)
        for line in lines:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            h.record(int(obj["s"]), int(obj["a"]), FeedbackKind(obj["f"]))
        return h
