"""Probabilistic model of evaluative feedback from an uncertain trainer.

A trainer watching an agent act on a 1-D grid of actions gives positive
feedback, negative feedback, or stays silent. The closer the action is to
the trainer's preferred one, the likelier the praise: the positive rate is
a peak rate ``mu_plus`` scaled by a unit-interval decay kernel, and the
negative rate grows toward its own peak ``mu_minus`` as the action drifts
away. A small floor ``epsilon`` keeps the negative rate nonzero even at
the preferred action.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

# Floor applied before taking logs of any feedback probability. Keeps
# log-likelihoods finite at the constraint boundary without moving argmaxes.
P_FLOOR = 1e-12


class ConstraintViolation(ValueError):
    """Raised when feedback-model parameters break a validity constraint."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid feedback-model parameters: " + "; ".join(self.violations))


class FeedbackKind(Enum):
    """The three observable trainer reactions. Silence is an observation."""

    POSITIVE = "+"
    NEGATIVE = "-"
    NONE = "0"


@dataclass(frozen=True)
class KernelKind:
    """Shape of the distance-decay term shared by the positive and negative rates.

    ``gaussian`` decays smoothly with squared distance (width ``sigma`` is
    supplied at call sites). ``isabl_indicator`` is a flat two-level kernel:
    ``1 - error_rate`` at the preferred action and ``error_rate`` elsewhere,
    which lets the all-or-nothing baseline reuse the same inference machinery.
    """

    name: str
    error_rate: float | None = None

    def __post_init__(self):
        if self.name not in ("gaussian", "isabl_indicator"):
            raise ValueError(f"unknown kernel kind: {self.name!r}")
        if self.name == "isabl_indicator":
            if self.error_rate is None or not (0.0 < self.error_rate < 0.5):
                raise ValueError("isabl_indicator requires error_rate in (0, 0.5)")


GAUSSIAN = KernelKind("gaussian")


def isabl_indicator(error_rate: float = 0.1) -> KernelKind:
    return KernelKind("isabl_indicator", error_rate)


@dataclass(frozen=True)
class FeedbackModelParams:
    """Peak rates, decay width, and negative-rate floor of one trainer model.

    ``mu_plus`` is the chance of praise at the preferred action, ``mu_minus``
    the chance of criticism at the most disliked action, ``sigma`` the decay
    width in action-index units, and ``epsilon`` the floor constant.
    """

    mu_plus: float
    mu_minus: float
    sigma: float
    epsilon: float = 0.01


def validate_params(params: FeedbackModelParams) -> list[str]:
    """Return every violated parameter constraint; an empty list means valid."""
    v = []
    if not params.epsilon > 0.0 or params.epsilon > 0.1:
        v.append("0 < epsilon <= 0.1")
    if not params.mu_plus >= 0.0:
        v.append("mu_plus >= 0")
    if not params.mu_plus <= 1.0 - params.epsilon:
        v.append("mu_plus <= 1 - epsilon")
    if not params.mu_minus >= 0.0:
        v.append("mu_minus >= 0")
    if not params.mu_minus <= 1.0:
        v.append("mu_minus <= 1")
    if not params.mu_plus + params.epsilon * params.mu_minus <= 1.0:
        v.append("mu_plus + epsilon * mu_minus <= 1")
    if not params.sigma > 0.0:
        v.append("sigma > 0")
    return v


class ProbTriple(NamedTuple):
    """Probabilities of praise, criticism, and silence for one action."""

    p_plus: float
    p_minus: float
    p_none: float


def kernel_by_distance(distance, kind: KernelKind, sigma: float | None = None):
    """Decay value for one or more absolute index distances.

    Accepts a scalar or array of distances and broadcasts. Gaussian needs a
    positive ``sigma``; the indicator kernel ignores it.
    """
    d = np.asarray(distance, dtype=float)
    if kind.name == "gaussian":
        if sigma is None or not sigma > 0.0:
            raise ValueError("gaussian kernel requires sigma > 0")
        out = np.exp(-(d**2) / (2.0 * sigma**2))
    else:
        out = np.where(d == 0.0, 1.0 - kind.error_rate, kind.error_rate)
    return out if out.ndim else float(out)


def kernel(a: int, lam: int, kind: KernelKind, sigma: float | None = None) -> float:
    """Decay term for action ``a`` against preferred action ``lam``; in [0, 1]."""
    return kernel_by_distance(abs(a - lam), kind, sigma)


def minus_factor(e_hat, kind: KernelKind, epsilon: float):
    """Unit-interval growth factor of the negative rate: ``p_minus / mu_minus``.

    The gaussian model keeps a floor of ``epsilon`` at zero distance; the
    indicator kernel has its own floor through the error rate.
    """
    if kind.name == "gaussian":
        return 1.0 - (1.0 - epsilon) * e_hat
    return 1.0 - e_hat


def feedback_probs(a: int, lam: int, params: FeedbackModelParams, kind: KernelKind = GAUSSIAN) -> ProbTriple:
    """Distribution over {praise, criticism, silence} for action ``a``.

    Raises ConstraintViolation when ``params`` is invalid.
    """
    violations = validate_params(params)
    if violations:
        raise ConstraintViolation(violations)
    e_hat = kernel(a, lam, kind, params.sigma)
    p_plus = params.mu_plus * e_hat
    p_minus = params.mu_minus * minus_factor(e_hat, kind, params.epsilon)
    p_none = max(0.0, 1.0 - p_plus - p_minus)
    return ProbTriple(p_plus, p_minus, p_none)
