"""Gradient-descent estimation of the feedback decay width.

The width is fit by matching two model-side ratios against their empirical
counterparts from the history: the praise rate relative to its peak at the
preferred action, and the criticism rate relative to its peak at the most
disliked action. Both ratios are free of the latent peak rates, which is
what makes the fit possible while those rates stay integrated out.

The scalar loss is the mean over all (state, action) cells of the squared
ratio mismatches; cells whose empirical ratio is unknown contribute zero
while the denominator stays the full cell count, so early steps are
naturally damped. The step size 0.4 * sigma^3 cancels the 1/sigma^3 in the
gradient, making the update scale-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .feedback_model import FeedbackKind
from .history import InteractionHistory

LEARNING_RATE_COEFF = 0.4
SIGMA_MIN_DEFAULT = 0.05
SIGMA_MAX_DEFAULT = 50.0


@dataclass
class SigmaState:
    """Current width estimate, clamp bounds, and the per-update trace."""

    sigma: float
    sigma_min: float = SIGMA_MIN_DEFAULT
    sigma_max: float = SIGMA_MAX_DEFAULT
    trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not (self.sigma_min <= self.sigma <= self.sigma_max):
            raise ValueError("sigma must start inside [sigma_min, sigma_max]")
        if not self.trace:
            self.trace.append(self.sigma)


def model_ratios(a: int, lam_s: int, sigma: float, epsilon: float = 0.01) -> tuple[float, float]:
    """Model-side (praise, criticism) ratios for one action at width ``sigma``."""
    if not sigma > 0.0:
        raise ValueError("sigma must be positive")
    ratio_plus = float(np.exp(-((a - lam_s) ** 2) / (2.0 * sigma**2)))
    ratio_minus = 1.0 - (1.0 - epsilon) * ratio_plus
    return ratio_plus, ratio_minus


def _cell_terms(sigma, history, lam, epsilon):
    """Yield (distance_sq, ratio_plus, ratio_minus, emp_plus, emp_minus) per visited cell."""
    for s in range(history.n_states):
        for a in range(history.n_actions):
            if history.visits(s, a) == 0:
                continue
            emp_plus = history.empirical_ratio(s, a, FeedbackKind.POSITIVE, lam)
            emp_minus = history.empirical_ratio(s, a, FeedbackKind.NEGATIVE, lam)
            if emp_plus is None and emp_minus is None:
                continue
            r_plus, r_minus = model_ratios(a, int(lam[s]), sigma, epsilon)
            yield (a - int(lam[s])) ** 2, r_plus, r_minus, emp_plus, emp_minus


def ratio_loss(sigma: float, history: InteractionHistory, lam: Sequence[int], epsilon: float = 0.01) -> float:
    """Mean squared ratio mismatch; the objective whose exact derivative is loss_gradient."""
    n = history.n_states * history.n_actions
    total = 0.0
    for _, r_plus, r_minus, emp_plus, emp_minus in _cell_terms(sigma, history, lam, epsilon):
        if emp_plus is not None:
            total += (r_plus - emp_plus) ** 2
        if emp_minus is not None:
            total += (r_minus - emp_minus) ** 2
    return total / n


def loss_gradient(sigma: float, history: InteractionHistory, lam: Sequence[int], epsilon: float = 0.01) -> float:
    """Derivative of ratio_loss in ``sigma``.

    Both ratio terms decay through the same gaussian factor, so each cell
    contributes 2 d^2/sigma^3 * (mismatch) * gaussian, with the criticism
    term carrying the extra -(1 - epsilon) from its chain rule.
    """
    n = history.n_states * history.n_actions
    total = 0.0
    for d_sq, r_plus, r_minus, emp_plus, emp_minus in _cell_terms(sigma, history, lam, epsilon):
        scale = 2.0 * d_sq / sigma**3
        if emp_plus is not None:
            total += scale * (r_plus - emp_plus) * r_plus
        if emp_minus is not None:
            total -= scale * (1.0 - epsilon) * (r_minus - emp_minus) * r_plus
    return total / n


def sigma_step(
    state: SigmaState,
    history: InteractionHistory,
    lam: Sequence[int],
    epsilon: float = 0.01,
) -> SigmaState:
    """One clamped gradient step with the scale-free 0.4 sigma^3 learning rate."""
    grad = loss_gradient(state.sigma, history, lam, epsilon)
    raw = state.sigma - LEARNING_RATE_COEFF * state.sigma**3 * grad
    state.sigma = float(min(max(raw, state.sigma_min), state.sigma_max))
    state.trace.append(state.sigma)
    return state
