"""EM inference of the trainer's preferred actions with the peak rates latent.

The preferred-action map is updated state by state: weight every candidate
peak-rate pair (mu_plus, mu_minus) by the likelihood of the whole history
under the previous policy, then score each candidate action by the weighted
expectation of the log-likelihood of that state's records. The double
integral over the latent rates is approximated with a tensor-product
trapezoid rule on the rectangle [0, 1 - epsilon] x [0, 1]; any constant
prior density cancels in the argmax, so none is carried.

Peak-rate factors ln(mu) inside the praise/criticism terms of the scored
expectation do not depend on the candidate action and are dropped, which
keeps the objective finite where the latent rates vanish.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .feedback_model import (
    GAUSSIAN,
    P_FLOOR,
    FeedbackModelParams,
    KernelKind,
    feedback_probs,
    kernel_by_distance,
    minus_factor,
)
from .history import InteractionHistory

LOG_FLOOR = np.log(P_FLOOR)


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product trapezoid nodes and weights over the latent-rate rectangle."""

    nodes_mu_plus: np.ndarray
    nodes_mu_minus: np.ndarray
    weights: np.ndarray  # (len(nodes_mu_plus), len(nodes_mu_minus))

    def __post_init__(self):
        for nodes in (self.nodes_mu_plus, self.nodes_mu_minus):
            if len(nodes) < 3 or len(nodes) % 2 == 0:
                raise ValueError("node counts must be >= 3 and odd")
        if self.weights.shape != (len(self.nodes_mu_plus), len(self.nodes_mu_minus)):
            raise ValueError("weights shape must match the node grid")

    @classmethod
    def trapezoid(cls, n_mu_plus: int = 51, n_mu_minus: int = 51, epsilon: float = 0.01) -> "QuadratureGrid":
        for n in (n_mu_plus, n_mu_minus):
            if n < 3 or n % 2 == 0:
                raise ValueError("node counts must be >= 3 and odd")
        nodes_p = np.linspace(0.0, 1.0 - epsilon, n_mu_plus)
        nodes_m = np.linspace(0.0, 1.0, n_mu_minus)
        w_p = _trapezoid_weights(nodes_p)
        w_m = _trapezoid_weights(nodes_m)
        return cls(nodes_p, nodes_m, np.outer(w_p, w_m))


def _trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    h = nodes[1] - nodes[0]
    w = np.full(len(nodes), h)
    w[0] = w[-1] = h / 2.0
    return w


def as_policy(lam: Sequence[int], n_states: int, n_actions: int) -> np.ndarray:
    arr = np.asarray(lam, dtype=np.int64)
    if arr.shape != (n_states,):
        raise ValueError(f"policy must have one action per state ({n_states})")
    if arr.min() < 0 or arr.max() >= n_actions:
        raise ValueError("policy entries out of action range")
    return arr


def log_weight(
    history: InteractionHistory,
    mu_plus: float,
    mu_minus: float,
    sigma: float,
    lam: Sequence[int],
    kind: KernelKind = GAUSSIAN,
    epsilon: float = 0.01,
) -> float:
    """Log-likelihood of the whole history at one latent-rate point.

    Every probability is floored before the log so boundary rate pairs that
    zero out one feedback kind stay finite.
    """
    params = FeedbackModelParams(mu_plus, mu_minus, sigma, epsilon)
    n_plus, n_minus, n_none = history.count_arrays
    total = 0.0
    for s, a in zip(*np.nonzero(n_plus + n_minus + n_none)):
        probs = feedback_probs(int(a), int(lam[s]), params, kind)
        total += int(n_plus[s, a]) * np.log(max(probs.p_plus, P_FLOOR))
        total += int(n_minus[s, a]) * np.log(max(probs.p_minus, P_FLOOR))
        total += int(n_none[s, a]) * np.log(max(probs.p_none, P_FLOOR))
    return float(total)


def state_log_term(
    history: InteractionHistory,
    s: int,
    candidate: int,
    mu_plus: float,
    mu_minus: float,
    sigma: float,
    kind: KernelKind = GAUSSIAN,
    epsilon: float = 0.01,
) -> float:
    """Scored log-likelihood of state ``s`` records if ``candidate`` were preferred.

    The peak-rate log factors of the praise/criticism terms are omitted, so
    the latent rates enter only through the silence terms.
    """
    n_plus, n_minus, n_none = history.count_arrays
    total = 0.0
    for a in np.nonzero(n_plus[s] + n_minus[s] + n_none[s])[0]:
        e_hat = kernel_by_distance(abs(int(a) - candidate), kind, sigma)
        mf = minus_factor(e_hat, kind, epsilon)
        p_none = 1.0 - mu_plus * e_hat - mu_minus * mf
        total += int(n_plus[s, a]) * max(np.log(max(e_hat, P_FLOOR)), LOG_FLOOR)
        total += int(n_minus[s, a]) * max(np.log(max(mf, P_FLOOR)), LOG_FLOOR)
        total += int(n_none[s, a]) * max(np.log(max(p_none, P_FLOOR)), LOG_FLOOR)
    return float(total)


class _DistanceTables:
    """Per-distance kernel values and floored log tables over the node grid.

    Everything the E-step needs depends on the action pair only through the
    index distance, so tables indexed by distance make both the posterior
    weights and the candidate objectives cheap.
    """

    def __init__(self, n_actions: int, sigma: float, kind: KernelKind, epsilon: float, grid: QuadratureGrid):
        d = np.arange(n_actions, dtype=float)
        self.e_hat = np.atleast_1d(kernel_by_distance(d, kind, sigma))
        self.mf = minus_factor(self.e_hat, kind, epsilon)
        self.ln_e = np.log(np.maximum(self.e_hat, P_FLOOR))
        self.ln_mf = np.log(np.maximum(self.mf, P_FLOOR))
        mu_p = grid.nodes_mu_plus[:, None]
        mu_m = grid.nodes_mu_minus[None, :]
        # (distance, node_p, node_m) tables
        self.ln_pp = np.log(np.maximum(mu_p[None, :, :] * self.e_hat[:, None, None], P_FLOOR))
        self.ln_pm = np.log(np.maximum(mu_m[None, :, :] * self.mf[:, None, None], P_FLOOR))
        p_none = 1.0 - mu_p[None, :, :] * self.e_hat[:, None, None] - mu_m[None, :, :] * self.mf[:, None, None]
        self.ln_p0 = np.log(np.maximum(p_none, P_FLOOR))


def _counts_by_distance(history: InteractionHistory, lam: np.ndarray) -> np.ndarray:
    """Aggregate the three count tables by |a - lam[s]|; shape (3, n_actions)."""
    out = np.zeros((3, history.n_actions), dtype=np.int64)
    counts = np.stack(history.count_arrays)
    for s in range(history.n_states):
        dist = np.abs(np.arange(history.n_actions) - int(lam[s]))
        for k in range(3):
            np.add.at(out[k], dist, counts[k, s])
    return out


def _posterior_weights(history, lam, tables: _DistanceTables, grid: QuadratureGrid) -> np.ndarray:
    """Quadrature weights times the max-normalized history likelihood; shape of the grid."""
    by_dist = _counts_by_distance(history, lam)
    lw = (
        np.einsum("d,dpm->pm", by_dist[0].astype(float), tables.ln_pp)
        + np.einsum("d,dpm->pm", by_dist[1].astype(float), tables.ln_pm)
        + np.einsum("d,dpm->pm", by_dist[2].astype(float), tables.ln_p0)
    )
    return grid.weights * np.exp(lw - lw.max())


def _state_objectives(history, s: int, tables: _DistanceTables, w: np.ndarray) -> np.ndarray:
    """E-step objective of every candidate action for state ``s``."""
    n_plus, n_minus, n_none = history.count_arrays
    total_w = w.sum()
    t_silent = np.einsum("dpm,pm->d", tables.ln_p0, w)
    n_actions = history.n_actions
    dist = np.abs(np.arange(n_actions)[:, None] - np.arange(n_actions)[None, :])  # (candidate, a)
    scored = tables.ln_e[dist] @ n_plus[s] + tables.ln_mf[dist] @ n_minus[s]
    return scored * total_w + t_silent[dist] @ n_none[s]


def e_step_objective(
    history: InteractionHistory,
    s: int,
    candidate: int,
    lam_prev: Sequence[int],
    sigma: float,
    kind: KernelKind = GAUSSIAN,
    grid: QuadratureGrid | None = None,
    epsilon: float = 0.01,
) -> float:
    """Expected scored log-likelihood of state ``s`` under candidate ``candidate``.

    The expectation runs over the latent peak rates weighted by the history
    likelihood under ``lam_prev``; the weights are rescaled by their maximum,
    which preserves the argmax over candidates.
    """
    if not 0 <= candidate < history.n_actions:
        raise IndexError(f"candidate {candidate} out of range [0, {history.n_actions})")
    if grid is None:
        grid = QuadratureGrid.trapezoid(epsilon=epsilon)
    lam = as_policy(lam_prev, history.n_states, history.n_actions)
    tables = _DistanceTables(history.n_actions, sigma, kind, epsilon, grid)
    w = _posterior_weights(history, lam, tables, grid)
    return float(_state_objectives(history, s, tables, w)[candidate])


def em_update(
    history: InteractionHistory,
    lam_prev: Sequence[int],
    sigma: float,
    kind: KernelKind = GAUSSIAN,
    grid: QuadratureGrid | None = None,
    epsilon: float = 0.01,
) -> np.ndarray:
    """One synchronous EM sweep: per-state argmax of the E-step objective.

    Ties break toward the lowest action index.
    """
    if grid is None:
        grid = QuadratureGrid.trapezoid(epsilon=epsilon)
    lam = as_policy(lam_prev, history.n_states, history.n_actions)
    tables = _DistanceTables(history.n_actions, sigma, kind, epsilon, grid)
    return _em_update_with_tables(history, lam, tables, grid)


def _em_update_with_tables(history, lam, tables, grid) -> np.ndarray:
    w = _posterior_weights(history, lam, tables, grid)
    new_lam = np.empty_like(lam)
    for s in range(history.n_states):
        new_lam[s] = int(np.argmax(_state_objectives(history, s, tables, w)))
    return new_lam


def em_fixpoint(
    history: InteractionHistory,
    lam_init: Sequence[int],
    sigma: float,
    kind: KernelKind = GAUSSIAN,
    grid: QuadratureGrid | None = None,
    max_iters: int = 50,
    epsilon: float = 0.01,
) -> np.ndarray:
    """Iterate em_update until the policy stops changing (or max_iters)."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if grid is None:
        grid = QuadratureGrid.trapezoid(epsilon=epsilon)
    lam = as_policy(lam_init, history.n_states, history.n_actions)
    tables = _DistanceTables(history.n_actions, sigma, kind, epsilon, grid)
    for _ in range(max_iters):
        new_lam = _em_update_with_tables(history, lam, tables, grid)
        if np.array_equal(new_lam, lam):
            return new_lam
        lam = new_lam
    warnings.warn(f"policy iteration did not settle within {max_iters} sweeps", RuntimeWarning)
    return lam
