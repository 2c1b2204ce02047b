"""EM machinery: likelihood weights, scored expectations, and the fixpoint loop.

The quadrature-based update is checked against a Monte Carlo integration
oracle written directly from the model's probability formulas.
"""

import numpy as np
import pytest

from uncertain_feedback import (
    GAUSSIAN,
    FeedbackKind,
    InteractionHistory,
    QuadratureGrid,
    e_step_objective,
    em_fixpoint,
    em_update,
    isabl_indicator,
    log_weight,
    state_log_term,
)

POS, NEG, NONE = FeedbackKind.POSITIVE, FeedbackKind.NEGATIVE, FeedbackKind.NONE
FLOOR = 1e-12


def make_history(n_states, n_actions, cells):
    """cells: {(s, a): (n_plus, n_minus, n_none)}"""
    h = InteractionHistory(n_states, n_actions)
    for (s, a), (np_, nm, n0) in cells.items():
        for _ in range(np_):
            h.record(s, a, POS)
        for _ in range(nm):
            h.record(s, a, NEG)
        for _ in range(n0):
            h.record(s, a, NONE)
    return h


def mc_em_update(history, lam_prev, sigma, n_samples, rng, epsilon=0.01):
    """Monte Carlo oracle for one EM sweep, written from the model formulas.

    Uniform samples over the latent-rate rectangle; the integrand is the
    plain product likelihood times the scored per-state log term, with the
    same probability floor as the implementation.
    """
    mu_p = rng.uniform(0.0, 1.0 - epsilon, size=n_samples)
    mu_m = rng.uniform(0.0, 1.0, size=n_samples)
    K = history.n_actions

    def e_hat(d):
        return np.exp(-(d**2) / (2.0 * sigma**2))

    log_w = np.zeros(n_samples)
    for s in range(history.n_states):
        for a in range(K):
            n_plus, n_minus, n_none = history.counts(s, a)
            if n_plus + n_minus + n_none == 0:
                continue
            e = e_hat(abs(a - int(lam_prev[s])))
            pp = np.maximum(mu_p * e, FLOOR)
            pm = np.maximum(mu_m * (1.0 - (1.0 - epsilon) * e), FLOOR)
            p0 = np.maximum(1.0 - mu_p * e - mu_m * (1.0 - (1.0 - epsilon) * e), FLOOR)
            log_w += n_plus * np.log(pp) + n_minus * np.log(pm) + n_none * np.log(p0)
    w = np.exp(log_w - log_w.max())

    new_lam = np.zeros(history.n_states, dtype=int)
    for s in range(history.n_states):
        objectives = np.zeros(K)
        for cand in range(K):
            scored = np.zeros(n_samples)
            const = 0.0
            for a in range(K):
                n_plus, n_minus, n_none = history.counts(s, a)
                if n_plus + n_minus + n_none == 0:
                    continue
                e = e_hat(abs(a - cand))
                const += n_plus * np.log(max(e, FLOOR))
                const += n_minus * np.log(max(1.0 - (1.0 - epsilon) * e, FLOOR))
                p0 = np.maximum(1.0 - mu_p * e - mu_m * (1.0 - (1.0 - epsilon) * e), FLOOR)
                scored = scored + n_none * np.log(p0)
            objectives[cand] = np.mean(w * (const + scored))
        new_lam[s] = int(np.argmax(objectives))
    return new_lam


class TestQuadratureGrid:
    def test_weights_cover_the_rectangle(self):
        for eps in (0.01, 0.05):
            grid = QuadratureGrid.trapezoid(51, 51, epsilon=eps)
            assert grid.weights.sum() == pytest.approx((1.0 - eps) * 1.0, abs=1e-9)

    def test_node_counts_must_be_odd(self):
        with pytest.raises(ValueError):
            QuadratureGrid.trapezoid(50, 51)
        with pytest.raises(ValueError):
            QuadratureGrid.trapezoid(51, 1)

    def test_node_ranges(self):
        grid = QuadratureGrid.trapezoid(11, 11, epsilon=0.01)
        assert grid.nodes_mu_plus[0] == 0.0
        assert grid.nodes_mu_plus[-1] == pytest.approx(0.99)
        assert grid.nodes_mu_minus[-1] == 1.0


class TestLogWeight:
    def test_empty_history(self):
        h = InteractionHistory(2, 3)
        assert log_weight(h, 0.5, 0.5, 1.0, [0, 0]) == 0.0

    def test_single_praise_at_preferred(self):
        h = make_history(1, 3, {(0, 1): (1, 0, 0)})
        assert log_weight(h, 0.8, 0.3, 1.0, [1]) == pytest.approx(np.log(0.8), abs=1e-12)

    def test_additive_over_disjoint_histories(self):
        rng = np.random.default_rng(4)
        cells1 = {(0, 0): (2, 1, 0), (1, 2): (0, 1, 3)}
        cells2 = {(0, 1): (1, 0, 2), (1, 0): (2, 2, 1)}
        h1 = make_history(2, 3, cells1)
        h2 = make_history(2, 3, cells2)
        both = make_history(2, 3, {**cells1, **cells2})
        for _ in range(20):
            mu_p, mu_m = rng.uniform(0, 0.99), rng.uniform(0, 1)
            lam = list(rng.integers(0, 3, size=2))
            total = log_weight(both, mu_p, mu_m, 1.3, lam)
            parts = log_weight(h1, mu_p, mu_m, 1.3, lam) + log_weight(h2, mu_p, mu_m, 1.3, lam)
            assert total == pytest.approx(parts, rel=1e-12)

    def test_floor_keeps_boundary_finite(self):
        h = make_history(1, 2, {(0, 0): (1, 1, 1)})
        assert np.isfinite(log_weight(h, 0.0, 0.0, 1.0, [0]))
        assert np.isfinite(log_weight(h, 0.99, 1.0, 1.0, [0]))


class TestStateLogTerm:
    def test_praise_at_candidate_scores_zero(self):
        h = make_history(1, 3, {(0, 1): (1, 0, 0)})
        assert state_log_term(h, 0, 1, 0.5, 0.5, 1.0) == 0.0

    def test_praise_one_away(self):
        h = make_history(1, 3, {(0, 1): (1, 0, 0)})
        assert state_log_term(h, 0, 2, 0.5, 0.5, 1.0) == pytest.approx(-0.5, abs=1e-12)

    def test_criticism_at_candidate(self):
        h = make_history(1, 3, {(0, 1): (0, 1, 0)})
        assert state_log_term(h, 0, 1, 0.5, 0.5, 1.0) == pytest.approx(np.log(0.01), abs=1e-12)

    def test_rate_dependence_only_through_silence(self):
        h = make_history(1, 3, {(0, 1): (2, 1, 0)})
        a = state_log_term(h, 0, 0, 0.1, 0.9, 1.0)
        b = state_log_term(h, 0, 0, 0.8, 0.2, 1.0)
        assert a == pytest.approx(b, rel=1e-12)
        h0 = make_history(1, 3, {(0, 1): (0, 0, 2)})
        assert state_log_term(h0, 0, 0, 0.1, 0.9, 1.0) != state_log_term(h0, 0, 0, 0.8, 0.2, 1.0)


class TestEStepObjective:
    def test_empty_state_scores_zero(self):
        h = make_history(2, 3, {(1, 0): (2, 0, 1)})
        grid = QuadratureGrid.trapezoid(11, 11)
        for cand in range(3):
            assert e_step_objective(h, 0, cand, [0, 0], 1.0, GAUSSIAN, grid) == 0.0

    def test_matches_direct_quadrature_sum(self):
        # recomposition from the public scalar pieces at every node
        h = make_history(2, 3, {(0, 0): (3, 0, 1), (0, 2): (0, 2, 0), (1, 1): (1, 1, 1)})
        grid = QuadratureGrid.trapezoid(7, 9)
        lam_prev = [2, 0]
        lws = np.array(
            [
                [log_weight(h, mp, mm, 1.0, lam_prev) for mm in grid.nodes_mu_minus]
                for mp in grid.nodes_mu_plus
            ]
        )
        w = grid.weights * np.exp(lws - lws.max())
        for s in range(2):
            for cand in range(3):
                slt = np.array(
                    [
                        [state_log_term(h, s, cand, mp, mm, 1.0) for mm in grid.nodes_mu_minus]
                        for mp in grid.nodes_mu_plus
                    ]
                )
                expected = float((w * slt).sum())
                got = e_step_objective(h, s, cand, lam_prev, 1.0, GAUSSIAN, grid)
                assert got == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_prefers_praised_action(self):
        h = make_history(1, 2, {(0, 0): (3, 0, 0), (0, 1): (0, 2, 0)})
        grid = QuadratureGrid.trapezoid()
        o0 = e_step_objective(h, 0, 0, [1], 1.0, GAUSSIAN, grid)
        o1 = e_step_objective(h, 0, 1, [1], 1.0, GAUSSIAN, grid)
        assert o0 > o1

    def test_finite_everywhere(self):
        rng = np.random.default_rng(9)
        grid = QuadratureGrid.trapezoid(11, 11)
        for _ in range(50):
            cells = {
                (int(rng.integers(2)), int(rng.integers(4))): tuple(rng.integers(0, 4, size=3))
                for _ in range(rng.integers(1, 5))
            }
            h = make_history(2, 4, cells)
            lam = list(rng.integers(0, 4, size=2))
            sigma = rng.uniform(0.05, 50.0)
            for s in range(2):
                for cand in range(4):
                    assert np.isfinite(e_step_objective(h, s, cand, lam, sigma, GAUSSIAN, grid))


class TestEmUpdate:
    def test_empty_history_resets_to_lowest_index(self):
        h = InteractionHistory(2, 3)
        assert em_update(h, [2, 1], 1.0).tolist() == [0, 0]
        assert em_update(h, [0, 0], 1.0).tolist() == [0, 0]

    def test_praised_action_wins(self):
        h = make_history(1, 2, {(0, 0): (3, 0, 0), (0, 1): (0, 2, 0)})
        assert em_update(h, [1], 1.0).tolist() == [0]

    def test_single_praise_pins_the_state(self):
        grid = QuadratureGrid.trapezoid()
        for k in (3, 5):
            for a in range(k):
                h = make_history(2, k, {(0, a): (1, 0, 0)})
                lam = em_update(h, [0] * 2, 1.0, GAUSSIAN, grid)
                assert lam[0] == a

    def test_deterministic(self):
        h = make_history(1, 3, {(0, 0): (1, 0, 0), (0, 2): (1, 0, 0)})
        first = em_update(h, [1], 1.0)
        for _ in range(5):
            assert em_update(h, [1], 1.0).tolist() == first.tolist()

    def test_weight_scale_invariance(self):
        # scaling every quadrature weight by a positive constant cannot move the argmax
        h = make_history(2, 4, {(0, 1): (2, 1, 3), (1, 3): (1, 0, 2), (1, 0): (0, 2, 1)})
        base = QuadratureGrid.trapezoid(21, 21)
        for c in (1e-6, 0.5, 3.0, 1e6):
            scaled = QuadratureGrid(base.nodes_mu_plus, base.nodes_mu_minus, base.weights * c)
            assert em_update(h, [0, 0], 0.8, GAUSSIAN, scaled).tolist() == em_update(
                h, [0, 0], 0.8, GAUSSIAN, base
            ).tolist()

    def test_matches_mc_oracle_on_small_instances(self):
        # modest sample count here; the full-scale oracle run lives in acceptance
        rng = np.random.default_rng(123)
        grid = QuadratureGrid.trapezoid()
        agree = 0
        n_cases = 20
        for _ in range(n_cases):
            n_states = int(rng.integers(1, 3))
            n_actions = int(rng.integers(2, 5))
            h = InteractionHistory(n_states, n_actions)
            for _ in range(int(rng.integers(1, 11))):
                h.record(
                    int(rng.integers(n_states)),
                    int(rng.integers(n_actions)),
                    [POS, NEG, NONE][rng.integers(3)],
                )
            lam_prev = list(rng.integers(0, n_actions, size=n_states))
            sigma = float(rng.uniform(0.5, 3.0))
            ours = em_update(h, lam_prev, sigma, GAUSSIAN, grid)
            oracle = mc_em_update(h, lam_prev, sigma, 200_000, rng)
            agree += int(np.array_equal(ours, oracle))
        assert agree >= n_cases - 1


class TestEmFixpoint:
    def test_empty_history_converges_immediately(self):
        h = InteractionHistory(2, 3)
        assert em_fixpoint(h, [0, 0], 1.0).tolist() == [0, 0]

    def test_output_is_a_fixed_point(self):
        rng = np.random.default_rng(31)
        grid = QuadratureGrid.trapezoid(21, 21)
        for _ in range(20):
            h = InteractionHistory(2, 3)
            for _ in range(int(rng.integers(1, 12))):
                h.record(int(rng.integers(2)), int(rng.integers(3)), [POS, NEG, NONE][rng.integers(3)])
            lam = em_fixpoint(h, list(rng.integers(0, 3, size=2)), 1.0, GAUSSIAN, grid, max_iters=50)
            assert em_update(h, lam, 1.0, GAUSSIAN, grid).tolist() == lam.tolist()

    def test_flip_case_within_two_sweeps(self):
        h = make_history(1, 2, {(0, 0): (3, 0, 0), (0, 1): (0, 2, 0)})
        assert em_fixpoint(h, [1], 1.0, max_iters=2).tolist() == [0]

    def test_non_convergence_warns(self):
        h = make_history(1, 2, {(0, 0): (3, 0, 0), (0, 1): (0, 2, 0)})
        with pytest.warns(RuntimeWarning):
            em_fixpoint(h, [1], 1.0, max_iters=1)

    def test_max_iters_validated(self):
        h = InteractionHistory(1, 2)
        with pytest.raises(ValueError):
            em_fixpoint(h, [0], 1.0, max_iters=0)


class TestIndicatorKernelPath:
    def test_all_praise_on_one_action_wins(self):
        kind = isabl_indicator(0.1)
        h = make_history(2, 3, {(0, 2): (4, 0, 0), (0, 0): (0, 3, 0), (1, 1): (3, 0, 0)})
        lam = em_fixpoint(h, [0, 0], 1.0, kind=kind)
        assert lam.tolist() == [2, 1]

    def test_width_is_ignored(self):
        kind = isabl_indicator(0.1)
        h = make_history(1, 4, {(0, 1): (2, 1, 1), (0, 3): (1, 0, 2)})
        a = em_update(h, [0], 0.1, kind)
        b = em_update(h, [0], 10.0, kind)
        assert a.tolist() == b.tolist()
