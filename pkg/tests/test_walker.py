from __future__ import annotations

from typing import Tuple

import numpy as np
import pytest
from scipy import stats

from rclab.environment import Environment, environment_from_values, sample_environment
from rclab.exceptions import LatticeError, ParameterError, StorageError
from rclab.kernel import heat_kernel, transition_row
from rclab.models.environment import ConductanceLaw
from rclab.models.lattice import Bond, LatticePoint, PlainBox
from rclab.models.traps import TrapPattern
from rclab.models.walker import Trajectory
from rclab.traps import collection_C, plant_trap
from rclab.walker import (
    clopper_pearson,
    directions,
    exit_probability,
    hitting_times,
    per_jump_bound,
    simulate,
    simulate_batch,
    sojourn_exact,
    step_frequencies,
    trap_sojourn,
)

P = LatticePoint.of


def _straight(length: int) -> Trajectory:
    return Trajectory.from_points([P(t, 0) for t in range(length + 1)])


class TestSimulate:
    def test_directions(self) -> None:
        np.testing.assert_array_equal(directions(2), [[1, 0], [-1, 0], [0, 1], [0, -1]])

    def test_trajectory_is_a_reproducible_path(self) -> None:
        env = sample_environment(2, 21, ConductanceLaw.poly_tail(1.0), 3)
        first = simulate(env, P(0, 0), 20, seed=5)
        again = simulate(env, P(0, 0), 20, seed=5)
        assert first.length == 20
        assert first.start == P(0, 0)
        np.testing.assert_array_equal(first.positions, again.positions)
        other = simulate(env, P(0, 0), 20, seed=6)
        assert not np.array_equal(first.positions, other.positions)

    def test_batch_shares_the_seed(self) -> None:
        env = sample_environment(1, 12, ConductanceLaw.constant(), 0)
        paths = simulate_batch(env, [P(0), P(2)], 10, seed=1)
        assert [p.start for p in paths] == [P(0), P(2)]
        assert simulate_batch(env, [], 10, seed=1) == []

    def test_bad_arguments(self) -> None:
        env = sample_environment(1, 4, ConductanceLaw.constant(), 0)
        with pytest.raises(ParameterError):
            simulate(env, P(0), -1, seed=0)
        with pytest.raises(StorageError):
            simulate(env, P(9), 3, seed=0)

    def test_walker_leaving_the_box_raises(self) -> None:
        env = sample_environment(1, 2, ConductanceLaw.constant(), 0)
        with pytest.raises(StorageError, match="reached sup-norm"):
            simulate(env, P(0), 200, seed=0)

    def test_trajectory_rejects_jumps(self) -> None:
        with pytest.raises(LatticeError):
            Trajectory.from_points([P(0, 0), P(1, 1)])

    def test_first_step_frequencies(self) -> None:
        env = environment_from_values(1, 3, {
            Bond.between((0,), (1,)): 0.2,
            Bond.between((-1,), (0,)): 0.8,
        })
        counts = step_frequencies(env, P(0), 20_000, seed=4)
        assert sum(counts.values()) == 20_000
        # binomial sd is about 57
        assert abs(counts[P(1)] - 4000) < 300

    @pytest.mark.slow
    def test_constant_field_steps_are_uniform(self) -> None:
        env = sample_environment(2, 3, ConductanceLaw.constant(), 0)
        counts = step_frequencies(env, P(0, 0), 1_000_000, seed=6)
        assert stats.chisquare(list(counts.values())).pvalue > 0.001

    def test_steps_follow_the_transition_row(self) -> None:
        env = sample_environment(3, 4, ConductanceLaw.poly_tail(1.0), 2)
        x = P(1, -1, 2)
        counts = step_frequencies(env, x, 200_000, seed=3)
        row = transition_row(env, x)
        observed = [counts[y] for y in row]
        expected = [200_000 * p for p in row.values()]
        assert stats.chisquare(observed, expected).pvalue > 0.001


class TestHittingTimes:
    def test_straight_line(self) -> None:
        result = hitting_times(_straight(7), 3)
        assert [(r.N, r.time) for r in result.records] == [(0, 0), (1, 3), (2, 6)]
        assert result.records[2].location == P(6, 0)
        assert result.truncated
        assert result.time(1) == 3
        assert result.time(3) is None

    def test_complete(self) -> None:
        result = hitting_times(_straight(9), 3)
        assert not result.truncated
        assert result.time(3) == 9


class TestEstimates:
    def test_clopper_pearson_edges(self) -> None:
        assert clopper_pearson(0, 10)[0] == 0.0
        assert clopper_pearson(10, 10)[1] == 1.0
        lo, hi = clopper_pearson(5, 10)
        assert lo == pytest.approx(0.187, abs=1e-3)
        assert hi == pytest.approx(0.813, abs=1e-3)

    def test_exit_probability(self) -> None:
        env = sample_environment(1, 5, ConductanceLaw.constant(), 0)
        est = exit_probability(env, 2, PlainBox(0, 1), 4000, seed=2)
        assert abs(est.estimate - 0.5) < 0.05
        assert est.ci_low <= est.estimate <= est.ci_high
        assert est.to_dict()["op"] == "exit_probability"

    def test_exit_after_one_step_is_impossible(self) -> None:
        env = sample_environment(1, 5, ConductanceLaw.constant(), 0)
        est = exit_probability(env, 1, PlainBox(0, 1), 100, seed=2)
        assert est.estimate == 0.0
        assert est.ci_low == 0.0

    def test_exit_interval_covers_the_exact_kernel(self) -> None:
        env = sample_environment(2, 10, ConductanceLaw.poly_tail(0.5), 7)
        exact = heat_kernel(env, 6, tau=0).mass_within(2)
        covered = 0
        for seed in range(100):
            est = exit_probability(env, 6, PlainBox(2, 2), 400, seed=seed)
            covered += est.ci_low <= exact <= est.ci_high
        assert covered >= 90

    def test_exit_probability_needs_replicas(self) -> None:
        env = sample_environment(1, 5, ConductanceLaw.constant(), 0)
        with pytest.raises(ParameterError):
            exit_probability(env, 2, PlainBox(1, 1), 0, seed=0)


class TestSojourn:
    def _trapped(self) -> Tuple[Environment, TrapPattern]:
        env = sample_environment(2, 6, ConductanceLaw.constant(), 0)
        env = plant_trap(env, P(2, 0), N=2, alpha=1.0)
        return env, collection_C(P(2, 0))

    def test_exact_probability(self) -> None:
        env, trap = self._trapped()
        exact, p_y, p_z = sojourn_exact(env, trap, 4)
        assert p_y == pytest.approx(1 / 1.875)
        assert p_z == pytest.approx(1 / 1.75)
        assert exact == pytest.approx(p_y ** 2 * p_z ** 2)

    def test_monte_carlo_agrees_with_exact(self) -> None:
        env, trap = self._trapped()
        result = trap_sojourn(env, trap, 4, 20_000, seed=8, N=2, alpha=1.0, xi=0.5)
        assert abs(result.estimate.estimate - result.exact) < 5 * result.sigma
        assert result.per_jump_bound == pytest.approx(0.25 ** 4)
        assert result.exact >= result.per_jump_bound

    def test_not_a_trap_raises(self) -> None:
        env = sample_environment(2, 6, ConductanceLaw.constant(), 0)
        with pytest.raises(ParameterError, match="not a trap"):
            trap_sojourn(env, collection_C(P(2, 0)), 4, 10, seed=0, N=2, alpha=1.0, xi=0.5)

    def test_per_jump_bound(self) -> None:
        assert per_jump_bound(2, 4, 0.5, 0.5, 3) == pytest.approx((0.5 / 2.0) ** 3)

    def test_planted_traps_respect_the_per_jump_bound(self) -> None:
        x = P(3, 0)
        trap = collection_C(x)
        for seed in range(50):
            env = sample_environment(2, 8, ConductanceLaw.poly_tail(0.5), seed)
            env = plant_trap(env, x, N=4, alpha=0.5)
            assert trap.classify(env.conductance, 4, 0.5, 0.5).is_trap
            exact = [sojourn_exact(env, trap, n)[0] for n in (1, 2, 5, 10)]
            bounds = [per_jump_bound(2, 4, 0.5, 0.5, n) for n in (1, 2, 5, 10)]
            assert all(e >= b * (1 - 1e-12) for e, b in zip(exact, bounds))
            assert exact == sorted(exact, reverse=True)

    def test_per_jump_bound_grows_with_xi(self) -> None:
        bounds = [per_jump_bound(3, 5, 0.4, xi, 6) for xi in (0.1, 0.3, 0.5, 0.9)]
        assert bounds == sorted(bounds)
