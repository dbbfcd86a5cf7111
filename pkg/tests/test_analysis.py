from __future__ import annotations

import math
from fractions import Fraction

import pytest

from rclab.analysis import (
    NOT_DESK_REPRODUCIBLE,
    annealed_as_series,
    annealed_return,
    anomalous_delta,
    anomalous_pipeline,
    bounds_report,
    fit_exponent,
    gap_shrinkage_p,
    in_standard_regime,
    min_conductance_study,
    series_from_rows,
    standard_delta,
    standard_regime_check,
)
from rclab.environment import modify, sample_environment
from rclab.exceptions import BudgetError, FitError, ParameterError
from rclab.kernel import return_series
from rclab.models.analysis import VERDICT_ABOVE, VERDICT_BELOW, VERDICT_INSIDE, DecayFit, MinConductanceRow
from rclab.models.environment import ConductanceLaw
from rclab.models.kernel import ReturnSeries, SeriesPoint


def _power_series(exponent: float, ns: list, scale: float = 0.7) -> ReturnSeries:
    series = ReturnSeries(d=2, gamma=None, seed=0)
    series.points = [SeriesPoint(n, scale * n ** exponent, 0.0) for n in ns]
    return series


def _fit(low: float, high: float) -> DecayFit:
    return DecayFit((low + high) / 2, 0.0, low, high, 1, 10, 0.0, 5)


class TestFitExponent:
    def test_exact_power_law(self) -> None:
        fit = fit_exponent(_power_series(-2.0, [1, 2, 4, 8, 16, 32, 64]))
        assert fit.slope == pytest.approx(-2.0)
        assert fit.intercept == pytest.approx(math.log(0.7))
        assert fit.ci_low == pytest.approx(-2.0)
        assert fit.ci_high == pytest.approx(-2.0)
        assert fit.residual == pytest.approx(0.0, abs=1e-12)

    def test_range_selection(self) -> None:
        series = _power_series(-1.0, [1, 2, 3, 4, 5, 6, 7, 8])
        fit = fit_exponent(series, 3, 7)
        assert fit.n_range == (3, 7)
        assert fit.points == 5

    def test_noisy_interval_contains_the_estimate(self) -> None:
        series = _power_series(-1.5, [2, 4, 8, 16, 32, 64, 128])
        for i, p in enumerate(series.points):
            series.points[i] = SeriesPoint(p.n, p.value * (1.1 if i % 2 else 0.9), 0.0)
        fit = fit_exponent(series, seed=3)
        assert fit.ci_low <= fit.slope <= fit.ci_high
        assert fit.slope == pytest.approx(-1.5, abs=0.1)
        assert fit_exponent(series, seed=3) == fit

    def test_too_few_points(self) -> None:
        with pytest.raises(FitError, match="at least 4"):
            fit_exponent(_power_series(-1.0, [1, 2, 3]))

    def test_truncation_dominated_point(self) -> None:
        series = _power_series(-1.0, [1, 2, 3, 4])
        series.points[2] = SeriesPoint(3, 1e-15, 1e-14)
        with pytest.raises(FitError, match="truncation error"):
            fit_exponent(series)

    def test_series_from_rows(self) -> None:
        series = series_from_rows([
            {"n": "4", "p2n": "0.1"},
            {"n": 2, "p2n": 0.2, "err_bound": "1e-15"},
        ])
        assert series.ns() == [2, 4]
        assert series.points[0].err_bound == 1e-15

    def test_series_from_bad_rows(self) -> None:
        with pytest.raises(FitError):
            series_from_rows([{"n": "x", "p2n": "0.1"}])
        with pytest.raises(FitError):
            series_from_rows([{"p2n": "0.1"}])


class TestBounds:
    def test_anomalous_window(self) -> None:
        report = bounds_report(None, 5, 0.01)
        assert report.window_low == Fraction(-29, 10)
        assert report.window_high == -2
        assert report.trans_bound == -2
        assert NOT_DESK_REPRODUCIBLE in report.notes

    def test_standard_target(self) -> None:
        report = bounds_report(None, 5, 200)
        assert report.standard_target == -2
        assert report.standard_delta == Fraction(1, 2)
        assert in_standard_regime(5, 200, 0.01)

    def test_low_dimension_transience_bound(self) -> None:
        assert bounds_report(None, 2, 1).trans_bound == -1
        assert bounds_report(None, 3, 1).trans_bound == Fraction(-3, 2)

    def test_deltas(self) -> None:
        assert anomalous_delta(5, 0.1, 0.5) == 18
        assert standard_delta(2, 32) == Fraction(1, 2)
        with pytest.raises(ParameterError):
            anomalous_delta(5, 0.1, 1)

    def test_regime_condition(self) -> None:
        assert not in_standard_regime(2, 16, 0.01)
        assert not in_standard_regime(2, 100, 0.2)

    def test_outside_regime_note(self) -> None:
        notes = bounds_report(None, 2, 1).notes
        assert any("indicative" in note for note in notes)

    def test_verdicts(self) -> None:
        report = bounds_report(_fit(-2.5, -2.2), 5, 0.01)
        assert report.verdicts["anomalous_window"] == VERDICT_INSIDE
        assert report.verdicts["trans_bound"] == VERDICT_INSIDE
        assert bounds_report(_fit(-1.9, -1.5), 5, 0.01).verdicts["anomalous_window"] == VERDICT_ABOVE
        assert bounds_report(_fit(-3.5, -3.0), 5, 0.01).verdicts["anomalous_window"] == VERDICT_BELOW

    def test_exact_serialization(self) -> None:
        data = bounds_report(None, 5, 0.01).to_dict()
        assert data["anomalous_window"][0] == {"exact": "-29/10", "value": -2.9}
        assert data["fit"] is None


class TestAnnealed:
    def test_constant_law_is_the_simple_walk(self) -> None:
        series = annealed_return(1, ConductanceLaw.constant(), [2, 1], 3, seed=0, tau=0.0)
        assert [p.n for p in series.points] == [1, 2]
        assert series.points[0].mean == pytest.approx(0.5)
        assert series.points[1].mean == pytest.approx(0.375)
        assert series.points[1].ci_low == pytest.approx(series.points[1].ci_high)

    def test_random_law_interval(self) -> None:
        series = annealed_return(1, ConductanceLaw.poly_tail(1.0), [1, 2, 4], 6, seed=2)
        for p in series.points:
            assert p.ci_low <= p.mean <= p.ci_high
            assert 0 < p.median < 1
        assert len(series.lost_mass) == 3
        assert [row["n"] for row in series.rows()] == [1, 2, 4]

    def test_as_return_series(self) -> None:
        annealed = annealed_return(1, ConductanceLaw.constant(), [1, 2], 1, seed=0)
        series = annealed_as_series(annealed, 1.0)
        assert series.values() == pytest.approx([0.5, 0.375])
        assert series.gamma == 1.0

    def test_bad_arguments(self) -> None:
        with pytest.raises(ParameterError):
            annealed_return(1, ConductanceLaw.constant(), [1], 0, seed=0)
        with pytest.raises(ParameterError):
            annealed_return(1, ConductanceLaw.constant(), [0, 1], 2, seed=0)


class TestAnomalousPipeline:
    def test_planted_trap_assembles_the_chain(self) -> None:
        report = anomalous_pipeline(2, 0.5, 0.5, 0.5, 64, seed=1, plant=True)
        assert report.alpha == pytest.approx(1 / 6)
        assert report.n == 2
        assert report.box_scale == 64
        assert report.trap_rank == 0
        assert report.trap_site == (0, 0)
        assert report.assembled_lower is not None
        assert report.violations == []
        assert report.to_dict()["checks"]["crossing"] is True

    @pytest.mark.parametrize("seed", range(3))
    def test_sampled_environments_have_no_violations(self, seed: int) -> None:
        report = anomalous_pipeline(2, 0.5, 0.5, 0.5, 8, seed=seed)
        assert report.violations == []
        assert report.notes or report.trap_rank == 0
        assert 0 < report.no_trap_context < 1

    @pytest.mark.slow
    def test_planted_chain_holds_on_fifty_environments(self) -> None:
        for seed in range(50):
            report = anomalous_pipeline(2, 0.5, 0.5, 0.5, 64, seed=seed, plant=True)
            assert report.violations == [], seed
            assert report.assembled_lower is not None

    def test_bad_N(self) -> None:
        with pytest.raises(ParameterError):
            anomalous_pipeline(2, 0.5, 0.5, 0.5, 0, seed=0)


class TestStandardRegime:
    def test_constant_field(self) -> None:
        env = sample_environment(2, 4, ConductanceLaw.constant(), 0)
        report = standard_regime_check(modify(env, 2), 2, 0.01, 0.24)
        assert report.alpha == 1.0
        assert report.kappa == 4.0
        assert report.sigma == pytest.approx(0.25)
        assert report.n == 97
        assert report.holds
        assert report.precondition
        assert not report.in_regime

    def test_budget(self) -> None:
        env = sample_environment(2, 4, ConductanceLaw.constant(), 0)
        with pytest.raises(BudgetError, match="Raise epsilon"):
            standard_regime_check(modify(env, 2), 2, 0.01, 0.24, max_radius=50)

    def test_epsilon_must_be_positive(self) -> None:
        env = sample_environment(2, 4, ConductanceLaw.constant(), 0)
        with pytest.raises(ParameterError):
            standard_regime_check(modify(env, 2), 2, 0.01, 0.0)


class TestMinConductance:
    def test_statistic_approaches_minus_d_over_gamma(self) -> None:
        rows = min_conductance_study(2, ConductanceLaw.poly_tail(2.0), [500], 3, seed=1)
        assert len(rows) == 1
        assert rows[0].target == -1.0
        assert abs(rows[0].mean - rows[0].target) < 0.5
        assert rows[0].samples == 3

    def test_needs_replicas(self) -> None:
        with pytest.raises(ParameterError):
            min_conductance_study(2, ConductanceLaw.poly_tail(2.0), [10], 0, seed=1)

    def test_gap_shrinkage_on_a_shrinking_gap(self) -> None:
        rows = [MinConductanceRow(N, -2.0 + 3.0 / math.log(N), 0.01, -2.0, 100) for N in (10, 100, 1000)]
        assert gap_shrinkage_p(rows) < 1e-6

    def test_gap_shrinkage_on_a_flat_gap(self) -> None:
        rows = [MinConductanceRow(N, -1.5, 0.05, -2.0, 100) for N in (10, 100, 1000)]
        assert gap_shrinkage_p(rows) == pytest.approx(0.5, abs=1e-6)

    def test_gap_shrinkage_needs_two_sizes_and_spread(self) -> None:
        with pytest.raises(ParameterError, match="two distinct N"):
            gap_shrinkage_p([MinConductanceRow(10, -1.0, 0.1, -2.0, 5)] * 2)
        with pytest.raises(ParameterError, match="standard error"):
            gap_shrinkage_p([MinConductanceRow(N, -1.0, 0.0, -2.0, 1) for N in (10, 20)])

    @pytest.mark.slow
    @pytest.mark.parametrize("gamma,band", [(1.0, 0.5), (2.0, 0.3)])
    def test_gap_closes_as_the_box_grows(self, gamma: float, band: float) -> None:
        rows = min_conductance_study(2, ConductanceLaw.poly_tail(gamma), [100, 200, 300, 400, 500], 100, seed=4)
        assert abs(rows[-1].mean - rows[-1].target) < band
        assert gap_shrinkage_p(rows) < 0.05


@pytest.mark.slow
class TestDecaySlopes:
    def test_two_dimensional_simple_walk(self) -> None:
        env = sample_environment(2, 400, ConductanceLaw.constant(), 0)
        fit = fit_exponent(return_series(env, 1024), 64, 1024)
        assert fit.slope == pytest.approx(-1.0, abs=0.1)

    def test_three_dimensional_simple_walk(self) -> None:
        env = sample_environment(3, 82, ConductanceLaw.constant(), 0)
        fit = fit_exponent(return_series(env, 200, tau=1e-13), 32, 200)
        assert fit.slope == pytest.approx(-1.5, abs=0.15)

    def test_light_tail_is_diffusive(self) -> None:
        env = sample_environment(2, 200, ConductanceLaw.poly_tail(20.0), 3)
        fit = fit_exponent(return_series(env, 512), 64, 512)
        assert -1.1 <= fit.slope <= -0.75
