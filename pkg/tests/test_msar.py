"""Regime switching: growth transforms, filter/smoother math, EM behavior."""

import datetime as dt
import math

import numpy as np
import pytest

import oracles
from conftest import MONDAY, make_series
from crisiscast.errors import (
    BadParameter,
    DivisionByZeroValue,
    SeriesTooShort,
)
from crisiscast.msar import (
    RegimeFit,
    RegimeParams,
    TransitionMatrix,
    fit_msar,
    hamilton_filter,
    kim_smoother,
    regime_report,
    to_growth,
)
from crisiscast.series import WEEK


class TestGrowth:
    def test_constant_series_grows_zero(self):
        y = make_series(np.full(120, 7.5))
        assert np.all(to_growth(y, "weekly").values == 0.0)
        assert np.all(to_growth(y, "yoy").values == 0.0)

    def test_doubling_series_grows_one(self):
        y = make_series(2.0 ** np.arange(30))
        g = to_growth(y, "weekly")
        assert np.allclose(g.values, 1.0)
        assert len(g) == 29
        assert g.start_week == MONDAY + WEEK

    def test_yoy_shifts_a_year(self):
        y = make_series(np.arange(1.0, 106.0), name="tpv")
        g = to_growth(y, "yoy")
        assert g.name == "tpv_growth_yoy"
        assert g.start_week == MONDAY + 52 * WEEK
        assert len(g) == 53
        assert g.values[0] == pytest.approx(52.0 / 1.0, abs=1e-12)

    def test_zero_base_rejected(self):
        y = make_series([4.0, 0.0, 3.0, 5.0])
        with pytest.raises(DivisionByZeroValue) as err:
            to_growth(y, "weekly")
        assert "2015-01-12" in str(err.value)

    def test_validation(self):
        with pytest.raises(BadParameter):
            to_growth(make_series(np.ones(60)), "monthly")
        with pytest.raises(SeriesTooShort):
            to_growth(make_series(np.ones(52)), "yoy")


class TestFilterSmoother:
    # a two-step example small enough to follow on paper
    DENS = np.array([[1.0, 0.5], [0.2, 0.8]])
    TRANS = np.array([[0.9, 0.1], [0.3, 0.7]])
    INITIAL = np.array([0.5, 0.5])

    def test_filter_hand_case(self):
        filtered, predicted, loglik = hamilton_filter(self.DENS, self.TRANS, self.INITIAL)
        assert predicted[0] == pytest.approx([0.5, 0.5])
        assert filtered[0] == pytest.approx([2 / 3, 1 / 3], abs=1e-12)
        assert predicted[1] == pytest.approx([0.7, 0.3], abs=1e-12)
        assert filtered[1] == pytest.approx([7 / 19, 12 / 19], abs=1e-12)
        assert loglik == pytest.approx(math.log(0.75) + math.log(0.38), abs=1e-12)

    def test_smoother_hand_case(self):
        filtered, _, _ = hamilton_filter(self.DENS, self.TRANS, self.INITIAL)
        smoothed, counts = kim_smoother(filtered, self.TRANS)
        assert smoothed[-1] == pytest.approx(filtered[-1], abs=1e-12)
        assert smoothed[0] == pytest.approx([26 / 57, 31 / 57], abs=1e-12)
        assert counts.sum() == pytest.approx(1.0, abs=1e-12)  # one transition

    def test_zero_density_returns_minus_inf(self):
        dens = np.array([[0.0, 0.0]])
        *_, loglik = hamilton_filter(dens, self.TRANS, self.INITIAL)
        assert loglik == -math.inf

    def test_identical_regimes_collapse_to_plain_ar_likelihood(self):
        # with both regimes equal and a symmetric transition matrix the
        # mixture is exactly one AR model; the filter must return its
        # conditional Gaussian log-likelihood
        rng = np.random.default_rng(61)
        g = oracles.simulate_arma(rng, 120, [0.4], [], 1.0) * 0.02 + 0.01
        intercept, phi, sigma2 = 0.006, 0.4, 0.0004
        x = np.column_stack([np.ones(119), g[:-1]])
        target = g[1:]
        resid = target - x @ np.array([intercept, phi])
        dens = np.column_stack(
            [np.exp(-0.5 * resid**2 / sigma2) / np.sqrt(2 * np.pi * sigma2)] * 2
        )
        trans = np.array([[0.5, 0.5], [0.5, 0.5]])
        *_, loglik = hamilton_filter(dens, trans, np.array([0.5, 0.5]))
        want = float(
            -0.5 * resid.size * math.log(2 * math.pi * sigma2)
            - 0.5 * np.sum(resid**2) / sigma2
        )
        assert loglik == pytest.approx(want, abs=1e-8)


class TestTransitionMatrix:
    def test_stationary_distribution(self):
        t = TransitionMatrix(p00=0.9, p01=0.1, p10=0.3, p11=0.7)
        assert t.stationary() == pytest.approx([0.75, 0.25], abs=1e-12)

    def test_degenerate_rows_fall_back_to_uniform(self):
        t = TransitionMatrix(p00=1.0, p01=0.0, p10=0.0, p11=1.0)
        assert t.stationary() == pytest.approx([0.5, 0.5])

    def test_validation(self):
        with pytest.raises(BadParameter):
            TransitionMatrix(p00=0.9, p01=0.2, p10=0.3, p11=0.7)
        with pytest.raises(BadParameter):
            TransitionMatrix(p00=1.1, p01=-0.1, p10=0.3, p11=0.7)


class TestFit:
    def simulated(self, seed=62, n=300):
        rng = np.random.default_rng(seed)
        values, states = oracles.simulate_msar(
            rng, n, mu=(0.01, -0.03), phi=(0.3, 0.5), sigma=(0.01, 0.08)
        )
        return make_series(values, name="growth"), states

    def test_recovers_regimes_on_simulated_data(self):
        g, states = self.simulated()
        fit = fit_msar(g, ar_order=1)
        assert fit.regimes[0].sigma2 < fit.regimes[1].sigma2  # label convention
        predicted = fit.covid_probability() > 0.5
        accuracy = float(np.mean(predicted == states[1:].astype(bool)))
        assert accuracy > 0.85
        assert fit.n_obs == len(g) - 1
        assert fit.start_week == g.start_week + WEEK

    def test_probability_rows_sum_to_one(self):
        g, _ = self.simulated(seed=63)
        fit = fit_msar(g, ar_order=1)
        assert np.allclose(fit.filtered_probs.sum(axis=1), 1.0, atol=1e-9)
        assert np.allclose(fit.smoothed_probs.sum(axis=1), 1.0, atol=1e-9)
        assert np.allclose(fit.covid_probability(), fit.smoothed_probs[:, 1])

    def test_em_histories_are_monotone(self):
        g, _ = self.simulated(seed=64)
        fit = fit_msar(g, ar_order=1)
        assert fit.em_histories
        for history in fit.em_histories:
            diffs = np.diff(np.asarray(history))
            assert np.all(diffs >= -1e-6 * (1.0 + np.abs(np.asarray(history)[1:])))

    def test_fit_is_deterministic(self):
        g, _ = self.simulated(seed=65)
        a = fit_msar(g, ar_order=1)
        b = fit_msar(g, ar_order=1)
        assert a.loglik == b.loglik
        assert a.trans == b.trans
        assert np.array_equal(a.smoothed_probs, b.smoothed_probs)

    def test_ar0_supported(self):
        g, _ = self.simulated(seed=66)
        fit = fit_msar(g, ar_order=0)
        assert fit.regimes[0].ar_coeffs == ()
        assert fit.n_obs == len(g)

    def test_validation(self):
        g, _ = self.simulated()
        with pytest.raises(BadParameter):
            fit_msar(g, ar_order=5)
        with pytest.raises(SeriesTooShort):
            fit_msar(make_series(np.random.default_rng(0).normal(size=30)), ar_order=1)


class TestReport:
    def hand_fit(self, probs):
        probs = np.asarray(probs, dtype=float)
        smoothed = np.column_stack([1.0 - probs, probs])
        reg = RegimeParams(intercept=0.0, ar_coeffs=(0.1,), sigma2=1.0)
        return RegimeFit(
            regimes=(reg, RegimeParams(0.0, (0.1,), 2.0)),
            trans=TransitionMatrix(0.9, 0.1, 0.3, 0.7),
            initial_dist=(0.5, 0.5),
            filtered_probs=smoothed.copy(),
            smoothed_probs=smoothed,
            loglik=-10.0,
            ar_order=1,
            start_week=MONDAY,
            em_histories=((-11.0, -10.0),),
        )

    def test_contiguous_runs(self):
        fit = self.hand_fit([0.1, 0.8, 0.9, 0.2, 0.7])
        spans = regime_report(fit, threshold=0.5)
        assert [(s.start_week, s.end_week) for s in spans] == [
            (MONDAY + WEEK, MONDAY + 2 * WEEK),
            (MONDAY + 4 * WEEK, MONDAY + 4 * WEEK),
        ]
        assert all(s.label == "COVID" for s in spans)

    def test_open_run_closes_at_series_end(self):
        fit = self.hand_fit([0.2, 0.9, 0.9])
        spans = regime_report(fit)
        assert len(spans) == 1
        assert spans[0].end_week == MONDAY + 2 * WEEK

    def test_no_runs(self):
        assert regime_report(self.hand_fit([0.1, 0.2])) == []

    def test_threshold_is_strict(self):
        # exactly at the threshold does not open a run
        fit = self.hand_fit([0.5, 0.5])
        assert regime_report(fit, threshold=0.5) == []

    def test_threshold_validated(self):
        fit = self.hand_fit([0.9])
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(BadParameter):
                regime_report(fit, threshold=bad)
