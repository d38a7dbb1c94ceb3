import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpcauth.exceptions import DegenerateLabelsError, InvalidArgumentError, InvalidRangeError
from mpcauth.score_model import (GaussianKDE, KdeModel, PlattParams, PlattScaler, fit_platt,
                                 kde_density, kde_integral, platt_score, silverman_bandwidth)

from oracles import gaussian_kde_sum, gaussian_mass


# ── platt_score ─────────────────────────────────────────────


class TestPlattScore:
    def test_midpoint(self):
        assert platt_score(0.0, PlattParams(1.0, 0.0)) == 0.5

    def test_negative_slope(self):
        # 1 / (1 + e^-2)
        assert platt_score(1.0, PlattParams(-2.0, 0.0)) == pytest.approx(0.8807970779778823, abs=1e-15)

    def test_tail_goes_to_zero(self):
        p = PlattParams(1.0, 0.0)
        assert platt_score(50.0, p) < 1e-20
        assert platt_score(800.0, p) == 0.0

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidArgumentError):
            platt_score(float("inf"), PlattParams(1.0, 0.0))
        with pytest.raises(InvalidArgumentError):
            PlattParams(float("nan"), 0.0)

    @given(st.floats(0.01, 10), st.floats(-5, 5),
           st.lists(st.floats(-20, 20), min_size=2, max_size=30, unique=True))
    def test_monotone_decreasing_for_positive_slope(self, A, B, margins):
        margins = sorted(margins)
        scores = platt_score(np.array(margins), PlattParams(A, B))
        assert np.all(np.diff(scores) <= 0)
        assert np.all((scores >= 0) & (scores <= 1))


# ── fit_platt ──────────────────────────────────────────────


class TestFitPlatt:
    def test_symmetric_separated_pair(self):
        params = fit_platt([-1.0, 1.0], [1, -1])
        assert params.A > 0
        assert abs(params.B) < 1e-6
        # regularized targets are 2/3 and 1/3, so A = ln 2 exactly at the optimum
        assert params.A == pytest.approx(math.log(2.0), abs=1e-5)

    def test_labels_independent_of_margins(self):
        rng = np.random.default_rng(7)
        m = rng.normal(size=500)
        margins = np.concatenate([m, m])
        labels = np.concatenate([np.ones(500, int), -np.ones(500, int)])
        params = fit_platt(margins, labels)
        assert abs(params.A) < 1e-3

    def test_constant_margins_give_zero_slope(self):
        params = fit_platt([0.3, 0.3, 0.3, 0.3], [1, -1, -1, -1])
        assert params.A == 0.0
        assert params.B == pytest.approx(math.log(4 / 2))

    def test_single_class_is_degenerate(self):
        with pytest.raises(DegenerateLabelsError):
            fit_platt([0.1, 0.2, 0.3], [1, 1, 1])

    def test_bad_inputs(self):
        with pytest.raises(InvalidArgumentError):
            fit_platt([0.1], [1])
        with pytest.raises(InvalidArgumentError):
            fit_platt([0.1, 0.2], [1, 0])
        with pytest.raises(InvalidArgumentError):
            fit_platt([0.1, 0.2, 0.3], [1, -1])

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        f = rng.normal(size=200)
        y = np.where(rng.random(200) < 1 / (1 + np.exp(2 * f)), 1, -1)
        assert fit_platt(f, y) == fit_platt(f, y)

    def test_matches_direct_minimizer(self):
        from scipy.optimize import minimize

        rng = np.random.default_rng(11)
        f = rng.normal(size=300)
        y = np.where(rng.random(300) < 1 / (1 + np.exp(1.5 * f - 0.3)), 1, -1)
        n_pos, n_neg = (y == 1).sum(), (y == -1).sum()
        t = np.where(y == 1, (n_pos + 1) / (n_pos + 2), 1 / (n_neg + 2))

        def loss(ab):
            z = ab[0] * f + ab[1]
            return np.sum(np.logaddexp(0, z) - (1 - t) * z)

        ref = minimize(loss, [0.0, 0.0], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 5000}).x
        params = fit_platt(f, y)
        assert params.A == pytest.approx(ref[0], abs=1e-4)
        assert params.B == pytest.approx(ref[1], abs=1e-4)

    @pytest.mark.parametrize("seed", range(5))
    def test_reproduces_label_frequency(self, seed):
        rng = np.random.default_rng(seed)
        f = rng.normal(size=1000)
        y = np.where(rng.random(1000) < 1 / (1 + np.exp(1.2 * f + 0.4)), 1, -1)
        p = platt_score(f, fit_platt(f, y))
        assert abs(p.mean() - np.mean(y == 1)) < 0.05

    def test_scaler_estimator(self):
        rng = np.random.default_rng(0)
        f = rng.normal(size=100)
        y = np.where(f < 0, 1, -1)
        scaler = PlattScaler().fit(f, y)
        out = scaler.transform(f)
        assert out.shape == (100,)
        assert scaler.predict_proba(f)[:, 1] == pytest.approx(out)
        assert scaler.get_params() == {"max_iter": 100}


# ── KDE ───────────────────────────────────────────────────


class TestKde:
    def test_single_sample_peak(self):
        model = KdeModel([0.5], 0.1)
        assert kde_density(model, 0.5) == pytest.approx(3.989422804014327, rel=1e-14)

    def test_far_tail(self):
        model = KdeModel([0.2, 0.3], 0.01)
        assert kde_density(model, 0.3 + 11 * 0.01) < 1e-20

    @given(st.floats(0.01, 0.5), st.floats(0, 0.5))
    def test_symmetric_samples(self, h, d):
        model = KdeModel([0.4, 0.6], h)
        assert kde_density(model, 0.5 - d) == pytest.approx(kde_density(model, 0.5 + d),
                                                            rel=1e-12, abs=1e-300)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        samples = rng.random(40)
        model = KdeModel(samples, 0.07)
        xs = rng.uniform(-0.2, 1.2, 100)
        got = kde_density(model, xs)
        for x, g in zip(xs, got):
            assert abs(g - gaussian_kde_sum(samples, 0.07, x)) < 1e-12

    def test_total_mass(self):
        model = KdeModel(np.random.default_rng(1).random(25), 0.05)
        assert kde_integral(model, -math.inf, math.inf) == pytest.approx(1.0, abs=1e-9)

    def test_one_sigma_mass(self):
        model = KdeModel([0.5], 0.1)
        assert kde_integral(model, 0.4, 0.6) == pytest.approx(0.6826894921370859, abs=1e-12)

    def test_zero_width(self):
        assert kde_integral(KdeModel([0.5], 0.1), 0.5, 0.5) == 0.0

    def test_reversed_range(self):
        with pytest.raises(InvalidRangeError):
            kde_integral(KdeModel([0.5], 0.1), 0.6, 0.4)

    def test_matches_erf_oracle(self):
        rng = np.random.default_rng(9)
        samples = rng.random(30)
        model = KdeModel(samples, 0.08)
        for lo, hi in [(0, 0.3), (0.2, 0.9), (-1, 2)]:
            assert kde_integral(model, lo, hi) == pytest.approx(
                gaussian_mass(samples, 0.08, lo, hi), abs=1e-12)

    @settings(max_examples=200)
    @given(st.floats(-0.5, 1.5), st.floats(0, 1), st.floats(0, 1))
    def test_additive(self, lo, w1, w2):
        model = KdeModel([0.1, 0.35, 0.4, 0.8], 0.06)
        mid, hi = lo + w1, lo + w1 + w2
        whole = kde_integral(model, lo, hi)
        parts = kde_integral(model, lo, mid) + kde_integral(model, mid, hi)
        assert abs(whole - parts) < 1e-12

    def test_mass_outside_unit_interval_not_renormalized(self):
        model = KdeModel([0.0], 0.1)
        assert kde_integral(model, 0.0, 1.0) == pytest.approx(0.5, abs=1e-12)

    def test_model_validation(self):
        with pytest.raises(InvalidArgumentError):
            KdeModel([], 0.1)
        with pytest.raises(InvalidArgumentError):
            KdeModel([0.5], 0.0)

    def test_silverman_rule(self):
        x = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        expected = 1.06 * np.std(x, ddof=1) * 5 ** -0.2
        assert silverman_bandwidth(x) == pytest.approx(expected)
        assert silverman_bandwidth([0.5]) == 1e-3

    def test_estimator(self):
        est = GaussianKDE().fit([0.2, 0.4, 0.6])
        assert est.bandwidth_ > 0
        assert est.score_samples([0.4]).shape == (1,)
        assert est.integral(-10, 10) == pytest.approx(1.0)
        assert GaussianKDE(bandwidth=0.1).fit([0.5]).bandwidth_ == 0.1
