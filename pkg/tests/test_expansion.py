import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpcauth.exceptions import InvalidArgumentError, NoCyclesError
from mpcauth.expansion import (PAPER_LITERAL, DomainExpander, ExpansionParams, FeedbackCounters,
                               KalmanState, RetrainMonitor, acceleration, balancing_w1,
                               control_input, expansion_distance, filtered_expansion,
                               kalman_predict, kalman_update, resistance, retrain_signal,
                               stop_factor)

from oracles import kalman_scalar_cycle


# ── scalar pieces ──────────────────────────────────────────


class TestBalancingWeight:
    def test_ratio(self):
        assert balancing_w1(FeedbackCounters(2, 1, 10)) == pytest.approx(0.3)

    def test_floor(self):
        assert balancing_w1(FeedbackCounters(0, 0, 10), w1_floor=0.01) == 0.01

    def test_every_cycle(self):
        assert balancing_w1(FeedbackCounters(5, 5, 10)) == 1.0

    def test_no_cycles(self):
        with pytest.raises(NoCyclesError):
            balancing_w1(FeedbackCounters(0, 0, 0))

    def test_counter_invariant(self):
        with pytest.raises(InvalidArgumentError):
            FeedbackCounters(3, 3, 5)


class TestKinematics:
    def test_acceleration(self):
        assert acceleration(0, 0.1, 0.5, 0.2) == pytest.approx(0.2)
        assert acceleration(2, 0.1, 0.5, 0) == pytest.approx(0.4)
        with pytest.raises(InvalidArgumentError):
            acceleration(1, 0.1, 0.0, 0)

    def test_resistance(self):
        assert resistance(1, 0, 0) == 0
        assert resistance(1, 1, 0) == 1
        assert resistance(2, 0.3, 0.1) == pytest.approx(0.8)
        with pytest.raises(InvalidArgumentError):
            resistance(1, 1.5, 0)

    def test_distance(self):
        assert expansion_distance(1, 1, 3, 0) == 0
        assert expansion_distance(1, 0, 1, 0.1) == pytest.approx(0.6)
        with pytest.raises(InvalidArgumentError):
            expansion_distance(1, 0, 0, 0)

    @given(st.floats(0, 1), st.floats(0, 0.5))
    def test_stop_condition(self, mass, theta):
        # V = 0 means â = a, so with v0 = 0 nothing moves
        if abs(stop_factor(mass, theta)) < 1e-12:
            a = 0.7
            assert expansion_distance(a, resistance(a, mass, theta), 1, 0) == pytest.approx(0)

    def test_stop_exactly(self):
        a = 1.3
        assert expansion_distance(a, resistance(a, 0.75, 0.25), 1, 0) == 0

    def test_control_input(self):
        assert control_input(1, 0.2, 0.5, 0.1, 0.0, True) == 0
        assert control_input(1, 0.2, 0.5, 0.1, 1.0, True) == pytest.approx(0.5)
        assert control_input(0, 0.2, 0.5, 0.0, 1.0, False, rd_floor=0.5) == pytest.approx(0.8)


class TestKinematicIdentity:
    def test_random_draws(self):
        rng = np.random.default_rng(4)
        for _ in range(10_000):
            R_d, eps, W1, W2, mass, theta = (rng.uniform(0, 3), rng.random(), rng.uniform(0.05, 1),
                                             rng.uniform(-0.2, 0.2), rng.random(),
                                             rng.uniform(0, 0.1))
            a = acceleration(R_d, eps, W1, W2)
            S = expansion_distance(a, resistance(a, mass, theta), 1, 0)
            closed = 0.5 * (R_d * eps / W1 + W2) * (1 - mass - theta)
            assert abs(S - closed) < 1e-12


# ── Kalman filter ─────────────────────────────────────────


class TestKalman:
    def test_pure_kinematics(self):
        out = kalman_predict(KalmanState(), 1, 1.0, 0.0)
        np.testing.assert_array_equal(out.x, [0.5, 1.0])
        np.testing.assert_array_equal(out.P, np.zeros((2, 2)))

    def test_constant_velocity(self):
        out = kalman_predict(KalmanState([1, 2]), 1, 0.0, 0.0)
        np.testing.assert_array_equal(out.x, [3.0, 2.0])

    def test_process_noise_gain(self):
        out = kalman_predict(KalmanState(), 1, 0.0, 0.1)
        np.testing.assert_allclose(out.P, [[0.0025, 0.005], [0.005, 0.01]], atol=1e-15)

    def test_confident_prior_ignores_measurement(self):
        s = KalmanState([0.3, 0.1])
        out = kalman_update(s, 5.0, 1.0)
        np.testing.assert_array_equal(out.x, s.x)

    def test_uninformative_prior(self):
        out = kalman_update(KalmanState([0, 0], np.diag([1e12, 1.0])), 0.7, 1.0)
        assert out.x[0] == pytest.approx(0.7, abs=1e-9)

    def test_one_step(self):
        out = kalman_update(KalmanState([0, 0], np.eye(2)), 1.0, 1.0)
        np.testing.assert_allclose(out.x, [0.5, 0.0])
        assert out.P[0, 0] == pytest.approx(0.5)

    def test_bad_noise(self):
        with pytest.raises(InvalidArgumentError):
            kalman_update(KalmanState(), 0.0, 0.0)

    def test_state_validation(self):
        with pytest.raises(InvalidArgumentError):
            KalmanState([0, 0], [[1, 0.5], [0, 1]])
        with pytest.raises(InvalidArgumentError):
            KalmanState([0, 0], [[-1, 0], [0, 1]])

    def test_matches_component_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(500):
            x = rng.normal(size=2)
            M = rng.normal(size=(2, 2))
            P = M @ M.T
            u, sig, z, r = rng.normal(), rng.uniform(0, 0.5), rng.normal(), rng.uniform(0.01, 1)
            got = kalman_update(kalman_predict(KalmanState(x, P), 1, u, sig), z, r)
            (x0, x1), (p00, p01, p11) = kalman_scalar_cycle(
                x[0], x[1], P[0, 0], P[0, 1], P[1, 1], u, sig, z, r)
            np.testing.assert_allclose(got.x, [x0, x1], rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(got.P, [[p00, p01], [p01, p11]], rtol=1e-8, atol=1e-12)

    def test_posterior_variance_never_grows_on_update(self):
        rng = np.random.default_rng(12)
        s = KalmanState([0, 0], np.eye(2))
        for _ in range(10_000):
            prior = kalman_predict(s, 1, rng.normal(), rng.uniform(0, 0.3))
            s = kalman_update(prior, rng.normal(), rng.uniform(0.001, 1))
            assert s.P[0, 0] <= prior.P[0, 0] + 1e-12


# ── expansion output ──────────────────────────────────────


class TestFilteredExpansion:
    def test_state_estimate(self):
        assert filtered_expansion(KalmanState([0.2, 9]), rescale=0.5) == pytest.approx(0.1)

    def test_never_negative(self):
        assert filtered_expansion(KalmanState([-0.3, 0])) == 0.0

    def test_paper_literal(self):
        s = KalmanState([0, 0], [[0.04, 0.01], [0.01, 0.2]])
        assert filtered_expansion(s, PAPER_LITERAL) == pytest.approx(0.04)

    def test_unknown_mode(self):
        with pytest.raises(InvalidArgumentError):
            filtered_expansion(KalmanState(), "covariance")

    def test_expander_tracks_measurement(self):
        exp = DomainExpander()
        for _ in range(200):
            out = exp.step(0.0, 0.1)
        assert out == pytest.approx(0.1, abs=1e-3)

    def test_zero_covariance_start_ignores_measurement(self):
        exp = DomainExpander(ExpansionParams(sigma_a=0.0))
        assert exp.step(0.0, 0.1) == 0.0


# ── retrain trigger ───────────────────────────────────────


class TestRetrain:
    def test_examples(self):
        assert retrain_signal(5, 10, 0.4) is True
        assert retrain_signal(0, 10, 0.1) is False
        assert retrain_signal(4, 10, 0.4) is False

    def test_monitor_needs_full_window(self):
        mon = RetrainMonitor(window=4, tau=0.2)
        assert [mon.record(True) for _ in range(4)] == [False, False, False, True]

    def test_monitor_slides(self):
        mon = RetrainMonitor(window=4, tau=0.25)
        for e in [True, True, False, False]:
            mon.record(e)
        assert mon.signal
        mon.record(False)
        assert not mon.signal
