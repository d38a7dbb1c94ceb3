"""Feedback-driven domain expansion.

Expansion is modelled as motion under an acceleration (pushed by the
observed score gap, the distance from the top level, and the feedback
rate) and a resistance proportional to how much illegitimate mass the
legitimate domain already holds. A constant-acceleration Kalman filter
smooths the per-cycle expansion against behavior and sensor noise.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_finite, check_positive
from .exceptions import InvalidArgumentError, NoCyclesError

STATE_ESTIMATE = "state-estimate"
PAPER_LITERAL = "paper-literal"
OUTPUT_MODES = (STATE_ESTIMATE, PAPER_LITERAL)

_H = np.array([1.0, 0.0])


@dataclass(frozen=True)
class ExpansionParams:
    W2: float = 0.05
    theta: float = 0.02
    v0: float = 0.0
    sigma_a: float = 0.05
    r_obs: float = 0.01
    rescale: float = 1.0
    w1_floor: float = 0.05
    rd_floor: float = 0.5

    def __post_init__(self):
        check_finite(self.W2, "W2")
        for name in ("theta", "v0", "sigma_a"):
            check_positive(getattr(self, name), name, strict=False)
        for name in ("r_obs", "rescale", "w1_floor", "rd_floor"):
            check_positive(getattr(self, name), name)


@dataclass
class FeedbackCounters:
    """Second-factor tallies; ``N`` counts every authentication cycle."""

    n_l: int = 0
    n_a: int = 0
    N: int = 0

    def __post_init__(self):
        if min(self.n_l, self.n_a, self.N) < 0 or self.n_l + self.n_a > self.N:
            raise InvalidArgumentError(
                f"need non-negative counters with n_l + n_a <= N, got {self}")


@dataclass(frozen=True)
class KalmanState:
    x: np.ndarray = field(default_factory=lambda: np.zeros(2))
    P: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(2)
        P = np.array(self.P, dtype=float).reshape(2, 2)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
            raise InvalidArgumentError("Kalman state must be finite")
        if abs(P[0, 1] - P[1, 0]) > 1e-10 * max(1.0, np.abs(P).max()):
            raise InvalidArgumentError("covariance must be symmetric")
        if P[0, 0] < 0 or P[1, 1] < 0:
            raise InvalidArgumentError("covariance diagonal must be non-negative")
        x.flags.writeable = False
        P.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)


def balancing_w1(counters, w1_floor=0.05):
    if counters.N < 1:
        raise NoCyclesError("W1 is undefined before the first authentication cycle")
    return max((counters.n_l + counters.n_a) / counters.N, w1_floor)


def acceleration(R_d, eps, W1, W2, delta_noise=0.0):
    if W1 <= 0:
        raise InvalidArgumentError(f"W1 must be > 0, got {W1}")
    return R_d * eps / W1 + W2 + delta_noise


def resistance(a, illegit_mass_in_legit, theta):
    mass = float(illegit_mass_in_legit)
    if not -1e-12 <= mass <= 1 + 1e-12:
        raise InvalidArgumentError(f"probability mass must lie in [0, 1], got {mass}")
    return a * (mass + theta)


def stop_factor(illegit_mass_in_legit, theta):
    """``V``: 1 minus the resistance coefficient; expansion halts at 0."""
    return 1.0 - illegit_mass_in_legit - theta


def expansion_distance(a, a_hat, t, v0):
    if t < 1:
        raise InvalidArgumentError(f"t must be >= 1, got {t}")
    return 0.5 * (a - a_hat) * t * t + v0 * t


def control_input(R_d, eps_gap, W1, W2, V, password_correct, rd_floor=0.5):
    """Kalman control input for one feedback cycle.

    A correct password drives the legitimate domain with the stop factor
    ``V`` applied. A wrong password drives the illegitimate domain, with
    ``R_d`` floored so a user already at the top does not divide by zero.
    """
    if W1 <= 0:
        raise InvalidArgumentError(f"W1 must be > 0, got {W1}")
    if password_correct:
        return (R_d * eps_gap / W1 + W2) * V
    return eps_gap / (max(R_d, rd_floor) * W1) + W2


def _transition(t):
    F = np.array([[1.0, t], [0.0, 1.0]])
    B = np.array([t * t / 2.0, float(t)])
    G = np.array([[t ** 4 / 4.0, t ** 3 / 2.0], [t ** 3 / 2.0, t * t]])
    return F, B, G


def kalman_predict(state, t, u_k, sigma_a):
    F, B, G = _transition(t)
    x = F @ state.x + B * u_k
    P = F @ state.P @ F.T + G * sigma_a ** 2
    P = 0.5 * (P + P.T)
    return KalmanState(x, P)


def kalman_update(state, z_k, r_obs):
    """Scalar measurement update observing the first state component."""
    r_obs = float(r_obs)
    if not r_obs > 0:
        raise InvalidArgumentError(f"r_obs must be > 0, got {r_obs}")
    P = state.P
    PHt = P @ _H
    S = _H @ PHt + r_obs
    K = PHt / S
    x = state.x + K * (z_k - _H @ state.x)
    # Joseph form: same posterior as (I - KH)P but stays symmetric PSD
    I_KH = np.eye(2) - np.outer(K, _H)
    P_new = I_KH @ P @ I_KH.T + r_obs * np.outer(K, K)
    P_new = 0.5 * (P_new + P_new.T)
    return KalmanState(x, P_new)


def filtered_expansion(state, mode=STATE_ESTIMATE, rescale=1.0):
    if mode == STATE_ESTIMATE:
        raw = state.x[0]
    elif mode == PAPER_LITERAL:
        raw = (state.P @ _H)[0]
    else:
        raise InvalidArgumentError(f"unknown expansion output mode {mode!r}")
    return max(float(raw), 0.0) * rescale


def retrain_signal(password_events, window, tau):
    if window < 1:
        raise InvalidArgumentError(f"window must be >= 1, got {window}")
    return password_events / window > tau


class DomainExpander:
    """Kalman-filtered expansion for one domain of one principal.

    ``step`` runs a single predict/update cycle (t = 1) and returns the
    non-negative distance by which the domain should grow.
    """

    def __init__(self, params=None, mode=STATE_ESTIMATE):
        if mode not in OUTPUT_MODES:
            raise InvalidArgumentError(f"unknown expansion output mode {mode!r}")
        self.params = params if params is not None else ExpansionParams()
        self.mode = mode
        self.state = KalmanState()

    def step(self, u_k, z_k):
        p = self.params
        prior = kalman_predict(self.state, 1, u_k, p.sigma_a)
        self.state = kalman_update(prior, z_k, p.r_obs)
        return filtered_expansion(self.state, self.mode, p.rescale)


class RetrainMonitor:
    """Sliding count of password prompts over the last ``window`` cycles."""

    def __init__(self, window=50, tau=0.2):
        if window < 1:
            raise InvalidArgumentError(f"window must be >= 1, got {window}")
        self.window = int(window)
        self.tau = float(tau)
        self._events = deque(maxlen=self.window)

    def record(self, password_entered):
        self._events.append(bool(password_entered))
        return self.signal

    @property
    def signal(self):
        if len(self._events) < self.window:
            return False
        return retrain_signal(sum(self._events), self.window, self.tau)
