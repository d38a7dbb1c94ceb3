"""Estimator front ends for the MPC engine and the threshold baseline.

Both follow the scikit-learn conventions: constructor arguments are plain
hyper-parameters (so ``get_params``/``set_params``/``clone`` work), ``fit``
learns from labelled training scores and sets trailing-underscore
attributes, and ``predict`` maps a score sequence to reject flags.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from ._validation import as_score_array
from .domains import DEFAULT_DELTA, DEFAULT_THETA, init_boundaries
from .exceptions import InvalidArgumentError
from .expansion import ExpansionParams
from .privilege import EVIDENCE_RULES, MOVEMENT_MODES, MovementDistances, PrivilegeLadder
from .score_model import KdeModel
from .session import (Actor, Decision, PasswordPolicy, SessionEvent, ScoreSample,
                      run_baseline, run_mpc)

EXPANSION_MODES = ("on", "off", "paper-literal")


def _split_training(X, y):
    scores = as_score_array(X, "X")
    labels = np.asarray([_label(v) for v in np.asarray(y, dtype=object).reshape(-1)])
    if labels.shape != scores.shape:
        raise InvalidArgumentError("X and y must have the same length")
    return scores[labels == 0], scores[labels == 1]


def _label(value):
    """0 for legitimate, 1 for illegitimate; accepts ints, bools and actor names."""
    if isinstance(value, Actor):
        return int(value is Actor.ILLEGITIMATE)
    if isinstance(value, str):
        return int(Actor.parse(value) is Actor.ILLEGITIMATE)
    if value in (0, 1):
        return int(value)
    raise InvalidArgumentError(f"labels must be 0/1 or legit/illegit, got {value!r}")


def _as_events(X):
    scores = as_score_array(X, "X", allow_empty=True)
    # the actor is unknown at predict time; it is never read without a second factor
    return [SessionEvent(i, ScoreSample(i, float(s), Actor.LEGITIMATE))
            for i, s in enumerate(scores)]


class MPCAuthenticator(ClassifierMixin, BaseEstimator):
    """Multi-level privilege control over a stream of behavior scores.

    ``fit`` sets the initial legitimate/illegitimate domain boundaries and
    the per-class kernel densities from labelled training scores (label 1,
    or ``"illegit"``, marks illegitimate windows). ``run`` replays a
    session of :class:`~mpcauth.session.SessionEvent` and returns the full
    trace; ``predict`` returns 1 for each rejected (locked) window.

    Parameters
    ----------
    n_levels, level_spacing : ladder size and distance between levels.
    mu_l, mu_a : upward and downward movement per cycle; ``None`` means
        half a level up and one level down.
    mode : ``"gradual"`` (step by ``mu_l``/``mu_a``) or ``"jump"`` (a
        legitimate-domain score restores the top, an illegitimate one locks).
    lookback, evidence_rule : how far back slack windows look for evidence.
    expansion : ``"on"``, ``"off"`` or ``"paper-literal"`` (read the
        expansion off the posterior covariance instead of the state).
    second_factor : prompt for a password on failed cycles.
    legit_correct_prob, illegit_correct_prob : simulated password outcomes.
    random_state : seed for the password oracle.
    """

    def __init__(self, n_levels=4, level_spacing=1.0, mu_l=None, mu_a=None, mode="gradual",
                 lookback=20, evidence_rule="most-recent", delta=DEFAULT_DELTA,
                 theta=DEFAULT_THETA, bandwidth=None, expansion="on", second_factor=True,
                 W2=0.05, v0=0.0, sigma_a=0.05, r_obs=0.01, rescale=1.0, w1_floor=0.05,
                 rd_floor=0.5, r_min=0.1, r_max=10.0, eps_div=1e-9, tau=0.2,
                 retrain_window=50, initial_position=0.0, legit_correct_prob=1.0,
                 illegit_correct_prob=0.0, random_state=0):
        self.n_levels = n_levels
        self.level_spacing = level_spacing
        self.mu_l = mu_l
        self.mu_a = mu_a
        self.mode = mode
        self.lookback = lookback
        self.evidence_rule = evidence_rule
        self.delta = delta
        self.theta = theta
        self.bandwidth = bandwidth
        self.expansion = expansion
        self.second_factor = second_factor
        self.W2 = W2
        self.v0 = v0
        self.sigma_a = sigma_a
        self.r_obs = r_obs
        self.rescale = rescale
        self.w1_floor = w1_floor
        self.rd_floor = rd_floor
        self.r_min = r_min
        self.r_max = r_max
        self.eps_div = eps_div
        self.tau = tau
        self.retrain_window = retrain_window
        self.initial_position = initial_position
        self.legit_correct_prob = legit_correct_prob
        self.illegit_correct_prob = illegit_correct_prob
        self.random_state = random_state

    def _validate_params(self):
        if self.mode not in MOVEMENT_MODES:
            raise InvalidArgumentError(f"mode must be one of {MOVEMENT_MODES}, got {self.mode!r}")
        if self.evidence_rule not in EVIDENCE_RULES:
            raise InvalidArgumentError(f"evidence_rule must be one of {EVIDENCE_RULES}")
        if self.expansion not in EXPANSION_MODES:
            raise InvalidArgumentError(f"expansion must be one of {EXPANSION_MODES}")
        if not 0 < self.r_min <= self.r_max:
            raise InvalidArgumentError("need 0 < r_min <= r_max")
        ladder = PrivilegeLadder(self.n_levels, self.level_spacing)
        if not 0 <= self.initial_position <= ladder.bottom:
            raise InvalidArgumentError("initial_position must lie on the ladder")
        return ladder

    def fit(self, X, y):
        ladder = self._validate_params()
        legit, illegit = _split_training(X, y)
        self.partition_ = init_boundaries(legit, illegit, self.delta, self.theta)
        self.legit_kde_ = KdeModel.from_samples(legit, self.bandwidth)
        self.illegit_kde_ = KdeModel.from_samples(illegit, self.bandwidth)
        self.ladder_ = ladder
        self.distances_ = MovementDistances(
            ladder.l / 2.0 if self.mu_l is None else self.mu_l,
            ladder.l if self.mu_a is None else self.mu_a)
        self.expansion_params_ = ExpansionParams(
            W2=self.W2, theta=self.theta, v0=self.v0, sigma_a=self.sigma_a, r_obs=self.r_obs,
            rescale=self.rescale, w1_floor=self.w1_floor, rd_floor=self.rd_floor)
        self.password_policy_ = PasswordPolicy(self.legit_correct_prob, self.illegit_correct_prob)
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self):
        check_is_fitted(self, "partition_")

    def run(self, events, window_seconds=15.0):
        """Process a session and return its :class:`~mpcauth.session.SessionTrace`."""
        return run_mpc(events, self, window_seconds=window_seconds)

    def predict(self, X):
        """Reject flags (1 = locked) for a score sequence processed in order.

        No actor is known here, so the simulated second factor stays off.
        """
        self._check_fitted()
        saved = self.second_factor
        self.second_factor = False
        try:
            trace = self.run(_as_events(X))
        finally:
            self.second_factor = saved
        return np.array([int(d is Decision.REJECT) for d in trace.decisions])


class ThresholdAuthenticator(ClassifierMixin, BaseEstimator):
    """Traditional single-threshold authentication.

    A window is rejected iff its score is at least ``threshold``. With
    ``threshold=None`` the fit picks the training-set threshold with the
    fewest misclassifications (ties go to the smallest threshold).
    """

    def __init__(self, threshold=0.5):
        self.threshold = threshold

    def fit(self, X=None, y=None):
        if self.threshold is not None:
            if not 0.0 < self.threshold < 1.0:
                raise InvalidArgumentError("threshold must lie in (0, 1)")
            self.threshold_ = float(self.threshold)
        else:
            if X is None or y is None:
                raise InvalidArgumentError("threshold=None needs labelled training scores")
            legit, illegit = _split_training(X, y)
            candidates = np.unique(np.concatenate([legit, illegit]))
            candidates = candidates[(candidates > 0) & (candidates < 1)]
            if candidates.size == 0:
                candidates = np.array([0.5])
            errors = [(np.sum(legit >= c) + np.sum(illegit < c), c) for c in candidates]
            self.threshold_ = float(min(errors)[1])
        self.classes_ = np.array([0, 1])
        return self

    def run(self, events, window_seconds=15.0):
        check_is_fitted(self, "threshold_")
        return run_baseline(events, self.threshold_, window_seconds=window_seconds)

    def predict(self, X):
        if not hasattr(self, "threshold_"):
            raise NotFittedError("call fit before predict")
        return (as_score_array(X, "X", allow_empty=True) >= self.threshold_).astype(int)
