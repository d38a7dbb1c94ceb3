"""Three-way partition of the score interval and score classification."""

from dataclasses import dataclass, replace
import enum

import numpy as np

from ._validation import as_score_array, check_finite, check_positive
from .exceptions import InsufficientTrainingDataError, InvalidArgumentError

DEFAULT_DELTA = 1e-3
DEFAULT_THETA = 0.02


class DomainClass(enum.Enum):
    LEGITIMATE = "legitimate"
    SLACK = "slack"
    ILLEGITIMATE = "illegitimate"

    @property
    def short(self):
        return self.value[0].upper()


@dataclass(frozen=True)
class DomainPartition:
    """Legitimate domain ``[0, alpha]``, illegitimate ``[beta, 1]``, slack between.

    ``theta`` is the minimum gap kept between the two domains and ``delta``
    the offset used to break ties when boundaries are initialized.
    """

    alpha: float
    beta: float
    theta: float = DEFAULT_THETA
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        alpha = check_finite(self.alpha, "alpha")
        beta = check_finite(self.beta, "beta")
        theta = check_positive(self.theta, "theta", strict=False)
        check_positive(self.delta, "delta")
        # tolerate float round-off from the capping arithmetic
        if alpha < 0 or beta > 1 or alpha + theta > beta + 1e-12:
            raise InvalidArgumentError(
                f"invalid partition: need 0 <= alpha, alpha + theta <= beta <= 1 "
                f"(alpha={alpha}, beta={beta}, theta={theta})")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)


def init_boundaries(legit_scores, illegit_scores, delta=DEFAULT_DELTA, theta=DEFAULT_THETA):
    """Initial boundaries from labelled training scores.

    ``alpha`` stops below the smallest illegitimate score and ``beta`` above
    the largest legitimate one, so ``[0, alpha]`` holds no illegitimate
    training score and ``[beta, 1]`` no legitimate one. When the classes are
    separable the boundaries sit on the extreme scores of each class instead.
    """
    try:
        legit = as_score_array(legit_scores, "legit_scores")
        illegit = as_score_array(illegit_scores, "illegit_scores")
    except InvalidArgumentError as exc:
        if "non-empty" in str(exc):
            raise InsufficientTrainingDataError(str(exc)) from exc
        raise
    delta = check_positive(delta, "delta")
    theta = check_positive(theta, "theta", strict=False)
    if theta > 1:
        raise InvalidArgumentError("theta must not exceed 1")

    max_legit = float(legit.max())
    min_illegit = float(illegit.min())
    alpha = min(max_legit, min_illegit - delta)
    beta = max(min_illegit, max_legit + delta)
    alpha = min(max(alpha, 0.0), 1.0)
    beta = min(max(beta, 0.0), 1.0)
    if alpha + theta > beta:
        if beta < theta:
            beta = theta
        alpha = beta - theta
    return DomainPartition(alpha, beta, theta, delta)


def classify(partition, score):
    score = float(score)
    if score <= partition.alpha:
        return DomainClass.LEGITIMATE
    if score >= partition.beta:
        return DomainClass.ILLEGITIMATE
    return DomainClass.SLACK


def classify_many(partition, scores):
    s = np.asarray(scores, dtype=float)
    return [classify(partition, v) for v in s.reshape(-1)]


def expand_legitimate(partition, S):
    S = check_finite(S, "S")
    if S < 0:
        raise InvalidArgumentError(f"expansion distance must be >= 0, got {S}")
    if S == 0:
        return partition
    cap = partition.beta - partition.theta
    alpha = max(partition.alpha, min(partition.alpha + S, cap))
    return replace(partition, alpha=alpha)


def expand_illegitimate(partition, S):
    S = check_finite(S, "S")
    if S < 0:
        raise InvalidArgumentError(f"expansion distance must be >= 0, got {S}")
    if S == 0:
        return partition
    floor = partition.alpha + partition.theta
    beta = min(partition.beta, max(partition.beta - S, floor))
    return replace(partition, beta=beta)
