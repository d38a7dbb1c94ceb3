"""Privilege ladder, continuous privilege position, and movement rules.

Position 0 is the top level (full access) and ``(n - 1) * l`` the bottom
level, which locks the device. A position between two levels grants the
privilege of the lower one.
"""

from collections import deque
from dataclasses import dataclass, replace
import math

from ._validation import check_finite, check_positive
from .domains import DomainClass
from .exceptions import InvalidArgumentError
from .score_model import kde_integral

GRADUAL = "gradual"
JUMP = "jump"
MOVEMENT_MODES = (GRADUAL, JUMP)

MOST_RECENT = "most-recent"
MAJORITY = "majority"
EVIDENCE_RULES = (MOST_RECENT, MAJORITY)


@dataclass(frozen=True)
class PrivilegeLadder:
    n: int = 4
    l: float = 1.0

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise InvalidArgumentError(f"ladder needs n >= 2 levels, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "l", check_positive(self.l, "l"))

    @property
    def bottom(self):
        return (self.n - 1) * self.l

    def level_position(self, k):
        if not 1 <= k <= self.n:
            raise InvalidArgumentError(f"level must be in 1..{self.n}, got {k}")
        return (k - 1) * self.l


@dataclass(frozen=True)
class PrivilegeState:
    position: float
    ladder: PrivilegeLadder

    def __post_init__(self):
        pos = check_finite(self.position, "position")
        if not 0.0 <= pos <= self.ladder.bottom:
            raise InvalidArgumentError(
                f"position {pos} outside [0, {self.ladder.bottom}]")
        object.__setattr__(self, "position", pos)

    @classmethod
    def top(cls, ladder):
        return cls(0.0, ladder)


@dataclass(frozen=True)
class MovementDistances:
    mu_l: float
    mu_a: float

    def __post_init__(self):
        object.__setattr__(self, "mu_l", check_positive(self.mu_l, "mu_l"))
        object.__setattr__(self, "mu_a", check_positive(self.mu_a, "mu_a"))

    @classmethod
    def for_ladder(cls, ladder):
        """Half a level up, a full level down."""
        return cls(ladder.l / 2.0, ladder.l)


class EvidenceWindow:
    """The last ``lookback`` domain classes, newest last."""

    def __init__(self, lookback=20, rule=MOST_RECENT, entries=()):
        if int(lookback) != lookback or lookback < 1:
            raise InvalidArgumentError(f"lookback must be a positive integer, got {lookback!r}")
        if rule not in EVIDENCE_RULES:
            raise InvalidArgumentError(f"unknown evidence rule {rule!r}")
        self.lookback = int(lookback)
        self.rule = rule
        self.entries = deque(entries, maxlen=self.lookback)

    def push(self, cls):
        self.entries.append(cls)

    def relabel_latest(self, cls):
        """Overwrite the newest entry, e.g. after a second-factor outcome."""
        if self.entries:
            self.entries[-1] = cls
        else:
            self.entries.append(cls)

    def lean(self):
        """Direction the recent evidence points to, or ``None`` when undecided."""
        if self.rule == MOST_RECENT:
            for cls in reversed(self.entries):
                if cls is not DomainClass.SLACK:
                    return cls
            return None
        legit = sum(c is DomainClass.LEGITIMATE for c in self.entries)
        illegit = sum(c is DomainClass.ILLEGITIMATE for c in self.entries)
        if legit > illegit:
            return DomainClass.LEGITIMATE
        if illegit > legit:
            return DomainClass.ILLEGITIMATE
        return None

    def copy(self):
        return EvidenceWindow(self.lookback, self.rule, self.entries)

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return (f"EvidenceWindow(lookback={self.lookback}, rule={self.rule!r}, "
                f"entries=[{''.join(c.short for c in self.entries)}])")


def effective_level(state):
    ladder = state.ladder
    # snap near-integer ratios so float drift never skips a level boundary
    ratio = state.position / ladder.l
    nearest = round(ratio)
    if abs(ratio - nearest) < 1e-9:
        ratio = nearest
    return min(1 + math.ceil(ratio), ladder.n)


def _move(state, delta):
    pos = min(max(state.position + delta, 0.0), state.ladder.bottom)
    return replace(state, position=pos)


def movement_step(state, cls, evidence, dist, mode=GRADUAL):
    """Move the privilege position for one authentication cycle.

    The slack decision reads ``evidence`` *before* ``cls`` is appended to
    it. ``evidence`` is mutated in place; the new state is returned.
    """
    if mode not in MOVEMENT_MODES:
        raise InvalidArgumentError(f"unknown movement mode {mode!r}")
    if cls is DomainClass.LEGITIMATE:
        new = replace(state, position=0.0) if mode == JUMP else _move(state, -dist.mu_l)
    elif cls is DomainClass.ILLEGITIMATE:
        new = (replace(state, position=state.ladder.bottom) if mode == JUMP
               else _move(state, dist.mu_a))
    else:
        lean = evidence.lean()
        if lean is DomainClass.LEGITIMATE:
            new = _move(state, -dist.mu_l)
        elif lean is DomainClass.ILLEGITIMATE:
            new = _move(state, dist.mu_a)
        else:
            new = state
    evidence.push(cls)
    return new


def is_locked(state):
    """True once the position has reached the bottom level itself.

    A position just above the bottom reports the bottom as its effective
    level but is not yet a lock-out.
    """
    return state.position >= state.ladder.bottom - 1e-9


def reset_to_top(state):
    return replace(state, position=0.0)


def _clamped_ratio(num, den, r_min, r_max, eps_div):
    if den < eps_div:
        return r_max
    return min(max(num / den, r_min), r_max)


def adjust_distances(dist, legit_kde, illegit_kde, partition,
                     r_min=0.1, r_max=10.0, eps_div=1e-9):
    """Scale movement distances by how strongly each domain favors its class.

    The upward step grows with the legitimate-to-illegitimate mass ratio
    inside ``[0, alpha]``; the downward step with the illegitimate-to-
    legitimate ratio inside ``[beta, 1]``. Ratios are clamped to
    ``[r_min, r_max]`` and a near-zero denominator yields ``r_max``.
    """
    if not 0 < r_min <= r_max:
        raise InvalidArgumentError("need 0 < r_min <= r_max")
    a, b = partition.alpha, partition.beta
    up = _clamped_ratio(kde_integral(legit_kde, 0.0, a), kde_integral(illegit_kde, 0.0, a),
                        r_min, r_max, eps_div)
    down = _clamped_ratio(kde_integral(illegit_kde, b, 1.0), kde_integral(legit_kde, b, 1.0),
                          r_min, r_max, eps_div)
    return MovementDistances(dist.mu_l * up, dist.mu_a * down)
