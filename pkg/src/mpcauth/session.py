"""Score streams, the simulated second factor, and the engine loops.

A session is a sequence of authentication cycles (windows). Each window
carries one behavior score and the ground-truth actor that produced it;
the actor is only ever shown to the password oracle and to evaluation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
import enum
import logging
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from ._validation import check_finite, check_positive, check_unit_interval
from .domains import DomainClass, classify, expand_illegitimate, expand_legitimate
from .exceptions import InvalidArgumentError, SchemaError
from .expansion import (DomainExpander, FeedbackCounters, KalmanState, RetrainMonitor,
                        balancing_w1, control_input, stop_factor)
from .privilege import (EvidenceWindow, PrivilegeState, adjust_distances, effective_level,
                        is_locked, movement_step, reset_to_top)
from .score_model import kde_integral

logger = logging.getLogger(__name__)

EVENT_HEADER = ["window", "score", "actor", "password_entered", "password_correct"]
TRACE_HEADER = ["window", "score", "class", "position", "level", "alpha", "beta",
                "decision", "password"]

# two-sided 90% band used by the overlap measure
_Z95 = float(ndtri(0.95))


class Actor(enum.Enum):
    LEGITIMATE = "legit"
    ILLEGITIMATE = "illegit"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidArgumentError(f"actor must be 'legit' or 'illegit', got {value!r}") from None


class Decision(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class ScoreSample:
    window: int
    score: float
    actor: Actor

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 0:
            raise InvalidArgumentError(f"window must be a non-negative integer, got {self.window!r}")
        check_unit_interval(self.score, "score")


@dataclass(frozen=True)
class PasswordEvent:
    entered: bool = True
    correct: Optional[bool] = None

    def __post_init__(self):
        if not self.entered and self.correct is not None:
            raise InvalidArgumentError("password.correct is only defined when a password was entered")
        if self.entered and self.correct is None:
            raise InvalidArgumentError("an entered password must be marked correct or wrong")

    @property
    def label(self):
        if not self.entered:
            return ""
        return "correct" if self.correct else "wrong"


@dataclass(frozen=True)
class SessionEvent:
    window: int
    sample: ScoreSample
    password: Optional[PasswordEvent] = None


# --------------------------------------------------------------------------
# scenario generation

@dataclass(frozen=True)
class ScoreDistribution:
    """``normal``: N(loc, scale); ``uniform``: U[loc - scale, loc + scale].

    Draws are clipped to [0, 1]. ``scale = 0`` gives a point mass.
    """

    loc: float
    scale: float
    kind: str = "normal"

    def __post_init__(self):
        check_finite(self.loc, "loc")
        check_positive(self.scale, "scale", strict=False)
        if self.kind not in ("normal", "uniform"):
            raise InvalidArgumentError(f"unknown distribution kind {self.kind!r}")

    def draw(self, rng, size, shift=0.0):
        shift = np.broadcast_to(np.asarray(shift, dtype=float), (size,))
        if self.kind == "normal":
            raw = rng.normal(0.0, 1.0, size) * self.scale
        else:
            raw = rng.uniform(-1.0, 1.0, size) * self.scale
        return self.loc + shift + raw


@dataclass(frozen=True)
class ScenarioConfig:
    n_windows: int = 500
    legit_dist: ScoreDistribution = ScoreDistribution(0.3, 0.1)
    illegit_dist: ScoreDistribution = ScoreDistribution(0.7, 0.1)
    overlap_target: Optional[float] = None
    drift: float = 0.0
    sensor_noise_sd: float = 0.0
    illegit_fraction: float = 0.0
    intrusion_onset: Optional[int] = None
    n_train: int = 100
    seed: int = 0
    window_seconds: float = 15.0
    baseline_threshold: float = 0.5

    def __post_init__(self):
        if int(self.n_windows) != self.n_windows or self.n_windows < 1:
            raise InvalidArgumentError("n_windows must be a positive integer")
        if int(self.n_train) != self.n_train or self.n_train < 1:
            raise InvalidArgumentError("n_train must be a positive integer")
        check_finite(self.drift, "drift")
        check_positive(self.sensor_noise_sd, "sensor_noise_sd", strict=False)
        check_unit_interval(self.illegit_fraction, "illegit_fraction")
        check_positive(self.window_seconds, "window_seconds")
        if not 0.0 < self.baseline_threshold < 1.0:
            raise InvalidArgumentError("baseline_threshold must lie in (0, 1)")
        if self.overlap_target is not None:
            check_unit_interval(self.overlap_target, "overlap_target")
        if self.intrusion_onset is not None and not 0 <= self.intrusion_onset <= self.n_windows:
            raise InvalidArgumentError("intrusion_onset must lie in [0, n_windows]")

    @property
    def onset(self):
        """First window produced by the illegitimate actor."""
        if self.intrusion_onset is not None:
            return int(self.intrusion_onset)
        return int(round(self.n_windows * (1.0 - self.illegit_fraction)))


def _population_overlap(m_lo, s_lo, m_hi, s_hi, w_hi):
    """Expected share of scores inside [p5(upper), p95(lower)] for two normals."""
    lo_edge = m_hi - _Z95 * s_hi
    hi_edge = m_lo + _Z95 * s_lo
    if hi_edge <= lo_edge:
        return 0.0

    def mass(m, s):
        if s == 0:
            return float(lo_edge <= m <= hi_edge)
        return float(ndtr((hi_edge - m) / s) - ndtr((lo_edge - m) / s))

    return (1.0 - w_hi) * mass(m_lo, s_lo) + w_hi * mass(m_hi, s_hi)


def calibrate_overlap(config):
    """Return (legit, illegit) distributions re-spaced to hit ``overlap_target``.

    Both locations move symmetrically about their midpoint; scales stay.
    Only normal distributions with positive spread can be calibrated.
    """
    legit, illegit = config.legit_dist, config.illegit_dist
    target = config.overlap_target
    if target is None:
        return legit, illegit
    if legit.kind != "normal" or illegit.kind != "normal":
        raise InvalidArgumentError("overlap calibration needs normal distributions")
    noise = config.sensor_noise_sd
    s_lo = math.hypot(legit.scale, noise)
    s_hi = math.hypot(illegit.scale, noise)
    if s_lo == 0 and s_hi == 0:
        raise InvalidArgumentError("overlap calibration needs a positive spread")
    w = config.illegit_fraction if config.illegit_fraction > 0 else 0.5
    centre = 0.5 * (legit.loc + illegit.loc)

    def gap(d):
        return _population_overlap(centre - d / 2, s_lo, centre + d / 2, s_hi, w) - target

    if gap(0.0) < 0:
        raise InvalidArgumentError(
            f"overlap_target {target} exceeds the attainable maximum {gap(0.0) + target:.4f}")
    if target == 0.0:
        d = _Z95 * (s_lo + s_hi)
    else:
        d = brentq(gap, 0.0, _Z95 * (s_lo + s_hi), xtol=1e-12)
    return (ScoreDistribution(centre - d / 2, legit.scale, "normal"),
            ScoreDistribution(centre + d / 2, illegit.scale, "normal"))


def realized_overlap(scores, actors):
    """Share of scores between the 5th percentile of the illegitimate
    population and the 95th percentile of the legitimate one.

    ``None`` when either population is missing.
    """
    s = np.asarray(scores, dtype=float)
    a = np.array([Actor.parse(x) is Actor.ILLEGITIMATE for x in actors], dtype=bool)
    if a.all() or not a.any():
        return None
    lo_edge = float(np.percentile(s[a], 5))
    hi_edge = float(np.percentile(s[~a], 95))
    if hi_edge < lo_edge:
        return 0.0
    return float(np.mean((s >= lo_edge) & (s <= hi_edge)))


@dataclass
class Session:
    """A generated session plus the labelled training scores for fitting."""

    config: ScenarioConfig
    events: list
    train_scores: np.ndarray
    train_actors: list
    realized_overlap: Optional[float]
    legit_dist: ScoreDistribution
    illegit_dist: ScoreDistribution

    @property
    def train_labels(self):
        return np.array([int(a is Actor.ILLEGITIMATE) for a in self.train_actors])


def generate_session(config):
    """Draw a deterministic session from ``config``.

    Legitimate windows come first and follow the legitimate distribution
    shifted by ``drift`` per window; from ``config.onset`` on, the
    illegitimate actor takes over. Sensor noise is added to every score
    and scores are clipped to [0, 1]. Training scores are drawn from the
    undrifted distributions with the same sensor noise.
    """
    legit, illegit = calibrate_overlap(config)
    train_seq, stream_seq = np.random.SeedSequence(config.seed).spawn(2)
    train_rng = np.random.default_rng(train_seq)
    rng = np.random.default_rng(stream_seq)
    noise = config.sensor_noise_sd

    n_tr = config.n_train
    train = np.concatenate([legit.draw(train_rng, n_tr), illegit.draw(train_rng, n_tr)])
    if noise > 0:
        train = train + train_rng.normal(0.0, noise, train.size)
    train = np.clip(train, 0.0, 1.0)
    train_actors = [Actor.LEGITIMATE] * n_tr + [Actor.ILLEGITIMATE] * n_tr

    n = config.n_windows
    onset = config.onset
    windows = np.arange(n)
    legit_scores = legit.draw(rng, n, shift=config.drift * windows)
    illegit_scores = illegit.draw(rng, n)
    is_illegit = windows >= onset
    scores = np.where(is_illegit, illegit_scores, legit_scores)
    if noise > 0:
        scores = scores + rng.normal(0.0, noise, n)
    scores = np.clip(scores, 0.0, 1.0)

    events = []
    actors = []
    for w in range(n):
        actor = Actor.ILLEGITIMATE if is_illegit[w] else Actor.LEGITIMATE
        actors.append(actor)
        events.append(SessionEvent(w, ScoreSample(w, float(scores[w]), actor)))
    return Session(config, events, train, train_actors,
                   realized_overlap(scores, actors), legit, illegit)


# --------------------------------------------------------------------------
# event files

def _parse_bool(text, column, line):
    text = text.strip()
    if text in ("", None):
        return None
    if text in ("0", "1"):
        return text == "1"
    raise SchemaError(f"{column} must be 0, 1 or empty, got {text!r}", line=line, column=column)


def replay(path):
    """Read events from a CSV with header ``window,score,actor,password_entered,password_correct``.

    Raises :class:`SchemaError` naming the line of the first malformed row,
    and ``OSError`` for I/O failures.
    """
    path = Path(path)
    events = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return events
        header = [h.strip() for h in header]
        if header != EVENT_HEADER:
            missing = [c for c in EVENT_HEADER if c not in header]
            extra = [c for c in header if c not in EVENT_HEADER]
            bad = (missing or extra or header)[0]
            raise SchemaError(f"bad header column {bad!r}; expected {','.join(EVENT_HEADER)}",
                              line=1, column=bad)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(EVENT_HEADER):
                raise SchemaError(f"expected {len(EVENT_HEADER)} fields, got {len(row)}", line=line)
            w_text, s_text, a_text, pe_text, pc_text = row
            try:
                window = int(w_text)
            except ValueError:
                raise SchemaError(f"window must be an integer, got {w_text!r}",
                                  line=line, column="window") from None
            try:
                score = float(s_text)
            except ValueError:
                raise SchemaError(f"score must be a number, got {s_text!r}",
                                  line=line, column="score") from None
            if not (math.isfinite(score) and 0.0 <= score <= 1.0):
                raise SchemaError(f"score must lie in [0, 1], got {s_text}", line=line, column="score")
            try:
                actor = Actor.parse(a_text)
            except InvalidArgumentError:
                raise SchemaError(f"actor must be legit or illegit, got {a_text!r}",
                                  line=line, column="actor") from None
            entered = _parse_bool(pe_text, "password_entered", line)
            correct = _parse_bool(pc_text, "password_correct", line)
            if window < 0:
                raise SchemaError("window must be non-negative", line=line, column="window")
            if entered:
                if correct is None:
                    raise SchemaError("password_correct is required when a password was entered",
                                      line=line, column="password_correct")
                password = PasswordEvent(True, correct)
            else:
                if correct is not None:
                    raise SchemaError("password_correct given without a password entry",
                                      line=line, column="password_correct")
                password = PasswordEvent(False) if entered is False else None
            events.append(SessionEvent(window, ScoreSample(window, score, actor), password))
    return events


def write_events(events, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_HEADER)
        for ev in events:
            pw = ev.password
            entered = "" if pw is None else str(int(pw.entered))
            correct = "" if pw is None or pw.correct is None else str(int(pw.correct))
            writer.writerow([ev.window, repr(ev.sample.score), ev.sample.actor.value, entered, correct])


# --------------------------------------------------------------------------
# second factor

@dataclass(frozen=True)
class PasswordPolicy:
    """When the simulated user is prompted and how reliably they answer.

    The default prompt fires on any slack- or illegitimate-domain score
    while the principal sits below the top level.
    """

    legit_correct_prob: float = 1.0
    illegit_correct_prob: float = 0.0

    def __post_init__(self):
        check_unit_interval(self.legit_correct_prob, "legit_correct_prob")
        check_unit_interval(self.illegit_correct_prob, "illegit_correct_prob")

    def should_prompt(self, level, cls):
        return level > 1 and cls is not DomainClass.LEGITIMATE


def password_oracle(actor, policy, rng):
    """Simulate one password entry by ``actor``; consumes exactly one draw."""
    p = (policy.legit_correct_prob if Actor.parse(actor) is Actor.LEGITIMATE
         else policy.illegit_correct_prob)
    return PasswordEvent(True, bool(rng.random() < p))


# --------------------------------------------------------------------------
# traces

@dataclass(frozen=True)
class TraceRecord:
    window: int
    score: float
    domain_class: Optional[DomainClass]
    position: float
    level: int
    alpha: float
    beta: float
    decision: Decision
    password: str = ""
    actor: Optional[Actor] = None
    retrain: bool = False

    def as_row(self):
        return [self.window, repr(self.score),
                "none" if self.domain_class is None else self.domain_class.value,
                repr(self.position), self.level, repr(self.alpha), repr(self.beta),
                self.decision.value, self.password]


@dataclass
class SessionTrace:
    records: list = field(default_factory=list)
    n_levels: Optional[int] = None
    window_seconds: float = 15.0

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, item):
        return self.records[item]

    @property
    def decisions(self):
        return [r.decision for r in self.records]

    @property
    def actors(self):
        return [r.actor for r in self.records]

    def check(self):
        for i, rec in enumerate(self.records):
            if rec.window != i:
                raise InvalidArgumentError(f"trace windows must be contiguous from 0; "
                                           f"record {i} has window {rec.window}")


def write_trace(trace, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for rec in trace.records:
            writer.writerow(rec.as_row())


# --------------------------------------------------------------------------
# engine loops

def _check_contiguous(events):
    events = list(events)
    for i, ev in enumerate(events):
        if ev.window != i:
            raise InvalidArgumentError(
                f"events must be numbered contiguously from 0; event {i} has window {ev.window}")
    return events


def run_mpc(events: Iterable[SessionEvent], engine, window_seconds=15.0):
    """Run a fitted :class:`~mpcauth.estimators.MPCAuthenticator` over ``events``.

    Per window: classify the score, move the privilege position, then
    handle a password entry (recorded in the event, or drawn from the
    oracle when a prompt fires and the second factor is on). A correct
    entry resets to the top and, for a slack score, expands the legitimate
    domain toward it; a wrong entry on a slack score expands the
    illegitimate domain. The window is
    rejected iff the position sits at the lock-out level.
    """
    events = _check_contiguous(events)
    engine._check_fitted()
    ladder = engine.ladder_
    base = engine.distances_
    dist = base
    partition = engine.partition_
    state = PrivilegeState(engine.initial_position, ladder)
    evidence = EvidenceWindow(engine.lookback, engine.evidence_rule)
    params = engine.expansion_params_
    expanding = engine.expansion != "off"
    out_mode = "paper-literal" if engine.expansion == "paper-literal" else "state-estimate"
    legit_exp = DomainExpander(params, out_mode)
    illegit_exp = DomainExpander(params, out_mode)
    legit_exp.state = KalmanState([0.0, params.v0])
    illegit_exp.state = KalmanState([0.0, params.v0])
    counters = FeedbackCounters()
    monitor = RetrainMonitor(engine.retrain_window, engine.tau)
    policy = engine.password_policy_
    rng = np.random.default_rng(engine.random_state)

    trace = SessionTrace(n_levels=ladder.n, window_seconds=window_seconds)
    for ev in events:
        score = ev.sample.score
        cls = classify(partition, score)
        state = movement_step(state, cls, evidence, dist, engine.mode)
        counters.N += 1

        pw = ev.password
        if pw is None and engine.second_factor and policy.should_prompt(effective_level(state), cls):
            pw = password_oracle(ev.sample.actor, policy, rng)

        if pw is not None and pw.entered:
            if cls is DomainClass.SLACK:
                if pw.correct:
                    counters.n_l += 1
                else:
                    counters.n_a += 1
            r_d = state.position
            W1 = balancing_w1(counters, params.w1_floor)
            if pw.correct:
                evidence.relabel_latest(DomainClass.LEGITIMATE)
                gap = score - partition.alpha
                if expanding and cls is DomainClass.SLACK:
                    mass = kde_integral(engine.illegit_kde_, 0.0, partition.alpha)
                    V = stop_factor(mass, params.theta)
                    u = control_input(r_d, gap, W1, params.W2, V, True, params.rd_floor)
                    partition = expand_legitimate(partition, legit_exp.step(u, gap))
                state = reset_to_top(state)
            else:
                evidence.relabel_latest(DomainClass.ILLEGITIMATE)
                gap = partition.beta - score
                if expanding and cls is DomainClass.SLACK:
                    u = control_input(r_d, gap, W1, params.W2, None, False, params.rd_floor)
                    partition = expand_illegitimate(partition, illegit_exp.step(u, gap))
            if expanding:
                dist = adjust_distances(base, engine.legit_kde_, engine.illegit_kde_, partition,
                                        engine.r_min, engine.r_max, engine.eps_div)

        entered = pw is not None and pw.entered
        was_flagged = bool(trace.records) and trace.records[-1].retrain
        retrain = monitor.record(entered)
        if retrain and not was_flagged:
            logger.info("retrain signal raised at window %d", ev.window)
        decision = Decision.REJECT if is_locked(state) else Decision.ACCEPT
        trace.records.append(TraceRecord(
            ev.window, score, cls, state.position, effective_level(state),
            partition.alpha, partition.beta, decision,
            "" if pw is None else pw.label, ev.sample.actor, retrain))
    return trace


def run_baseline(events: Iterable[SessionEvent], omega, window_seconds=15.0):
    """Stateless threshold rule: reject a window iff its score is >= ``omega``."""
    omega = check_finite(omega, "omega")
    if not 0.0 < omega < 1.0:
        raise InvalidArgumentError(f"threshold must lie in (0, 1), got {omega}")
    events = _check_contiguous(events)
    trace = SessionTrace(n_levels=None, window_seconds=window_seconds)
    nan = float("nan")
    for ev in events:
        score = ev.sample.score
        decision = Decision.REJECT if score >= omega else Decision.ACCEPT
        trace.records.append(TraceRecord(ev.window, score, None, nan, 0, nan, nan, decision,
                                         "", ev.sample.actor))
    return trace
