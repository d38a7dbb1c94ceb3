"""Confusion rates, authentication delay, and privilege-level occupancy."""

from dataclasses import dataclass
import csv
import json
from typing import Optional

from .exceptions import InvalidArgumentError
from .session import Actor, Decision


@dataclass(frozen=True)
class ConfusionCounts:
    TA: int = 0
    TR: int = 0
    FA: int = 0
    FR: int = 0

    @property
    def total(self):
        return self.TA + self.TR + self.FA + self.FR


@dataclass(frozen=True)
class Report:
    acc: Optional[float]
    prec: Optional[float]
    tar: Optional[float]
    trr: Optional[float]
    far: Optional[float]
    frr: Optional[float]
    delay_windows: Optional[int] = None
    delay_minutes: Optional[float] = None
    level_occupancy: Optional[tuple] = None

    def as_dict(self, n_levels=None):
        """Flat mapping with the published field names."""
        out = {k: getattr(self, k) for k in ("acc", "prec", "tar", "trr", "far", "frr",
                                             "delay_windows", "delay_minutes")}
        occ = self.level_occupancy
        n = n_levels if n_levels is not None else (len(occ) if occ else 0)
        for k in range(n):
            out[f"occupancy_{k + 1}"] = occ[k] if occ else None
        return out


def _actors_for(trace, ground_truth_actor):
    n = len(trace)
    if ground_truth_actor is None:
        actors = trace.actors
    elif isinstance(ground_truth_actor, (Actor, str)):
        actors = [Actor.parse(ground_truth_actor)] * n
    else:
        actors = [Actor.parse(a) for a in ground_truth_actor]
    if len(actors) != n or any(a is None for a in actors):
        raise InvalidArgumentError("need one ground-truth actor per trace window")
    return actors


def _correct(decision, actor):
    return (decision is Decision.ACCEPT) == (actor is Actor.LEGITIMATE)


def confusion(trace, ground_truth_actor=None):
    """Tally accept/reject decisions against the true actor.

    ``ground_truth_actor`` may be a single actor for the whole trace, one
    actor per window, or ``None`` to use the actors stored in the trace.
    """
    if len(trace) == 0:
        raise InvalidArgumentError("cannot score an empty trace")
    counts = {"TA": 0, "TR": 0, "FA": 0, "FR": 0}
    for rec, actor in zip(trace, _actors_for(trace, ground_truth_actor)):
        accept = rec.decision is Decision.ACCEPT
        if actor is Actor.LEGITIMATE:
            counts["TA" if accept else "FR"] += 1
        else:
            counts["FA" if accept else "TR"] += 1
    return ConfusionCounts(**counts)


def _ratio(num, den):
    return num / den if den else None


def rates(counts):
    """ACC, PREC, TAR, TRR, FAR, FRR; a rate with a zero denominator is ``None``."""
    TA, TR, FA, FR = counts.TA, counts.TR, counts.FA, counts.FR
    return Report(
        acc=_ratio(TA + TR, TA + TR + FA + FR),
        prec=_ratio(TA, TA + FA),
        tar=_ratio(TA, TA + FR),
        trr=_ratio(TR, TR + FA),
        far=_ratio(FA, FA + TR),
        frr=_ratio(FR, FR + TA),
    )


def authentication_delay(trace, ground_truth_actor=None, k_stable=5, window_seconds=None):
    """First window from which every decision is correct through the end.

    At least ``k_stable`` windows must remain from that point on. Returns
    ``(windows, minutes)``, or ``(None, None)`` when the trace never settles.
    """
    if int(k_stable) != k_stable or k_stable < 1:
        raise InvalidArgumentError("k_stable must be a positive integer")
    if window_seconds is None:
        window_seconds = trace.window_seconds
    actors = _actors_for(trace, ground_truth_actor)
    n = len(trace)
    start = n
    # walk backwards to find where the all-correct suffix begins
    for i in range(n - 1, -1, -1):
        if not _correct(trace[i].decision, actors[i]):
            break
        start = i
    if n - start < k_stable:
        return None, None
    return start, start * window_seconds / 60.0


def level_occupancy(trace, ladder=None):
    """Fraction of windows spent at each effective level 1..n."""
    if len(trace) == 0:
        raise InvalidArgumentError("cannot compute occupancy of an empty trace")
    n = ladder.n if ladder is not None else trace.n_levels
    if n is None:
        raise InvalidArgumentError("trace carries no privilege levels")
    counts = [0] * n
    for rec in trace:
        if not 1 <= rec.level <= n:
            raise InvalidArgumentError(f"window {rec.window} has level {rec.level} outside 1..{n}")
        counts[rec.level - 1] += 1
    total = len(trace)
    return tuple(c / total for c in counts)


def evaluate(trace, ground_truth_actor=None, k_stable=5, window_seconds=None):
    """Full :class:`Report` for one trace."""
    base = rates(confusion(trace, ground_truth_actor))
    delay_w, delay_m = authentication_delay(trace, ground_truth_actor, k_stable, window_seconds)
    occ = level_occupancy(trace) if trace.n_levels else None
    return Report(base.acc, base.prec, base.tar, base.trr, base.far, base.frr,
                  delay_w, delay_m, occ)


def write_report_json(report, path, n_levels=None, extra=None):
    data = report.as_dict(n_levels)
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=False)
        fh.write("\n")


def write_report_csv(report, path, n_levels=None):
    data = report.as_dict(n_levels)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(data))
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v
                         for v in data.values()])
