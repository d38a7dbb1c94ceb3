"""Score calibration and one-dimensional Gaussian kernel densities.

Behavior scores live in [0, 1] with *low* values meaning legitimate-like.
A calibrated score is the probability of the positive label; callers
label illegitimate windows ``+1`` so the score reads as P(illegitimate).
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import expit, ndtr
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_finite
from .exceptions import DegenerateLabelsError, InvalidArgumentError, InvalidRangeError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class PlattParams:
    A: float
    B: float

    def __post_init__(self):
        check_finite(self.A, "A")
        check_finite(self.B, "B")


def platt_score(margin, params):
    """Map a classifier margin to ``1 / (1 + exp(A*margin + B))``.

    Accepts a scalar or an array of margins. Infinite margins are rejected;
    the limit behavior is reached numerically for large finite margins.
    """
    arr = np.asarray(margin, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("margin must be finite")
    if not isinstance(params, PlattParams):
        raise InvalidArgumentError("params must be a PlattParams")
    out = expit(-(params.A * arr + params.B))
    return float(out) if out.ndim == 0 else out


def fit_platt(margins, labels, max_iter=100, min_step=1e-10, sigma=1e-12, tol=1e-5):
    """Fit sigmoid parameters by damped Newton iteration on regularized targets.

    Labels are +1/-1; the returned score approximates P(label = +1). The
    targets ``(N+ + 1)/(N+ + 2)`` and ``1/(N- + 2)`` keep separable data from
    driving the slope to infinity. Constant margins carry no information,
    so ``A = 0`` is returned with ``B`` set from the label prior.
    """
    f = np.asarray(margins, dtype=float).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if f.shape != y.shape:
        raise InvalidArgumentError("margins and labels must have the same length")
    if f.size < 2:
        raise InvalidArgumentError("fit_platt needs at least two samples")
    if not np.all(np.isfinite(f)):
        raise InvalidArgumentError("margins must be finite")
    if not np.all(np.isin(y, (1, -1))):
        raise InvalidArgumentError("labels must be +1 or -1")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError("fit_platt needs both +1 and -1 labels")

    hi_target = (n_pos + 1.0) / (n_pos + 2.0)
    lo_target = 1.0 / (n_neg + 2.0)
    t = np.where(pos, hi_target, lo_target)
    B = math.log((n_neg + 1.0) / (n_pos + 1.0))
    if np.ptp(f) == 0.0:
        return PlattParams(0.0, B)

    def objective(A, B):
        z = A * f + B
        # cross-entropy written stably for either sign of z
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)),
                                     (t - 1.0) * z + np.log1p(np.exp(z)))))

    A = 0.0
    fval = objective(A, B)
    for _ in range(max_iter):
        p = expit(-(A * f + B))   # modelled probability of +1
        d1 = t - p
        d2 = p * (1.0 - p)
        g1 = float(np.dot(f, d1))
        g2 = float(d1.sum())
        if abs(g1) < tol and abs(g2) < tol:
            break
        h11 = float(np.dot(f * f, d2)) + sigma
        h22 = float(d2.sum()) + sigma
        h21 = float(np.dot(f, d2))
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            newA, newB = A + step * dA, B + step * dB
            newf = objective(newA, newB)
            if newf < fval + 1e-4 * step * gd:
                A, B, fval = newA, newB, newf
                break
            step /= 2.0
        else:
            break
    return PlattParams(float(A), float(B))


class PlattScaler(BaseEstimator, TransformerMixin):
    """sklearn-style wrapper: ``fit(margins, labels)`` then ``transform``."""

    def __init__(self, max_iter=100):
        self.max_iter = max_iter

    def fit(self, X, y):
        self.params_ = fit_platt(np.asarray(X, dtype=float).reshape(-1), y,
                                 max_iter=self.max_iter)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return np.atleast_1d(platt_score(np.asarray(X, dtype=float).reshape(-1), self.params_))

    def predict_proba(self, X):
        p = self.transform(X)
        return np.column_stack([1.0 - p, p])


def silverman_bandwidth(samples, floor=1e-3):
    """``1.06 * std * N**(-1/5)``, never below ``floor``."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise InvalidArgumentError("samples must be non-empty")
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return max(1.06 * sd * x.size ** (-0.2), floor)


@dataclass(frozen=True)
class KdeModel:
    samples: np.ndarray = field(repr=False)
    bandwidth: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float).reshape(-1)
        if x.size == 0:
            raise InvalidArgumentError("KdeModel needs at least one sample")
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError("KdeModel samples must be finite")
        h = check_finite(self.bandwidth, "bandwidth")
        if h <= 0:
            raise InvalidArgumentError("bandwidth must be > 0")
        x = x.copy()
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "bandwidth", h)

    @classmethod
    def from_samples(cls, samples, bandwidth=None):
        if bandwidth is None:
            bandwidth = silverman_bandwidth(samples)
        return cls(np.asarray(samples, dtype=float), bandwidth)


def kde_density(model, x):
    """Gaussian kernel density at ``x`` (scalar or array)."""
    xs = np.asarray(x, dtype=float)
    h = model.bandwidth
    diff = (xs[..., None] - model.samples) / h
    dens = np.exp(-0.5 * diff * diff).mean(axis=-1) / (h * _SQRT_2PI)
    return float(dens) if dens.ndim == 0 else dens


def kde_integral(model, lo, hi):
    """Exact probability mass of the density over ``[lo, hi]``.

    Each kernel contributes a Gaussian CDF difference. Mass that falls
    outside [0, 1] is not renormalized.
    """
    lo = float(lo)
    hi = float(hi)
    if math.isnan(lo) or math.isnan(hi):
        raise InvalidArgumentError("integration bounds must not be NaN")
    if lo > hi:
        raise InvalidRangeError(f"lo ({lo}) must not exceed hi ({hi})")
    if lo == hi:
        return 0.0
    h = model.bandwidth
    upper = ndtr((hi - model.samples) / h)
    lower = ndtr((lo - model.samples) / h)
    return float(np.mean(upper - lower))


class GaussianKDE(BaseEstimator):
    """Estimator front end for :class:`KdeModel`.

    ``bandwidth=None`` selects the Silverman-style rule at fit time.
    """

    def __init__(self, bandwidth=None, bandwidth_floor=1e-3):
        self.bandwidth = bandwidth
        self.bandwidth_floor = bandwidth_floor

    def fit(self, X, y=None):
        x = np.asarray(X, dtype=float).reshape(-1)
        h = self.bandwidth
        if h is None:
            h = silverman_bandwidth(x, floor=self.bandwidth_floor)
        self.model_ = KdeModel(x, h)
        self.bandwidth_ = self.model_.bandwidth
        return self

    def score_samples(self, X):
        check_is_fitted(self, "model_")
        return np.atleast_1d(kde_density(self.model_, np.asarray(X, dtype=float).reshape(-1)))

    def integral(self, lo, hi):
        check_is_fitted(self, "model_")
        return kde_integral(self.model_, lo, hi)
