"""Online Gaussian-process estimation of time-varying error rates.

Each tracked error has a latent log-rate ``f`` with an Ornstein-Uhlenbeck
prior. Under that prior the online GP posterior at any future round is
fixed by two scalars (``delta_f``, ``delta_K``), so absorbing one event and
predicting ahead are both O(1).

The likelihood of an event uses the small-rate approximation rate ~ e^f, so
the marginal likelihood of y = +1 is exp(m + v/2) for a Gaussian posterior
with mean m and variance v at the event round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from adaptqec.errors import InputError, NumericalError
from adaptqec.noise import OUPrior

G_CAP = 1.0 - 1e-9
PRED_FLOOR = 1e-12
PRED_CAP = 0.5 - 1e-9
ORACLE_MAX_EVENTS = 500


def likelihood_derivatives(m, v, y):
    """First and second derivatives (q, r) of ln<p(y|f)> with respect to m.

    Returns ``(q, r, clamped)``; ``clamped`` flags entries where the
    approximate no-event likelihood 1 - exp(m + v/2) was non-positive and
    ``g`` had to be capped.
    """
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    y = np.asarray(y)
    g = np.exp(m + 0.5 * v)
    clamped = (y == -1) & (g >= G_CAP)
    g = np.minimum(g, G_CAP)
    one_minus = 1.0 - g
    q = np.where(y == 1, 1.0, -g / one_minus)
    r = np.where(y == 1, 0.0, -g / one_minus**2)
    return q, r, clamped


def log_marginal_likelihood(m: float, v: float, y: int) -> float:
    """ln<p(y|f)> under the approximation; used to check q and r numerically."""
    g = math.exp(m + 0.5 * v)
    return m + 0.5 * v if y == 1 else math.log1p(-g)


@dataclass(frozen=True)
class TrackState:
    """Posterior summary after absorbing ``t`` events."""

    prior: OUPrior
    delta_f: float = 0.0
    delta_K: float = 0.0
    t: int = 0
    clamps: int = 0

    def next_moments(self) -> tuple[float, float]:
        """Posterior mean and variance of f at round t + 1 before its event."""
        a = self.prior.decay
        mean = self.prior.f0_mean + a * self.delta_f
        var = self.prior.sigma_f**2 + a * a * self.delta_K
        return mean, var


@dataclass(frozen=True)
class Prediction:
    mean_f: float
    var_f: float
    rate: float


def new_track(prior: OUPrior) -> TrackState:
    return TrackState(prior)


def update(state: TrackState, y: int) -> TrackState:
    """Absorb the event of round ``state.t + 1``."""
    if y not in (1, -1):
        raise InputError(f"event must be +1 or -1, got {y}")
    a = state.prior.decay
    m, v = state.next_moments()
    if not v > 0 and state.prior.sigma_f > 0:
        raise NumericalError(f"non-positive prior variance {v} at round {state.t + 1}")
    q, r, clamped = likelihood_derivatives(m, v, y)
    return replace(
        state,
        delta_f=a * state.delta_f + float(q) * v,
        delta_K=a * a * state.delta_K + float(r) * v * v,
        t=state.t + 1,
        clamps=state.clamps + int(clamped),
    )


def predict(state: TrackState, x: int) -> Prediction:
    """Posterior of f at round ``x >= t`` and the implied rate."""
    if x < state.t:
        raise InputError(f"cannot predict round {x} before absorbed round {state.t}")
    p = state.prior
    decay = math.exp(-(x - state.t) / p.xi)
    mean = p.f0_mean + decay * state.delta_f
    var = p.sigma_f**2 + decay * decay * state.delta_K
    if var < 0:
        raise NumericalError(f"negative posterior variance {var}")
    rate = min(max(math.exp(mean + 0.5 * var), PRED_FLOOR), PRED_CAP)
    return Prediction(mean, var, rate)


def static_estimate(events: Sequence[int]) -> float:
    """Fraction of +1 events."""
    ev = np.asarray(events)
    if ev.size == 0:
        raise InputError("need at least one event")
    return float(np.count_nonzero(ev == 1) / ev.size)


class TrackBank:
    """Vectorized :class:`TrackState` for many independent tracked errors."""

    def __init__(self, prior: OUPrior, size: int):
        self.prior = prior
        self.delta_f = np.zeros(size)
        self.delta_K = np.zeros(size)
        self.t = 0
        self.clamps = 0
        self._a = prior.decay
        self._s2 = prior.sigma_f**2

    @property
    def size(self) -> int:
        return self.delta_f.size

    def next_moments(self) -> tuple[np.ndarray, np.ndarray]:
        a = self._a
        return self.prior.f0_mean + a * self.delta_f, self._s2 + a * a * self.delta_K

    def predict_next(self) -> np.ndarray:
        """Rates for round t + 1, computed from events through round t."""
        m, v = self.next_moments()
        return np.clip(np.exp(m + 0.5 * v), PRED_FLOOR, PRED_CAP)

    def update(self, y: np.ndarray) -> None:
        a = self._a
        m, v = self.next_moments()
        q, r, clamped = likelihood_derivatives(m, v, y)
        self.delta_f = a * self.delta_f + q * v
        self.delta_K = a * a * self.delta_K + r * v * v
        self.t += 1
        self.clamps += int(np.count_nonzero(clamped))

    def state(self, i: int) -> TrackState:
        return TrackState(self.prior, float(self.delta_f[i]), float(self.delta_K[i]), self.t)


@dataclass(frozen=True)
class OraclePosterior:
    """Full-covariance posterior after each event.

    ``mean[t, x]`` and ``var[t, x]`` are the posterior mean and variance of
    f at round ``x + 1`` given events 1..t (row 0 is the prior).
    """

    mean: np.ndarray
    var: np.ndarray


def full_gp_oracle(events: Sequence[int], prior: OUPrior, horizon: int = 0) -> OraclePosterior:
    """General online-GP recursion keeping the whole covariance matrix.

    Query rounds are 1..T+horizon. Intended only for checking the two-scalar
    recursion on short sequences.
    """
    ev = [int(e) for e in events]
    T = len(ev)
    if T > ORACLE_MAX_EVENTS:
        raise InputError(f"oracle is limited to {ORACLE_MAX_EVENTS} events")
    if any(e not in (1, -1) for e in ev):
        raise InputError("events must be +1 or -1")
    X = T + horizon
    rounds = np.arange(1, X + 1)
    K = prior.kernel(rounds[:, None] - rounds[None, :])
    mu = np.full(X, float(prior.f0_mean))
    means = [mu.copy()]
    variances = [np.diag(K).copy()]
    for t in range(T):
        q, r, _ = likelihood_derivatives(mu[t], K[t, t], ev[t])
        col = K[:, t].copy()
        mu = mu + float(q) * col
        K = K + float(r) * np.outer(col, col)
        means.append(mu.copy())
        variances.append(np.diag(K).copy())
    return OraclePosterior(np.array(means), np.array(variances))
