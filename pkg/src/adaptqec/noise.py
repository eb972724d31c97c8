"""Time-dependent product-form Pauli noise.

Each tracked error fires independently in every round with rate
``rate_of_f(f)``, where the log-rate ``f`` follows an Ornstein-Uhlenbeck
process sampled with its exact discretization.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from adaptqec.errors import InputError, NumericalError, SizeError, UnsupportedChannelError
from adaptqec.pauli import ErrorClass, PauliString, StabilizerCode, classify_error

RATE_CEILING = 0.5


@dataclass(frozen=True)
class OUPrior:
    """Stationary Ornstein-Uhlenbeck law of the log-rate ``f``.

    ``xi`` is the relaxation time in error-correction rounds.
    """

    f0_mean: float
    sigma_f: float
    xi: float

    def __post_init__(self):
        if math.isnan(self.f0_mean) or self.f0_mean == math.inf:
            raise InputError("f0_mean must be finite or -inf")
        if not self.sigma_f >= 0 or not math.isfinite(self.sigma_f):
            raise InputError("sigma_f must be finite and >= 0")
        if not self.xi > 0:
            raise InputError("xi must be > 0")

    @property
    def decay(self) -> float:
        """One-round autocorrelation exp(-1/xi)."""
        return math.exp(-1.0 / self.xi)

    def kernel(self, lag) -> np.ndarray:
        return self.sigma_f**2 * np.exp(-np.abs(lag) / self.xi)


def rate_of_f(f):
    """Dephasing probability (1 - exp(-2 e^f)) / 2 for log-rate ``f``."""
    f = np.asarray(f, dtype=float)
    out = -0.5 * np.expm1(-2.0 * np.exp(f))
    return out if out.ndim else float(out)


def f_of_rate(rate):
    """Inverse of :func:`rate_of_f` on [0, 0.5)."""
    rate = np.asarray(rate, dtype=float)
    if np.any((rate < 0) | (rate >= RATE_CEILING)):
        raise InputError("rate must lie in [0, 0.5)")
    with np.errstate(divide="ignore"):
        out = np.log(-0.5 * np.log1p(-2.0 * rate))
    return out if out.ndim else float(out)


def ou_step(f, prior: OUPrior, rng: np.random.Generator):
    """Advance the log-rate(s) ``f`` by one round."""
    f = np.asarray(f, dtype=float)
    if prior.f0_mean == -math.inf:
        return f.copy() if f.ndim else float(f)
    a = prior.decay
    mean = prior.f0_mean + (f - prior.f0_mean) * a
    if prior.sigma_f == 0:
        return mean if mean.ndim else float(mean)
    sd = prior.sigma_f * math.sqrt(-math.expm1(-2.0 / prior.xi))
    out = mean + sd * rng.standard_normal(f.shape)
    return out if out.ndim else float(out)


def stationary_sample(prior: OUPrior, size: int, rng: np.random.Generator) -> np.ndarray:
    if prior.f0_mean == -math.inf:
        return np.full(size, -math.inf)
    return prior.f0_mean + prior.sigma_f * rng.standard_normal(size)


@dataclass(frozen=True)
class TrackedError:
    """A noise source: when it fires, ``pauli`` is applied to the data qubits."""

    error_class: ErrorClass
    pauli: PauliString


@dataclass(eq=False)
class NoiseState:
    """Mutable noise process: tracked errors, their current log-rates and the round.

    ``f`` holds the current log-rate of each tracked error. Only ``f`` and
    ``round`` change as the simulation advances.
    """

    code: StabilizerCode
    tracked: tuple[TrackedError, ...]
    prior: OUPrior
    f: np.ndarray
    round: int = 0
    fire_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.tracked = tuple(self.tracked)
        self.f = np.array(self.f, dtype=float).reshape(-1)
        if self.f.size != len(self.tracked):
            raise InputError("need one log-rate per tracked error")
        seen = set()
        for t in self.tracked:
            if classify_error(self.code, t.pauli) != t.error_class:
                raise InputError(f"tracked error {t.pauli.label()} has an inconsistent class")
            key = t.error_class.syndrome
            if key in seen:
                raise InputError("two tracked errors share a syndrome")
            seen.add(key)
        fm = np.array([t.pauli.symplectic() for t in self.tracked], dtype=np.uint8)
        self.fire_matrix = fm.reshape(len(self.tracked), 2 * self.code.n)

    @property
    def size(self) -> int:
        return len(self.tracked)

    def rates(self) -> np.ndarray:
        return rate_of_f(self.f)

    def error_from_fired(self, fired: np.ndarray) -> PauliString:
        sym = (np.asarray(fired, dtype=np.uint8) @ self.fire_matrix) & 1
        return PauliString(sym[: self.code.n], sym[self.code.n :])


def dephasing_errors(code: StabilizerCode) -> tuple[TrackedError, ...]:
    """Single-qubit Z error on every qubit."""
    out = []
    for q in range(code.n):
        p = PauliString.single(code.n, "Z", q)
        out.append(TrackedError(classify_error(code, p), p))
    return tuple(out)


def bitflip_errors(code: StabilizerCode) -> tuple[TrackedError, ...]:
    out = []
    for q in range(code.n):
        p = PauliString.single(code.n, "X", q)
        out.append(TrackedError(classify_error(code, p), p))
    return tuple(out)


def make_noise_state(
    code: StabilizerCode,
    tracked: Sequence[TrackedError],
    prior: OUPrior,
    rng: np.random.Generator,
) -> NoiseState:
    """Start every log-rate from the stationary distribution."""
    f = stationary_sample(prior, len(tracked), rng)
    return NoiseState(code, tuple(tracked), prior, f)


def advance_and_fire(state: NoiseState, rng: np.random.Generator) -> np.ndarray:
    """Advance log-rates one round and return the boolean fired vector."""
    state.f = ou_step(state.f, state.prior, rng)
    state.round += 1
    return rng.random(state.size) < state.rates()


def sample_round(state: NoiseState, rng: np.random.Generator) -> tuple[PauliString, np.ndarray]:
    """One noise round: the applied error and the +1/-1 firing indicator."""
    fired = advance_and_fire(state, rng)
    truth = np.where(fired, 1, -1).astype(np.int8)
    return state.error_from_fired(fired), truth


# --------------------------------------------------------------------------
# Prior calibration

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(160)
_GH_WEIGHTS = _GH_WEIGHTS / _GH_WEIGHTS.sum()


def rate_moments(f0_mean: float, sigma_f: float) -> tuple[float, float]:
    """Mean and standard deviation of rate_of_f(f) for f ~ N(f0_mean, sigma_f^2)."""
    eps = rate_of_f(f0_mean + sigma_f * _GH_NODES)
    mean = float(_GH_WEIGHTS @ eps)
    var = float(_GH_WEIGHTS @ (eps - mean) ** 2)
    return mean, math.sqrt(max(var, 0.0))


def calibrate_prior(target_mean_rate: float, target_sd_rate: float) -> tuple[float, float]:
    """Find (f0_mean, sigma_f) whose induced rate has the target mean and SD."""
    m, s = target_mean_rate, target_sd_rate
    if not 0 < m < RATE_CEILING:
        raise InputError("target mean rate must lie in (0, 0.5)")
    if s < 0 or s >= RATE_CEILING:
        raise InputError("target SD must lie in [0, 0.5)")
    if s * s >= m * (RATE_CEILING - m):
        # Bhatia-Davis: a variable on [0, 0.5] with mean m has variance below m(0.5 - m).
        raise InputError(f"no rate distribution on [0, 0.5) has mean {m} and SD {s}")
    if s == 0:
        return f_of_rate(m), 0.0
    # The lognormal approximation (rate ~ e^f) seeds the solve.
    s2 = math.log1p((s / m) ** 2)
    x0 = np.array([math.log(m) - s2 / 2, 0.5 * math.log(s2)])

    def residual(p):
        mean, sd = rate_moments(p[0], math.exp(p[1]))
        return [mean / m - 1.0, sd / s - 1.0]

    sol = optimize.root(residual, x0, method="hybr", options={"xtol": 1e-12, "maxfev": 400})
    if not sol.success or max(abs(r) for r in sol.fun) > 1e-8:
        raise NumericalError(f"prior calibration did not converge: {sol.message}")
    return float(sol.x[0]), float(math.exp(sol.x[1]))


# --------------------------------------------------------------------------
# Summation form <-> product form for channels on a few qubits

MAX_CHANNEL_QUBITS = 3


def all_paulis(m: int) -> list[PauliString]:
    """The 4^m phase-free Paulis, indexed by b = (x_1, z_1, ..., x_m, z_m) read as binary."""
    out = []
    for bits in itertools.product((0, 1), repeat=2 * m):
        out.append(PauliString(np.array(bits[0::2]), np.array(bits[1::2])))
    return out


def _interleaved(p: PauliString) -> np.ndarray:
    out = np.empty(2 * p.n, dtype=np.uint8)
    out[0::2] = p.x_bits
    out[1::2] = p.z_bits
    return out


def _character_table(m: int) -> np.ndarray:
    b = np.array(list(itertools.product((0, 1), repeat=2 * m)), dtype=np.int64)
    return 1.0 - 2.0 * ((b @ b.T) & 1)


def _pauli_index(p: PauliString) -> int:
    return int("".join(str(int(v)) for v in _interleaved(p)), 2)


@dataclass(frozen=True)
class DiscretePauliChannel:
    """Stochastic Pauli channel on ``m`` <= 3 qubits."""

    probabilities: Mapping[PauliString, float]

    def __post_init__(self):
        probs = dict(self.probabilities)
        if not probs:
            raise InputError("empty channel")
        sizes = {p.n for p in probs}
        if len(sizes) != 1:
            raise InputError("channel Paulis act on different qubit counts")
        if sizes.pop() > MAX_CHANNEL_QUBITS:
            raise SizeError(f"channels are limited to {MAX_CHANNEL_QUBITS} qubits")
        vals = np.array(list(probs.values()), dtype=float)
        if np.any(vals < -1e-12):
            raise InputError("channel probabilities must be non-negative")
        if abs(vals.sum() - 1.0) > 1e-9:
            raise InputError(f"channel probabilities sum to {vals.sum()}, not 1")
        object.__setattr__(self, "probabilities", probs)

    @property
    def m(self) -> int:
        return next(iter(self.probabilities)).n

    def vector(self) -> np.ndarray:
        vec = np.zeros(4**self.m)
        for p, prob in self.probabilities.items():
            vec[_pauli_index(p)] += prob
        return vec

    def __getitem__(self, p: PauliString) -> float:
        return self.probabilities.get(p, 0.0)


@dataclass(frozen=True)
class ProductForm:
    """Rates of the independent single-error factors of a channel.

    ``negative`` lists the Paulis whose rate came out negative; they are
    valid in the algebra but cannot be sampled.
    """

    rates: dict[PauliString, float]
    betas: dict[PauliString, float]
    negative: tuple[PauliString, ...]


def product_form_decompose(channel: DiscretePauliChannel) -> ProductForm:
    m = channel.m
    p = channel.vector()
    if p[0] < 0.5:
        raise UnsupportedChannelError("identity probability must be at least 1/2")
    table = _character_table(m)
    alpha = table @ p
    if np.any(alpha <= 0):
        raise UnsupportedChannelError("some alpha_u <= 0; rates would be complex")
    beta = (table @ np.log(alpha)) / 4**m
    rates = -0.5 * np.expm1(-2.0 * beta)  # e^-beta sinh(beta)
    paulis = all_paulis(m)
    rate_map = {paulis[i]: float(rates[i]) for i in range(1, 4**m)}
    beta_map = {paulis[i]: float(beta[i]) for i in range(4**m)}
    negative = tuple(paulis[i] for i in range(1, 4**m) if rates[i] < 0)
    return ProductForm(rate_map, beta_map, negative)


def expand_vector(rates: Mapping[PauliString, float]) -> np.ndarray:
    """Signed distribution (indexed as in :func:`all_paulis`) of a product of factors."""
    sizes = {p.n for p in rates}
    if len(sizes) != 1:
        raise InputError("rates must be given on a common qubit count")
    m = sizes.pop()
    if m > MAX_CHANNEL_QUBITS:
        raise SizeError(f"channels are limited to {MAX_CHANNEL_QUBITS} qubits")
    dist = np.zeros(4**m)
    dist[0] = 1.0
    idx = np.arange(4**m)
    for p, eps in rates.items():
        shift = _pauli_index(p)
        dist = (1.0 - eps) * dist + eps * dist[idx ^ shift]
    return dist


def product_form_expand(rates: Mapping[PauliString, float]) -> DiscretePauliChannel:
    """Full distribution of the product of channels (1 - eps)[I] + eps[sigma]."""
    dist = expand_vector(rates)
    m = next(iter(rates)).n
    return DiscretePauliChannel(dict(zip(all_paulis(m), dist.tolist())))
