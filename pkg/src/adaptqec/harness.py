"""Closed-loop memory experiments, logical-error sweeps and exponential fits.

One round: the noise advances and fires, the syndrome is measured, every
decoder mode decodes it with the rates it had *before* this round, logical
failures are tallied, observers emit events, and only then do the
estimators absorb this round's events. All compared modes see the same
sampled errors.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from adaptqec.config import ExperimentConfig
from adaptqec.decoder import DecodingGraph, IdealDecoder, MatchingDecoder, clip_rates
from adaptqec.errors import InputError, InvariantError
from adaptqec.estimator import PRED_CAP, PRED_FLOOR, TrackBank
from adaptqec.noise import (
    OUPrior,
    NoiseState,
    advance_and_fire,
    calibrate_prior,
    dephasing_errors,
    make_noise_state,
)
from adaptqec.observers import build_pattern_index, observe_sp_bits
from adaptqec.pauli import StabilizerCode, build_code, parse_descriptor

logger = logging.getLogger(__name__)


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for ``key`` under the master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def truth_prior(cfg: ExperimentConfig) -> OUPrior:
    if cfg.mean_rate == 0:
        return OUPrior(-math.inf, 0.0, cfg.xi)
    f0, sf = calibrate_prior(cfg.mean_rate, cfg.sd_rate)
    return OUPrior(f0, sf, cfg.xi)


def estimator_prior(cfg: ExperimentConfig) -> OUPrior:
    base = truth_prior(cfg)
    f0 = base.f0_mean if cfg.f0_mean is None else cfg.f0_mean
    if f0 == -math.inf:
        f0 = math.log(PRED_FLOOR)
    sf = base.sigma_f if cfg.sigma_f is None else cfg.sigma_f
    xi = base.xi if cfg.xi_prior is None else cfg.xi_prior
    return OUPrior(f0, sf, xi)


def resolve_decoder(cfg: ExperimentConfig) -> str:
    if cfg.decoder != "auto":
        return cfg.decoder
    name, _ = parse_descriptor(cfg.code)
    return "mwpm" if name == "surface" else "ideal"


class StaticBank:
    """Running fraction of +1 events, with the prior mean before any data."""

    def __init__(self, prior_rate: float, size: int):
        self.prior_rate = prior_rate
        self.plus = np.zeros(size)
        self.t = 0
        self.clamps = 0

    def predict_next(self) -> np.ndarray:
        if self.t == 0:
            return np.full(self.plus.size, self.prior_rate)
        return np.clip(self.plus / self.t, PRED_FLOOR, PRED_CAP)

    def update(self, y: np.ndarray) -> None:
        self.plus += y == 1
        self.t += 1


@dataclass(frozen=True)
class StampedRates:
    """Rates handed to a decoder, tagged with the last round whose data they use."""

    values: np.ndarray
    through_round: int


@dataclass(frozen=True)
class RoundRecord:
    round: int
    eps_true: np.ndarray
    co_event: np.ndarray
    sp_event: np.ndarray
    eps_hat_co: np.ndarray
    eps_hat_sp: np.ndarray
    eps_used: np.ndarray
    logical_failure: bool


@dataclass
class ModeSummary:
    mode: str
    rounds: int = 0
    failures: int = 0
    clips: int = 0
    clamps: int = 0

    @property
    def p_log(self) -> float:
        return self.failures / self.rounds if self.rounds else math.nan

    @property
    def stderr(self) -> float:
        if not self.rounds:
            return math.nan
        p = self.p_log
        return math.sqrt(p * (1.0 - p) / self.rounds)

    def merge(self, other: ModeSummary) -> None:
        self.rounds += other.rounds
        self.failures += other.failures
        self.clips += other.clips
        self.clamps += other.clamps

    def as_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "failures": self.failures,
            "p_log": self.p_log,
            "stderr": self.stderr,
            "clips": self.clips,
            "clamps": self.clamps,
        }


@dataclass
class RunResult:
    """Outcome of one replica (or the merge of several)."""

    summaries: dict[str, ModeSummary]
    wall_time: float = 0.0
    log: dict[str, np.ndarray] | None = None
    shard_failures: dict[str, list[int]] = field(default_factory=dict)

    def records(self) -> list[RoundRecord]:
        if self.log is None:
            return []
        lg = self.log
        return [
            RoundRecord(
                int(lg["round"][i]),
                lg["eps_true"][i],
                lg["co_event"][i],
                lg["sp_event"][i],
                lg["eps_hat_co"][i],
                lg["eps_hat_sp"][i],
                lg["eps_used"][i],
                bool(lg["failure"][i]),
            )
            for i in range(lg["round"].size)
        ]


class _Mode:
    def __init__(self, name: str):
        self.name = name
        self.decoder: MatchingDecoder | None = None
        self.co_bank = None
        self.summary = ModeSummary(name)


class MemoryExperiment:
    """One replica of the closed-loop protocol for one or more weight modes."""

    def __init__(self, cfg: ExperimentConfig, rng: np.random.Generator, record: bool = False):
        self.cfg = cfg
        self.rng = rng
        self.record = record
        self.code: StabilizerCode = build_code(cfg.code)
        self.decoder_kind = resolve_decoder(cfg)
        self.tracked = dephasing_errors(self.code)
        self.E = len(self.tracked)
        self.noise: NoiseState = make_noise_state(self.code, self.tracked, truth_prior(cfg), rng)
        self.index = build_pattern_index(self.code, self.tracked)
        self.est_prior = estimator_prior(cfg)
        self.static_rates = np.full(self.E, cfg.mean_rate)
        modes = cfg.weights
        need_sp = (record and cfg.observer in ("sp", "both")) or "adaptive-sp" in modes
        need_truth = (record and cfg.observer == "oracle-truth") or "adaptive-truth" in modes
        self.sp_bank = self._bank() if need_sp else None
        self.truth_bank = self._bank() if need_truth else None

        if self.decoder_kind == "ideal":
            self.ideal = IdealDecoder(self.code, self.tracked)
        else:
            self.graph = DecodingGraph.from_code(self.code)
            cv = list(self.graph.check_vertices)
            self._check_rows = np.array(cv)
            self._gen_x_checks = self.code.gen_x[cv]
        self.modes: list[_Mode] = []
        for i, name in enumerate(modes):
            mode = _Mode(name)
            # The first mode's CO events are only consumed by the round log.
            if name == "adaptive-co" or (i == 0 and record and cfg.observer in ("co", "both")):
                mode.co_bank = self._bank()
            if self.decoder_kind == "mwpm":
                mode.decoder = MatchingDecoder(self.graph, cache=(name == "static"))
                if name == "static":
                    mode.decoder.set_rates(self.static_rates)
            self.modes.append(mode)
        self._lx = self.code.logical_matrix[:, : self.code.n]
        self._lz = self.code.logical_matrix[:, self.code.n :]
        self._label_weights = 1 << np.arange(2 * self.code.k)
        self._syn_weights = 1 << np.arange(self.code.num_generators, dtype=np.int64)

    def _bank(self):
        if self.cfg.estimator == "static":
            return StaticBank(float(np.clip(self.cfg.mean_rate, PRED_FLOOR, PRED_CAP)), self.E)
        return TrackBank(self.est_prior, self.E)

    def _rates_for(self, mode: _Mode, x: int, true_rates: np.ndarray) -> StampedRates:
        name = mode.name
        if name == "static":
            return StampedRates(self.static_rates, x - 1)
        if name == "oracle-true-rates":
            return StampedRates(true_rates, x - 1)
        bank = {"adaptive-co": mode.co_bank, "adaptive-sp": self.sp_bank, "adaptive-truth": self.truth_bank}[name]
        return StampedRates(bank.predict_next(), bank.t)

    def run(self, total_rounds: int, warmup: int) -> RunResult:
        if total_rounds <= warmup:
            raise InputError(f"rounds ({total_rounds}) must exceed warmup_rounds ({warmup})")
        start = time.perf_counter()
        code = self.code
        n = code.n
        fm = self.noise.fire_matrix
        log = self._alloc_log(total_rounds) if self.record else None
        primary = self.modes[0]
        for x in range(1, total_rounds + 1):
            fired = advance_and_fire(self.noise, self.rng)
            true_rates = self.noise.rates()
            err = (fired.astype(np.uint8) @ fm) & 1
            ex, ez = err[:n], err[n:]
            syn = code.syndrome_bits(ex, ez)
            actual = int((code.label_bits(ex, ez) * self._label_weights).sum())
            sp = observe_sp_bits(self.index, syn) if self.sp_bank is not None else None
            truth = np.where(fired, 1, -1).astype(np.int8)
            measured = x > warmup
            if log is not None:
                i = x - 1
                log["round"][i] = x
                log["eps_true"][i] = true_rates
                log["eps_hat_co"][i] = primary.co_bank.predict_next() if primary.co_bank is not None else np.nan
                log["eps_hat_sp"][i] = self.sp_bank.predict_next() if self.sp_bank is not None else np.nan
                log["sp_event"][i] = sp if sp is not None else 0
            for mode in self.modes:
                stamped = self._rates_for(mode, x, true_rates)
                if stamped.through_round != x - 1:
                    raise InvariantError(
                        f"round {x} decoded with rates through round {stamped.through_round}"
                    )
                failed, co = self._decode(mode, syn, actual, stamped.values)
                if measured:
                    mode.summary.rounds += 1
                    mode.summary.failures += failed
                if mode.co_bank is not None:
                    mode.co_bank.update(co)
                if log is not None and mode is primary:
                    log["eps_used"][x - 1] = stamped.values
                    log["co_event"][x - 1] = co
                    log["failure"][x - 1] = failed
            if self.sp_bank is not None:
                self.sp_bank.update(sp)
            if self.truth_bank is not None:
                self.truth_bank.update(truth)
            if log is not None:
                log["co_filtered"][x - 1] = _filtered(primary.co_bank)
                log["sp_filtered"][x - 1] = _filtered(self.sp_bank)
        for mode in self.modes:
            if mode.decoder is not None:
                mode.summary.clips = mode.decoder.clips.total
            banks = [mode.co_bank]
            if mode.name == "adaptive-sp":
                banks.append(self.sp_bank)
            if mode.name == "adaptive-truth":
                banks.append(self.truth_bank)
            mode.summary.clamps = sum(b.clamps for b in banks if b is not None)
        summaries = {m.name: m.summary for m in self.modes}
        return RunResult(summaries, time.perf_counter() - start, log)

    def _decode(self, mode: _Mode, syn: np.ndarray, actual: int, rates: np.ndarray) -> tuple[bool, np.ndarray]:
        if self.decoder_kind == "ideal":
            syn_code = int((syn * self._syn_weights).sum())
            label, subset = self.ideal.decode_code(syn_code, clip_rates(rates))
            return label != actual, np.where(subset, 1, -1).astype(np.int8)
        dec = mode.decoder
        if mode.name != "static":
            dec.set_rates(rates)
        checks = syn[self._check_rows]
        corr = dec.decode_defects(tuple(np.flatnonzero(checks).tolist()))
        if not np.array_equal((self._gen_x_checks @ corr) & 1, checks):
            raise InvariantError("matching correction does not reproduce the syndrome")
        label = int((((corr @ self._lz.T) & 1) * self._label_weights).sum())
        return label != actual, np.where(corr, 1, -1).astype(np.int8)

    def _alloc_log(self, rounds: int) -> dict[str, np.ndarray]:
        E = self.E
        return {
            "round": np.zeros(rounds, dtype=np.int64),
            "eps_true": np.zeros((rounds, E)),
            "eps_hat_co": np.full((rounds, E), np.nan),
            "eps_hat_sp": np.full((rounds, E), np.nan),
            "eps_used": np.zeros((rounds, E)),
            "co_event": np.zeros((rounds, E), dtype=np.int8),
            "sp_event": np.zeros((rounds, E), dtype=np.int8),
            "co_filtered": np.full((rounds, E), np.nan),
            "sp_filtered": np.full((rounds, E), np.nan),
            "failure": np.zeros(rounds, dtype=bool),
        }


def _filtered(bank) -> np.ndarray | float:
    """Rate estimate for the round just absorbed (prediction at x = t)."""
    if bank is None:
        return np.nan
    if isinstance(bank, StaticBank):
        return bank.predict_next()
    m = bank.prior.f0_mean + bank.delta_f
    v = bank.prior.sigma_f**2 + bank.delta_K
    return np.clip(np.exp(m + 0.5 * v), PRED_FLOOR, PRED_CAP)


# --------------------------------------------------------------------------
# Sharded execution


def _run_shard(args) -> RunResult:
    cfg, key, record = args
    rng = make_rng(cfg.seed, *key)
    exp = MemoryExperiment(cfg, rng, record=record)
    return exp.run(cfg.rounds, cfg.warmup_rounds)


def _map_shards(cfg: ExperimentConfig, tasks: list) -> list[RunResult]:
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_run_shard, tasks))
    return [_run_shard(t) for t in tasks]


def _merge(results: Sequence[RunResult], modes: Sequence[str]) -> RunResult:
    merged = {m: ModeSummary(m) for m in modes}
    shard_failures = {m: [] for m in modes}
    wall = 0.0
    for res in results:
        wall += res.wall_time
        for m in modes:
            merged[m].merge(res.summaries[m])
            shard_failures[m].append(res.summaries[m].failures)
    log = results[0].log if results else None
    return RunResult(merged, wall, log, shard_failures)


def run_memory_experiment(cfg: ExperimentConfig) -> tuple[list[RoundRecord], dict]:
    """Run ``cfg.shards`` replicas; records come from shard 0 when enabled."""
    res = run_shards(cfg)
    return res.records(), summary_dict(cfg, res)


def run_shards(cfg: ExperimentConfig, key_prefix: tuple[int, ...] = ()) -> RunResult:
    tasks = [(cfg, key_prefix + (s,), cfg.record and s == 0) for s in range(cfg.shards)]
    t0 = time.perf_counter()
    res = _merge(_map_shards(cfg, tasks), cfg.weights)
    res.wall_time = time.perf_counter() - t0
    return res


def summary_dict(cfg: ExperimentConfig, res: RunResult) -> dict:
    """Deterministic summary (wall time is kept out; see ``RunResult.wall_time``)."""
    return {
        "code": cfg.code,
        "seed": cfg.seed,
        "modes": {m: s.as_dict() for m, s in res.summaries.items()},
        "shard_failures": res.shard_failures,
    }


# --------------------------------------------------------------------------
# Sweeps and fits


def estimate_p_log(cfg: ExperimentConfig, distances: Sequence[int] | None = None) -> dict:
    """Logical error probability per distance and mode.

    Each distance runs batches of ``cfg.shards`` replicas (each with its own
    warm-up and ``cfg.rounds`` total rounds) until every mode has
    ``cfg.failure_target`` failures or ``cfg.max_rounds`` measured rounds.
    """
    distances = tuple(cfg.distances if distances is None else distances)
    out: dict = {"modes": {m: [] for m in cfg.weights}, "shard_failures": {m: {} for m in cfg.weights}}
    for d in distances:
        if d < 3 or d % 2 == 0:
            raise InputError(f"distance {d} must be odd and >= 3")
        dcfg = cfg.replace(code=f"surface:{d}")
        total: RunResult | None = None
        batch = 0
        while True:
            res = run_shards(dcfg, key_prefix=(d, batch))
            if total is None:
                total = res
            else:
                total = _merge([total, res], cfg.weights)
            batch += 1
            rounds = next(iter(total.summaries.values())).rounds
            fails = min(s.failures for s in total.summaries.values())
            logger.info("d=%d batch=%d rounds=%d min failures=%d", d, batch, rounds, fails)
            if fails >= cfg.failure_target or rounds >= cfg.max_rounds:
                break
        for m, s in total.summaries.items():
            out["modes"][m].append(
                {"d": d, "rounds": s.rounds, "failures": s.failures, "p_log": s.p_log, "stderr": s.stderr}
            )
            out["shard_failures"][m][str(d)] = total.shard_failures[m]
    return out


@dataclass(frozen=True)
class FitResult:
    alpha: float
    delta: float
    sigma_alpha: float
    sigma_delta: float

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "delta": self.delta,
            "sigma_alpha": self.sigma_alpha,
            "sigma_delta": self.sigma_delta,
        }


def fit_exponential(distances, p_logs, stderrs) -> FitResult:
    """Weighted least squares of -ln p_log = alpha d + delta.

    Log-space errors are stderr / p_log. Points with p_log = 0 are dropped.
    """
    d = np.asarray(distances, dtype=float)
    p = np.asarray(p_logs, dtype=float)
    se = np.asarray(stderrs, dtype=float)
    keep = p > 0
    if np.any(~keep):
        logger.warning("dropping %d points with p_log = 0", int(np.count_nonzero(~keep)))
    d, p, se = d[keep], p[keep], se[keep]
    if np.unique(d).size < 2:
        raise InputError("need at least two distinct distances with p_log > 0")
    y = -np.log(p)
    sig = se / p
    if np.all(sig == 0):
        sig = np.ones_like(sig)
    elif np.any(sig <= 0):
        raise InputError("standard errors must be positive")
    w = 1.0 / sig**2
    A = np.column_stack([d, np.ones_like(d)])
    normal = A.T @ (A * w[:, None])
    cov = np.linalg.inv(normal)
    alpha, delta = cov @ (A.T @ (w * y))
    return FitResult(float(alpha), float(delta), float(math.sqrt(cov[0, 0])), float(math.sqrt(cov[1, 1])))


def fit_sweep(sweep: dict, mode: str) -> FitResult:
    rows = sweep["modes"][mode]
    return fit_exponential([r["d"] for r in rows], [r["p_log"] for r in rows], [r["stderr"] for r in rows])


# --------------------------------------------------------------------------
# Rate tracking


def track_rates_experiment(cfg: ExperimentConfig) -> tuple[dict[str, np.ndarray], dict]:
    """Per-round true rates and both estimates, plus tracking metrics.

    The decoder consumes the first weights mode; CO and SP estimators both
    run. Metrics cover rounds after the warm-up.
    """
    cfg = cfg.replace(record=True, shards=1, observer="both")
    res = _run_shard((cfg, (0,), True))
    log = res.log
    sl = slice(cfg.warmup_rounds, None)
    true = log["eps_true"][sl]
    metrics: dict = {"per_error": []}
    for e in range(true.shape[1]):
        row = {"error_id": e}
        baseline = float(np.mean(np.abs(cfg.mean_rate - true[:, e])))
        row["mean_abs_static"] = baseline
        for name in ("co", "sp"):
            pred = log[f"eps_hat_{name}"][sl, e]
            filt = log[f"{name}_filtered"][sl, e]
            row[f"mean_abs_{name}"] = float(np.mean(np.abs(pred - true[:, e])))
            row[f"mean_abs_{name}_filtered"] = float(np.mean(np.abs(filt - true[:, e])))
        co = log["eps_hat_co"][sl, e]
        sp = log["eps_hat_sp"][sl, e]
        row["co_sp_correlation"] = float(np.corrcoef(co, sp)[0, 1])
        metrics["per_error"].append(row)
    summary = summary_dict(cfg, res)
    summary["tracking"] = metrics
    return log, summary


# --------------------------------------------------------------------------
# Output files

RATES_HEADER = "round,error_id,eps_true,eps_hat_co,eps_hat_sp,eps_used"


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_rates_csv(path, log: dict[str, np.ndarray]) -> None:
    """One row per (round, tracked error); floats carry 17 significant digits."""
    rounds, E = log["eps_true"].shape
    rows = np.column_stack(
        [
            np.repeat(log["round"], E),
            np.tile(np.arange(E), rounds),
            log["eps_true"].ravel(),
            log["eps_hat_co"].ravel(),
            log["eps_hat_sp"].ravel(),
            log["eps_used"].ravel(),
        ]
    )
    np.savetxt(path, rows, fmt=["%d", "%d"] + ["%.17g"] * 4, delimiter=",", header=RATES_HEADER, comments="")


def to_json(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits and non-finite floats as null."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return _fmt(x) if math.isfinite(x) else "null"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return _json_str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json_str(s: str) -> str:
    return json.dumps(s)


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(to_json(obj) + "\n")
