import math

import numpy as np
import pytest

from adaptqec.config import ExperimentConfig, load_config
from adaptqec.errors import InputError
from adaptqec.harness import (
    MemoryExperiment,
    estimate_p_log,
    fit_exponential,
    make_rng,
    run_memory_experiment,
    run_shards,
    to_json,
    track_rates_experiment,
    write_rates_csv,
)

MODES = ("static", "adaptive-sp", "adaptive-co", "oracle-true-rates")


def small(**kw):
    base = dict(code="surface:3", rounds=600, warmup_rounds=100, seed=3, weights=MODES)
    base.update(kw)
    return ExperimentConfig(**base)


def test_zero_noise_never_fails():
    records, summary = run_memory_experiment(small(mean_rate=0.0, sd_rate=0.0, record=True))
    for mode in MODES:
        assert summary["modes"][mode]["failures"] == 0
        assert summary["modes"][mode]["p_log"] == 0.0
    assert len(records) == 600
    assert all(np.all(r.co_event == -1) and np.all(r.sp_event == -1) for r in records)


def test_records_use_pre_update_rates():
    cfg = small(weights=("adaptive-sp",), observer="both", record=True)
    exp = MemoryExperiment(cfg, make_rng(cfg.seed, 0), record=True)
    res = exp.run(cfg.rounds, cfg.warmup_rounds)
    log = res.log
    # The decoder used exactly the SP estimate available before each round.
    assert np.array_equal(log["eps_used"], log["eps_hat_sp"])
    assert np.all(log["eps_used"][0] == log["eps_used"][0][0])
    assert log["round"].tolist() == list(range(1, 601))


def test_warmup_is_excluded():
    res = run_shards(small(rounds=500, warmup_rounds=200))
    for s in res.summaries.values():
        assert s.rounds == 300
    with pytest.raises(InputError):
        run_shards(small(rounds=100, warmup_rounds=100))


def test_modes_share_the_error_trajectory():
    # With identical (static) weights two decoders must fail on the same rounds.
    a = run_shards(small(weights=("static",), rounds=3000))
    b = run_shards(small(weights=("oracle-true-rates", "static"), rounds=3000))
    assert a.summaries["static"].failures == b.summaries["static"].failures


def test_frozen_rate_static_matches_exhaustive():
    from adaptqec.decoder import exhaustive_matching_p_log
    from adaptqec.pauli import surface_code

    exact = exhaustive_matching_p_log(surface_code(3), np.full(13, 0.02))
    cfg = small(sd_rate=0.0, weights=("static",), observer="co", rounds=60_000, warmup_rounds=0)
    s = run_shards(cfg).summaries["static"]
    assert abs(s.p_log - exact) < 3 * math.sqrt(exact * (1 - exact) / s.rounds)


def test_ideal_decoder_path_on_steane():
    cfg = small(code="steane", rounds=2000, weights=("static", "adaptive-co"))
    res = run_shards(cfg)
    assert all(s.rounds == 1900 for s in res.summaries.values())


def test_shards_are_deterministic_under_workers(tmp_path):
    cfg = small(rounds=400, shards=3)
    one = run_shards(cfg)
    two = run_shards(cfg.replace(workers=2))
    assert one.shard_failures == two.shard_failures
    assert to_json({m: s.as_dict() for m, s in one.summaries.items()}) == to_json(
        {m: s.as_dict() for m, s in two.summaries.items()}
    )


def test_sweep_stops_at_cap():
    cfg = small(rounds=300, warmup_rounds=100, distances=(3, 5), failure_target=10**6, max_rounds=400)
    sweep = estimate_p_log(cfg)
    for mode in MODES:
        rows = sweep["modes"][mode]
        assert [r["d"] for r in rows] == [3, 5]
        assert all(r["rounds"] == 400 for r in rows)


def test_sweep_rejects_bad_distance():
    with pytest.raises(InputError):
        estimate_p_log(small(), distances=[4])


def test_static_p_log_falls_with_distance():
    cfg = small(sd_rate=0.0, weights=("static",), observer="co", rounds=40_000, warmup_rounds=0)
    rows = estimate_p_log(cfg.replace(failure_target=1), distances=[3, 5])["modes"]["static"]
    assert rows[1]["p_log"] < rows[0]["p_log"]


def test_fit_recovers_exact_line():
    d = np.array([3, 5, 7, 9])
    p = np.exp(-0.9 * d - 2.1)
    fit = fit_exponential(d, p, 0.1 * p)
    assert fit.alpha == pytest.approx(0.9, abs=1e-10)
    assert fit.delta == pytest.approx(2.1, abs=1e-10)
    assert fit.sigma_alpha > 0 and fit.sigma_delta > 0


def test_fit_drops_zero_points_and_needs_two():
    d = [3, 5, 7]
    p = [math.exp(-4.8), math.exp(-6.6), 0.0]
    fit = fit_exponential(d, p, [1e-4, 1e-5, 0.0])
    assert fit.alpha == pytest.approx(0.9)
    with pytest.raises(InputError):
        fit_exponential([3, 5], [1e-3, 0.0], [1e-4, 0.0])


def test_tracking_output(tmp_path):
    cfg = ExperimentConfig(code="steane", rounds=3000, warmup_rounds=500, weights=("adaptive-co",))
    log, summary = track_rates_experiment(cfg)
    rows = summary["tracking"]["per_error"]
    assert len(rows) == 7
    assert {"mean_abs_co", "mean_abs_sp", "mean_abs_static", "co_sp_correlation"} <= set(rows[0])
    path = tmp_path / "rates.csv"
    write_rates_csv(path, log)
    lines = path.read_text().splitlines()
    assert lines[0] == "round,error_id,eps_true,eps_hat_co,eps_hat_sp,eps_used"
    assert len(lines) == 1 + 3000 * 7
    assert lines[1].startswith("1,0,")


def test_constant_rate_tracking_converges():
    cfg = ExperimentConfig(
        code="steane", rounds=25_000, warmup_rounds=20_000, sd_rate=0.0, sigma_f=0.5,
        xi=5000.0, weights=("adaptive-co",),
    )
    log, _ = track_rates_experiment(cfg)
    # About two relaxation times of data; shot noise is near sqrt(0.02 / 5000) = 0.002.
    for name in ("eps_hat_co", "eps_hat_sp"):
        assert np.all(np.abs(log[name][-1] - 0.02) < 0.01)


def test_json_formatting():
    text = to_json({"a": 0.1, "b": [1, math.nan], "c": True, "d": None})
    assert '"a": 0.10000000000000001' in text
    assert "null" in text and "true" in text


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[noise]\nmean_rate = 0.03\nsd_rate = 0.01\n[decoder]\nweights = static, adaptive-sp\n")
    cfg = load_config(path, ["rounds=2000", "distances=3,5"])
    assert cfg.mean_rate == 0.03 and cfg.weights == ("static", "adaptive-sp")
    assert cfg.rounds == 2000 and cfg.distances == (3, 5)
    for bad in (["nope=1"], ["rounds=x"], ["weights=fancy"], ["decoder=ml"]):
        with pytest.raises(InputError):
            load_config(path, bad)
    path.write_text("[a]\nrounds = 5\n[b]\nrounds = 6\n")
    with pytest.raises(InputError):
        load_config(path)


def test_estimator_none_needs_non_adaptive_modes():
    with pytest.raises(InputError):
        ExperimentConfig(estimator="none", weights=("adaptive-sp",))
    res = run_shards(small(estimator="none", weights=("static",), observer="co"))
    assert res.summaries["static"].rounds == 500


def test_static_estimator_mode():
    res = run_shards(small(estimator="static", weights=("adaptive-sp", "adaptive-co")))
    assert set(res.summaries) == {"adaptive-sp", "adaptive-co"}
