import math

import numpy as np
import pytest

from adaptqec.errors import InputError
from adaptqec.estimator import (
    TrackBank,
    full_gp_oracle,
    likelihood_derivatives,
    log_marginal_likelihood,
    new_track,
    predict,
    static_estimate,
    update,
)
from adaptqec.noise import OUPrior, f_of_rate, ou_step, rate_of_f

PRIOR = OUPrior(-4.0045, 0.4863, 50.0)


def test_derivatives_match_finite_differences():
    h = 1e-5
    for m in np.linspace(-6.0, -2.0, 5):
        for v in np.linspace(0.05, 1.0, 5):
            for y in (1, -1):
                q, r, _ = likelihood_derivatives(m, v, y)
                up = log_marginal_likelihood(m + h, v, y)
                mid = log_marginal_likelihood(m, v, y)
                dn = log_marginal_likelihood(m - h, v, y)
                q_fd = (up - dn) / (2 * h)
                r_fd = (up - 2 * mid + dn) / h**2
                assert float(q) == pytest.approx(q_fd, rel=1e-4)
                if y == 1:
                    assert float(r) == 0.0 and abs(r_fd) < 1e-4
                else:
                    assert float(r) == pytest.approx(r_fd, rel=1e-4)


def test_recursion_matches_full_covariance_oracle():
    rng = np.random.default_rng(42)
    for _ in range(20):
        events = np.where(rng.random(200) < 0.05, 1, -1)
        oracle = full_gp_oracle(events, PRIOR, horizon=5)
        state = new_track(PRIOR)
        for t in range(201):
            for x in range(max(t, 1), 206):
                pred = predict(state, x)
                assert abs(pred.mean_f - oracle.mean[t, x - 1]) < 1e-9
                assert abs(pred.var_f - oracle.var[t, x - 1]) < 1e-9
            if t < 200:
                state = update(state, int(events[t]))


def test_bank_matches_scalar_tracks():
    rng = np.random.default_rng(3)
    bank = TrackBank(PRIOR, 4)
    tracks = [new_track(PRIOR) for _ in range(4)]
    for _ in range(300):
        y = np.where(rng.random(4) < 0.1, 1, -1)
        expected = [predict(t, t.t + 1).rate for t in tracks]
        assert np.allclose(bank.predict_next(), expected, rtol=1e-13)
        bank.update(y)
        tracks = [update(t, int(v)) for t, v in zip(tracks, y)]
    assert bank.state(2).delta_f == pytest.approx(tracks[2].delta_f, rel=1e-13)


def test_long_quiet_stretch_relaxes_back():
    state = update(new_track(PRIOR), 1)
    kick = state.delta_f
    for _ in range(2000):
        state = update(state, -1)
    # Each quiet round shrinks delta_f by about e^{-1/xi}, plus a small O(g) pull.
    assert 0 > state.delta_f > -1.0
    assert abs(state.delta_f) < abs(kick)


def test_tracking_beats_static_mean_with_genuine_events():
    rng = np.random.default_rng(8)
    from adaptqec.noise import calibrate_prior

    f0, sf = calibrate_prior(0.02, 0.01)
    prior = OUPrior(f0, sf, 5000.0)
    f = f0 + sf * rng.standard_normal(7)
    bank = TrackBank(prior, 7)
    err_est = np.zeros(7)
    err_static = np.zeros(7)
    R, warm = 50_000, 10_000
    for x in range(R):
        f = ou_step(f, prior, rng)
        eps = rate_of_f(f)
        if x >= warm:
            err_est += np.abs(bank.predict_next() - eps)
            err_static += np.abs(0.02 - eps)
        bank.update(np.where(rng.random(7) < eps, 1, -1))
    assert np.all(err_est < err_static)


def test_constant_rate_is_recovered():
    rng = np.random.default_rng(5)
    prior = OUPrior(float(f_of_rate(0.02)), 0.5, 2000.0)
    bank = TrackBank(prior, 3)
    true = np.array([0.01, 0.03, 0.05])
    for _ in range(10_000):
        bank.update(np.where(rng.random(3) < true, 1, -1))
    est = bank.predict_next()
    # Effective memory is of order xi rounds, so the shot noise is about sqrt(eps/xi).
    assert np.all(np.abs(est - true) < 4 * np.sqrt(true / 2000.0))


def test_input_checks():
    with pytest.raises(InputError):
        update(new_track(PRIOR), 0)
    with pytest.raises(InputError):
        predict(update(new_track(PRIOR), 1), 0)
    with pytest.raises(InputError):
        static_estimate([])
    assert static_estimate([1, -1, -1, -1]) == 0.25


def test_clamp_is_counted():
    _, _, clamped = likelihood_derivatives(0.5, 0.1, -1)
    assert bool(clamped)
    bank = TrackBank(OUPrior(0.5, 0.1, 10.0), 2)
    bank.update(np.array([-1, 1]))
    assert bank.clamps == 1 and np.all(np.isfinite(bank.delta_f))


def test_zero_variance_prior_is_static():
    prior = OUPrior(-4.0, 0.0, 100.0)
    state = new_track(prior)
    for y in (1, -1, 1):
        state = update(state, y)
    assert predict(state, 10).rate == pytest.approx(math.exp(-4.0))
