import math

import numpy as np
import pytest

from adaptqec.decoder import DecodingGraph, mwpm_decode
from adaptqec.errors import InputError
from adaptqec.noise import TrackedError, dephasing_errors
from adaptqec.observers import (
    build_pattern_index,
    faithful_probability_oracle,
    observe_co,
    observe_sp,
    observe_sp_bits,
    relevant_counts,
)
from adaptqec.pauli import PauliString, SurfaceLayout, Syndrome, classify_error, steane_code, surface_code, syndrome_of


def surface_index(d):
    code = surface_code(d)
    return code, build_pattern_index(code, dephasing_errors(code))


def test_index_sets_follow_their_definitions():
    code, idx = surface_index(3)
    sets = [set(p) for p in idx.patterns]
    for e in range(idx.size):
        rivals = {j for j in range(idx.size) if sets[e] <= sets[j]}
        assert set(idx.rivals[e]) == rivals
        watch = set().union(*(sets[j] for j in rivals))
        assert set(idx.watch[e]) == watch and sets[e] <= watch
        assert set(idx.relevant[e]) == {j for j in range(idx.size) if sets[j] & watch}
        assert e in idx.rivals[e] and set(idx.rivals[e]) <= set(idx.relevant[e])


def test_single_tracked_error():
    code = steane_code()
    z = PauliString.single(7, "Z", 6)
    idx = build_pattern_index(code, (TrackedError(classify_error(code, z), z),))
    assert idx.rivals == ((0,),) and idx.relevant == ((0,),)
    assert idx.watch == (idx.patterns[0],)
    res = faithful_probability_oracle(idx, [0.03], 0)
    assert res.eps_s == pytest.approx(0.03, abs=1e-15) and abs(res.delta) < 1e-15


def test_rough_boundary_qubit_rivals():
    code, idx = surface_index(3)
    lay = SurfaceLayout(3)
    e = lay.h(0, 0)
    assert len(idx.patterns[e]) == 1
    assert set(idx.rivals[e]) == {lay.h(0, 0), lay.h(0, 1), lay.v(0, 0)}


@pytest.mark.parametrize("d", [3, 5, 7])
def test_relevant_sets_stay_small(d):
    _, idx = surface_index(d)
    counts = relevant_counts(idx)
    assert counts.max() <= 13


def test_duplicate_syndromes_rejected():
    code = surface_code(3)
    z = PauliString.single(code.n, "Z", 0)
    t = TrackedError(classify_error(code, z), z)
    with pytest.raises(InputError):
        build_pattern_index(code, (t, t))


def test_sp_reads_only_watchlist(rng):
    code, idx = surface_index(5)
    for _ in range(200):
        z = (rng.random(code.n) < 0.08).astype(np.uint8)
        bits = code.syndrome_bits(np.zeros(code.n, dtype=np.uint8), z)
        out = observe_sp(idx, Syndrome.from_bits(bits))
        assert np.array_equal(out, observe_sp_bits(idx, bits))
        for e in rng.choice(idx.size, 5, replace=False):
            scrambled = bits.copy()
            outside = np.setdiff1d(np.arange(bits.size), idx.watch[e])
            scrambled[outside] = rng.integers(0, 2, outside.size)
            assert observe_sp(idx, Syndrome.from_bits(scrambled))[e] == out[e]


def test_single_error_is_seen_faithfully():
    code, idx = surface_index(3)
    for q in range(code.n):
        out = observe_sp(idx, syndrome_of(code, PauliString.single(code.n, "Z", q)))
        assert out[q] == 1


def test_co_events_follow_the_matching_path():
    code = surface_code(5)
    graph = DecodingGraph.from_code(code)
    rates = np.full(code.n, 0.02)
    res = mwpm_decode(code, graph, Syndrome.trivial(code.num_generators), rates)
    assert np.all(observe_co(res.decomposition) == -1)
    err = PauliString.single(code.n, "Z", 12)
    res = mwpm_decode(code, graph, syndrome_of(code, err), rates)
    y = observe_co(res.decomposition, code.n)
    assert np.flatnonzero(y == 1).tolist() == [12]
    with pytest.raises(InputError):
        observe_co(res.decomposition, 3)


@pytest.mark.parametrize("builder", [surface_code, steane_code])
def test_inaccuracy_bound_on_random_rates(builder, rng):
    code = builder(3) if builder is surface_code else builder()
    idx = build_pattern_index(code, dephasing_errors(code))
    for _ in range(50):
        rates = rng.uniform(0.0, 0.05, idx.size)
        for e in range(idx.size):
            res = faithful_probability_oracle(idx, rates, e)
            assert abs(res.delta) <= res.bound + 1e-15
            assert res.eps1 + res.eps2 == pytest.approx(res.eps_s, abs=1e-12)


def test_uniform_bulk_example():
    code, idx = surface_index(3)
    lay = SurfaceLayout(3)
    e = lay.v(0, 0)
    res = faithful_probability_oracle(idx, np.full(code.n, 0.02), e)
    assert res.P_s == pytest.approx(0.02 * len(idx.relevant[e]))
    assert abs(res.eps_s - 0.02) <= (res.P_s - 0.02) * 0.02 + res.P_s**2


def test_sp_frequency_matches_oracle():
    code, idx = surface_index(3)
    rng = np.random.default_rng(17)
    rates = rng.uniform(0.01, 0.05, code.n)
    R = 200_000
    z = (rng.random((R, code.n)) < rates).astype(np.int64)
    syn = (z @ code.gen_x.T.astype(np.int64)) & 1
    batch = observe_sp_bits(idx, syn)
    for row in range(0, R, 9973):
        assert np.array_equal(batch[row], observe_sp(idx, Syndrome.from_bits(syn[row])))
    hits = (batch == 1).sum(axis=0)
    for e in range(code.n):
        p = faithful_probability_oracle(idx, rates, e).eps_s
        assert abs(hits[e] / R - p) < 3.5 * math.sqrt(p * (1 - p) / R)
