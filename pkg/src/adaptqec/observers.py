"""Turning each round's data into per-error event indicators.

Correction-operation (CO) events come straight from the decoder's
decomposition. Syndrome-pattern (SP) events are read off the raw syndrome:
an error is reported when its pattern of -1 checks occurs and no rival
error whose pattern contains it also occurs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from adaptqec.decoder import CorrectionDecomposition
from adaptqec.errors import InputError, InvariantError, SizeError
from adaptqec.noise import TrackedError
from adaptqec.pauli import StabilizerCode, Syndrome

ORACLE_MAX_RELEVANT = 20


def _is_subset(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    """Merge-scan subset test on sorted index tuples."""
    j = 0
    nb = len(b)
    for x in a:
        while j < nb and b[j] < x:
            j += 1
        if j == nb or b[j] != x:
            return False
        j += 1
    return True


@dataclass(frozen=True)
class PatternIndex:
    """Per tracked error: pattern, rivals, watchlist and relevant errors.

    ``patterns[e]`` is the sorted tuple of checks an error flips.
    ``rivals[e]`` lists errors (including e) whose pattern contains e's.
    ``watch[e]`` is the union of rival patterns; ``relevant[e]`` lists errors
    whose pattern meets the watchlist.
    """

    num_generators: int
    patterns: tuple[tuple[int, ...], ...]
    rivals: tuple[tuple[int, ...], ...]
    watch: tuple[tuple[int, ...], ...]
    relevant: tuple[tuple[int, ...], ...]
    pattern_matrix: np.ndarray
    rival_matrix: np.ndarray

    @property
    def size(self) -> int:
        return len(self.patterns)

    def max_relevant(self) -> int:
        return max(len(r) for r in self.relevant)


def build_pattern_index(code: StabilizerCode, tracked: Sequence[TrackedError]) -> PatternIndex:
    patterns = tuple(t.error_class.syndrome.defects() for t in tracked)
    if len(set(patterns)) != len(patterns):
        raise InputError("tracked errors must have pairwise distinct syndromes")
    E = len(patterns)
    sets = [set(p) for p in patterns]
    rivals = tuple(tuple(j for j in range(E) if sets[e] <= sets[j]) for e in range(E))
    watch = tuple(tuple(sorted(set().union(*(sets[j] for j in rivals[e])))) for e in range(E))
    relevant = tuple(
        tuple(j for j in range(E) if sets[j] & set(watch[e])) for e in range(E)
    )
    pm = np.zeros((E, code.num_generators), dtype=np.int64)
    for e, p in enumerate(patterns):
        pm[e, list(p)] = 1
    rm = np.zeros((E, E), dtype=np.int64)
    for e in range(E):
        for j in rivals[e]:
            if j != e:
                rm[e, j] = 1
    for arr in (pm, rm):
        arr.setflags(write=False)
    return PatternIndex(code.num_generators, patterns, rivals, watch, relevant, pm, rm)


def observe_sp(index: PatternIndex, measured: Syndrome) -> np.ndarray:
    """+1 for each error whose pattern occurs faithfully, else -1.

    Only checks in each error's watchlist are read.
    """
    if len(measured) != index.num_generators:
        raise InputError("syndrome length does not match the pattern index")
    values = measured.values
    out = np.full(index.size, -1, dtype=np.int8)
    for e in range(index.size):
        flipped = tuple(c for c in index.watch[e] if values[c] == -1)
        if not _is_subset(index.patterns[e], flipped):
            continue
        if any(j != e and _is_subset(index.patterns[j], flipped) for j in index.rivals[e]):
            continue
        out[e] = 1
    return out


def observe_sp_bits(index: PatternIndex, bits: np.ndarray) -> np.ndarray:
    """Vectorized :func:`observe_sp` on a 0/1 syndrome vector or a (rounds, r) batch."""
    pm = index.pattern_matrix
    occurs = (np.asarray(bits, dtype=np.int64) @ pm.T) == pm.sum(axis=1)
    rival_hit = (occurs.astype(np.int64) @ index.rival_matrix.T) > 0
    return np.where(occurs & ~rival_hit, 1, -1).astype(np.int8)


def observe_co(decomposition: CorrectionDecomposition, size: int | None = None) -> np.ndarray:
    """Pass the decoder's y vector through."""
    y = np.asarray(decomposition.y, dtype=np.int8)
    if size is not None and y.size != size:
        raise InputError(f"decomposition has {y.size} entries, expected {size}")
    return y


@dataclass(frozen=True)
class FaithfulProbability:
    eps_s: float
    eps1: float
    eps2: float
    P_s: float
    bound: float
    rate: float

    @property
    def delta(self) -> float:
        return self.eps_s - self.rate


def faithful_probability_oracle(index: PatternIndex, rates, target: int) -> FaithfulProbability:
    """Exact probability that ``target``'s pattern occurs faithfully.

    Enumerates every firing subset of the relevant errors. ``rates`` holds
    one rate per tracked error (only relevant entries are used).
    """
    rel = index.relevant[target]
    if len(rel) > ORACLE_MAX_RELEVANT:
        raise SizeError(f"{len(rel)} relevant errors exceed the cap of {ORACLE_MAX_RELEVANT}")
    rates = np.asarray(rates, dtype=float)
    eps = rates[list(rel)]
    R = len(rel)
    watch = index.watch[target]
    col = {c: i for i, c in enumerate(watch)}
    # Syndrome flips of each relevant error restricted to the watchlist, as bit masks.
    masks = np.zeros(R, dtype=np.int64)
    for i, j in enumerate(rel):
        for c in index.patterns[j]:
            if c in col:
                masks[i] |= 1 << col[c]
    subsets = np.arange(2**R, dtype=np.int64)
    fired = ((subsets[:, None] >> np.arange(R)) & 1).astype(bool)
    so = np.zeros(2**R, dtype=np.int64)
    for i in range(R):
        so ^= np.where(fired[:, i], masks[i], 0)
    probs = np.prod(np.where(fired, eps, 1.0 - eps), axis=1)

    def pattern_mask(j):
        m = 0
        for c in index.patterns[j]:
            m |= 1 << col[c]
        return m

    own = pattern_mask(target)
    faithful = (so & own) == own
    for j in index.rivals[target]:
        if j != target:
            pm = pattern_mask(j)
            faithful &= (so & pm) != pm
    n_fired = fired.sum(axis=1)
    eps_s = float(probs[faithful].sum())
    e = float(rates[target])
    p0 = float(np.prod(1.0 - eps))
    eps1 = p0 * e / (1.0 - e)
    eps2 = float(probs[faithful & (n_fired >= 2)].sum())
    single = faithful & (n_fired <= 1)
    if not np.isclose(probs[single].sum(), eps1, rtol=1e-12, atol=1e-15):
        raise InvariantError("single-error faithful term disagrees with p0*eps/(1-eps)")
    if e - eps1 < -1e-15 or eps2 < 0:
        raise InvariantError("faithful-probability split has a negative part")
    P_s = float(eps.sum())
    bound = (P_s - e) * e + P_s**2
    return FaithfulProbability(eps_s, eps1, eps2, P_s, bound, e)


def relevant_counts(index: PatternIndex) -> np.ndarray:
    return np.array([len(r) for r in index.relevant])
