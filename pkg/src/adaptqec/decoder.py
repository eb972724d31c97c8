"""Decoders: exhaustive maximum-probability decoding and rate-weighted MWPM."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from adaptqec.errors import GraphError, InputError, InvariantError, SizeError
from adaptqec.matching import match_defects
from adaptqec.noise import TrackedError
from adaptqec.pauli import (
    ErrorClass,
    PauliString,
    StabilizerCode,
    Syndrome,
    classify_error,
    compose_classes,
)

logger = logging.getLogger(__name__)

RATE_FLOOR = 1e-12
RATE_CAP = 0.5 - 1e-9
IDEAL_MAX_CONFIGS = 2**24


@dataclass
class ClipCounter:
    """Counts rates pushed back into (RATE_FLOOR, RATE_CAP) before taking log-odds."""

    low: int = 0
    high: int = 0

    @property
    def total(self) -> int:
        return self.low + self.high


def clip_rates(rates, counter: ClipCounter | None = None) -> np.ndarray:
    rates = np.asarray(rates, dtype=float)
    low = rates < RATE_FLOOR
    high = rates > RATE_CAP
    if counter is not None:
        counter.low += int(np.count_nonzero(low))
        counter.high += int(np.count_nonzero(high))
    return np.clip(rates, RATE_FLOOR, RATE_CAP)


def edge_weight(rate, counter: ClipCounter | None = None):
    """Log-odds weight ln((1 - rate) / rate) of an edge."""
    r = clip_rates(rate, counter)
    w = np.log1p(-r) - np.log(r)
    return w if w.ndim else float(w)


# --------------------------------------------------------------------------
# Decode results


@dataclass(frozen=True)
class CorrectionDecomposition:
    """Per-tracked-error indicator y (+1 means the error is part of the correction)."""

    y: tuple[int, ...]

    def fired(self) -> np.ndarray:
        return np.array([v == 1 for v in self.y], dtype=bool)


@dataclass(frozen=True)
class DecodeResult:
    correction_class: ErrorClass
    decomposition: CorrectionDecomposition


def _decomposition_from(fired: np.ndarray) -> CorrectionDecomposition:
    return CorrectionDecomposition(tuple(1 if f else -1 for f in fired))


def check_decomposition(
    code: StabilizerCode, tracked: Sequence[TrackedError], y: CorrectionDecomposition, syndrome: Syndrome
) -> PauliString:
    """Product of the y=+1 tracked Paulis; raises if its syndrome is wrong."""
    out = PauliString.identity(code.n)
    for t, v in zip(tracked, y.y):
        if v == 1:
            out = out * t.pauli
    got = code.syndrome_bits(out.x_bits, out.z_bits)
    if not np.array_equal(got, syndrome.bits()):
        raise InvariantError("correction decomposition does not reproduce the syndrome")
    return out


def logical_failure(correction: ErrorClass, actual: ErrorClass) -> bool:
    """True when correcting ``actual`` with ``correction`` leaves a logical error."""
    if correction.syndrome != actual.syndrome:
        raise InputError("correction and actual error have different syndromes")
    return not compose_classes(correction, actual).is_logical_trivial()


# --------------------------------------------------------------------------
# Matching decoder


@dataclass(eq=False)
class DecodingGraph:
    """Phase-flip decoding graph: X checks as vertices, qubits as edges.

    Node ids ``0..V-1`` are the check vertices (``check_vertices[i]`` is the
    generator index), ``V`` and ``V+1`` are the left and right virtual
    boundary nodes. ``edges[e] = (u, v, qubit)``.
    """

    check_vertices: tuple[int, ...]
    edges: tuple[tuple[int, int, int], ...]
    n_qubits: int
    edge_of_qubit: np.ndarray = field(init=False, repr=False)
    _edge_lookup: dict = field(init=False, repr=False)

    def __post_init__(self):
        V = len(self.check_vertices)
        eoq = np.full(self.n_qubits, -1, dtype=np.int64)
        lookup = {}
        for e, (u, v, q) in enumerate(self.edges):
            if eoq[q] != -1:
                raise GraphError(f"qubit {q} appears on two edges")
            if u == v or not (0 <= u < V + 2 and 0 <= v < V + 2):
                raise GraphError(f"bad edge endpoints ({u}, {v})")
            if u >= V and v >= V:
                raise GraphError("edge joins two boundary nodes")
            key = (min(u, v), max(u, v))
            if key in lookup:
                raise GraphError(f"parallel edges between {key}")
            lookup[key] = e
            eoq[q] = e
        self.edge_of_qubit = eoq
        self._edge_lookup = lookup

    @property
    def num_checks(self) -> int:
        return len(self.check_vertices)

    @property
    def boundary_vertices(self) -> tuple[int, int]:
        return self.num_checks, self.num_checks + 1

    @property
    def num_nodes(self) -> int:
        return self.num_checks + 2

    def edge_between(self, u: int, v: int) -> int:
        return self._edge_lookup[(min(u, v), max(u, v))]

    def edge_qubits(self) -> np.ndarray:
        return np.array([q for _, _, q in self.edges], dtype=np.int64)

    @classmethod
    def from_code(cls, code: StabilizerCode) -> DecodingGraph:
        """Build the graph seen by single-qubit Z errors.

        Qubits flipping one check attach to the nearer rough boundary, decided
        from the code's qubit coordinates.
        """
        x_type = [
            i for i, g in enumerate(code.generators) if g.x_bits.any() and not g.z_bits.any()
        ]
        if not x_type:
            raise GraphError("code has no X-type checks")
        checks = code.gen_x[x_type]
        V = len(x_type)
        edges = []
        cols = None
        if code.qubit_coords is not None:
            cols = np.array([c for _, c in code.qubit_coords])
            mid = (cols.min() + cols.max()) / 2
        for q in range(code.n):
            touch = np.nonzero(checks[:, q])[0]
            if len(touch) == 2:
                edges.append((int(touch[0]), int(touch[1]), q))
            elif len(touch) == 1:
                side = V if cols is None or cols[q] < mid else V + 1
                edges.append((int(touch[0]), side, q))
            else:
                raise GraphError(f"qubit {q} touches {len(touch)} X checks; not a matching graph")
        return cls(tuple(x_type), tuple(edges), code.n)


class MatchingDecoder:
    """Minimum-weight perfect matching on a :class:`DecodingGraph`.

    Edge weights come from per-qubit rates. With ``cache=True`` (static
    weights) corrections are memoized by defect set.
    """

    def __init__(self, graph: DecodingGraph, cache: bool = False):
        self.graph = graph
        self.cache = cache
        self._memo: dict[tuple[int, ...], np.ndarray] = {}
        E = len(graph.edges)
        rows = np.array([u for u, _, _ in graph.edges] + [v for _, v, _ in graph.edges])
        cols = np.array([v for _, v, _ in graph.edges] + [u for u, _, _ in graph.edges])
        N = graph.num_nodes
        # Fixed sparsity pattern; ``_slot`` maps stored entries back to edges.
        self._csr = sparse.csr_matrix((np.arange(1, 2 * E + 1, dtype=float), (rows, cols)), shape=(N, N))
        self._slot = (self._csr.data.astype(np.int64) - 1) % E
        self._qubit_at = np.full((N, N), -1, dtype=np.int64)
        self._qubit_at[rows, cols] = [q for _, _, q in graph.edges] * 2
        self._edge_q = graph.edge_qubits()
        self._weights: np.ndarray | None = None
        self.clips = ClipCounter()

    def set_rates(self, rates: np.ndarray) -> None:
        """Per-qubit rates; edge weights follow each edge's own qubit."""
        w = edge_weight(np.asarray(rates, dtype=float)[self._edge_q], self.clips)
        if self.cache and self._weights is not None and np.array_equal(w, self._weights):
            return
        self._weights = w
        self._memo.clear()
        self._csr.data = w[self._slot]

    def decode_defects(self, defects: Sequence[int]) -> np.ndarray:
        """Correction as a per-qubit 0/1 vector for defect node ids."""
        key = tuple(defects)
        if self.cache and key in self._memo:
            return self._memo[key]
        corr = self._decode(key)
        if self.cache:
            corr.setflags(write=False)
            self._memo[key] = corr
        return corr

    def _decode(self, defects: tuple[int, ...]) -> np.ndarray:
        g = self.graph
        corr = np.zeros(g.n_qubits, dtype=np.uint8)
        m = len(defects)
        if m == 0:
            return corr
        if self._weights is None:
            raise InvariantError("set_rates must be called before decoding")
        dist, pred = csgraph.dijkstra(self._csr, directed=True, indices=list(defects), return_predecessors=True)
        left, right = g.boundary_vertices
        pair_cost = dist[:, list(defects)]
        to_left, to_right = dist[:, left], dist[:, right]
        boundary_cost = np.minimum(to_left, to_right)
        reachable = np.isfinite(boundary_cost) | (np.isfinite(pair_cost).sum(axis=1) > 1)
        if not reachable.all():
            raise GraphError("a defect cannot reach any partner or boundary")
        for i, j in match_defects(pair_cost, boundary_cost):
            if j < 0:
                target = left if to_left[i] <= to_right[i] else right
            else:
                target = defects[j]
            if not np.isfinite(dist[i, target]):
                raise GraphError(f"defect {defects[i]} cannot reach node {target}")
            node = target
            src = defects[i]
            row = pred[i]
            qat = self._qubit_at
            while node != src:
                prev = row[node]
                corr[qat[prev, node]] ^= 1
                node = prev
        return corr


def mwpm_decode(
    code: StabilizerCode,
    graph: DecodingGraph,
    syndrome: Syndrome,
    rates,
    tracked: Sequence[TrackedError] | None = None,
) -> DecodeResult:
    """Decode a syndrome with MWPM under per-qubit ``rates``.

    The decomposition is indexed by ``tracked`` (default: one Z error per
    qubit, in qubit order) and is +1 exactly on the corrected qubits.
    """
    if len(syndrome) != code.num_generators:
        raise InputError("syndrome length does not match the code")
    dec = MatchingDecoder(graph)
    dec.set_rates(rates)
    bits = syndrome.bits()
    defects = [i for i, gi in enumerate(graph.check_vertices) if bits[gi]]
    corr = dec.decode_defects(defects)
    correction = PauliString(np.zeros(code.n, dtype=np.uint8), corr)
    cls = classify_error(code, correction)
    if cls.syndrome != syndrome:
        raise InvariantError("matching correction does not reproduce the syndrome")
    if tracked is None:
        fired = corr.astype(bool)
    else:
        fired = np.zeros(len(tracked), dtype=bool)
        index = {t.pauli: i for i, t in enumerate(tracked)}
        for q in np.nonzero(corr)[0]:
            key = PauliString.single(code.n, "Z", int(q))
            if key not in index:
                raise InputError(f"qubit {q} has no tracked Z error")
            fired[index[key]] = True
    y = _decomposition_from(fired)
    return DecodeResult(cls, y)


# --------------------------------------------------------------------------
# Exhaustive maximum-probability decoder


class IdealDecoder:
    """Enumerates every subset of the tracked errors.

    For each subset the composed syndrome and logical label are precomputed
    once; decoding a syndrome with given rates sums the subset probabilities
    per label and returns the most probable class.
    """

    def __init__(self, code: StabilizerCode, tracked: Sequence[TrackedError]):
        E = len(tracked)
        if 2**E > IDEAL_MAX_CONFIGS:
            raise SizeError(f"2^{E} configurations exceed the cap of {IDEAL_MAX_CONFIGS}")
        self.code = code
        self.tracked = tuple(tracked)
        r = code.num_generators
        syn_codes = np.array([_bits_to_int(t.error_class.syndrome.bits()) for t in tracked], dtype=np.int64)
        lab_codes = np.array([_bits_to_int(t.error_class.logical_label) for t in tracked], dtype=np.int64)
        syn = np.zeros(1, dtype=np.int64)
        lab = np.zeros(1, dtype=np.int64)
        for e in range(E):
            syn = np.concatenate([syn, syn ^ syn_codes[e]])
            lab = np.concatenate([lab, lab ^ lab_codes[e]])
        self.subset_syndrome = syn
        self.subset_label = lab
        self.n_labels = 4**code.k
        self.num_generators = r
        order = np.argsort(syn, kind="stable")
        self._order = order
        uniq, starts = np.unique(syn[order], return_index=True)
        self._groups = dict(zip(uniq.tolist(), np.split(order, starts[1:])))

    def _subset_bits(self, subsets: np.ndarray) -> np.ndarray:
        E = len(self.tracked)
        return ((subsets[:, None] >> np.arange(E)) & 1).astype(np.uint8)

    def _log_probs(self, subsets: np.ndarray, rates: np.ndarray) -> np.ndarray:
        r = clip_rates(rates)
        bits = self._subset_bits(subsets)
        return bits @ (np.log(r) - np.log1p(-r)) + np.log1p(-r).sum()

    def class_table(self, rates) -> np.ndarray:
        """Exhaustive p[syndrome_code, label_code] table."""
        rates = np.asarray(rates, dtype=float)
        subsets = np.arange(len(self.subset_syndrome), dtype=np.int64)
        p = np.exp(self._log_probs(subsets, rates))
        table = np.zeros((2**self.num_generators, self.n_labels))
        np.add.at(table, (self.subset_syndrome, self.subset_label), p)
        return table

    def decode_code(self, syndrome_code: int, rates) -> tuple[int, np.ndarray]:
        """Returns (label_code, fired subset bits) for a packed syndrome."""
        rates = np.asarray(rates, dtype=float)
        group = self._groups.get(int(syndrome_code))
        if group is None:
            raise InputError("syndrome is not reachable by the tracked errors")
        logp = self._log_probs(group, rates)
        p = np.exp(logp - logp.max())
        labels = self.subset_label[group]
        totals = np.bincount(labels, weights=p, minlength=self.n_labels)
        best = int(np.argmax(totals))
        in_class = labels == best
        # Most probable subset within the chosen class; ties go to fewer errors.
        weights = self._subset_bits(group).sum(axis=1)
        key = np.where(in_class, logp, -np.inf)
        cand = np.flatnonzero(key == key.max())
        pick = cand[np.argmin(weights[cand])]
        return best, self._subset_bits(group[[pick]])[0]

    def decode(self, syndrome: Syndrome, rates) -> DecodeResult:
        if len(syndrome) != self.num_generators:
            raise InputError("syndrome length does not match the code")
        label_code, fired = self.decode_code(_bits_to_int(syndrome.bits()), rates)
        label = _int_to_bits(label_code, 2 * self.code.k)
        return DecodeResult(ErrorClass(syndrome, label), _decomposition_from(fired.astype(bool)))


def ideal_decode(code: StabilizerCode, syndrome: Syndrome, tracked: Sequence[TrackedError], rates) -> DecodeResult:
    """Maximum-probability class for ``syndrome`` given the tracked error rates."""
    return IdealDecoder(code, tracked).decode(syndrome, rates)


def _bits_to_int(bits) -> int:
    out = 0
    for i, b in enumerate(bits):
        if int(b) & 1:
            out |= 1 << i
    return out


def _int_to_bits(value: int, width: int) -> tuple[int, ...]:
    return tuple((value >> i) & 1 for i in range(width))


def exhaustive_p_log(decoder: IdealDecoder, rates, decision=None) -> float:
    """Failure probability 1 - sum_s p_s^{D(s)} from the class table.

    ``decision`` maps packed syndrome to the chosen label code; the default
    is the argmax (ideal) decision.
    """
    table = decoder.class_table(rates)
    if decision is None:
        chosen = table.max(axis=1)
    else:
        chosen = np.array([table[s, decision[s]] if s in decision else 0.0 for s in range(table.shape[0])])
    return float(1.0 - chosen.sum())


def exhaustive_matching_p_log(code: StabilizerCode, rates, max_qubits: int = 20) -> float:
    """Exact failure probability of MWPM under independent Z errors.

    Enumerates all 2^n phase-flip patterns, so it is limited to small codes.
    """
    n = code.n
    if n > max_qubits:
        raise SizeError(f"{n} qubits exceed the enumeration cap of {max_qubits}")
    rates = np.asarray(rates, dtype=float)
    graph = DecodingGraph.from_code(code)
    dec = MatchingDecoder(graph, cache=True)
    dec.set_rates(rates)
    patterns = ((np.arange(2**n, dtype=np.int64)[:, None] >> np.arange(n)) & 1).astype(np.uint8)
    zeros = np.zeros(n, dtype=np.uint8)
    syn = code.syndrome_bits(np.zeros_like(patterns), patterns)[:, list(graph.check_vertices)]
    labels = code.label_bits(np.zeros_like(patterns), patterns)
    log_p = patterns @ np.log(rates) + (1 - patterns) @ np.log1p(-rates)
    failed = np.zeros(2**n, dtype=bool)
    keys = syn @ (1 << np.arange(syn.shape[1], dtype=np.int64))
    for key in np.unique(keys):
        rows = np.flatnonzero(keys == key)
        corr = dec.decode_defects(tuple(np.flatnonzero(syn[rows[0]]).tolist()))
        corr_label = code.label_bits(zeros, corr)
        failed[rows] = np.any(labels[rows] != corr_label, axis=1)
    return math.fsum(np.exp(log_p[failed]))
