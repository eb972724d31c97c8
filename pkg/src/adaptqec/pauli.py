"""Phase-free Pauli algebra, stabilizer codes and error classes.

Pauli operators are stored in symplectic form: an X bit vector and a Z bit
vector, both of length ``n``. Phases are dropped because a Pauli error acts
on density matrices by conjugation, where global phases cancel.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from adaptqec.errors import InputError, InvariantError


def _bits(values: Iterable[int] | np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.uint8).reshape(-1) & 1
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PauliString:
    """Pauli operator on ``n`` qubits with its phase dropped."""

    x_bits: np.ndarray
    z_bits: np.ndarray

    def __post_init__(self):
        x = _bits(self.x_bits)
        z = _bits(self.z_bits)
        if x.shape != z.shape:
            raise InputError(f"x and z bit vectors differ in length ({x.size} != {z.size})")
        if x.size < 1:
            raise InputError("a Pauli string needs at least one qubit")
        object.__setattr__(self, "x_bits", x)
        object.__setattr__(self, "z_bits", z)

    @property
    def n(self) -> int:
        return int(self.x_bits.size)

    @classmethod
    def identity(cls, n: int) -> PauliString:
        zeros = np.zeros(n, dtype=np.uint8)
        return cls(zeros, zeros)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Parse a dense label such as ``"XIZY"`` (qubit 0 first)."""
        label = label.strip().upper()
        if not label or set(label) - set("IXYZ"):
            raise InputError(f"invalid Pauli label {label!r}")
        x = [c in "XY" for c in label]
        z = [c in "ZY" for c in label]
        return cls(np.array(x), np.array(z))

    @classmethod
    def single(cls, n: int, kind: str, qubits: int | Iterable[int]) -> PauliString:
        """``kind`` ('X', 'Y' or 'Z') acting on the given 0-based qubit(s)."""
        kind = kind.upper()
        if kind not in ("X", "Y", "Z"):
            raise InputError(f"unknown Pauli kind {kind!r}")
        if isinstance(qubits, (int, np.integer)):
            qubits = [int(qubits)]
        x = np.zeros(n, dtype=np.uint8)
        z = np.zeros(n, dtype=np.uint8)
        for q in qubits:
            if not 0 <= q < n:
                raise InputError(f"qubit index {q} out of range for n={n}")
            if kind in "XY":
                x[q] ^= 1
            if kind in "ZY":
                z[q] ^= 1
        return cls(x, z)

    def symplectic(self) -> np.ndarray:
        """Concatenated vector (x_1..x_n, z_1..z_n)."""
        return np.concatenate([self.x_bits, self.z_bits])

    def weight(self) -> int:
        return int(np.count_nonzero(self.x_bits | self.z_bits))

    def is_identity(self) -> bool:
        return not (self.x_bits.any() or self.z_bits.any())

    def label(self) -> str:
        chars = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
        return "".join(chars[(int(a), int(b))] for a, b in zip(self.x_bits, self.z_bits))

    def __mul__(self, other: PauliString) -> PauliString:
        return multiply(self, other)

    def __eq__(self, other):
        if not isinstance(other, PauliString):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.x_bits, other.x_bits)
            and np.array_equal(self.z_bits, other.z_bits)
        )

    def __hash__(self):
        return hash((self.x_bits.tobytes(), self.z_bits.tobytes()))

    def __repr__(self):
        return f"PauliString({self.label()!r})"


def _check_lengths(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise InputError(f"Pauli strings act on different qubit counts ({a.n} != {b.n})")


def symplectic_product(a: PauliString, b: PauliString) -> int:
    """0 if ``a`` and ``b`` commute, 1 if they anticommute."""
    _check_lengths(a, b)
    return int((np.dot(a.x_bits, b.z_bits) + np.dot(a.z_bits, b.x_bits)) & 1)


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Phase-free product (entrywise XOR of the symplectic vectors)."""
    _check_lengths(a, b)
    return PauliString(a.x_bits ^ b.x_bits, a.z_bits ^ b.z_bits)


def _gf2_rank(rows: np.ndarray) -> int:
    m = np.array(rows, dtype=np.uint8) & 1
    rank = 0
    n_rows, n_cols = m.shape
    for col in range(n_cols):
        pivot = next((r for r in range(rank, n_rows) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        others = np.nonzero(m[:, col])[0]
        others = others[others != rank]
        m[others] ^= m[rank]
        rank += 1
        if rank == n_rows:
            break
    return rank


@dataclass(frozen=True)
class Syndrome:
    """Stabilizer eigenvalues, one entry in {+1, -1} per generator."""

    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if any(v not in (1, -1) for v in vals):
            raise InputError("syndrome entries must be +1 or -1")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> Syndrome:
        """Build from flip bits (1 means the generator reads -1)."""
        return cls(tuple(-1 if int(b) & 1 else 1 for b in bits))

    @classmethod
    def trivial(cls, size: int) -> Syndrome:
        return cls((1,) * size)

    def bits(self) -> np.ndarray:
        return np.array([v == -1 for v in self.values], dtype=np.uint8)

    def defects(self) -> tuple[int, ...]:
        """Generator indices reading -1."""
        return tuple(i for i, v in enumerate(self.values) if v == -1)

    def is_trivial(self) -> bool:
        return all(v == 1 for v in self.values)

    def __len__(self):
        return len(self.values)

    def __mul__(self, other: Syndrome) -> Syndrome:
        if len(self) != len(other):
            raise InputError("syndromes have different lengths")
        return Syndrome(tuple(a * b for a, b in zip(self.values, other.values)))


@dataclass(frozen=True)
class ErrorClass:
    """Coset of the stabilizer group: a syndrome plus a logical label.

    The label holds 2k bits: anticommutation with each logical X, then with
    each logical Z.
    """

    syndrome: Syndrome
    logical_label: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "logical_label", tuple(int(b) & 1 for b in self.logical_label))

    @classmethod
    def identity(cls, num_generators: int, k: int) -> ErrorClass:
        return cls(Syndrome.trivial(num_generators), (0,) * (2 * k))

    def is_logical_trivial(self) -> bool:
        return not any(self.logical_label)


def compose_classes(a: ErrorClass, b: ErrorClass) -> ErrorClass:
    """Class of the product of a representative of ``a`` with one of ``b``."""
    if len(a.syndrome) != len(b.syndrome) or len(a.logical_label) != len(b.logical_label):
        raise InputError("error classes have mismatched dimensions")
    label = tuple(x ^ y for x, y in zip(a.logical_label, b.logical_label))
    return ErrorClass(a.syndrome * b.syndrome, label)


@dataclass(frozen=True, eq=False)
class StabilizerCode:
    """Stabilizer code with an explicit choice of logical operators.

    ``qubit_coords`` is optional layout metadata (used by the surface-code
    decoding graph to tell the two rough boundaries apart).
    """

    n: int
    k: int
    generators: tuple[PauliString, ...]
    logical_x: tuple[PauliString, ...]
    logical_z: tuple[PauliString, ...]
    distance: int
    name: str = "custom"
    qubit_coords: tuple[tuple[float, float], ...] | None = None
    gen_x: np.ndarray = field(init=False, repr=False)
    gen_z: np.ndarray = field(init=False, repr=False)
    logical_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        gens = tuple(self.generators)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "logical_x", tuple(self.logical_x))
        object.__setattr__(self, "logical_z", tuple(self.logical_z))
        for p in itertools.chain(gens, self.logical_x, self.logical_z):
            if p.n != self.n:
                raise InputError(f"operator {p.label()} does not act on {self.n} qubits")
        gx = np.array([g.x_bits for g in gens], dtype=np.uint8).reshape(len(gens), self.n)
        gz = np.array([g.z_bits for g in gens], dtype=np.uint8).reshape(len(gens), self.n)
        logicals = list(self.logical_x) + list(self.logical_z)
        # Rows are symplectic-dual so that ``logical_matrix @ [x|z]`` gives the label.
        lm = np.array(
            [np.concatenate([p.z_bits, p.x_bits]) for p in logicals], dtype=np.uint8
        ).reshape(len(logicals), 2 * self.n)
        for arr in (gx, gz, lm):
            arr.setflags(write=False)
        object.__setattr__(self, "gen_x", gx)
        object.__setattr__(self, "gen_z", gz)
        object.__setattr__(self, "logical_matrix", lm)
        self._validate()

    @property
    def num_generators(self) -> int:
        return len(self.generators)

    def _validate(self) -> None:
        n, k = self.n, self.k
        if not 0 <= k < n:
            raise InputError(f"invalid code parameters n={n}, k={k}")
        if self.num_generators != n - k:
            raise InputError(f"expected {n - k} generators, got {self.num_generators}")
        if len(self.logical_x) != k or len(self.logical_z) != k:
            raise InputError(f"expected {k} logical X and {k} logical Z operators")
        gens = self.generators
        for a, b in itertools.combinations(gens, 2):
            if symplectic_product(a, b):
                raise InputError(f"generators {a.label()} and {b.label()} anticommute")
        sym = np.hstack([self.gen_x, self.gen_z])
        if _gf2_rank(sym) != n - k:
            raise InputError("stabilizer generators are not independent")
        for lop in itertools.chain(self.logical_x, self.logical_z):
            if any(symplectic_product(lop, g) for g in gens):
                raise InputError(f"logical operator {lop.label()} does not commute with the stabilizer")
        for i, lx in enumerate(self.logical_x):
            for j, lz in enumerate(self.logical_z):
                if symplectic_product(lx, lz) != (i == j):
                    raise InputError("logical X and Z operators are not canonically paired")
        if self.distance < 1:
            raise InputError("distance must be positive")

    def syndrome_bits(self, x_bits: np.ndarray, z_bits: np.ndarray) -> np.ndarray:
        """Vectorized flip bits; accepts (n,) vectors or (batch, n) arrays."""
        return (z_bits @ self.gen_x.T + x_bits @ self.gen_z.T) & 1

    def label_bits(self, x_bits: np.ndarray, z_bits: np.ndarray) -> np.ndarray:
        lx = self.logical_matrix[:, : self.n]
        lz = self.logical_matrix[:, self.n :]
        return (x_bits @ lx.T + z_bits @ lz.T) & 1

    def is_stabilizer(self, p: PauliString) -> bool:
        """True when ``p`` lies in the stabilizer group (up to phase)."""
        sym = np.hstack([self.gen_x, self.gen_z])
        return _gf2_rank(np.vstack([sym, p.symplectic()])) == self.num_generators


def _check_error(code: StabilizerCode, error: PauliString) -> None:
    if error.n != code.n:
        raise InputError(f"error acts on {error.n} qubits, code has {code.n}")


def syndrome_of(code: StabilizerCode, error: PauliString) -> Syndrome:
    """Entry i is -1 iff ``error`` anticommutes with generator i."""
    _check_error(code, error)
    return Syndrome.from_bits(code.syndrome_bits(error.x_bits, error.z_bits))


def classify_error(code: StabilizerCode, error: PauliString) -> ErrorClass:
    _check_error(code, error)
    syn = syndrome_of(code, error)
    label = code.label_bits(error.x_bits, error.z_bits)
    return ErrorClass(syn, tuple(int(b) for b in label))


def logical_operator(code: StabilizerCode, label: Sequence[int]) -> PauliString:
    """Product of logical operators whose class label equals ``label``.

    Bit ``i`` of the X half of the label flags anticommutation with
    logical_x[i], which the logical_z[i] operator supplies.
    """
    k = code.k
    if len(label) != 2 * k:
        raise InputError("label has wrong length")
    out = PauliString.identity(code.n)
    for i in range(k):
        if label[i]:
            out = multiply(out, code.logical_z[i])
        if label[k + i]:
            out = multiply(out, code.logical_x[i])
    return out


# --------------------------------------------------------------------------
# Code constructors


def _pauli_on(n: int, kind: str, qubits: Iterable[int]) -> PauliString:
    return PauliString.single(n, kind, list(qubits))


def repetition_code(n: int) -> StabilizerCode:
    """Bit-flip repetition code: ZZ checks on neighbouring qubits.

    Only X errors are detected, so the minimum weight over all nontrivial
    logical classes is 1 (a single Z already acts logically).
    """
    if n < 2:
        raise InputError("repetition code needs n >= 2")
    gens = tuple(_pauli_on(n, "Z", (i, i + 1)) for i in range(n - 1))
    return StabilizerCode(
        n=n,
        k=1,
        generators=gens,
        logical_x=(_pauli_on(n, "X", range(n)),),
        logical_z=(_pauli_on(n, "Z", (0,)),),
        distance=1,
        name=f"repetition:{n}",
    )


# Qubit j (1-based) sits in the checks given by the binary expansion of j.
STEANE_FACES = ((0, 2, 4, 6), (1, 2, 5, 6), (3, 4, 5, 6))


def steane_code() -> StabilizerCode:
    n = 7
    gens = tuple(_pauli_on(n, "X", f) for f in STEANE_FACES) + tuple(
        _pauli_on(n, "Z", f) for f in STEANE_FACES
    )
    return StabilizerCode(
        n=n,
        k=1,
        generators=gens,
        logical_x=(_pauli_on(n, "X", (0, 1, 2)),),
        logical_z=(_pauli_on(n, "Z", (0, 1, 2)),),
        distance=3,
        name="steane",
    )


@dataclass(frozen=True)
class SurfaceLayout:
    """Index maps for the planar code of distance ``d``.

    Vertex (r, c), 0 <= r < d, 0 <= c < d-1, carries an X check.
    Horizontal edge (r, j), 0 <= j < d, joins vertices (r, j-1) and (r, j);
    j = 0 and j = d-1 dangle into the left and right rough boundaries.
    Vertical edge (r, c), 0 <= r < d-1, joins (r, c) and (r+1, c).
    Plaquette (r, j), 0 <= r < d-1, 0 <= j < d, carries a Z check.
    """

    d: int

    @property
    def n(self) -> int:
        return self.d**2 + (self.d - 1) ** 2

    def h(self, r: int, j: int) -> int:
        return r * self.d + j

    def v(self, r: int, c: int) -> int:
        return self.d**2 + r * (self.d - 1) + c

    def vertex(self, r: int, c: int) -> int:
        return r * (self.d - 1) + c

    def coords(self) -> tuple[tuple[float, float], ...]:
        d = self.d
        out: list[tuple[float, float]] = [(0.0, 0.0)] * self.n
        for r in range(d):
            for j in range(d):
                out[self.h(r, j)] = (float(r), j - 0.5)
        for r in range(d - 1):
            for c in range(d - 1):
                out[self.v(r, c)] = (r + 0.5, float(c))
        return tuple(out)


def surface_code(d: int) -> StabilizerCode:
    if d < 3 or d % 2 == 0:
        raise InputError(f"surface code distance must be odd and >= 3, got {d}")
    lay = SurfaceLayout(d)
    n = lay.n
    x_checks = []
    for r in range(d):
        for c in range(d - 1):
            support = [lay.h(r, c), lay.h(r, c + 1)]
            if r > 0:
                support.append(lay.v(r - 1, c))
            if r < d - 1:
                support.append(lay.v(r, c))
            x_checks.append(_pauli_on(n, "X", support))
    z_checks = []
    for r in range(d - 1):
        for j in range(d):
            support = [lay.h(r, j), lay.h(r + 1, j)]
            if j >= 1:
                support.append(lay.v(r, j - 1))
            if j <= d - 2:
                support.append(lay.v(r, j))
            z_checks.append(_pauli_on(n, "Z", support))
    return StabilizerCode(
        n=n,
        k=1,
        generators=tuple(x_checks + z_checks),
        logical_x=(_pauli_on(n, "X", [lay.h(r, 0) for r in range(d)]),),
        logical_z=(_pauli_on(n, "Z", [lay.h(0, j) for j in range(d)]),),
        distance=d,
        name=f"surface:{d}",
        qubit_coords=lay.coords(),
    )


def parse_descriptor(descriptor: str) -> tuple[str, int | None]:
    descriptor = descriptor.strip().lower()
    name, _, arg = descriptor.partition(":")
    if name == "steane":
        if arg:
            raise InputError("steane takes no parameter")
        return name, None
    if name in ("repetition", "surface"):
        try:
            return name, int(arg)
        except ValueError:
            raise InputError(f"code descriptor {descriptor!r} needs an integer parameter") from None
    raise InputError(f"unknown code descriptor {descriptor!r}")


def build_code(descriptor: str) -> StabilizerCode:
    """Build ``repetition:<n>``, ``steane`` or ``surface:<d>``."""
    name, arg = parse_descriptor(descriptor)
    if name == "steane":
        return steane_code()
    if name == "repetition":
        return repetition_code(arg)
    return surface_code(arg)


# --------------------------------------------------------------------------
# Distance verification


def brute_force_distance(code: StabilizerCode, max_weight: int | None = None) -> int:
    """Smallest weight of a Pauli with trivial syndrome and nontrivial label."""
    n = code.n
    max_weight = n if max_weight is None else max_weight
    for w in range(1, max_weight + 1):
        for support in itertools.combinations(range(n), w):
            for kinds in itertools.product((1, 2, 3), repeat=w):
                x = np.zeros(n, dtype=np.uint8)
                z = np.zeros(n, dtype=np.uint8)
                for q, kind in zip(support, kinds):
                    x[q] = kind & 1
                    z[q] = kind >> 1
                if code.syndrome_bits(x, z).any():
                    continue
                if code.label_bits(x, z).any():
                    return w
    raise InvariantError("no nontrivial logical operator found")


def verify_distance(code: StabilizerCode) -> int:
    """Compute the code distance and check it against the declared value."""
    if code.n <= 13:
        measured = brute_force_distance(code, max_weight=code.distance)
    elif code.name.startswith("surface"):
        # Z chains between rough boundaries, and X chains on the dual lattice.
        mx = _surface_logical_weight(code, code.gen_x)
        mz = _surface_logical_weight(code, code.gen_z)
        measured = min(mx, mz)
    else:
        raise InputError(f"cannot verify distance for {code.name}")
    if measured != code.distance:
        raise InvariantError(f"declared distance {code.distance}, measured {measured}")
    return measured


def _surface_logical_weight(code: StabilizerCode, checks: np.ndarray) -> int:
    # Boundary-to-boundary chains on a single boundary side are stabilizers;
    # only chains that end on opposite sides carry a logical label.
    n_checks, n = checks.shape
    touch = [np.nonzero(checks[:, q])[0] for q in range(n)]
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n_checks + 2)]
    coords = code.qubit_coords
    is_x_checks = checks is code.gen_x
    for q in range(n):
        if len(touch[q]) == 2:
            a, b = (int(t) for t in touch[q])
            adj[a].append((b, q))
            adj[b].append((a, q))
        elif len(touch[q]) == 1:
            a = int(touch[q][0])
            r, c = coords[q]
            side_key = c if is_x_checks else r
            mid = (code.distance - 1) / 2
            side = n_checks if side_key < mid else n_checks + 1
            adj[a].append((side, q))
            adj[side].append((a, q))
    src, dst = n_checks, n_checks + 1
    dist = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for w, _ in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    if dst not in dist:
        raise InvariantError("boundaries are disconnected")
    return dist[dst]
