import itertools

import numpy as np
import pytest

from adaptqec.errors import InputError
from adaptqec.pauli import (
    ErrorClass,
    PauliString,
    Syndrome,
    brute_force_distance,
    build_code,
    classify_error,
    compose_classes,
    logical_operator,
    multiply,
    repetition_code,
    steane_code,
    surface_code,
    symplectic_product,
    syndrome_of,
    verify_distance,
)


def random_pauli(n, rng):
    return PauliString(rng.integers(0, 2, n), rng.integers(0, 2, n))


def test_labels_round_trip():
    p = PauliString.from_label("XIZY")
    assert p.label() == "XIZY"
    assert p.weight() == 3
    assert PauliString.single(4, "Y", 3) == PauliString.from_label("IIIY")


def test_bad_inputs():
    with pytest.raises(InputError):
        PauliString.from_label("XQ")
    with pytest.raises(InputError):
        PauliString(np.zeros(2), np.zeros(3))
    with pytest.raises(InputError):
        multiply(PauliString.identity(2), PauliString.identity(3))
    with pytest.raises(InputError):
        Syndrome((1, 0))


def test_commutation_of_single_qubit_paulis():
    names = "IXYZ"
    for a, b in itertools.product(names, repeat=2):
        expected = int(a != "I" and b != "I" and a != b)
        assert symplectic_product(PauliString.from_label(a), PauliString.from_label(b)) == expected


def test_product_is_xor_and_hash_consistent(rng):
    for _ in range(50):
        a, b = random_pauli(5, rng), random_pauli(5, rng)
        c = a * b
        assert np.array_equal(c.symplectic(), a.symplectic() ^ b.symplectic())
        assert c * b == a
        assert hash(c * b) == hash(a)


def test_steane_qubit7_syndrome():
    code = steane_code()
    syn = syndrome_of(code, PauliString.single(7, "Z", 6))
    # Qubit 7 lies in every face; Z errors only flip the three X-type checks.
    assert syn.defects() == (0, 1, 2)


def test_steane_logical_z_representative():
    code = steane_code()
    cls = classify_error(code, PauliString.single(7, "Z", (0, 1, 2)))
    assert cls.syndrome.is_trivial()
    assert cls.logical_label == (1, 0)
    assert not cls.is_logical_trivial()


@pytest.mark.parametrize("descriptor", ["steane", "surface:3", "repetition:4"])
def test_classification_is_homomorphism(descriptor, rng):
    code = build_code(descriptor)
    for _ in range(1000):
        a, b = random_pauli(code.n, rng), random_pauli(code.n, rng)
        assert compose_classes(classify_error(code, a), classify_error(code, b)) == classify_error(code, a * b)


@pytest.mark.parametrize("descriptor", ["steane", "surface:3"])
def test_stabilizers_do_not_change_class(descriptor, rng):
    code = build_code(descriptor)
    for _ in range(300):
        e = random_pauli(code.n, rng)
        s = PauliString.identity(code.n)
        for g, keep in zip(code.generators, rng.integers(0, 2, code.num_generators)):
            if keep:
                s = s * g
        assert code.is_stabilizer(s)
        assert classify_error(code, e * s) == classify_error(code, e)


def test_steane_coset_counts():
    code = steane_code()
    z_only = set()
    for bits in itertools.product((0, 1), repeat=7):
        z_only.add(classify_error(code, PauliString(np.zeros(7), np.array(bits))))
    assert len(z_only) == 16
    everything = set()
    for x in itertools.product((0, 1), repeat=7):
        for z in itertools.product((0, 1), repeat=7):
            everything.add(classify_error(code, PauliString(np.array(x), np.array(z))))
    assert len(everything) == 256


def test_logical_operator_has_requested_label():
    code = surface_code(3)
    for label in itertools.product((0, 1), repeat=2):
        op = logical_operator(code, label)
        cls = classify_error(code, op)
        assert cls.syndrome.is_trivial() and cls.logical_label == label


@pytest.mark.parametrize(
    "descriptor,n,gens,d",
    [("steane", 7, 6, 3), ("surface:3", 13, 12, 3), ("surface:5", 41, 40, 5), ("surface:7", 85, 84, 7)],
)
def test_code_parameters(descriptor, n, gens, d):
    code = build_code(descriptor)
    assert (code.n, code.k, code.num_generators) == (n, 1, gens)
    assert verify_distance(code) == d


def test_repetition_distance_is_one():
    # The bit-flip repetition code does not see Z errors at all.
    assert brute_force_distance(repetition_code(3)) == 1


def test_bad_descriptors():
    for bad in ["surface:4", "surface:1", "steane:3", "torus:3", "surface:x", "repetition:1"]:
        with pytest.raises(InputError):
            build_code(bad)


def test_syndrome_product_and_bits():
    a = Syndrome.from_bits([1, 0, 1])
    b = Syndrome.from_bits([1, 1, 0])
    assert (a * b).defects() == (1, 2)
    assert list(a.bits()) == [1, 0, 1]
    assert ErrorClass.identity(3, 1).is_logical_trivial()
