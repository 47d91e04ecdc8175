import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surgerykit.paulicode import (
    FIXTURES,
    NO_LOGICAL,
    CodeValidationError,
    PauliOperator,
    StabilizerCode,
    anticommute_set,
    bell_code,
    code_422,
    commutes,
    distance_bruteforce,
    ldpc_profile,
    logical_basis,
    make_code,
    parse_code,
    product,
    random_logical,
    steane_code,
)

P = PauliOperator.from_string


def paulis(n):
    return st.tuples(st.integers(0, (1 << n) - 1), st.integers(0, (1 << n) - 1), st.sampled_from([1, -1])).map(
        lambda t: PauliOperator(n, *t)
    )


@pytest.mark.parametrize("a, b, expected", [("XI", "ZI", False), ("XX", "ZZ", True), ("Y", "Y", True)])
def test_commutes_examples(a, b, expected):
    assert commutes(P(a), P(b)) is expected


@pytest.mark.parametrize(
    "s, l, expected",
    [("ZZZZ", "XXII", {0, 1}), ("XXXX", "XXII", set()), ("XZYI", "ZZZZ", {0, 2})],
)
def test_anticommute_set(s, l, expected):
    assert anticommute_set(P(s), P(l)) == expected


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_multiply_matches_matrices(data):
    n = data.draw(st.integers(1, 3))
    a, b = data.draw(paulis(n)), data.draw(paulis(n))
    e, r = a.multiply(b)
    assert np.allclose(a.to_matrix() @ b.to_matrix(), (1j ** e) * r.to_matrix())
    ma, mb = a.to_matrix(), b.to_matrix()
    assert commutes(a, b) == np.allclose(ma @ mb, mb @ ma)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_paulis_are_hermitian_involutions(data):
    n = data.draw(st.integers(1, 3))
    m = data.draw(paulis(n)).to_matrix()
    assert np.allclose(m, m.conj().T)
    assert np.allclose(m @ m, np.eye(1 << n))


def test_string_roundtrip():
    for s in ["+XYZI", "-ZZII", "+IIII"]:
        assert P(s).to_string() == s
    with pytest.raises(ValueError, match="invalid Pauli letter"):
        P("XQ")


def test_422_logical_basis_is_symplectic():
    code = code_422()
    basis = logical_basis(code)
    assert [b.to_string(with_sign=False) for b in basis] == ["XXII", "ZIZI", "XIXI", "ZZII"]
    # pairs (0,1) and (2,3) anticommute, everything else commutes
    for i, j in itertools.combinations(range(4), 2):
        assert commutes(basis[i], basis[j]) == ((i, j) not in {(0, 1), (2, 3)})
    for b in basis:
        assert code.is_logical(b)


def test_steane_and_bell_logical_counts():
    assert len(logical_basis(steane_code())) == 2
    assert logical_basis(bell_code()) == []


@pytest.mark.parametrize("name, d", [("4_2_2", 2), ("steane", 3)])
def test_distance(name, d):
    code = FIXTURES[name]()
    assert distance_bruteforce(code) == d
    # independent check: no logical of weight < d, by direct enumeration of all Paulis
    n = code.n
    for w in range(1, d):
        for qs in itertools.combinations(range(n), w):
            for letters in itertools.product("XYZ", repeat=w):
                x = z = 0
                for q, c in zip(qs, letters):
                    x |= (c in "XY") << q
                    z |= (c in "ZY") << q
                assert not code.is_logical(PauliOperator(n, x, z))


def test_distance_of_k0_code_is_sentinel():
    assert distance_bruteforce(bell_code()) == NO_LOGICAL


def test_ldpc_profile():
    p = ldpc_profile(code_422())
    assert (p.omega, p.delta) == (4, 2)
    code = steane_code()
    p = ldpc_profile(code)
    # every generator counts toward a qubit's degree: 3 X-type plus 3 Z-type on the central qubit
    assert (p.omega, p.delta) == (4, 6)
    x_only = max(sum(1 for g in code.generators if g.x >> q & 1) for q in range(code.n))
    assert x_only == 3


def test_anticommuting_generators_rejected():
    with pytest.raises(CodeValidationError):
        make_code(["XI", "ZI"])


def test_parse_code_reports_line():
    with pytest.raises((ValueError, CodeValidationError), match="line 3"):
        parse_code("4\nXXXX\nZZQZ\n")


def test_code_parameters_of_fixtures():
    expected = {"steane": (7, 1), "4_2_2": (4, 2), "bell": (2, 0), "surface3": (9, 1), "toric2": (8, 2)}
    for name, (n, k) in expected.items():
        code = FIXTURES[name]()
        assert (code.n, code.k) == (n, k)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_logical_is_logical(seed):
    code = steane_code()
    l = random_logical(code, np.random.default_rng(seed))
    assert code.is_logical(l)


def test_product_of_stabilizers_in_group():
    code = steane_code()
    s = product(code.generators[:3])
    assert code.in_stabilizer_group(s)
    assert not code.is_logical(s)
