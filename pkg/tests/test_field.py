import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from sympy import GF, Poly, symbols

from codedchain.field import (FieldError, PrimeField, SingularMatrix, find_irreducible, is_irreducible,
                              poly_add, poly_divmod, poly_eval, poly_gcd, poly_mod, poly_mod_vector,
                              poly_mul, poly_powmod, poly_trim)

X = symbols("x")
F7 = PrimeField(7)
FQ = PrimeField(2**31 - 1)


def to_sympy(p, q):
    return Poly(list(reversed(p)) or [0], X, domain=GF(q))


def from_sympy(P):
    return poly_trim([int(c) % P.domain.mod for c in reversed(P.all_coeffs())])


def test_small_field_values():
    assert F7.inv(3) == 5
    assert F7.add(6, 2) == 1
    assert poly_mod(F7, [1, 2, 3], [1, 1]) == [2]
    assert poly_mod(F7, [1, 2, 3], [1, 0, 1]) == [5, 2]


def test_rejects_composite_modulus():
    with pytest.raises(FieldError):
        PrimeField(15)


def test_inverse_of_zero():
    with pytest.raises(FieldError):
        F7.inv(0)


def test_non_monic_modulus_rejected():
    with pytest.raises(FieldError):
        poly_mod(F7, [1, 2, 3], [1, 2])


def test_dtype_switches_above_31_bits():
    assert FQ.dtype == np.int64
    big = PrimeField(2**61 - 1)
    assert big.dtype == object
    assert big.bits == 61
    a = big.array([2**60, 3])
    assert big.dot(a, a) == (2**120 + 9) % (2**61 - 1)


elems = st.integers(0, 2**31 - 2)


@given(elems, elems, elems)
def test_field_axioms(a, b, c):
    F = FQ
    assert F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c))
    assert F.add(a, F.neg(a)) == 0
    if a:
        assert F.mul(a, F.inv(a)) == 1
        assert F.inv(a) == int(sympy.mod_inverse(a, F.q))


polys = st.lists(st.integers(0, 6), max_size=8)


@given(polys, st.lists(st.integers(0, 6), min_size=1, max_size=4))
def test_poly_mod_matches_sympy(d, m):
    m = m + [1]          # monic
    got = poly_mod(F7, d, m)
    want = from_sympy(to_sympy(d, 7).rem(to_sympy(m, 7)))
    assert got == want


@given(polys, polys, st.integers(0, 6), st.integers(0, 6))
def test_poly_mod_is_linear(a, b, x, y):
    m = [3, 1, 0, 1]
    lhs = poly_mod(F7, poly_add(F7, [x * c for c in a], [y * c for c in b]), m)
    rhs = poly_add(F7, [x * c for c in poly_mod(F7, a, m)], [y * c for c in poly_mod(F7, b, m)])
    assert lhs == rhs


@given(polys, st.lists(st.integers(0, 6), min_size=1, max_size=4))
def test_divmod_reconstructs(d, m):
    m = m + [1]
    quo, rem = poly_divmod(F7, d, m)
    assert poly_add(F7, poly_mul(F7, quo, m), rem) == poly_trim([x % 7 for x in d])
    assert len(rem) < len(m)


@given(polys, polys)
def test_gcd_matches_sympy(a, b):
    got = poly_gcd(F7, a, b)
    want = from_sympy(to_sympy(a, 7).gcd(to_sympy(b, 7))) if (poly_trim(a) or poly_trim(b)) else []
    assert got == want


@given(st.lists(st.integers(0, 12), min_size=2, max_size=5))
def test_irreducibility_matches_sympy(r):
    r = r + [1]
    got = is_irreducible(PrimeField(13), r)
    assert got == to_sympy(r, 13).is_irreducible


def test_find_irreducible_is_seeded():
    a = find_irreducible(FQ, b"seed", 2)
    assert a == find_irreducible(FQ, b"seed", 2)
    assert len(a) == 3 and a[-1] == 1
    assert to_sympy(a, FQ.q).is_irreducible


@settings(max_examples=30)
@given(st.lists(st.integers(0, 2**31 - 2), min_size=1, max_size=60), st.integers(0, 2**31 - 2),
       st.integers(0, 2**31 - 2))
def test_poly_mod_vector_matches_scalar(d, r0, r1):
    r = [r0, r1, 1]
    assert list(poly_mod_vector(FQ, np.array(d), r)) == poly_mod(FQ, d, r) + [0] * (2 - len(poly_mod(FQ, d, r)))


def test_powmod_and_eval():
    m = [3, 0, 1]
    assert poly_powmod(F7, [0, 1], 7, m) == poly_mod(F7, [0] * 7 + [1], m)
    assert poly_eval(F7, [1, 2, 3], 2) == (1 + 4 + 12) % 7


def test_linear_algebra():
    A = FQ.array([[2, 1], [1, 1]])
    x = FQ.solve(A, [5, 3])
    assert x == [2, 1]
    inv = FQ.inv_matrix(A)
    assert np.array_equal(FQ.matmul(A, inv), np.eye(2, dtype=np.int64))
    with pytest.raises(SingularMatrix):
        FQ.inv_matrix(FQ.array([[1, 2], [2, 4]]))
    assert FQ.rank(FQ.array([[1, 2], [2, 4]])) == 1


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32))
def test_matmul_matches_python(m, n, p, seed):
    rng = np.random.default_rng(seed)
    A = FQ.random_vector(rng, (m, n))
    B = FQ.random_vector(rng, (n, p))
    want = [[sum(int(A[i, k]) * int(B[k, j]) for k in range(n)) % FQ.q for j in range(p)] for i in range(m)]
    assert FQ.matmul(A, B).tolist() == want
