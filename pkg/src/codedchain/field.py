"""Prime-field scalars, vectors and dense univariate polynomials.

Scalars are plain ints in [0, q). Vectors and matrices are numpy arrays;
for q < 2**31 they use int64 (a product of two reduced elements fits in 63
bits), otherwise object arrays of Python ints.
"""

from __future__ import annotations

import hashlib
import random
from functools import lru_cache

import numpy as np
from sympy import isprime, primefactors

DEFAULT_Q = 2**31 - 1


class FieldError(ValueError):
    pass


class SingularMatrix(FieldError):
    pass


class PrimeField:
    def __init__(self, q: int = DEFAULT_Q):
        if q < 2 or not isprime(q):
            raise FieldError(f"modulus {q} is not prime")
        self.q = q
        self.dtype = np.int64 if q < 2**31 else object
        # ceil(log2 q) without floats
        self.bits = (q - 1).bit_length()

    def __repr__(self):
        return f"PrimeField({self.q})"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.q == self.q

    def __hash__(self):
        return hash(("PrimeField", self.q))

    # scalars

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def inv(self, a: int) -> int:
        a %= self.q
        if a == 0:
            raise FieldError("inverse of zero")
        return pow(a, -1, self.q)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            return pow(self.inv(a), -e, self.q)
        return pow(a % self.q, e, self.q)

    # arrays

    def array(self, values) -> np.ndarray:
        a = np.asarray(values, dtype=object) % self.q
        return a.astype(self.dtype)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=self.dtype)

    def vmul(self, a, b) -> np.ndarray:
        return (a * b) % self.q

    def scale(self, c: int, a) -> np.ndarray:
        return (a * (c % self.q)) % self.q

    def dot(self, a, b) -> int:
        return int(((a * b) % self.q).sum() % self.q)

    def matmul(self, A, B) -> np.ndarray:
        """A @ B mod q, reducing after every product so int64 never overflows."""
        A = np.asarray(A)
        B = np.asarray(B)
        vec = B.ndim == 1
        if vec:
            B = B[:, None]
        m, n = A.shape
        n2, p = B.shape
        if n != n2:
            raise FieldError(f"shape mismatch {A.shape} @ {B.shape}")
        out = np.zeros((m, p), dtype=self.dtype)
        for k in range(n):
            out = (out + (A[:, k:k + 1] * B[k:k + 1, :]) % self.q) % self.q
        return out[:, 0] if vec else out

    def combine(self, coeffs, rows) -> np.ndarray:
        """sum_k coeffs[k] * rows[k] for rows of any (common) shape."""
        rows = np.asarray(rows)
        out = np.zeros(rows.shape[1:], dtype=self.dtype)
        for c, r in zip(coeffs, rows):
            c = int(c) % self.q
            if c:
                out = (out + (r * c) % self.q) % self.q
        return out

    def random_vector(self, rng: np.random.Generator, n) -> np.ndarray:
        if self.dtype is object:
            return self.array([rng.integers(0, 2**62) for _ in range(int(np.prod(n)))]).reshape(n)
        return rng.integers(0, self.q, size=n, dtype=np.int64)

    # dense linear algebra on small square systems (Python ints)

    def _eliminate(self, rows, ncols):
        q = self.q
        rows = [[int(x) % q for x in r] for r in rows]
        pivots = []
        r = 0
        for c in range(ncols):
            piv = next((i for i in range(r, len(rows)) if rows[i][c]), None)
            if piv is None:
                continue
            rows[r], rows[piv] = rows[piv], rows[r]
            inv = pow(rows[r][c], -1, q)
            rows[r] = [(x * inv) % q for x in rows[r]]
            for i in range(len(rows)):
                if i != r and rows[i][c]:
                    t = rows[i][c]
                    rows[i] = [(x - t * y) % q for x, y in zip(rows[i], rows[r])]
            pivots.append(c)
            r += 1
            if r == len(rows):
                break
        return rows, pivots

    def rank(self, A) -> int:
        A = [list(r) for r in np.asarray(A, dtype=object)]
        if not A:
            return 0
        _, piv = self._eliminate(A, len(A[0]))
        return len(piv)

    def is_invertible(self, A) -> bool:
        A = np.asarray(A)
        return A.shape[0] == A.shape[1] and self.rank(A) == A.shape[0]

    def solve(self, A, b) -> list[int]:
        """One solution of A x = b (free variables set to zero)."""
        A = np.asarray(A, dtype=object)
        n = A.shape[1]
        aug = [list(A[i]) + [int(b[i])] for i in range(A.shape[0])]
        rows, piv = self._eliminate(aug, n)
        for r in rows[len(piv):]:
            if r[n] % self.q:
                raise SingularMatrix("inconsistent system")
        x = [0] * n
        for i, c in enumerate(piv):
            x[c] = rows[i][n]
        return x

    def inv_matrix(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=object)
        n = A.shape[0]
        aug = [list(A[i]) + [1 if j == i else 0 for j in range(n)] for i in range(n)]
        rows, piv = self._eliminate(aug, n)
        if len(piv) < n:
            raise SingularMatrix("matrix is singular")
        return self.array([r[n:] for r in rows])


# polynomials: lists of ints, ascending degree, no trailing zeros (zero poly = [])

def poly_trim(p) -> list[int]:
    p = [int(c) for c in p]
    while p and p[-1] == 0:
        p.pop()
    return p


def poly_degree(p) -> int:
    return len(poly_trim(p)) - 1


def poly_add(F: PrimeField, a, b) -> list[int]:
    n = max(len(a), len(b))
    a = list(a) + [0] * (n - len(a))
    b = list(b) + [0] * (n - len(b))
    return poly_trim([F.add(x, y) for x, y in zip(a, b)])


def poly_sub(F: PrimeField, a, b) -> list[int]:
    return poly_add(F, a, [F.neg(x) for x in b])


def poly_mul(F: PrimeField, a, b) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % F.q
    return poly_trim(out)


def poly_eval(F: PrimeField, p, x: int) -> int:
    acc = 0
    for c in reversed(p):
        acc = (acc * x + c) % F.q
    return acc


def poly_divmod(F: PrimeField, d, m) -> tuple[list[int], list[int]]:
    m = poly_trim(m)
    if not m:
        raise FieldError("division by the zero polynomial")
    r = [int(c) % F.q for c in poly_trim(d)]
    dm = len(m) - 1
    lead_inv = F.inv(m[-1])
    quot = [0] * max(len(r) - dm, 0)
    for k in range(len(r) - 1, dm - 1, -1):
        c = (r[k] * lead_inv) % F.q
        if c:
            quot[k - dm] = c
            for j in range(dm + 1):
                r[k - dm + j] = (r[k - dm + j] - c * m[j]) % F.q
    return poly_trim(quot), poly_trim(r[:dm])


def poly_mod(F: PrimeField, d, m) -> list[int]:
    """Remainder of d divided by a monic m of degree >= 1."""
    m = poly_trim(m)
    if len(m) < 2:
        raise FieldError("modulus must have degree >= 1")
    if m[-1] != 1:
        raise FieldError("modulus must be monic")
    return poly_divmod(F, d, m)[1]


def poly_gcd(F: PrimeField, a, b) -> list[int]:
    a, b = poly_trim(a), poly_trim(b)
    while b:
        a, b = b, poly_divmod(F, a, b)[1]
    if not a:
        return []
    inv = F.inv(a[-1])
    return [(c * inv) % F.q for c in a]


def poly_powmod(F: PrimeField, base, e: int, m) -> list[int]:
    result = [1]
    base = poly_divmod(F, base, m)[1]
    while e:
        if e & 1:
            result = poly_divmod(F, poly_mul(F, result, base), m)[1]
        base = poly_divmod(F, poly_mul(F, base, base), m)[1]
        e >>= 1
    return result


def is_irreducible(F: PrimeField, r) -> bool:
    """Rabin's test for a monic polynomial over F_q."""
    r = poly_trim(r)
    n = len(r) - 1
    if n < 1:
        return False
    if n == 1:
        return True
    x = [0, 1]
    if poly_sub(F, poly_powmod(F, x, F.q ** n, r), x):
        return False
    for p in primefactors(n):
        h = poly_sub(F, poly_powmod(F, x, F.q ** (n // p), r), x)
        if len(poly_gcd(F, h, r)) != 1:
            return False
    return True


def find_irreducible(F: PrimeField, seed: bytes, gamma: int) -> list[int]:
    """Seeded rejection sampling of a monic irreducible polynomial of degree gamma."""
    if gamma < 1:
        raise FieldError("gamma must be >= 1")
    rng = random.Random(hashlib.sha256(b"irreducible|" + seed).digest())
    while True:
        cand = [rng.randrange(F.q) for _ in range(gamma)] + [1]
        if is_irreducible(F, cand):
            return cand


@lru_cache(maxsize=256)
def _power_table(q: int, r: tuple, n: int) -> np.ndarray:
    """Row j holds the coefficients of x^j mod r."""
    F = PrimeField(q)
    g = len(r) - 1
    table = np.zeros((n, g), dtype=F.dtype)
    cur = [1]
    for j in range(n):
        row = cur + [0] * (g - len(cur))
        table[j] = row
        # multiply by x and reduce (r is monic)
        shifted = [0] + cur + [0] * (g - len(cur))
        top = shifted[g] if len(shifted) > g else 0
        cur = [(shifted[i] - top * r[i]) % q for i in range(g)]
        cur = poly_trim(cur)
    return table


def poly_mod_vector(F: PrimeField, d: np.ndarray, r) -> np.ndarray:
    """Coefficients of (d as a polynomial) mod r, padded to deg r entries.

    Agrees with poly_mod but works on long vectors via a cached table of
    reduced powers of x.
    """
    d = np.asarray(d).reshape(-1)
    table = _power_table(F.q, tuple(int(c) for c in r), len(d))
    return ((d[:, None] * table) % F.q).sum(axis=0) % F.q
