"""Lagrange generator matrices, strip encoding and Reed-Solomon decoding."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .field import PrimeField, SingularMatrix, poly_divmod, poly_trim


class CodingError(ValueError):
    pass


class DecodeError(CodingError):
    """No codeword lies within the error budget of the received symbols."""


@dataclass(frozen=True)
class EvalPoints:
    omega: tuple[int, ...]   # one per shard / community
    alpha: tuple[int, ...]   # one per node
    beta: tuple[int, ...]    # result interpolation points

    @classmethod
    def standard(cls, K: int, N: int, L: int = 0) -> "EvalPoints":
        return cls(
            omega=tuple(range(1, K + 1)),
            alpha=tuple(range(K + 1, K + N + 1)),
            beta=tuple(range(K + N + 1, K + N + L + 1)),
        )

    @property
    def K(self) -> int:
        return len(self.omega)

    @property
    def N(self) -> int:
        return len(self.alpha)

    @property
    def L(self) -> int:
        return len(self.beta)

    def check(self, F: PrimeField) -> None:
        pts = [p % F.q for p in self.omega + self.alpha + self.beta]
        if len(set(pts)) != len(pts):
            raise CodingError("evaluation points must be pairwise distinct mod q")


def lagrange_basis(F: PrimeField, nodes, x: int) -> list[int]:
    """Values at x of the Lagrange basis polynomials over `nodes`."""
    out = []
    for k, wk in enumerate(nodes):
        num, den = 1, 1
        for j, wj in enumerate(nodes):
            if j != k:
                num = num * (x - wj) % F.q
                den = den * (wk - wj) % F.q
        out.append(num * F.inv(den) % F.q)
    return out


def interpolation_matrix(F: PrimeField, nodes, targets) -> np.ndarray:
    """W with W[t, k] = basis_k(targets[t]), so values_at_targets = W @ values_at_nodes."""
    return F.array([lagrange_basis(F, nodes, t) for t in targets])


@dataclass(frozen=True)
class LagrangeMatrix:
    entries: np.ndarray   # K x N
    points: EvalPoints

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.entries[:, i]


@dataclass(frozen=True)
class ResultGeneratorMatrices:
    g_f_alpha: np.ndarray   # L x N, psi_l(alpha_i)
    g_f_omega: np.ndarray   # L x K, psi_l(omega_k)


def build_generator(F: PrimeField, points: EvalPoints) -> LagrangeMatrix:
    points.check(F)
    cols = [lagrange_basis(F, points.omega, a) for a in points.alpha]
    return LagrangeMatrix(F.array(cols).T.copy(), points)


def build_result_matrices(F: PrimeField, points: EvalPoints) -> ResultGeneratorMatrices:
    points.check(F)
    if not points.beta:
        raise CodingError("result matrices need at least one beta point")
    g_alpha = interpolation_matrix(F, points.beta, points.alpha).T.copy()
    g_omega = interpolation_matrix(F, points.beta, points.omega).T.copy()
    return ResultGeneratorMatrices(g_alpha, g_omega)


def encode_vector(F: PrimeField, G: LagrangeMatrix, m) -> list[np.ndarray]:
    """m . G where each of the K entries of m is a vector (or array) payload."""
    m = np.asarray(m)
    if m.shape[0] != G.K:
        raise CodingError(f"expected {G.K} payloads, got {m.shape[0]}")
    return [F.combine(G.entries[:, i], m) for i in range(G.N)]


def encode_rows(F: PrimeField, G: LagrangeMatrix, M) -> np.ndarray:
    """G^T . M: row i is the coded row handed to node i."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != G.K:
        raise CodingError(f"expected a matrix with {G.K} rows")
    return F.matmul(G.entries.T, M)


# Reed-Solomon decoding over vector symbols

def _berlekamp_welch(F: PrimeField, xs, ys, k: int, e: int):
    """Scalar Berlekamp-Welch. Returns the message polynomial or None."""
    n = len(xs)
    if n < k + 2 * e:
        return None
    q = F.q
    rows, rhs = [], []
    for x, y in zip(xs, ys):
        row = [pow(x, j, q) for j in range(k + e)]
        row += [(-y * pow(x, j, q)) % q for j in range(e)]
        rows.append(row)
        rhs.append(y * pow(x, e, q) % q)
    try:
        sol = F.solve(rows, rhs)
    except SingularMatrix:
        return None
    Qp = poly_trim(sol[:k + e])
    E = poly_trim(sol[k + e:] + [1])
    P, rem = poly_divmod(F, Qp, E)
    if rem or len(P) > k:
        return None
    return P


def _eval_poly_many(F: PrimeField, P, xs) -> list[int]:
    out = []
    for x in xs:
        acc = 0
        for c in reversed(P):
            acc = (acc * x + c) % F.q
        out.append(acc)
    return out


@lru_cache(maxsize=512)
def _cached_interp(q: int, nodes: tuple, targets: tuple) -> np.ndarray:
    return interpolation_matrix(PrimeField(q), nodes, targets)


def _fit_and_check(F, xs, Y, keep, k, targets):
    """Interpolate from the first k kept points; return values at targets
    and whether every kept point lies on that polynomial."""
    if len(keep) < k:
        return None
    base = tuple(xs[i] for i in keep[:k])
    rest = keep[k:]
    base_vals = Y[list(keep[:k])]
    if rest:
        W = _cached_interp(F.q, base, tuple(xs[i] for i in rest))
        pred = F.matmul(W, base_vals)
        if not np.array_equal(pred, Y[list(rest)]):
            return None
    Wt = _cached_interp(F.q, base, tuple(targets))
    return F.matmul(Wt, base_vals)


def rs_decode(F: PrimeField, received: dict, L: int, points: EvalPoints,
              max_errors: int, targets=None) -> np.ndarray:
    """Recover the degree < L polynomial behind vector symbols received at
    alpha positions, tolerating up to max_errors corrupted symbols.

    Returns an (L, W) array of its values at beta (or at `targets`).
    """
    pos = sorted(received)
    n = len(pos)
    if n < L + 2 * max_errors:
        raise DecodeError(f"{n} symbols cannot correct {max_errors} errors at length {L}")
    targets = points.beta if targets is None else targets
    xs = [points.alpha[p] % F.q for p in pos]
    Y = np.stack([np.asarray(received[p]).reshape(-1) for p in pos]).astype(F.dtype) % F.q
    width = Y.shape[1]

    # fast path: error-free
    out = _fit_and_check(F, xs, Y, list(range(n)), L, targets)
    if out is not None:
        return out
    if max_errors == 0:
        raise DecodeError("symbols are not on a single codeword")

    # joint locator from a random projection of the symbol vectors
    h = hashlib.sha256(Y.astype(np.int64).tobytes() if F.dtype is not object else repr(Y.tolist()).encode())
    rng = random.Random(h.digest())
    coeffs = F.array([rng.randrange(1, F.q) for _ in range(width)])
    proj = [int(v) for v in ((Y * coeffs) % F.q).sum(axis=1) % F.q]
    P = _berlekamp_welch(F, xs, proj, L, max_errors)
    if P is not None:
        vals = _eval_poly_many(F, P, xs)
        keep = [i for i in range(n) if vals[i] == proj[i]]
        if n - len(keep) <= max_errors:
            out = _fit_and_check(F, xs, Y, keep, L, targets)
            if out is not None:
                return out

    # per-component fallback
    bad = set()
    polys = []
    for c in range(width):
        col = [int(v) for v in Y[:, c]]
        Pc = _berlekamp_welch(F, xs, col, L, max_errors)
        if Pc is None:
            raise DecodeError("component has no codeword within the error budget")
        vals = _eval_poly_many(F, Pc, xs)
        bad.update(i for i in range(n) if vals[i] != col[i])
        polys.append(Pc)
    if len(bad) > max_errors:
        raise DecodeError(f"{len(bad)} corrupted symbols exceed budget {max_errors}")
    keep = [i for i in range(n) if i not in bad]
    out = _fit_and_check(F, xs, Y, keep, L, targets)
    if out is None:
        raise DecodeError("inconsistent after error removal")
    return out


def result_to_uncoded(F: PrimeField, decoded_beta_values, g_f_omega) -> np.ndarray:
    """Output k = sum_l psi_l(omega_k) * decoded[l]."""
    D = np.asarray(decoded_beta_values)
    g = np.asarray(g_f_omega)
    if D.shape[0] != g.shape[0]:
        raise CodingError(f"{D.shape[0]} decoded values for {g.shape[0]} basis rows")
    flat = D.reshape(D.shape[0], -1)
    return F.matmul(g.T, flat).reshape((g.shape[1],) + D.shape[1:])
