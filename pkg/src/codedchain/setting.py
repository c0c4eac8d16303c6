"""Epoch-independent protocol constants and the per-epoch derived values
(lookup depth T, polynomial degree d, recovery length L)."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .coding import EvalPoints, build_generator, build_result_matrices
from .crypto import PolyHash, mq_terms
from .field import PrimeField
from .ledger import TxLayout, log2_ceil

HASH_DEGREE = 3
MQ_DEGREE = 3   # quadratic in s, linear in the key coefficients


def degree_for(T: int) -> int:
    """Degree of the per-transaction verification polynomial."""
    return max(T + 1, HASH_DEGREE, MQ_DEGREE)


def recovery_length(K: int, d: int) -> int:
    return (K - 1) * d + 1


def feasible(N: int, K: int, f: int, d: int) -> bool:
    return 3 * f < N and N >= (K - 1) * d + 3 * f + 1


@dataclass
class Setting:
    N: int
    K: int
    Q: int
    f: int
    q: int = 2**31 - 1
    C: int = 2            # address length
    oil: int = 2          # = E, number of MQ equations
    vinegar: int = 4
    gamma: int = 2        # fingerprint degree
    lam: int = 2          # hash length in field elements
    genesis_size: int = 8
    seed: bytes = b"codedchain"
    _cache: dict = field(default_factory=dict, repr=False)

    @cached_property
    def F(self) -> PrimeField:
        return PrimeField(self.q)

    @property
    def E(self) -> int:
        return self.oil

    @property
    def D(self) -> int:
        return self.oil + self.vinegar

    @property
    def B(self) -> int:
        return self.E * mq_terms(self.D)

    @property
    def W(self) -> int:
        return self.B + self.C + self.D

    @cached_property
    def G(self):
        return build_generator(self.F, EvalPoints.standard(self.K, self.N))

    @cached_property
    def hash1(self) -> PolyHash:
        return PolyHash.derive(self.F, self.seed, "hash1", self.B, self.C)

    def hash2(self, T: int) -> PolyHash:
        key = ("hash2", T)
        if key not in self._cache:
            self._cache[key] = PolyHash.derive(self.F, self.seed, "hash2", 2 * T + self.B + self.C, self.E)
        return self._cache[key]

    # per-epoch values; height h verifies against the shard of height h - 1

    def shard_size(self, height: int) -> int:
        """Records in every shard after `height` appended strips."""
        return self.genesis_size + self.K * self.Q * height

    def T_for(self, height: int) -> int:
        return log2_ceil(self.shard_size(height - 1))

    def layout(self, T: int) -> TxLayout:
        return TxLayout(T, self.B, self.C, self.D)

    def d_for(self, height: int) -> int:
        return degree_for(self.T_for(height))

    def L_for(self, height: int) -> int:
        return recovery_length(self.K, self.d_for(height))

    def points(self, L: int) -> EvalPoints:
        return EvalPoints.standard(self.K, self.N, L)

    def result_matrices(self, L: int):
        key = ("res", L)
        if key not in self._cache:
            self._cache[key] = build_result_matrices(self.F, self.points(L))
        return self._cache[key]

    def check(self, max_height: int = 1) -> None:
        d = self.d_for(max_height)
        if not feasible(self.N, self.K, self.f, d):
            raise ValueError(
                f"N={self.N} infeasible: need N >= (K-1)d+3f+1 = {(self.K - 1) * d + 3 * self.f + 1}"
                f" (K={self.K}, d={d}, f={self.f}) and f < N/3")
        L = recovery_length(self.K, d)
        if self.q < self.N + self.K + L:
            raise ValueError(f"q={self.q} too small for {self.N + self.K + L} distinct points")
