"""Node signatures, counting threshold schemes, toy UOV client signatures,
cubic polynomial hashes and homomorphic fingerprint checksums."""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from .coding import LagrangeMatrix, encode_rows, encode_vector
from .field import PrimeField, SingularMatrix, find_irreducible, poly_mod_vector
from .ledger import to_bytes


class CryptoError(ValueError):
    pass


class UnknownSigner(CryptoError, KeyError):
    pass


class CombineError(CryptoError):
    pass


def canonical(*parts) -> bytes:
    """Length-prefixed, type-tagged encoding used for every signed message."""
    out = []
    for p in parts:
        if isinstance(p, bytes):
            tag, body = b"b", p
        elif isinstance(p, str):
            tag, body = b"s", p.encode()
        elif isinstance(p, (int, np.integer)):
            tag, body = b"i", str(int(p)).encode()
        else:
            arr = np.asarray(p)
            tag, body = b"a", repr(arr.shape).encode() + b":" + to_bytes(arr)
        out.append(tag + len(body).to_bytes(8, "little") + body)
    return b"".join(out)


# node PKI and threshold schemes

@dataclass(frozen=True)
class ThresholdScheme:
    name: str
    t: int
    n: int


@dataclass(frozen=True)
class PartialSig:
    scheme: str
    signer: int
    sig: bytes


@dataclass(frozen=True)
class ThresholdSig:
    scheme: str
    signers: tuple[int, ...]
    sigs: tuple[bytes, ...]

    def bitmap(self, n: int) -> int:
        return sum(1 << i for i in self.signers)


class Keyring:
    """Key registry for N nodes plus the three threshold schemes.

    mode "hmac" is the deterministic test double (keyed tags checkable only
    through this registry); mode "ed25519" uses real signatures.
    Threshold signatures are counting multi-signatures: t partials plus a
    signer bitmap.
    """

    def __init__(self, N: int, f: int, K: int, seed: bytes = b"", mode: str = "hmac"):
        if mode not in ("hmac", "ed25519"):
            raise CryptoError(f"unknown crypto mode {mode!r}")
        self.N, self.f, self.K, self.mode = N, f, K, mode
        self.schemes = {
            "pi": ThresholdScheme("pi", N - f, N),
            "lambda": ThresholdScheme("lambda", K + f, N),
            "tau": ThresholdScheme("tau", f + 1, N),
        }
        secrets = [hashlib.sha256(b"node-key|" + seed + i.to_bytes(4, "little")).digest()
                   for i in range(N)]
        if mode == "hmac":
            self._keys = secrets
        else:
            from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
            self._keys = [Ed25519PrivateKey.from_private_bytes(s) for s in secrets]
            self._pubs = [k.public_key() for k in self._keys]

    def _check(self, i: int) -> None:
        if not (isinstance(i, (int, np.integer)) and 0 <= i < self.N):
            raise UnknownSigner(f"unknown node {i}")

    def sign(self, i: int, m: bytes) -> bytes:
        self._check(i)
        if self.mode == "hmac":
            return hmac.new(self._keys[i], m, hashlib.sha256).digest()
        return self._keys[i].sign(m)

    def verify(self, i: int, m: bytes, sig: bytes) -> bool:
        self._check(i)
        if not isinstance(sig, bytes):
            return False
        if self.mode == "hmac":
            return hmac.compare_digest(self.sign(i, m), sig)
        from cryptography.exceptions import InvalidSignature
        try:
            self._pubs[i].verify(sig, m)
            return True
        except InvalidSignature:
            return False

    def sign_each(self, i: int, tag: str, context: bytes, values) -> list[bytes]:
        """Sign (value_j, j) for every j, as in the per-entry signature vectors."""
        return [self.sign(i, canonical(tag, context, j, v)) for j, v in enumerate(values)]

    # threshold layer

    def scheme(self, name: str) -> ThresholdScheme:
        return self.schemes[name]

    def _tmsg(self, name: str, m: bytes) -> bytes:
        return canonical("threshold", name, m)

    def tpartial(self, name: str, i: int, m: bytes) -> PartialSig:
        return PartialSig(name, i, self.sign(i, self._tmsg(name, m)))

    def partial_valid(self, name: str, m: bytes, p: PartialSig) -> bool:
        return (isinstance(p, PartialSig) and p.scheme == name and 0 <= p.signer < self.N
                and self.verify(p.signer, self._tmsg(name, m), p.sig))

    def tcombine(self, name: str, m: bytes, partials: Iterable[PartialSig]) -> ThresholdSig:
        t = self.schemes[name].t
        chosen = {}
        for p in partials:
            if p.signer in chosen or not self.partial_valid(name, m, p):
                continue
            chosen[p.signer] = p.sig
            if len(chosen) == t:
                break
        if len(chosen) < t:
            raise CombineError(f"{name}: {len(chosen)} valid partials, need {t}")
        signers = tuple(sorted(chosen))
        return ThresholdSig(name, signers, tuple(chosen[s] for s in signers))

    def tverify(self, name: str, m: bytes, tsig: Optional[ThresholdSig]) -> bool:
        if not isinstance(tsig, ThresholdSig) or tsig.scheme != name:
            return False
        if len(tsig.signers) != len(tsig.sigs) or len(set(tsig.signers)) != len(tsig.signers):
            return False
        if len(tsig.signers) < self.schemes[name].t:
            return False
        msg = self._tmsg(name, m)
        return all(0 <= s < self.N and self.verify(s, msg, sig)
                   for s, sig in zip(tsig.signers, tsig.sigs))


# toy unbalanced oil and vinegar

def mq_terms(D: int) -> int:
    return D * (D + 1) // 2 + D + 1


def mq_monomials(F: PrimeField, s: np.ndarray) -> np.ndarray:
    """[s_i s_j for i <= j] + s + [1] along the last axis."""
    s = np.asarray(s)
    D = s.shape[-1]
    iu, ju = np.triu_indices(D)
    quad = (s[..., iu] * s[..., ju]) % F.q
    one = np.ones(s.shape[:-1] + (1,), dtype=s.dtype)
    return np.concatenate([quad, s, one], axis=-1)


def mq_eval(F: PrimeField, p: np.ndarray, s: np.ndarray, E: int) -> np.ndarray:
    """MQ(p, s) for packed public key(s) p and signature(s) s (batched on leading axes)."""
    p = np.asarray(p)
    s = np.asarray(s)
    D = s.shape[-1]
    mono = mq_monomials(F, s)
    P = p.reshape(p.shape[:-1] + (E, mq_terms(D)))
    return ((P * mono[..., None, :]) % F.q).sum(axis=-1) % F.q


@dataclass(frozen=True)
class UOVKeys:
    public: np.ndarray       # packed p, length E * mq_terms(D)
    E: int
    oil: int
    vinegar: int
    quad: tuple              # E central matrices (D x D, upper, no oil-oil)
    lin: np.ndarray          # E x D
    const: np.ndarray        # E
    S_inv: np.ndarray        # s = S_inv x
    seed: bytes

    @property
    def D(self) -> int:
        return self.oil + self.vinegar


def _rng(*parts) -> random.Random:
    return random.Random(hashlib.sha256(canonical(*parts)).digest())


def uov_keygen(F: PrimeField, seed: bytes, D: int = 6, E: int = 2, oil: Optional[int] = None) -> UOVKeys:
    oil = E if oil is None else oil
    if oil < E or oil >= D:
        raise CryptoError("need E <= oil < D")
    v = D - oil
    rng = _rng("uov-keygen", seed, D, E)
    q = F.q
    quads = []
    for _ in range(E):
        A = np.zeros((D, D), dtype=object)
        for i in range(D):
            for j in range(i, D):
                if j < v or i < v:   # no oil x oil terms
                    A[i, j] = rng.randrange(q)
        quads.append(A)
    lin = np.array([[rng.randrange(q) for _ in range(D)] for _ in range(E)], dtype=object)
    const = np.array([rng.randrange(q) for _ in range(E)], dtype=object)
    while True:
        S = F.array([[rng.randrange(q) for _ in range(D)] for _ in range(D)])
        if F.is_invertible(S):
            break
    S_inv = F.inv_matrix(S)
    Sobj = np.asarray(S, dtype=object)
    iu, ju = np.triu_indices(D)
    packed = []
    for e in range(E):
        M = (Sobj.T.dot(quads[e]).dot(Sobj)) % q
        sym = (M + M.T) % q
        coeffs = [M[i, i] if i == j else sym[i, j] for i, j in zip(iu, ju)]
        lin_pub = (lin[e].dot(Sobj)) % q
        packed.extend(coeffs)
        packed.extend(lin_pub)
        packed.append(const[e])
    return UOVKeys(F.array(packed), E, oil, v, tuple(quads), lin, const, S_inv, seed)


def uov_sign(F: PrimeField, keys: UOVKeys, w, max_tries: int = 64) -> np.ndarray:
    """Find s with MQ(public, s) = w: fix random vinegar values, solve the
    linear system in the oil variables, retry when it is singular."""
    q = F.q
    w = [int(x) % q for x in np.asarray(w).reshape(-1)]
    if len(w) != keys.E:
        raise CryptoError(f"digest must have {keys.E} entries")
    v, D = keys.vinegar, keys.D
    for attempt in range(max_tries):
        rng = _rng("uov-sign", keys.seed, np.array(w, dtype=object), attempt)
        xv = [rng.randrange(q) for _ in range(v)]
        rows, rhs = [], []
        for e in range(keys.E):
            A = keys.quad[e]
            row = []
            for o in range(v, D):
                c = int(keys.lin[e][o])
                for i in range(v):
                    c += int(A[i, o]) * xv[i]
                row.append(c % q)
            const = int(keys.const[e])
            for i in range(v):
                const += int(keys.lin[e][i]) * xv[i]
                for j in range(i, v):
                    const += int(A[i, j]) * xv[i] * xv[j]
            rows.append(row)
            rhs.append((w[e] - const) % q)
        extra = keys.oil - keys.E
        if extra:
            # pin surplus oil variables to random values
            for k in range(extra):
                r = [0] * keys.oil
                r[keys.E + k] = 1
                rows.append(r)
                rhs.append(rng.randrange(q))
        if not F.is_invertible(rows):
            continue
        try:
            xo = F.solve(rows, rhs)
        except SingularMatrix:
            continue
        x = F.array(xv + xo)
        return F.matmul(keys.S_inv, x)
    raise CryptoError("signing failed: oil system singular on every attempt")


# public cubic hashes

@dataclass(frozen=True)
class PolyHash:
    """Fixed public map F_q^n -> F_q^m; each output is a polynomial of total
    degree exactly 3 with a linear part and sparse cubic monomials.

    The constant terms are zero, so the all-zero padding transaction
    evaluates to zero through every check.
    """
    n: int
    m: int
    linear: np.ndarray   # m x n
    idx: np.ndarray      # m x t x 3 variable indices of cubic monomials
    coef: np.ndarray     # m x t
    const: np.ndarray    # m

    @classmethod
    def derive(cls, F: PrimeField, seed: bytes, tag: str, n: int, m: int) -> "PolyHash":
        rng = _rng("polyhash", seed, tag, n, m)
        q = F.q
        t = max(n, 4)
        linear = F.array([[rng.randrange(q) for _ in range(n)] for _ in range(m)])
        idx = np.zeros((m, t, 3), dtype=np.int64)
        coef = np.zeros((m, t), dtype=F.dtype)
        for c in range(m):
            seen = set()
            k = 0
            while k < t:
                mono = tuple(sorted(rng.randrange(n) for _ in range(3)))
                if mono in seen:
                    continue
                seen.add(mono)
                idx[c, k] = mono
                coef[c, k] = rng.randrange(1, q)
                k += 1
        return cls(n, m, linear, idx, coef, F.zeros(m))

    def __call__(self, F: PrimeField, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.n:
            raise CryptoError(f"hash expects {self.n} inputs, got {x.shape[-1]}")
        lin = ((x[..., None, :] * self.linear) % F.q).sum(axis=-1) % F.q
        a = x[..., self.idx[..., 0]]
        b = x[..., self.idx[..., 1]]
        c = x[..., self.idx[..., 2]]
        cub = ((((a * b) % F.q) * c) % F.q * self.coef) % F.q
        return (lin + cub.sum(axis=-1) + self.const) % F.q

    def degree(self) -> int:
        return 3 if self.coef.any() else (1 if self.linear.any() else 0)


# fingerprints and checksums

def hash_to_field(F: PrimeField, data, lam: int) -> np.ndarray:
    """Standard cryptographic hash, truncated to lam field elements."""
    raw = hashlib.shake_256(canonical(data)).digest(16 * lam)
    return F.array([int.from_bytes(raw[16 * i:16 * (i + 1)], "little") for i in range(lam)])


def fp(F: PrimeField, r, d) -> np.ndarray:
    """Fingerprint: coefficients of d(x) mod r, length deg r."""
    return poly_mod_vector(F, np.asarray(d).reshape(-1), r)


@dataclass(frozen=True)
class Checksum:
    CC: np.ndarray   # N x lam, hash of each coded row
    FP: np.ndarray   # K x gamma, fingerprint of each uncoded row

    def digest(self) -> bytes:
        return hashlib.sha256(canonical("checksum", self.CC, self.FP)).digest()


@lru_cache(maxsize=1024)
def _select(q: int, cc_bytes: bytes, gamma: int) -> tuple:
    seed = hashlib.sha256(b"select|" + cc_bytes).digest()
    return tuple(find_irreducible(PrimeField(q), seed, gamma))


def select(F: PrimeField, CC: np.ndarray, gamma: int) -> list[int]:
    """Fingerprint key drawn deterministically from the hash list."""
    return list(_select(F.q, canonical(CC), gamma))


def checksum(F: PrimeField, G: LagrangeMatrix, M, gamma: int = 2, lam: int = 2):
    """Returns (Checksum, coded rows) for a K-row matrix M."""
    M = np.asarray(M)
    coded = encode_rows(F, G, M)
    CC = np.stack([hash_to_field(F, row, lam) for row in coded])
    r = select(F, CC, gamma)
    FP = np.stack([fp(F, r, row) for row in M])
    return Checksum(CC, FP), coded


def agree(F: PrimeField, G: LagrangeMatrix, cks: Checksum, fragment, i: int) -> bool:
    lam = cks.CC.shape[1]
    gamma = cks.FP.shape[1]
    if not 0 <= i < cks.CC.shape[0]:
        return False
    fragment = np.asarray(fragment).reshape(-1)
    if not np.array_equal(hash_to_field(F, fragment, lam), cks.CC[i]):
        return False
    r = select(F, cks.CC, gamma)
    expect = encode_vector(F, G, cks.FP)[i]
    return bool(np.array_equal(fp(F, r, fragment), expect))
