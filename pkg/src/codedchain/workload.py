"""Client side of the ledger: key pairs, genesis coins and a transaction pool.

Clients hold UOV keys; an address is hash1 of the public key. A coin is a
shard slot whose record carries the owner's address. The pool turns spend
intents into signed transactions for whatever epoch a leader is filling,
so intents that miss an epoch are simply re-signed for the next one.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .crypto import UOVKeys, canonical, uov_keygen, uov_sign
from .ledger import ClientTx, Shard, lookup_matrix
from .setting import Setting


@dataclass(frozen=True)
class Client:
    community: int
    index: int
    keys: UOVKeys
    address: np.ndarray


def make_clients(st: Setting, per_community: int) -> list[list[Client]]:
    out = []
    for k in range(st.K):
        row = []
        for j in range(per_community):
            keys = uov_keygen(st.F, canonical("client", st.seed, k, j), st.D, st.E, st.oil)
            row.append(Client(k, j, keys, st.hash1(st.F, keys.public)))
        out.append(row)
    return out


def genesis_record(st: Setting, address) -> np.ndarray:
    rec = st.F.zeros(st.W)
    rec[st.B:st.B + st.C] = address
    return rec


def genesis_shards(st: Setting, clients) -> tuple[list[Shard], list["Coin"]]:
    shards, coins = [], []
    for k in range(st.K):
        recs = []
        for j in range(st.genesis_size):
            owner = clients[k][j % len(clients[k])]
            recs.append(genesis_record(st, owner.address))
            coins.append(Coin(k, j, owner))
        shards.append(Shard(k, np.stack(recs).astype(st.F.dtype)))
    return shards, coins


def sign_tx(st: Setting, T: int, owner: Client, slot: int, recipient_address,
            tamper: Optional[str] = None) -> np.ndarray:
    """Serialized transaction spending shard slot `slot` of the owner's community."""
    F = st.F
    lay = st.layout(T)
    x = F.zeros(lay.R)
    x[lay.u] = lookup_matrix(slot, T).reshape(-1)
    x[lay.p] = owner.keys.public
    x[lay.a] = recipient_address
    w = st.hash2(T)(F, x[lay.signed])
    s = uov_sign(F, owner.keys, w)
    if tamper == "bad-signature":
        s = s.copy()
        s[0] = (s[0] + 1) % F.q
    elif tamper == "wrong-key":
        x[lay.p] = (x[lay.p] + 1) % F.q
    x[lay.s] = s
    return x


@dataclass(frozen=True)
class Coin:
    community: int
    position: int
    owner: Client


@dataclass
class Intent:
    tx_id: int
    coin: Coin
    recipient: Client
    tamper: Optional[str] = None


@dataclass
class TxPool:
    """FIFO of spend intents; every unspent coin is spent once it is free."""
    st: Setting
    clients: list
    rng: random.Random
    queue: deque = field(default_factory=deque)
    outstanding: dict = field(default_factory=dict)   # tx_id -> Intent
    next_id: int = 0
    tampers: dict = field(default_factory=dict)       # (height, sender, receiver, row) -> kind
    balanced: bool = False    # spread each community's spends evenly over receivers
    _sent: dict = field(default_factory=dict)

    def add_coins(self, coins) -> None:
        for c in coins:
            self.queue.append(self._intent(c))

    def _intent(self, coin: Coin) -> Intent:
        if self.balanced:
            n = self._sent.get(coin.community, 0)
            self._sent[coin.community] = n + 1
            r = n % self.st.K
        else:
            r = self.rng.randrange(self.st.K)
        recipient = self.rng.choice(self.clients[r])
        self.next_id += 1
        return Intent(self.next_id, coin, recipient)

    def take(self, height: int) -> list[ClientTx]:
        """Sign every queued intent for epoch `height` and hand them out."""
        T = self.st.T_for(height)
        out = []
        cells = {}
        while self.queue:
            it = self.queue.popleft()
            cell = (it.coin.community, it.recipient.community)
            row = cells.get(cell, 0)
            cells[cell] = row + 1
            tamper = self.tampers.get((height, cell[0], cell[1], row))
            it.tamper = tamper
            vec = sign_tx(self.st, T, it.coin.owner, it.coin.position, it.recipient.address, tamper)
            self.outstanding[it.tx_id] = it
            out.append(ClientTx(it.tx_id, it.coin.community, it.recipient.community, vec))
        return out

    def give_back(self, tx_ids) -> None:
        """Return unconfirmed intents to the front of the queue, in order."""
        back = [self.outstanding.pop(t) for t in tx_ids if t in self.outstanding]
        for it in reversed(back):
            self.queue.appendleft(it)

    def settle(self, confirmed: dict, rejected) -> None:
        """confirmed: tx_id -> new Coin; rejected: tx ids dropped for good."""
        for t, coin in confirmed.items():
            self.outstanding.pop(t, None)
            self.queue.append(self._intent(coin))
        for t in rejected:
            it = self.outstanding.pop(t, None)
            if it is not None:
                self.queue.append(self._intent(it.coin))
