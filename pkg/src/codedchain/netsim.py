"""Deterministic discrete-event simulator for the coded consensus.

Virtual time, partial synchrony with an explicit GST, Byzantine strategies
for the designated nodes, per-phase message and bit accounting, and an
oracle that replays every committed block uncoded and compares.
"""

from __future__ import annotations

import heapq
import json
import random
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np
import sympy

from .consensus import (CommitProof, LeaderView, Msg, Node, PrepareAck, PreCommitPayload,
                        PreparePayload)
from .crypto import Keyring, canonical
from .ledger import Block, Shard, TinyBlock, assemble_block
from .setting import Setting, degree_for, feasible, recovery_length
from .verify import apply_indicator, uncoded_indicator, verify_tx
from .workload import Coin, TxPool, genesis_shards, make_clients

SCHEMA = 1
ENVELOPE_BITS = 40     # message type + view number
STRATEGIES = ("crash", "equivocate-leader", "nonhomologous-leader", "wrong-coded-results",
              "wrong-indicator-endorsement", "delay-maximizer")
LEADER_STRATEGIES = ("equivocate-leader", "nonhomologous-leader", "delay-maximizer")
PHASE = {
    "new-view": ("new-view", "node->leader"),
    "prepare": ("prepare", "leader->node"),
    "prepare-vote": ("prepare", "node->leader"),
    "pre-commit": ("pre-commit", "leader->node"),
    "pre-commit-vote": ("pre-commit", "node->leader"),
    "commit": ("commit", "leader->node"),
    "commit-vote": ("commit", "node->leader"),
    "decide": ("decide", "leader->node"),
}


class ConfigError(ValueError):
    pass


class SafetyViolation(AssertionError):
    pass


# scenario

@dataclass
class Adversary:
    strategy: Optional[str] = None
    targets: Optional[list] = None
    params: dict = field(default_factory=dict)


@dataclass
class Scenario:
    N: int
    K: int
    Q: int
    f: int
    q: Any = 2**31 - 1          # an int or "auto"
    gamma: int = 2
    lam: int = 2
    seed: int = 0
    epochs: int = 3
    GST: float = 0.0
    delta: float = 1.0
    leaders: Optional[list] = None
    adversary: Adversary = field(default_factory=Adversary)
    crypto: str = "hmac"
    clients_per_community: int = 4
    genesis_size: int = 8
    tampers: list = field(default_factory=list)
    pre_gst: str = "random"     # or "max"
    delay_cap: Optional[float] = None
    sig_bits: int = 1
    max_views: Optional[int] = None
    routing: str = "random"     # or "balanced"

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ConfigError("scenario must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown scenario keys: {sorted(extra)}")
        missing = {"N", "K", "Q", "f"} - set(d)
        if missing:
            raise ConfigError(f"missing scenario keys: {sorted(missing)}")
        d = dict(d)
        adv = d.get("adversary") or {}
        if not isinstance(adv, dict):
            raise ConfigError("adversary must be an object")
        bad = set(adv) - {"strategy", "targets", "params"}
        if bad:
            raise ConfigError(f"unknown adversary keys: {sorted(bad)}")
        d["adversary"] = Adversary(**adv)
        sc = cls(**d)
        sc.validate()
        return sc

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
        except OSError as e:
            raise ConfigError(f"{path}: {e.strerror}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **kw) -> "Scenario":
        d = self.to_dict()
        d.update(kw)
        return Scenario.from_dict(d)

    def max_degree(self) -> int:
        M = self.genesis_size + self.K * self.Q * (self.epochs - 1)
        return degree_for((M - 1).bit_length())

    def resolved_q(self) -> int:
        if self.q == "auto":
            L = recovery_length(self.K, self.max_degree())
            return int(sympy.nextprime(self.N + self.K + L - 1))
        return self.q

    def validate(self) -> None:
        for name in ("N", "K", "Q", "epochs", "clients_per_community", "genesis_size", "sig_bits"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.f, int) or self.f < 0:
            raise ConfigError(f"f must be a non-negative integer, got {self.f!r}")
        if not 3 * self.f < self.N:
            raise ConfigError(f"f={self.f} violates f < N/3 for N={self.N}")
        d = self.max_degree()
        if not feasible(self.N, self.K, self.f, d):
            raise ConfigError(f"N={self.N} infeasible: need N >= (K-1)d+3f+1 = "
                              f"{(self.K - 1) * d + 3 * self.f + 1} with d={d} at epoch {self.epochs}")
        if self.q != "auto":
            if not isinstance(self.q, int) or not sympy.isprime(self.q):
                raise ConfigError(f"q must be a prime or \"auto\", got {self.q!r}")
            if self.q < self.N + self.K + recovery_length(self.K, d):
                raise ConfigError(f"q={self.q} has too few elements for the evaluation points")
        if self.crypto not in ("hmac", "ed25519"):
            raise ConfigError(f"crypto must be hmac or ed25519, got {self.crypto!r}")
        if self.routing not in ("random", "balanced"):
            raise ConfigError(f"routing must be random or balanced, got {self.routing!r}")
        if self.pre_gst not in ("random", "max"):
            raise ConfigError(f"pre_gst must be random or max, got {self.pre_gst!r}")
        if self.delta <= 0 or self.GST < 0:
            raise ConfigError("delta must be positive and GST non-negative")
        if self.leaders is not None:
            if not self.leaders or any(not isinstance(x, int) or not 0 <= x < self.N for x in self.leaders):
                raise ConfigError("leaders must be a non-empty list of node ids")
        a = self.adversary
        if a.strategy is not None and a.strategy not in STRATEGIES:
            raise ConfigError(f"unknown adversary strategy {a.strategy!r}; choose from {STRATEGIES}")
        if a.targets is not None:
            if len(set(a.targets)) != len(a.targets) or any(not 0 <= t < self.N for t in a.targets):
                raise ConfigError("adversary targets must be distinct node ids")
            if len(a.targets) > self.f:
                raise ConfigError(f"{len(a.targets)} adversary targets exceed f={self.f}")
        for t in self.tampers:
            if set(t) != {"height", "sender", "receiver", "row", "kind"}:
                raise ConfigError(f"tamper entries need height/sender/receiver/row/kind, got {t}")
            if t["kind"] not in ("bad-signature", "wrong-key"):
                raise ConfigError(f"unknown tamper kind {t['kind']!r}")

    def byzantine(self) -> list[int]:
        a = self.adversary
        if a.strategy is None:
            return []
        if a.targets is not None:
            return sorted(a.targets)
        if a.strategy in LEADER_STRATEGIES:
            return list(range(self.f))
        return list(range(self.N - self.f, self.N))

    def setting(self) -> Setting:
        return Setting(N=self.N, K=self.K, Q=self.Q, f=self.f, q=self.resolved_q(), gamma=self.gamma,
                       lam=self.lam, genesis_size=self.genesis_size)


# metering

def meter(msg: Msg, bits: int, lam: int, N: int, sig_bits: int = 1) -> int:
    """Idealized size of a message in bits."""
    h = lam * bits
    total = ENVELOPE_BITS
    if msg.header is not None:
        total += h + bits
        for c in (msg.header.cksH, msg.header.cksV):
            if c is not None:
                total += (c.CC.size + c.FP.size) * bits
    if msg.qc is not None:
        total += h + sig_bits
    total += _payload_bits(msg.payload, bits, N, sig_bits)
    for s in (msg.partial_sig, msg.signature_qi, msg.partial_sig_qi):
        if s is not None:
            total += sig_bits
    if msg.quorum_identifier is not None:
        total += N
    if msg.digest is not None:
        total += h
    return total


def _payload_bits(p, bits: int, N: int, sig_bits: int) -> int:
    if p is None:
        return 0
    if isinstance(p, PreparePayload):
        return (np.size(p.h) + np.size(p.v)) * bits + _payload_bits(p.proof, bits, N, sig_bits)
    if isinstance(p, CommitProof):
        return len(p.gw) * sig_bits + N + sig_bits
    if isinstance(p, PrepareAck):
        return (len(p.px) + len(p.sig_results)) * sig_bits + np.size(p.results) * bits
    if isinstance(p, PreCommitPayload):
        return (len(p.px_col) + len(p.sig_col)) * sig_bits + sum(np.size(v) for v in p.res_col.values()) * bits
    if isinstance(p, list):
        return len(p) * sig_bits
    raise TypeError(f"cannot meter payload {type(p).__name__}")


# adversaries

class CrashNode(Node):
    def start(self, now):
        pass

    def receive(self, m, now):
        pass

    def on_timeout(self, view, now):
        pass


class WrongResultsNode(Node):
    def tamper_results(self, results):
        return (results + 1) % self.st.F.q


class FlipIndicatorNode(Node):
    def endorse(self, g_col):
        return 1 - g_col


class SilentLeader(Node):
    def propose(self, view, now):
        self.leading[view] = {}


def altered_block(block: Block, rng: random.Random, q: int) -> Block:
    """A different block: slot (0, 0, 0) replaced by random field elements."""
    grid = [list(row) for row in block.grid]
    tb = grid[0][0]
    rows = tb.rows.copy()
    rows[0] = [rng.randrange(1, q) for _ in range(rows.shape[1])]
    grid[0][0] = TinyBlock(rows, tb.sender, tb.receiver, (None,) + tuple(tb.tx_ids[1:]))
    return Block(tuple(tuple(r) for r in grid), block.epoch, block.layout)


class ByzantineLeader(Node):
    """Colluding node; as leader it runs `attack`, as voter it votes for anything."""
    mode = "split"

    def receive(self, m, now):
        self.voted.clear()
        super().receive(m, now)

    def propose(self, view, now):
        if view in self.leading:
            return
        justify, proof = self.choose_justify(view)
        parent = justify.header
        block = self.env.take_block(self, view, parent)
        if block is None:
            return
        alt = altered_block(block, self.env.adv_rng, self.st.F.q)
        self.leading[view] = {}
        self.attack(view, justify, proof, block, alt)

    def lead_header(self, view, header, block):
        self.env.register(header, block, view, self.id)
        self.leading[view][header.digest] = LeaderView(view, header)

    def honest_targets(self):
        byz = set(self.env.byzantine)
        return [i for i in range(self.N) if i not in byz]


class EquivocatingLeader(ByzantineLeader):
    def attack(self, view, justify, proof, block, alt):
        H1, h1, v1 = self.build_proposal(block, justify.header)
        H2, h2, v2 = self.build_proposal(alt, justify.header)
        self.lead_header(view, H1, block)
        honest = self.honest_targets()
        if self.env.adversary_params.get("mode", "split") == "discrepancy":
            # one header; most honest nodes get outgoing fragments of another block
            fooled = set(honest[: self.N - 2 * self.st.f])
            for i in range(self.N):
                h = h2[i] if i in fooled else h1[i]
                self.send(i, Msg("prepare", view, self.id, header=H1, qc=justify,
                                 payload=PreparePayload(h, v1[i], proof)))
            return
        self.lead_header(view, H2, alt)
        first = set(honest[: len(honest) // 2])
        for i in range(self.N):
            options = [(H1, h1, v1), (H2, h2, v2)]
            if i in first:
                options = options[:1]
            elif i in set(honest):
                options = options[1:]
            for H, hh, vv in options:
                self.send(i, Msg("prepare", view, self.id, header=H, qc=justify,
                                 payload=PreparePayload(hh[i], vv[i], proof)))


class NonhomologousLeader(ByzantineLeader):
    def attack(self, view, justify, proof, block, alt):
        F, G = self.st.F, self.st.G
        from .crypto import checksum
        from .consensus import Header
        cksH, coded_h = checksum(F, G, block.matrix(), self.st.gamma, self.st.lam)
        cksV, coded_v = checksum(F, G, alt.transpose_matrix(), self.st.gamma, self.st.lam)
        H = Header(justify.header.digest, cksH, cksV, justify.header.height + 1)
        self.lead_header(view, H, block)
        for i in range(self.N):
            self.send(i, Msg("prepare", view, self.id, header=H, qc=justify,
                             payload=PreparePayload(coded_h[i], coded_v[i], proof)))


NODE_CLASS = {
    None: Node,
    "crash": CrashNode,
    "equivocate-leader": EquivocatingLeader,
    "nonhomologous-leader": NonhomologousLeader,
    "wrong-coded-results": WrongResultsNode,
    "wrong-indicator-endorsement": FlipIndicatorNode,
    "delay-maximizer": SilentLeader,
}


# results

@dataclass
class Proposal:
    header: Any
    block: Block
    view: int
    leader: int
    released: bool = False

    @property
    def height(self) -> int:
        return self.header.height


@dataclass
class EpochRecord:
    height: int
    digest: str
    view: int
    latency_views: int
    time: float
    indicator: list
    confirmed: list
    invalid: list
    collateral: list
    oracle_equal: bool = True

    def as_json(self) -> dict:
        return {"schema": SCHEMA, "type": "epoch", "height": self.height, "digest": self.digest,
                "view": self.view, "latency_views": self.latency_views, "time": round(self.time, 6),
                "indicator": self.indicator, "confirmed": len(self.confirmed),
                "invalid": len(self.invalid), "collateral": len(self.collateral),
                "confirmed_ids": self.confirmed, "oracle_equal": self.oracle_equal}


@dataclass
class Metrics:
    phases: dict = field(default_factory=lambda: defaultdict(lambda: {"messages": 0, "bits": 0}))
    views: dict = field(default_factory=lambda: defaultdict(lambda: {"messages": 0, "bits": 0}))
    epochs: list = field(default_factory=list)
    attacks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, msg: Msg, bits: int) -> None:
        phase, direction = PHASE[msg.type]
        p = self.phases[f"{phase}/{direction}"]
        p["messages"] += 1
        p["bits"] += bits
        v = self.views[msg.view]
        v["messages"] += 1
        v["bits"] += bits

    @property
    def total_bits(self) -> int:
        return sum(p["bits"] for p in self.phases.values())

    @property
    def total_messages(self) -> int:
        return sum(p["messages"] for p in self.phases.values())

    def records(self) -> list[dict]:
        out = [e.as_json() for e in self.epochs]
        out += [dict(a, schema=SCHEMA, type="attack") for a in self.attacks]
        s = dict(self.summary)
        s.update(schema=SCHEMA, type="summary", total_bits=self.total_bits,
                 total_messages=self.total_messages,
                 phases={k: dict(v) for k, v in sorted(self.phases.items())},
                 views={str(k): dict(v) for k, v in sorted(self.views.items())})
        out.append(s)
        return out


@dataclass
class OracleReport:
    ok: bool = True
    mismatches: list = field(default_factory=list)
    safety_ok: bool = True
    safety: list = field(default_factory=list)

    def fail(self, note: str) -> None:
        self.ok = False
        self.mismatches.append(note)


@dataclass
class RunResult:
    scenario: Scenario
    nodes: list
    metrics: Metrics
    report: OracleReport
    committed: int
    blocks: dict = field(default_factory=dict)   # height -> decided Block

    @property
    def honest(self) -> list:
        byz = set(self.scenario.byzantine())
        return [n for n in self.nodes if n.id not in byz]


# the simulator

class Simulator:
    def __init__(self, sc: Scenario):
        self.sc = sc
        st = self.st = sc.setting()
        F = st.F
        self.rng = random.Random(f"delays|{sc.seed}")
        self.adv_rng = random.Random(f"adversary|{sc.seed}")
        self.byzantine = sc.byzantine()
        self.adversary_params = sc.adversary.params
        self.keys = Keyring(st.N, st.f, st.K, canonical("keys", sc.seed), sc.crypto)
        clients = make_clients(st, sc.clients_per_community)
        self.shards, coins = genesis_shards(st, clients)
        self.pool = TxPool(st, clients, random.Random(f"pool|{sc.seed}"), balanced=sc.routing == "balanced")
        self.pool.add_coins(coins)
        for t in sc.tampers:
            self.pool.tampers[(t["height"], t["sender"], t["receiver"], t["row"])] = t["kind"]
        uncoded = np.stack([s.records for s in self.shards])
        cls_byz = NODE_CLASS[sc.adversary.strategy]
        self.nodes = []
        for i in range(st.N):
            coded = Shard(i, F.combine(st.G.entries[:, i], uncoded), True)
            cls = cls_byz if i in self.byzantine else Node
            self.nodes.append(cls(i, st, self.keys, coded, self, sc.delta, sc.leaders))
        self.honest = [n for n in self.nodes if n.id not in set(self.byzantine)]
        self.proposals: dict[bytes, Proposal] = {}
        self.holder: dict[int, bytes] = {}
        self.decided: dict[int, bytes] = {}
        self.decided_view = {0: -1}
        self.expected: dict[int, tuple] = {}
        self.metrics = Metrics()
        self.report = OracleReport()
        self.queue = []
        self.seq = 0
        self.now = 0.0
        self.halted = False
        self.view_at_gst = None
        self.max_views = sc.max_views or sc.epochs + 4 * (sc.f + 1) + 20
        self.bits = F.bits

    # env interface used by nodes

    def take_block(self, node: Node, view: int, parent) -> Optional[Block]:
        st = self.st
        height = parent.height + 1
        # feasibility was only checked up to the configured epoch count
        if self.halted or height > self.sc.epochs:
            return None
        # proposals off the new branch can no longer share a chain with it
        keep = set()
        d = parent.digest
        while d in self.proposals:
            keep.add(d)
            d = self.proposals[d].header.prev
        for d, p in self.proposals.items():
            if d not in keep:
                self.release(d)
        txs = self.pool.take(height)
        block, deferred = assemble_block(txs, st.K, st.Q, st.layout(st.T_for(height)), height, st.F.dtype)
        self.pool.give_back([t.tx_id for t in deferred])
        return block

    def register(self, header, block: Block, view: int, leader: int) -> None:
        self.proposals[header.digest] = Proposal(header, block, view, leader)
        for t in block.tx_ids():
            if t is not None:
                self.holder[t] = header.digest

    def release(self, digest: bytes) -> None:
        """Return a dead proposal's transactions to the pool (once)."""
        p = self.proposals[digest]
        if p.released:
            return
        p.released = True
        self.pool.give_back([t for t in p.block.tx_ids() if t is not None and self.holder.get(t) == digest])

    def on_append(self, node: Node, header) -> None:
        if node.id in self.byzantine:
            return
        h = header.height
        if h in self.decided and self.decided[h] != header.digest:
            self.report.safety_ok = False
            self.report.safety.append(f"height {h}: node {node.id} appended a conflicting header")
            return
        if h not in self.decided:
            self.decided[h] = header.digest
            self.oracle_epoch(node, header)
        self.check_node(node, header)
        if min(len(n.chain) - 1 for n in self.honest) >= self.sc.epochs:
            self.halted = True

    # oracle

    def oracle_epoch(self, node: Node, header) -> None:
        st = self.st
        h = header.height
        prop = self.proposals[header.digest]
        B = prop.block
        T = st.T_for(h)
        lay = st.layout(T)
        g = uncoded_indicator(st, B, self.shards, T)
        incoming = [apply_indicator(B.transpose_matrix()[k].reshape(st.K * st.Q, lay.R), g) for k in range(st.K)]
        stacked = np.stack(incoming)
        base = st.shard_size(h - 1)
        self.expected[h] = (g, stacked)
        confirmed, invalid, collateral = {}, [], []
        for k in range(st.K):
            V = self.shards[k].tensor()
            for r in range(st.K):
                tb = B.grid[k][r]
                res = verify_tx(st, tb.rows, V, T)
                for l, tx_id in enumerate(tb.tx_ids):
                    if tx_id is None:
                        continue
                    if g[k * st.Q + l] == 0:
                        it = self.pool.outstanding.get(tx_id)
                        confirmed[tx_id] = Coin(r, base + k * st.Q + l, it.recipient) if it else None
                    elif np.any(res[l] != 0):
                        invalid.append(tx_id)
                    else:
                        collateral.append(tx_id)
        self.shards = [Shard(k, np.concatenate([self.shards[k].records, incoming[k][:, lay.body]]))
                       for k in range(st.K)]
        self.pool.settle({t: c for t, c in confirmed.items() if c is not None}, invalid + collateral)
        self.proposals[header.digest].released = True
        for d, p in self.proposals.items():
            if p.height == h and d != header.digest:
                self.release(d)
        view = node.view
        self.decided_view[h] = view
        self.metrics.epochs.append(EpochRecord(
            h, header.digest.hex()[:16], view, view - self.decided_view.get(h - 1, -1), self.now,
            [int(x) for x in g], sorted(confirmed), sorted(invalid), sorted(collateral)))

    def check_node(self, node: Node, header) -> None:
        st, F = self.st, self.st.F
        h = header.height
        _, _, g_node, filt = node.appended[-1]
        g, stacked = self.expected[h]
        want = F.combine(st.G.entries[:, node.id], stacked)
        ok = np.array_equal(g_node, g) and np.array_equal(np.asarray(filt) % F.q, want % F.q)
        if not ok:
            self.report.fail(f"height {h}: node {node.id} diverges from the uncoded oracle")
            for e in self.metrics.epochs:
                if e.height == h:
                    e.oracle_equal = False

    # event loop

    def push(self, t: float, kind: int, *data) -> None:
        self.seq += 1
        heapq.heappush(self.queue, (t, self.seq, kind, data))

    def delay(self, src: int, dst: int) -> float:
        if src == dst:
            return 0.0
        sc = self.sc
        if self.now >= sc.GST:
            return sc.delta * (1.0 - self.rng.random())
        cap = sc.delay_cap if sc.delay_cap is not None else 4 * sc.delta
        d = cap if sc.pre_gst == "max" else cap * (1.0 - self.rng.random())
        return min(self.now + d, sc.GST + sc.delta) - self.now

    def flush(self, node: Node) -> None:
        out, node.outbox = node.outbox, []
        timers, node.timers = node.timers, []
        if node.id in self.byzantine and isinstance(node, CrashNode):
            return
        for dest, msg in out:
            if dest != node.id:
                self.metrics.add(msg, meter(msg, self.bits, self.st.lam, self.st.N, self.sc.sig_bits))
            self.push(self.now + self.delay(node.id, dest), 0, dest, msg)
        for view, deadline in timers:
            self.push(deadline, 1, node.id, view)

    def run(self) -> RunResult:
        for n in self.nodes:
            n.start(0.0)
            self.flush(n)
        while self.queue:
            t, _, kind, data = heapq.heappop(self.queue)
            self.now = t
            if self.view_at_gst is None and t >= self.sc.GST:
                self.view_at_gst = max(n.view for n in self.honest)
            if kind == 0:
                dest, msg = data
                node = self.nodes[dest]
                node.receive(msg, t)
                self.flush(node)
            elif not self.halted:
                node = self.nodes[data[0]]
                node.on_timeout(data[1], t)
                self.flush(node)
            if max(n.view for n in self.honest) > self.max_views:
                self.halted = True
        return self.finish()

    def finish(self) -> RunResult:
        sc = self.sc
        committed = min(len(n.chain) - 1 for n in self.honest)
        by_height = defaultdict(set)
        for n in self.honest:
            for hdr in n.chain[1:]:
                by_height[hdr.height].add(hdr.digest)
        for h, ds in by_height.items():
            if len(ds) > 1:
                self.report.safety_ok = False
                self.report.safety.append(f"height {h}: {len(ds)} different headers")
        committed_views = {p.view for d, p in self.proposals.items() if d in set(self.decided.values())}
        commit_views = sorted(self.decided_view[h] for h in self.decided)
        for view in sorted({p.view for p in self.proposals.values()} | self.silent_byzantine_views()):
            leader = self.nodes[0].leader(view)
            if leader not in self.byzantine:
                continue
            notes = Counter(note for n in self.honest for v, note in n.events if v == view)
            self.metrics.attacks.append({
                "view": view, "leader": leader, "strategy": sc.adversary.strategy,
                "rejected": view not in committed_views, "honest_notes": dict(sorted(notes.items()))})
        after = [v for h, v in self.decided_view.items() if h > 0 and self._decide_time(h) >= sc.GST]
        self.metrics.summary = {
            "N": sc.N, "K": sc.K, "Q": sc.Q, "f": sc.f, "q": self.st.q, "seed": sc.seed,
            "strategy": sc.adversary.strategy, "byzantine": self.byzantine,
            "epochs_target": sc.epochs, "epochs_committed": committed,
            "safety_ok": self.report.safety_ok, "oracle_ok": self.report.ok,
            "commit_views": commit_views, "view_at_gst": self.view_at_gst,
            "first_commit_view_after_gst": min(after) if after else None,
            "final_view": max(n.view for n in self.honest), "sim_time": round(self.now, 6),
            "mismatches": self.report.mismatches[:5], "safety_notes": self.report.safety[:5],
        }
        if committed < sc.epochs:
            self.report.ok = False
            self.report.mismatches.append(f"only {committed} of {sc.epochs} epochs committed")
            self.metrics.summary["oracle_ok"] = False
        blocks = {h: self.proposals[d].block for h, d in self.decided.items()}
        return RunResult(sc, self.nodes, self.metrics, self.report, committed, blocks)

    def silent_byzantine_views(self) -> set:
        """Byzantine-led views that honest nodes actually waited out."""
        timed_out = {v for n in self.honest for v, note in n.events if note == "timeout"}
        return {v for v in timed_out if self.nodes[0].leader(v) in self.byzantine}

    def _decide_time(self, h: int) -> float:
        for e in self.metrics.epochs:
            if e.height == h:
                return e.time
        return -1.0


def run_scenario(sc: Scenario) -> RunResult:
    result = Simulator(sc).run()
    if not result.report.safety_ok:
        raise SafetyViolation("; ".join(result.report.safety))
    return result


def confirmed_sets(result: RunResult) -> dict[int, list]:
    return {e.height: e.confirmed for e in result.metrics.epochs}


def confirmed_from_indicator(block: Block, g) -> list:
    Q = block.Q
    out = []
    for k, row in enumerate(block.grid):
        for tb in row:
            out += [t for l, t in enumerate(tb.tx_ids) if t is not None and not g[k * Q + l]]
    return sorted(out)


def verify_oracle(sc: Scenario) -> tuple[bool, str]:
    """Coded run against an uncoded replay of the same decided blocks.

    The replay recomputes each epoch's indicator and confirmed set by brute
    force; the first differing epoch is reported.
    """
    result = run_scenario(sc)
    sim_coded = {e.height: (e.indicator, e.confirmed) for e in result.metrics.epochs}
    for n in result.honest:
        for h, _, g, _ in n.appended:
            ind, conf = sim_coded[h]
            mine = confirmed_from_indicator(result.blocks[h], g)
            if mine != conf:
                extra = sorted(set(mine) ^ set(conf))
                return False, (f"epoch {h}: node {n.id} confirms {len(mine)} transactions, uncoded replay "
                               f"{len(conf)}; first difference tx {extra[0] if extra else None}")
    if not result.report.ok:
        return False, result.report.mismatches[0]
    lines = [f"epoch {h}: {len(c)} confirmed, indicator {''.join(map(str, i))}"
             for h, (i, c) in sorted(sim_coded.items())]
    return True, "\n".join(lines)
