"""Per-node state machine for the four-phase coded consensus.

Each view runs prepare, pre-commit, commit and decide under a round-robin
leader. On top of plain leader-based BFT, a prepare carries the node's coded
outgoing and incoming strips (checked against the header's checksums), the
prepare acks carry homology signatures and coded result rows, and the
pre-commit and commit phases turn those into a threshold-signed indicator of
which coded transaction slots to drop before appending.

Nodes never see uncoded data; the simulator supplies blocks to leaders
through `env.take_block`.
"""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional

import numpy as np

from .coding import DecodeError, encode_vector
from .crypto import Checksum, Keyring, PartialSig, ThresholdSig, agree, canonical, checksum
from .ledger import Block, Shard, append_records
from .setting import Setting
from .verify import (ProtocolError, InvalidIndicator, apply_indicator, binary_results,
                     decode_result_column, encode_results, extract_indicator, merge_indicators,
                     partial_indicator, verify_strip)


@dataclass(frozen=True)
class Header:
    prev: bytes
    cksH: Optional[Checksum]
    cksV: Optional[Checksum]
    height: int

    @cached_property
    def digest(self) -> bytes:
        parts = [self.prev, self.height]
        if self.cksH is not None:
            parts += [self.cksH.digest(), self.cksV.digest()]
        return hashlib.sha256(canonical("header", *parts)).digest()


GENESIS = Header(b"\x00" * 32, None, None, 0)


@dataclass(frozen=True)
class QC:
    type: str
    view: int
    header: Header
    sig: Optional[ThresholdSig]


GENESIS_QC = QC("genesis", -1, GENESIS, None)


def qc_message(kind: str, view: int, digest: bytes) -> bytes:
    return canonical("vote", kind, view, digest)


def qi_message(qi: int, digest: bytes) -> bytes:
    return canonical("quorum", qi, digest)


def qi_members(qi: int, N: int) -> list[int]:
    return [i for i in range(N) if qi >> i & 1]


def qi_of(members) -> int:
    return sum(1 << i for i in members)


@dataclass
class Msg:
    type: str
    view: int
    sender: int
    header: Optional[Header] = None
    qc: Optional[QC] = None
    payload: Any = None
    partial_sig: Optional[PartialSig] = None
    quorum_identifier: Optional[int] = None
    signature_qi: Optional[ThresholdSig] = None
    partial_sig_qi: Optional[PartialSig] = None
    digest: Optional[bytes] = None   # header reference carried by votes


@dataclass
class CommitProof:
    """Everything a node needs to apply a locked header's indicator."""
    gw: list
    qi: int
    sig_qi: ThresholdSig


@dataclass
class PreparePayload:
    h: np.ndarray   # coded outgoing strip, flattened
    v: np.ndarray   # coded incoming strip, flattened
    proof: Optional[CommitProof] = None   # for the justify header


@dataclass
class PrepareAck:
    px: list          # N homology signatures
    results: np.ndarray   # N x Q(C+E) coded result row
    sig_results: list     # N signatures


@dataclass
class PreCommitPayload:
    px_col: dict
    res_col: dict
    sig_col: dict


@dataclass
class Slot:
    """What a node holds for one proposed header."""
    header: Header
    h: np.ndarray
    v: np.ndarray
    u: Optional[list] = None
    g: Optional[np.ndarray] = None
    filtered: Optional[np.ndarray] = None
    proof: Optional[CommitProof] = None


@dataclass
class LeaderView:
    view: int
    header: Header
    acks: dict = field(default_factory=dict)
    precommit_votes: dict = field(default_factory=dict)
    commit_votes: dict = field(default_factory=dict)
    qi: Optional[int] = None
    stage: str = "prepare"


def extends(header: Header, ancestor: Header, headers: dict) -> bool:
    cur = header
    while cur is not None and cur.height > ancestor.height:
        cur = headers.get(cur.prev)
    return cur is not None and cur.digest == ancestor.digest


def safe_header(header: Header, qc: QC, locked_qc: QC, headers: dict) -> bool:
    return extends(header, locked_qc.header, headers) or qc.view > locked_qc.view


class Node:
    def __init__(self, i: int, st: Setting, keys: Keyring, shard: Shard, env, delta: float = 1.0,
                 leaders: Optional[list] = None):
        self.id = i
        self.leaders = leaders
        self.st = st
        self.keys = keys
        self.env = env
        self.base_timeout = 4 * delta
        self.view = -1
        self.locked_qc = GENESIS_QC
        self.prepare_qc = GENESIS_QC
        self.chain = [GENESIS]
        self.shard = shard
        self.headers = {GENESIS.digest: GENESIS}
        self.slots: dict[bytes, Slot] = {}
        self.voted = set()
        self.failures = 0
        self.deadline = 0.0
        self.new_views = defaultdict(dict)
        self.future = defaultdict(list)
        self.leading: dict[int, dict[bytes, LeaderView]] = {}
        self.pending_decides: dict[bytes, QC] = {}
        self.appended = []          # (height, digest, g, filtered strip)
        self.outbox = []
        self.timers = []
        self.events = []            # (view, note) for the metrics log

    # helpers

    @property
    def N(self) -> int:
        return self.st.N

    def leader(self, view: int) -> int:
        if self.leaders:
            return self.leaders[view % len(self.leaders)]
        return view % self.N

    @property
    def tip(self) -> Header:
        return self.chain[-1]

    def send(self, dest: int, msg: Msg) -> None:
        self.outbox.append((dest, msg))

    def broadcast(self, msg: Msg) -> None:
        for j in range(self.N):
            self.send(j, msg)

    def qc_valid(self, qc: Optional[QC]) -> bool:
        if not isinstance(qc, QC):
            return False
        if qc.type == "genesis":
            return qc.header.digest == GENESIS.digest and qc.view == -1
        return self.keys.tverify("pi", qc_message(qc.type, qc.view, qc.header.digest), qc.sig)

    def matching_qc(self, qc, kind: str, view: Optional[int]) -> bool:
        return (isinstance(qc, QC) and qc.type == kind and (view is None or qc.view == view)
                and self.qc_valid(qc))

    def learn(self, header: Header) -> None:
        self.headers.setdefault(header.digest, header)

    def undecided_path(self, header: Header) -> Optional[list]:
        """Headers strictly after the decided tip up to `header`, oldest first."""
        path = []
        cur = header
        while cur is not None and cur.height > self.tip.height:
            path.append(cur)
            cur = self.headers.get(cur.prev)
        if cur is None or cur.digest != self.tip.digest:
            return None
        return path[::-1]

    def shard_after(self, path) -> Optional[Shard]:
        shard = self.shard
        for h in path:
            slot = self.slots.get(h.digest)
            if slot is None or slot.filtered is None:
                return None
            shard = append_records(shard, slot.filtered, self.st.layout(self.st.T_for(h.height)))
        return shard

    # pacemaker

    def start(self, now: float) -> None:
        self.enter_view(0, now, by_decide=True)

    def arm(self, now: float) -> None:
        """(Re)start the view timer; progress inside a view re-arms it."""
        self.deadline = now + self.base_timeout * 2 ** self.failures
        self.timers.append((self.view, self.deadline))

    def enter_view(self, view: int, now: float, by_decide: bool) -> None:
        self.view = view
        self.arm(now)
        if self.leader(view) == self.id and (by_decide or len(self.new_views[view - 1]) >= self.N - self.st.f):
            self.propose(view, now)
        for m in self.future.pop(view, []):
            self.receive(m, now)

    def on_timeout(self, view: int, now: float) -> None:
        if view != self.view or now < self.deadline:
            return
        self.failures += 1
        self.events.append((view, "timeout"))
        self.send(self.leader(view + 1), Msg("new-view", view, self.id, qc=self.locked_qc,
                                             payload=self.proof_for(self.locked_qc)))
        self.enter_view(view + 1, now, by_decide=False)

    # dispatch

    def receive(self, m: Msg, now: float) -> None:
        handler = getattr(self, "on_" + m.type.replace("-", "_"), None)
        if handler is None:
            return
        if m.type in ("decide", "new-view"):
            handler(m, now)
        elif m.view > self.view:
            self.future[m.view].append(m)
        elif m.view < self.view:
            if m.type in ("prepare", "commit"):
                handler(m, now, late=True)
        else:
            handler(m, now)

    # leader: prepare

    def choose_justify(self, view: int) -> tuple[QC, Optional[CommitProof]]:
        best, proof = self.locked_qc, self.proof_for(self.locked_qc)
        for qc, pr in self.new_views[view - 1].values():
            if qc.view > best.view:
                best, proof = qc, pr
        return best, proof

    def proof_for(self, qc: QC) -> Optional[CommitProof]:
        slot = self.slots.get(qc.header.digest)
        return slot.proof if slot is not None else None

    def build_proposal(self, block: Block, parent: Header):
        F, G = self.st.F, self.st.G
        cksH, coded_h = checksum(F, G, block.matrix(), self.st.gamma, self.st.lam)
        cksV, coded_v = checksum(F, G, block.transpose_matrix(), self.st.gamma, self.st.lam)
        header = Header(parent.digest, cksH, cksV, parent.height + 1)
        return header, coded_h, coded_v

    def propose(self, view: int, now: float) -> None:
        if view in self.leading:
            return
        justify, proof = self.choose_justify(view)
        parent = justify.header
        block = self.env.take_block(self, view, parent)
        if block is None:
            return
        header, coded_h, coded_v = self.build_proposal(block, parent)
        self.env.register(header, block, view, self.id)
        self.leading[view] = {header.digest: LeaderView(view, header)}
        for i in range(self.N):
            self.send(i, Msg("prepare", view, self.id, header=header, qc=justify,
                             payload=PreparePayload(coded_h[i], coded_v[i], proof)))

    def lead(self, m: Msg, stage: str) -> Optional[LeaderView]:
        lv = self.leading.get(m.view, {}).get(m.digest)
        if lv is None or lv.stage != stage:
            return None
        return lv

    # node: prepare

    def accept_fragments(self, m: Msg) -> bool:
        H, p = m.header, m.payload
        if not isinstance(p, PreparePayload) or H.cksH is None:
            return False
        F, G = self.st.F, self.st.G
        return agree(F, G, H.cksH, p.h, self.id) and agree(F, G, H.cksV, p.v, self.id)

    def on_prepare(self, m: Msg, now: float, late: bool = False) -> None:
        if m.sender != self.leader(m.view) or not isinstance(m.header, Header):
            return
        H, qc = m.header, m.qc
        if not self.qc_valid(qc) or H.prev != qc.header.digest or H.height != qc.header.height + 1:
            return
        self.learn(qc.header)
        self.learn(H)
        if isinstance(m.payload, PreparePayload) and m.payload.proof is not None:
            self.apply_commit(qc, m.payload.proof, now)
        if late:
            # keep the strips so a later commit certificate can still be applied
            if H.digest not in self.slots and self.accept_fragments(m):
                self.slots[H.digest] = Slot(H, np.asarray(m.payload.h), np.asarray(m.payload.v))
            return
        if ("prepare", m.view) in self.voted:
            return
        if not safe_header(H, qc, self.locked_qc, self.headers):
            self.events.append((m.view, "unsafe-header"))
            return
        path = self.undecided_path(qc.header)
        if path is None:
            return
        V = self.shard_after(path)
        if V is None:
            self.events.append((m.view, "missing-parent-data"))
            return
        if not self.accept_fragments(m):
            self.events.append((m.view, "disagree"))
            return
        self.voted.add(("prepare", m.view))
        self.arm(now)
        st, F, G = self.st, self.st.F, self.st.G
        T = st.T_for(H.height)
        lay = st.layout(T)
        h = np.asarray(m.payload.h).reshape(st.K * st.Q, lay.R)
        v = np.asarray(m.payload.v).reshape(st.K * st.Q, lay.R)
        e = verify_strip(st, h, V.tensor(), T)
        digest = H.digest
        w = encode_vector(F, G, h.reshape(st.K, -1))
        u = encode_vector(F, G, v.reshape(st.K, -1))
        px = self.keys.sign_each(self.id, "homology", digest, w)
        results = self.tamper_results(encode_results(st, e))
        sig_results = self.keys.sign_each(self.id, "result", digest, results)
        self.slots[digest] = Slot(H, h, v, u)
        ack = Msg("prepare-vote", m.view, self.id, digest=digest,
                  payload=PrepareAck(px, results, sig_results),
                  partial_sig=self.keys.tpartial("pi", self.id, qc_message("prepare", m.view, digest)))
        self.send(m.sender, ack)

    def tamper_results(self, results: np.ndarray) -> np.ndarray:
        return results

    # leader: pre-commit

    def on_prepare_vote(self, m: Msg, now: float) -> None:
        lv = self.lead(m, "prepare")
        if lv is None:
            return
        p = m.payload
        digest = lv.header.digest
        if not self.keys.partial_valid("pi", qc_message("prepare", m.view, digest), m.partial_sig):
            return
        if m.partial_sig.signer != m.sender or not isinstance(p, PrepareAck):
            return
        if len(p.px) != self.N or len(p.sig_results) != self.N or len(p.results) != self.N:
            return
        for j in range(self.N):
            if not self.keys.verify(m.sender, canonical("result", digest, j, p.results[j]), p.sig_results[j]):
                return
        lv.acks[m.sender] = m
        if len(lv.acks) == self.N - self.st.f:
            self.send_precommit(lv)

    def send_precommit(self, lv: LeaderView) -> None:
        acks = lv.acks
        digest = lv.header.digest
        qc = QC("prepare", lv.view, lv.header,
                self.keys.tcombine("pi", qc_message("prepare", lv.view, digest),
                                   [a.partial_sig for a in acks.values()]))
        lv.qi = qi_of(acks)
        lv.stage = "pre-commit"
        for j in range(self.N):
            payload = PreCommitPayload(
                {i: a.payload.px[j] for i, a in acks.items()},
                {i: a.payload.results[j] for i, a in acks.items()},
                {i: a.payload.sig_results[j] for i, a in acks.items()},
            )
            self.send(j, Msg("pre-commit", lv.view, self.id, qc=qc, payload=payload,
                             quorum_identifier=lv.qi))

    # node: pre-commit

    def on_pre_commit(self, m: Msg, now: float) -> None:
        if m.sender != self.leader(m.view) or not self.matching_qc(m.qc, "prepare", m.view):
            return
        digest = m.qc.header.digest
        if m.qc.view > self.prepare_qc.view:
            self.prepare_qc = m.qc
        slot = self.slots.get(digest)
        if slot is None or slot.u is None or ("pre-commit", m.view) in self.voted:
            return
        p, qi = m.payload, m.quorum_identifier
        if not isinstance(p, PreCommitPayload) or not isinstance(qi, int):
            return
        members = qi_members(qi, self.N)
        if len(members) != self.N - self.st.f:
            return
        if not (set(p.px_col) == set(p.res_col) == set(p.sig_col) == set(members)):
            return
        j = self.id
        for i in members:
            if not self.keys.verify(i, canonical("homology", digest, j, slot.u[i]), p.px_col[i]):
                self.events.append((m.view, "nonhomologous"))
                return
            if not self.keys.verify(i, canonical("result", digest, j, p.res_col[i]), p.sig_col[i]):
                return
        try:
            s = decode_result_column(self.st, p.res_col, slot.header.height)
        except DecodeError:
            self.events.append((m.view, "decode-failure"))
            return
        g_col = self.endorse(binary_results(s))
        self.voted.add(("pre-commit", m.view))
        self.arm(now)
        ack = Msg("pre-commit-vote", m.view, self.id, digest=digest,
                  payload=partial_indicator(self.keys, self.id, g_col, digest),
                  partial_sig=self.keys.tpartial("pi", self.id, qc_message("pre-commit", m.view, digest)),
                  partial_sig_qi=self.keys.tpartial("pi", self.id, qi_message(qi, digest)))
        self.send(m.sender, ack)

    def endorse(self, g_col: np.ndarray) -> np.ndarray:
        return g_col

    # leader: commit

    def on_pre_commit_vote(self, m: Msg, now: float) -> None:
        lv = self.lead(m, "pre-commit")
        if lv is None:
            return
        digest = lv.header.digest
        if not (self.keys.partial_valid("pi", qc_message("pre-commit", m.view, digest), m.partial_sig)
                and self.keys.partial_valid("pi", qi_message(lv.qi, digest), m.partial_sig_qi)):
            return
        if m.partial_sig.signer != m.sender or m.partial_sig_qi.signer != m.sender:
            return
        if not isinstance(m.payload, list) or len(m.payload) != self.st.K * self.st.Q:
            return
        lv.precommit_votes[m.sender] = m
        if len(lv.precommit_votes) == self.N - self.st.f:
            self.send_commit(lv)

    def send_commit(self, lv: LeaderView) -> None:
        votes = lv.precommit_votes
        digest = lv.header.digest
        lv.stage = "commit"
        try:
            gw = merge_indicators(self.keys, {i: v.payload for i, v in votes.items()}, digest)
        except ProtocolError:
            self.events.append((lv.view, "merge-failure"))
            return
        qc = QC("pre-commit", lv.view, lv.header,
                self.keys.tcombine("pi", qc_message("pre-commit", lv.view, digest),
                                   [v.partial_sig for v in votes.values()]))
        sig_qi = self.keys.tcombine("pi", qi_message(lv.qi, digest), [v.partial_sig_qi for v in votes.values()])
        self.broadcast(Msg("commit", lv.view, self.id, qc=qc, payload=gw,
                           quorum_identifier=lv.qi, signature_qi=sig_qi))

    # node: commit

    def apply_commit(self, qc: QC, proof: CommitProof, now: float) -> bool:
        """Check a precommitQC with its indicator certificate; lock and filter."""
        if not self.matching_qc(qc, "pre-commit", None) or not isinstance(proof, CommitProof):
            return False
        digest = qc.header.digest
        slot = self.slots.get(digest)
        if slot is None:
            return False
        qi = proof.qi
        if not isinstance(qi, int) or len(qi_members(qi, self.N)) != self.N - self.st.f:
            return False
        if not self.keys.tverify("pi", qi_message(qi, digest), proof.sig_qi):
            return False
        try:
            g = extract_indicator(self.keys, proof.gw, digest)
        except (InvalidIndicator, TypeError):
            return False
        if len(g) != self.st.K * self.st.Q:
            return False
        if qc.view > self.locked_qc.view:
            self.locked_qc = qc
        if slot.g is None:
            slot.g = g
            slot.proof = proof
            lay = self.st.layout(self.st.T_for(slot.header.height))
            slot.filtered = apply_indicator(np.asarray(slot.v).reshape(-1, lay.R), g)
            self.retry_decides(now)
        return True

    def on_commit(self, m: Msg, now: float, late: bool = False) -> None:
        if m.sender != self.leader(m.view) or not self.matching_qc(m.qc, "pre-commit", m.view):
            return
        if not self.apply_commit(m.qc, CommitProof(m.payload, m.quorum_identifier, m.signature_qi), now):
            return
        if late or ("commit", m.view) in self.voted or m.view != self.view:
            return
        self.voted.add(("commit", m.view))
        self.arm(now)
        digest = m.qc.header.digest
        self.send(m.sender, Msg("commit-vote", m.view, self.id, digest=digest,
                                partial_sig=self.keys.tpartial("pi", self.id, qc_message("commit", m.view, digest))))

    # leader: decide

    def on_commit_vote(self, m: Msg, now: float) -> None:
        lv = self.lead(m, "commit")
        if lv is None:
            return
        digest = lv.header.digest
        if not self.keys.partial_valid("pi", qc_message("commit", m.view, digest), m.partial_sig):
            return
        if m.partial_sig.signer != m.sender:
            return
        lv.commit_votes[m.sender] = m
        if len(lv.commit_votes) == self.N - self.st.f:
            lv.stage = "decide"
            qc = QC("commit", lv.view, lv.header,
                    self.keys.tcombine("pi", qc_message("commit", lv.view, digest),
                                       [v.partial_sig for v in lv.commit_votes.values()]))
            self.broadcast(Msg("decide", lv.view, self.id, qc=qc))

    # node: decide

    def on_decide(self, m: Msg, now: float) -> None:
        if m.sender != self.leader(m.view) or not self.matching_qc(m.qc, "commit", m.view):
            return
        self.learn(m.qc.header)
        self.pending_decides[m.qc.header.digest] = m.qc
        self.retry_decides(now)

    def retry_decides(self, now: float) -> None:
        progressed = True
        while progressed:
            progressed = False
            for digest, qc in list(self.pending_decides.items()):
                if digest not in self.pending_decides:
                    continue
                H = qc.header
                if H.height <= self.tip.height:
                    del self.pending_decides[digest]
                    continue
                path = self.undecided_path(H)
                if path is None or self.shard_after(path) is None:
                    continue
                for h in path:
                    self.append(h)
                del self.pending_decides[digest]
                progressed = True
                if qc.view >= self.view:
                    self.failures = 0
                    self.enter_view(qc.view + 1, now, by_decide=True)

    def append(self, h: Header) -> None:
        slot = self.slots[h.digest]
        lay = self.st.layout(self.st.T_for(h.height))
        self.shard = append_records(self.shard, slot.filtered, lay)
        self.chain.append(h)
        self.appended.append((h.height, h.digest, slot.g.copy(), slot.filtered.copy()))
        self.env.on_append(self, h)

    # leader: new view

    def on_new_view(self, m: Msg, now: float) -> None:
        if self.leader(m.view + 1) != self.id or not self.qc_valid(m.qc):
            return
        if m.qc.type not in ("pre-commit", "genesis"):
            return
        self.learn(m.qc.header)
        if m.payload is not None:
            self.apply_commit(m.qc, m.payload, now)
        self.new_views[m.view][m.sender] = (m.qc, m.payload)
        if self.view == m.view + 1 and len(self.new_views[m.view]) >= self.N - self.st.f:
            self.propose(self.view, now)
