"""Coded state machine replication for sharded ledgers.

Nodes store Lagrange-coded combinations of all community shards, verify
coded transactions with a polynomial verification function, and agree on
blocks and validity indicators through a four-phase BFT protocol.
"""

from .field import PrimeField, FieldError
from .coding import EvalPoints, build_generator, encode_vector, rs_decode, DecodeError
from .ledger import Block, Shard, TxLayout, assemble_block, strip
from .crypto import Keyring, checksum, agree
from .setting import Setting
from .netsim import Scenario, run_scenario, verify_oracle, meter, ConfigError, SafetyViolation

__all__ = [
    "PrimeField", "FieldError", "EvalPoints", "build_generator", "encode_vector", "rs_decode",
    "DecodeError", "Block", "Shard", "TxLayout", "assemble_block", "strip", "Keyring",
    "checksum", "agree", "Setting", "Scenario", "run_scenario", "verify_oracle", "meter",
    "ConfigError", "SafetyViolation",
]
