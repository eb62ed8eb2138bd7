"""Pluggable policy servers with deterministic latency injection."""

from .latency import LatencyProfile, LatencySampler
from .policies import (
    OraclePolicy,
    RandomPolicy,
    ReplayPolicy,
    ZerosPolicy,
    make_policy_factory,
)
from .server import PolicyServer

__all__ = [
    "LatencyProfile",
    "LatencySampler",
    "OraclePolicy",
    "RandomPolicy",
    "ReplayPolicy",
    "ZerosPolicy",
    "make_policy_factory",
    "PolicyServer",
]
