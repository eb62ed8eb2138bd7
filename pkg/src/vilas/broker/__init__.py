"""Deployment-side control: observations, protocol adapters, deploy loop."""

from .adapters import MqAdapter, PolicyTimeout, PolicyTransportError, WsAdapter, make_adapter
from .loop import BrokerConfig, DeployLoop, PolicyUnavailable, RunLog
from .observation import (
    ActionChunk,
    ChunkShapeError,
    Observation,
    ObservationUnavailable,
    chunk_document,
    fetch_observation,
    observation_document,
    observation_payload,
    parse_chunk_document,
)

__all__ = [
    "MqAdapter",
    "PolicyTimeout",
    "PolicyTransportError",
    "WsAdapter",
    "make_adapter",
    "BrokerConfig",
    "DeployLoop",
    "PolicyUnavailable",
    "RunLog",
    "ActionChunk",
    "ChunkShapeError",
    "Observation",
    "ObservationUnavailable",
    "chunk_document",
    "fetch_observation",
    "observation_document",
    "observation_payload",
    "parse_chunk_document",
]
