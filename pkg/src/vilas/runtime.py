"""In-process wiring of the full stack on ephemeral ports.

Used by the evaluation harness and tests: device services and a policy
server share one clock (real or virtual) inside a single process while still
talking over real TCP/WebSocket sockets, so accelerated runs exercise the
same wire paths as live ones.
"""

from __future__ import annotations

from .clock import Clock, SystemClock
from .config import SystemConfig
from .devices import DeviceHub
from .policyd import LatencyProfile, PolicyServer, make_policy_factory

__all__ = ["Stack"]


class Stack:
    """Device hub plus (optionally) a policy server, torn down together."""

    def __init__(self, cfg: SystemConfig | None = None,
                 clock: Clock | None = None, seed: int = 0,
                 policy_kind: str | None = None, horizon: int = 50,
                 protocols=("mq", "ws"),
                 latency: LatencyProfile | None = None,
                 control_rate_hz: float = 20.0,
                 ephemeral_ports: bool = True):
        self.cfg = (cfg or SystemConfig()).validate()
        self.clock = clock or SystemClock()
        ports = (0, 0, 0) if ephemeral_ports else None
        self.hub = DeviceHub(self.cfg, clock=self.clock, seed=seed, ports=ports)
        self.policy: PolicyServer | None = None
        if policy_kind is not None:
            factory = make_policy_factory(
                policy_kind, horizon, self.cfg, seed=seed,
                debug_addr=self.arm_addr, clock=self.clock,
                control_rate_hz=control_rate_hz)
            mq_port = 0 if ephemeral_ports else self.cfg.ports.policy_mq
            self.policy = PolicyServer(
                factory, horizon, protocols=protocols,
                latency=latency, clock=self.clock, mq_port=mq_port)

    @property
    def arm_addr(self) -> str:
        return self.hub.addr("arm")

    @property
    def grip_addr(self) -> str:
        return self.hub.addr("gripper")

    @property
    def camera_addr(self) -> str:
        return self.hub.addr("camera")

    def policy_addr(self, protocol: str) -> str:
        if self.policy is None:
            raise RuntimeError("stack was built without a policy server")
        return self.policy.addr(protocol)

    def reset_world(self, seed: int, n_objects: int | None = None) -> None:
        self.hub.handle.reset(seed, n_objects=n_objects)

    def close(self) -> None:
        if self.policy is not None:
            self.policy.close()
        self.hub.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
