"""Command-line entry points.

Service addresses default to the standard ports and honor the VILAS_*_ADDR
environment variables; explicit flags win over both.
"""

from __future__ import annotations

import functools
import http.server
import json
import logging
import sys
import threading
from pathlib import Path

import click

from .broker import BrokerConfig, DeployLoop
from .config import SystemConfig, load_config
from .devices import DeviceHub
from .evalharness import (
    RunResult,
    TrialConfig,
    latency_stats,
    run_trials,
    success_rates,
    write_report,
)
from .policyd import LatencyProfile, PolicyServer, make_policy_factory
from .recorder import RecordSession, TapClient, export
from .runtime import Stack
from .teleop import (
    BridgeServer,
    BridgeSource,
    LeaderCalibration,
    ReplaySource,
    ScriptedSource,
    TeleopLoop,
)

log = logging.getLogger(__name__)

_ARM = click.option("--arm", envvar="VILAS_ARM_ADDR",
                    default="127.0.0.1:5601", show_default=True)
_GRIP = click.option("--gripper", envvar="VILAS_GRIPPER_ADDR",
                     default="127.0.0.1:5602", show_default=True)
_CAM = click.option("--camera", envvar="VILAS_CAM_ADDR",
                    default="127.0.0.1:5605", show_default=True)
_CONFIG = click.option("--config", "config_path", type=click.Path(exists=True),
                       default=None, help="JSON system config file.")


def _cfg(config_path) -> SystemConfig:
    return load_config(config_path)


def _check_horizon(ctx, param, value):
    if value not in (16, 50):
        raise click.BadParameter("horizon must be 50 or 16")
    return value



@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose: bool):
    """Simulated manipulation stack: devices, teleop, recording, deployment."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")


@main.command()
@_CONFIG
@click.option("--seed", default=0, show_default=True)
def devices(config_path, seed):
    """Start the arm, gripper, and camera services."""
    cfg = _cfg(config_path)
    hub = DeviceHub(cfg, seed=seed)
    click.echo(f"device services up: arm={hub.addr('arm')} "
               f"gripper={hub.addr('gripper')} camera={hub.addr('camera')}")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        hub.close()


@main.command()
@click.option("--source", required=True,
              help="scripted:<file> | bridge | replay:<episode>")
@click.option("--rate", default=83.3, show_default=True)
@_ARM
@_GRIP
@_CAM
@click.option("--calib", "calib_path", type=click.Path(exists=True), default=None)
@click.option("--duration", type=float, default=None, help="Seconds to run.")
@click.option("--tap-port", default=5606, show_default=True,
              help="Action-tap service port (0 disables).")
@click.option("--bridge-port", envvar="VILAS_BRIDGE_ADDR", default="5604",
              show_default=True, help="Bridge WebSocket port (bridge source).")
@click.option("--records-dir", default="episodes", show_default=True)
@_CONFIG
def teleop(source, rate, arm, gripper, camera, calib_path, duration,
           tap_port, bridge_port, records_dir, config_path):
    """Forward a leader source to the arm and gripper at 83.3 Hz."""
    cfg = _cfg(config_path)
    calib = (LeaderCalibration.from_file(calib_path)
             if calib_path else LeaderCalibration.identity())
    bridge = None
    if source == "bridge":
        src = BridgeSource()
    elif source.startswith("scripted:"):
        src = ScriptedSource.from_file(source.split(":", 1)[1])
    elif source.startswith("replay:"):
        src = ReplaySource.from_episode(source.split(":", 1)[1])
    else:
        raise click.BadParameter(f"unknown source {source!r}")

    loop = TeleopLoop(
        source=src, calibration=calib, arm_addr=arm, grip_addr=gripper,
        cfg=cfg, rate_hz=rate, duration_s=duration,
        tap_port=tap_port if tap_port else None)
    if source == "bridge":
        port = int(bridge_port.rsplit(":", 1)[-1])
        bridge = BridgeServer(
            src, loop.action_tap, cfg, arm_addr=arm, camera_addr=camera,
            records_dir=records_dir, port=port)
        click.echo(f"bridge listening on ws://127.0.0.1:{bridge.port}")
    try:
        stats = loop.run()
    except KeyboardInterrupt:
        loop.stop()
        stats = loop.stats
    finally:
        if bridge is not None:
            bridge.close()
    click.echo(json.dumps(stats.as_dict(), indent=2))


@main.command()
@click.option("--prompt", required=True)
@click.option("--rate", default=30.0, show_default=True)
@click.option("--max-frames", default=1200, show_default=True)
@click.option("--out", "out_dir", default="episodes", show_default=True)
@_CAM
@click.option("--tap", envvar="VILAS_TAP_ADDR", default="127.0.0.1:5606",
              show_default=True, help="Teleop action-tap address.")
@click.option("--duration", type=float, default=None,
              help="Stop after this many seconds (default: max-frames).")
def record(prompt, rate, max_frames, out_dir, camera, tap, duration):
    """Record a synchronized episode from a running teleop session."""
    from .clock import SystemClock
    tap_client = TapClient(tap, SystemClock())
    session = RecordSession(camera, tap_client, prompt, out_dir,
                            rate_hz=rate, max_frames=max_frames)
    if duration is not None:
        threading.Timer(duration, session.stop).start()
    try:
        path = session.run()
    except KeyboardInterrupt:
        session.stop()
        path = session.result_path
    finally:
        tap_client.close()
    complete = (path is not None and not session.truncated)
    click.echo(f"episode: {path} frames={session.frames_captured} "
               f"truncated={session.truncated}")
    sys.exit(0 if complete else 1)


@main.command()
@click.argument("episodes", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--schema", type=click.Choice(["canonical", "table"]),
              default="canonical", show_default=True)
@click.option("--out", "out_dir", required=True)
@click.option("--allow-mixed", is_flag=True)
def export_cmd(episodes, schema, out_dir, allow_mixed):
    """Export episodes to a dataset directory."""
    path = export(episodes, out_dir, schema=schema, allow_mixed=allow_mixed)
    click.echo(f"exported {len(episodes)} episode(s) to {path}")


@main.command()
@click.option("--protocol", type=click.Choice(["ws", "mq"]), default="ws",
              show_default=True)
@click.option("--policy", envvar="VILAS_POLICY_ADDR", required=True,
              help="Policy server address.")
@click.option("--horizon", type=int, default=50, show_default=True,
              callback=_check_horizon, help="Action-chunk horizon: 50 or 16.")
@click.option("--rate", default=20.0, show_default=True)
@click.option("--prompt", default="", show_default=True)
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="Run-log JSONL file.")
@click.option("--duration", type=float, default=None)
@_ARM
@_GRIP
@_CAM
def deploy(protocol, policy, horizon, rate, prompt, log_path, duration,
           arm, gripper, camera):
    """Run the 20 Hz deployment loop against a policy server."""
    broker = DeployLoop(
        BrokerConfig(policy_addr=policy, protocol=protocol, horizon=horizon,
                     control_rate_hz=rate, prompt=prompt),
        arm_addr=arm, grip_addr=gripper, camera_addr=camera,
        log_path=log_path)
    try:
        run_log = broker.run(duration_s=duration)
    except KeyboardInterrupt:
        broker.stop()
        run_log = broker.run_log
    lats = run_log.inference_latencies()
    click.echo(f"ticks={len(run_log.ticks())} inference_calls={len(lats)}")
    if lats:
        stats = latency_stats(lats, horizon)
        click.echo(json.dumps(stats.as_dict(), indent=2))


@main.command()
@click.option("--kind", required=True,
              help="oracle | replay:<episode> | random | zeros")
@click.option("--horizon", type=int, default=50, show_default=True,
              callback=_check_horizon, help="Action-chunk horizon: 50 or 16.")
@click.option("--protocols", default="ws,mq", show_default=True)
@click.option("--latency-mean", default=0.0, show_default=True)
@click.option("--latency-std", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--mq-port", default=5603, show_default=True)
@click.option("--ws-port", default=5610, show_default=True)
@click.option("--debug-addr", envvar="VILAS_ARM_ADDR",
              default="127.0.0.1:5601", show_default=True,
              help="Privileged world endpoint (oracle only).")
@_CONFIG
def policyd(kind, horizon, protocols, latency_mean, latency_std, seed,
            mq_port, ws_port, debug_addr, config_path):
    """Serve a mock policy over ws and/or mq with injected latency."""
    cfg = _cfg(config_path)
    protos = tuple(p.strip() for p in protocols.split(",") if p.strip())
    factory = make_policy_factory(kind, horizon, cfg, seed=seed,
                                  debug_addr=debug_addr)
    profile = LatencyProfile(mean_ms=latency_mean, std_ms=latency_std,
                             seed=seed)
    server = PolicyServer(factory, horizon, protocols=protos,
                          latency=profile, mq_port=mq_port, ws_port=ws_port)
    parts = []
    if server.mq_addr:
        parts.append(f"mq={server.mq_addr}")
    if server.ws_addr:
        parts.append(f"ws={server.ws_addr}")
    click.echo(f"policy server ({kind}, H={horizon}) up: {', '.join(parts)}")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        server.close()


@main.command(name="eval")
@click.option("--policy-kind", default="oracle", show_default=True,
              help="oracle | random | zeros | replay:<episode>")
@click.option("--trials", default=50, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--protocol", type=click.Choice(["ws", "mq"]), default="ws",
              show_default=True)
@click.option("--horizon", type=int, default=50, show_default=True,
              callback=_check_horizon, help="Action-chunk horizon: 50 or 16.")
@click.option("--out", "out_dir", default="report", show_default=True)
@click.option("--clock", "clock_kind", type=click.Choice(["real", "virtual"]),
              default="virtual", show_default=True)
@click.option("--latency-mean", default=0.0, show_default=True)
@click.option("--latency-std", default=0.0, show_default=True)
@click.option("--object", "object_kind",
              type=click.Choice(["grape", "cherry"]), default="grape",
              show_default=True)
@click.option("--multi-any2", is_flag=True,
              help="Also report the any-two-of-three multi rate.")
@click.option("--parallel", default=1, show_default=True)
@click.option("--prompt", default=None)
@_CONFIG
def eval_cmd(policy_kind, trials, seed, protocol, horizon, out_dir,
             clock_kind, latency_mean, latency_std, object_kind,
             multi_any2, parallel, prompt, config_path):
    """Run the trial protocol and write a report."""
    cfg = _cfg(config_path)
    trial_cfg = TrialConfig(
        policy_kind=policy_kind, protocol=protocol, horizon=horizon,
        n_trials=trials, base_seed=seed, clock_kind=clock_kind,
        latency=LatencyProfile(mean_ms=latency_mean, std_ms=latency_std,
                               seed=seed),
        object_kind=object_kind, parallel=parallel)
    if prompt is not None:
        trial_cfg.prompt = prompt
    records, lats = run_trials(trial_cfg, cfg)
    rates = success_rates(records)
    name = f"{policy_kind}-{protocol}-H{horizon}"
    stats = latency_stats(lats, horizon) if lats else None
    results = [RunResult(name=name, stats=stats, rates=rates, records=records)]
    if multi_any2:
        any2 = success_rates(records, multi_rule="any2")
        results.append(RunResult(name=f"{name}-any2", stats=None, rates=any2))
    path = write_report(results, out_dir,
                        latency_samples={name: lats} if lats else None)
    click.echo((path / "report.txt").read_text())
    click.echo(f"report written to {path}")


@main.command()
@click.argument("runlog", type=click.Path(exists=True))
@click.option("--horizon", type=int, required=True)
def stats(runlog, horizon):
    """Latency statistics for a deploy run log (JSON lines)."""
    lats = []
    with open(runlog, encoding="utf-8") as fh:
        for line in fh:
            event = json.loads(line)
            if event.get("event") == "inference":
                lats.append(event["latency_ms"])
    if not lats:
        raise click.ClickException("run log holds no inference events")
    click.echo(json.dumps(latency_stats(lats, horizon).as_dict(), indent=2))


@main.command()
@click.option("--port", default=8080, show_default=True)
@click.option("--bridge", default="ws://127.0.0.1:5604", show_default=True)
@click.option("--dir", "app_dir", type=click.Path(), default=None,
              help="Console static build directory.")
@click.option("--standalone", is_flag=True,
              help="Also start devices + bridge teleop in this process.")
@_CONFIG
def console(port, bridge, app_dir, standalone, config_path):
    """Serve the browser operator console."""
    cfg = _cfg(config_path)
    if app_dir is None:
        app_dir = Path(__file__).resolve().parents[2] / "console" / "public"
    app_dir = Path(app_dir)
    if not app_dir.is_dir():
        raise click.ClickException(
            f"console build not found at {app_dir}; run `npm run build` "
            "in console/ or pass --dir")

    stack = None
    loop = None
    bridge_srv = None
    if standalone:
        stack = Stack(cfg=cfg, ephemeral_ports=False)
        src = BridgeSource()
        loop = TeleopLoop(
            source=src, calibration=LeaderCalibration.identity(),
            arm_addr=stack.arm_addr, grip_addr=stack.grip_addr, cfg=cfg,
            tap_port=cfg.ports.teleop_tap)
        bridge_srv = BridgeServer(
            src, loop.action_tap, cfg, arm_addr=stack.arm_addr,
            camera_addr=stack.camera_addr, records_dir="episodes",
            port=cfg.ports.bridge)
        threading.Thread(target=loop.run, daemon=True).start()
        bridge = f"ws://127.0.0.1:{bridge_srv.port}"

    handler = functools.partial(
        http.server.SimpleHTTPRequestHandler, directory=str(app_dir))
    httpd = http.server.ThreadingHTTPServer(("127.0.0.1", port), handler)
    from urllib.parse import quote
    click.echo(f"console: http://127.0.0.1:{port}/?bridge={quote(bridge)}")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.shutdown()
        if loop is not None:
            loop.stop()
        if bridge_srv is not None:
            bridge_srv.close()
        if stack is not None:
            stack.close()


if __name__ == "__main__":
    main()
