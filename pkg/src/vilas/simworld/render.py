"""Synthetic dual-camera renderer.

Base camera: top-down orthographic view covering exactly the workspace
rectangle at 640x480, so one pixel spans ``workspace_width / 640`` meters
horizontally (square pixels by construction: 0.40/640 == 0.30/480). Pixel
``(row, col)`` has its center at world

    x = x0 + (col + 0.5) * mpp
    y = y1 - (row + 0.5) * mpp

Wrist camera: same projection, but the view window is 0.10 x 0.075 m
centered on the TCP. Objects are filled discs colored by status; the TCP is
a black ring. Rendering is a pure function of the world snapshot.
"""

from __future__ import annotations

import io

import cv2
import numpy as np
from PIL import Image

from ..config import OBJECT_PRESETS, CameraConfig, SystemConfig
from .world import DEPOSITED, DROPPED, FREE, HELD, WorldState

__all__ = [
    "COLORS",
    "render",
    "resize_to_policy",
    "png_encode",
    "png_decode",
    "base_view_rect",
    "wrist_view_rect",
]

COLORS = {
    "background": (214, 214, 214),
    "box": (168, 127, 86),
    HELD: (240, 150, 40),
    DEPOSITED: (60, 110, 220),
    DROPPED: (200, 40, 40),
    "tcp": (0, 0, 0),
}

TCP_RING_RADIUS = 0.008  # meters
TCP_RING_WIDTH = 0.002


def base_view_rect(cfg: SystemConfig):
    return cfg.scene.workspace


def wrist_view_rect(cfg: SystemConfig, world: WorldState):
    w, h = cfg.camera.wrist_window
    cx, cy = float(world.tcp_pos[0]), float(world.tcp_pos[1])
    return ((cx - w / 2, cy - h / 2), (cx + w / 2, cy + h / 2))


def _pixel_axes(x0: float, y1: float, mpp: float, width: int, height: int):
    xs = x0 + (np.arange(width) + 0.5) * mpp
    ys = y1 - (np.arange(height) + 0.5) * mpp
    return xs, ys


def _span(values_start: float, step: float, lo: float, hi: float, n: int):
    """Index range [a, b) of pixel centers lying within [lo, hi]."""
    a = int(np.ceil((lo - values_start) / step))
    b = int(np.floor((hi - values_start) / step)) + 1
    return max(a, 0), min(b, n)


def _fill_rect(img, xs, ys, mpp, rect, color) -> None:
    (rx0, ry0), (rx1, ry1) = rect
    c0, c1 = _span(xs[0], mpp, rx0, rx1, img.shape[1])
    # ys descends row by row; map the y interval to rows via the same grid.
    r0 = int(np.ceil((ys[0] - ry1) / mpp))
    r1 = int(np.floor((ys[0] - ry0) / mpp)) + 1
    r0, r1 = max(r0, 0), min(r1, img.shape[0])
    if r0 < r1 and c0 < c1:
        img[r0:r1, c0:c1] = color


def _fill_disc(img, xs, ys, mpp, cx, cy, radius, color,
               inner_radius: float | None = None) -> None:
    c0, c1 = _span(xs[0], mpp, cx - radius, cx + radius, img.shape[1])
    r0 = int(np.ceil((ys[0] - (cy + radius)) / mpp))
    r1 = int(np.floor((ys[0] - (cy - radius)) / mpp)) + 1
    r0, r1 = max(r0, 0), min(r1, img.shape[0])
    if r0 >= r1 or c0 >= c1:
        return
    dx = xs[c0:c1] - cx
    dy = ys[r0:r1] - cy
    d2 = dy[:, None] ** 2 + dx[None, :] ** 2
    mask = d2 <= radius * radius
    if inner_radius is not None:
        mask &= d2 >= inner_radius * inner_radius
    img[r0:r1, c0:c1][mask] = color


def render(world: WorldState, camera: str, cfg: SystemConfig) -> np.ndarray:
    """Render one camera to a native-resolution RGB array (H, W, 3) uint8."""
    cam = cfg.camera
    if camera == "base":
        rect = base_view_rect(cfg)
    elif camera == "wrist":
        rect = wrist_view_rect(cfg, world)
    else:
        raise ValueError(f"unknown camera {camera!r}")

    (x0, y0), (x1, y1) = rect
    mpp = (x1 - x0) / cam.native_width
    img = np.empty((cam.native_height, cam.native_width, 3), dtype=np.uint8)
    img[:] = COLORS["background"]
    xs, ys = _pixel_axes(x0, y1, mpp, cam.native_width, cam.native_height)

    _fill_rect(img, xs, ys, mpp, world.box_region, COLORS["box"])

    free_color = OBJECT_PRESETS[cfg.scene.object_kind]["color"]
    for obj in world.objects:
        color = free_color if obj.status == FREE else COLORS[obj.status]
        _fill_disc(img, xs, ys, mpp, obj.center[0], obj.center[1],
                   obj.diameter / 2, color)

    _fill_disc(img, xs, ys, mpp, float(world.tcp_pos[0]),
               float(world.tcp_pos[1]), TCP_RING_RADIUS, COLORS["tcp"],
               inner_radius=TCP_RING_RADIUS - TCP_RING_WIDTH)
    return img


def resize_to_policy(img: np.ndarray, cam: CameraConfig) -> np.ndarray:
    """Native -> policy resolution, bilinear with half-pixel centers."""
    return cv2.resize(
        img, (cam.out_width, cam.out_height), interpolation=cv2.INTER_LINEAR
    )


def png_encode(img: np.ndarray) -> bytes:
    # Fixed low compression level: encodes are deterministic and ~4x faster
    # than the default; these synthetic frames compress well regardless.
    buf = io.BytesIO()
    Image.fromarray(img, mode="RGB").save(buf, format="PNG", compress_level=1)
    return buf.getvalue()


def png_decode(data: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))
