"""Model grid rendering to a plain binary pixmap (PPM, P6).

The color ramp is a fixed three-anchor linear blend, dark blue (low) over
white to dark red (high): t in [0, 1] maps to

    t <= 0.5:  (0, 0, 128)   -> (255, 255, 255)   at 2t
    t >  0.5:  (255, 255, 255)-> (128, 0, 0)       at 2t - 1

with channels rounded to the nearest integer.  Grid minimum and maximum
map to the ramp endpoints; a constant grid renders at the midpoint.
"""

from __future__ import annotations

import numpy as np

from .trace import load_grid

_LOW = np.array([0.0, 0.0, 128.0])
_MID = np.array([255.0, 255.0, 255.0])
_HIGH = np.array([128.0, 0.0, 0.0])


def ramp_color(t: float) -> tuple[int, int, int]:
    """Exact ramp arithmetic for one normalized value."""
    t = min(max(float(t), 0.0), 1.0)
    if t <= 0.5:
        rgb = _LOW + (2.0 * t) * (_MID - _LOW)
    else:
        rgb = _MID + (2.0 * t - 1.0) * (_HIGH - _MID)
    return tuple(int(v) for v in np.rint(rgb))


def _ramp_image(norm: np.ndarray) -> np.ndarray:
    t = np.clip(norm, 0.0, 1.0)
    low = t <= 0.5
    rgb = np.empty(t.shape + (3,))
    rgb[low] = _LOW + (2.0 * t[low, None]) * (_MID - _LOW)
    rgb[~low] = _MID + (2.0 * t[~low, None] - 1.0) * (_HIGH - _MID)
    return np.rint(rgb).astype(np.uint8)


def render_grid(grid_path, out_path, vmin: float | None = None,
                vmax: float | None = None, upscale: int = 1,
                pad_x: int = 0, pad_z: int = 0) -> None:
    """Write a P6 pixmap of a model grid file.

    One pixel per cell before ``upscale`` (integer replication).  When the
    padding cell counts are given, the core region is outlined with a
    1-pixel black frame drawn just inside its boundary.
    """
    values, nx, nz = load_grid(grid_path)
    if upscale < 1:
        raise ValueError("upscale must be >= 1")
    grid = values.reshape(nz, nx)
    lo = float(grid.min()) if vmin is None else float(vmin)
    hi = float(grid.max()) if vmax is None else float(vmax)
    if hi > lo:
        norm = (grid - lo) / (hi - lo)
    else:
        norm = np.full(grid.shape, 0.5)
    img = _ramp_image(norm)

    if pad_x or pad_z:
        r0, r1 = 0, nz - pad_z - 1
        c0, c1 = pad_x, nx - pad_x - 1
        if not (0 <= r0 <= r1 < nz and 0 <= c0 <= c1 < nx):
            raise ValueError("padding counts exceed the grid")
        img[r0, c0:c1 + 1] = 0
        img[r1, c0:c1 + 1] = 0
        img[r0:r1 + 1, c0] = 0
        img[r0:r1 + 1, c1] = 0

    if upscale > 1:
        img = np.repeat(np.repeat(img, upscale, axis=0), upscale, axis=1)

    h, w = img.shape[:2]
    with open(out_path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())


def read_ppm(path):
    """Parse a binary P6 pixmap back into an (h, w, 3) uint8 array."""
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a P6 pixmap")
    w, h = (int(t) for t in parts[1].split())
    if parts[2] != b"255":
        raise ValueError("expected 8-bit channels")
    pixels = np.frombuffer(parts[3], dtype=np.uint8, count=h * w * 3)
    return pixels.reshape(h, w, 3)
