"""Heatmaps as binary PPM (P6) images.

Colormap: blue-white-red, linear in each half. A value ``v`` normalised to
``[-1, 1]`` by the symmetric range ``[-vmax, vmax]`` maps to
``(255(1+v), 255(1+v), 255)`` for ``v < 0`` and ``(255, 255(1-v), 255(1-v))``
for ``v >= 0``, rounded half-to-even. Negating ``v`` swaps red and blue.
Row 0 of the image is the northern edge (largest ``iy``). With the automatic
range (largest magnitude) a spatially constant field carries no pattern and is
drawn in the mid colour (white).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from qgrom.errors import ShapeError


def colorize(field: np.ndarray, vmax: float | None = None) -> np.ndarray:
    """RGB ``uint8`` array ``(ny, nx, 3)`` in image orientation."""
    f = np.asarray(field, dtype=float)
    if f.ndim != 2:
        raise ShapeError(f"expected a 2-D field, got shape {f.shape}")
    if vmax is None:
        flat = f.size == 0 or np.ptp(f) == 0
        vmax = 0.0 if flat else float(np.max(np.abs(f)))
    v = np.zeros_like(f) if vmax <= 0 else np.clip(f / vmax, -1.0, 1.0)
    v = np.nan_to_num(v)
    fade = np.rint(255.0 * (1.0 - np.abs(v)))
    rgb = np.empty(f.shape + (3,))
    neg = v < 0
    rgb[..., 0] = np.where(neg, fade, 255.0)
    rgb[..., 1] = fade
    rgb[..., 2] = np.where(neg, 255.0, fade)
    return rgb[::-1].astype(np.uint8)


def encode_ppm(rgb: np.ndarray) -> bytes:
    ny, nx, _ = rgb.shape
    return b"P6\n%d %d\n255\n" % (nx, ny) + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    nx, ny = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(ny, nx, 3)


def render_field(path, field: np.ndarray, vmax: float | None = None, scale: int = 1) -> Path:
    rgb = colorize(field, vmax)
    if scale > 1:
        rgb = rgb.repeat(scale, axis=0).repeat(scale, axis=1)
    path = Path(path)
    path.write_bytes(encode_ppm(rgb))
    return path


def render_panels(path, rows, vmaxes=None, gap: int = 2, scale: int = 1) -> Path:
    """Grid of heatmaps; ``rows`` is a list of rows of equally shaped fields.

    Each row shares one symmetric colour range (largest magnitude in the row
    unless ``vmaxes`` gives it), separated by ``gap`` white pixels.
    """
    images = []
    for r, row in enumerate(rows):
        vmax = None if vmaxes is None else vmaxes[r]
        if vmax is None:
            vmax = max(float(np.max(np.abs(f))) for f in row)
        images.append([colorize(f, vmax) for f in row])
    ny, nx, _ = images[0][0].shape
    ncols = max(len(r) for r in images)
    H = len(images) * ny + (len(images) - 1) * gap
    W = ncols * nx + (ncols - 1) * gap
    canvas = np.full((H, W, 3), 255, dtype=np.uint8)
    for r, row in enumerate(images):
        for c, img in enumerate(row):
            y0, x0 = r * (ny + gap), c * (nx + gap)
            canvas[y0:y0 + ny, x0:x0 + nx] = img
    if scale > 1:
        canvas = canvas.repeat(scale, axis=0).repeat(scale, axis=1)
    path = Path(path)
    path.write_bytes(encode_ppm(canvas))
    return path
