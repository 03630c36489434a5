"""16-bit grayscale image output (PGM always, PNG when Pillow is available)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..fields import SampledField

__all__ = ["normalized_intensity", "emit_image", "read_pgm"]


def normalized_intensity(data) -> tuple:
    """Intensity scaled to its peak; returns ``(image, peak)``. A zero image stays zero."""
    if isinstance(data, SampledField):
        data = data.intensity
    data = np.asarray(data)
    if np.iscomplexobj(data):
        data = np.abs(data) ** 2
    data = np.asarray(data, dtype=float)
    if not np.all(np.isfinite(data)):
        raise ValueError("image data must be finite")
    peak = float(data.max()) if data.size else 0.0
    if peak <= 0.0:
        return np.zeros_like(data), 0.0
    return data / peak, peak


def emit_image(data, path, fmt: str = "pgm") -> dict:
    """Write peak-normalized intensity; return the normalization record for the manifest.

    ``data`` may be a :class:`SampledField`, a complex amplitude array, or a
    real intensity map. Rows are written top to bottom in array order.
    """
    image, peak = normalized_intensity(data)
    levels = np.round(np.clip(image, 0.0, 1.0) * 65535.0).astype(">u2")
    path = Path(path)
    try:
        if fmt == "pgm":
            h, w = levels.shape
            with open(path, "wb") as fh:
                fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
                fh.write(levels.tobytes())
        elif fmt == "png":
            from PIL import Image

            Image.fromarray(levels.astype(np.uint16)).save(path)
        else:
            raise ValueError(f"unsupported image format {fmt!r}")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write image {path}: {exc.strerror}") from exc
    return {"path": str(path), "format": fmt, "normalization": "peak", "peak": peak, "degenerate": peak == 0.0}


def read_pgm(path) -> np.ndarray:
    """Read back a binary 16-bit PGM written by :func:`emit_image`."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    maxval = int(parts[2])
    return np.frombuffer(parts[3], dtype=">u2" if maxval > 255 else "u1").reshape(h, w)
