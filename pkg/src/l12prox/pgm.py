"""Minimal PGM (P2 ASCII and P5 binary) reader and writer.

Pixel values are scaled to ``[0, 1]`` by the file's maxval on load and
quantized back on save, so read, write and read again is lossless.
"""

from __future__ import annotations

import numpy as np

__all__ = ["read_pgm", "write_pgm"]


def _tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def read_pgm(path) -> np.ndarray:
    """Load a PGM file as a float array in ``[0, 1]`` of shape (rows, cols)."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    (w, h, maxval), pos = _tokens(data, 3, 2)
    w, h, maxval = int(w), int(h), int(maxval)
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise ValueError(f"{path}: bad PGM header")
    if magic == b"P5":
        pos += 1  # single whitespace byte before the raster
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raster = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
    else:
        text = b" ".join(line.split(b"#")[0] for line in data[pos:].splitlines())
        raster = np.array(text.split()[: w * h], dtype=np.int64)
    if raster.size != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {raster.size}")
    img = raster.reshape(h, w).astype(float)
    if img.max() > maxval:
        raise ValueError(f"{path}: pixel value exceeds maxval")
    return img / maxval


def write_pgm(path, img, binary: bool = True, maxval: int = 255):
    """Save an array with values in ``[0, 1]`` (clipped) as PGM."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be 2-d")
    if not 0 < maxval < 65536:
        raise ValueError("maxval must lie in [1, 65535]")
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"{'P5' if binary else 'P2'}\n{w} {h}\n{maxval}\n".encode())
        if binary:
            dtype = ">u2" if maxval > 255 else "u1"
            fh.write(q.astype(dtype).tobytes())
        else:
            for row in q:
                fh.write((" ".join(map(str, row)) + "\n").encode())
