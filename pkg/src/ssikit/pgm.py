"""Read and write 8- and 16-bit greyscale PGM (P2 ASCII and P5 binary)."""

import re

import numpy as np

from ._io import atomic_write
from .errors import ValidationError


def _tokens(data, count, pos):
    """Pull ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise ValidationError("truncated PGM header")
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        out.append(data[start:pos])
    return out, pos


def read_pgm(path):
    """
    Load a PGM file.

    Returns ``(pixels, maxval)`` where ``pixels`` is a ``(height, width)``
    array of ``uint8`` (maxval < 256) or ``uint16``.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ValidationError(f"{path}: not a greyscale PGM (magic {magic!r})")
    try:
        (w, h, m), pos = _tokens(data, 3, 2)
        width, height, maxval = int(w), int(h), int(m)
    except ValueError:
        raise ValidationError(f"{path}: malformed PGM header") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise ValidationError(f"{path}: bad PGM dimensions or maxval")
    dtype = np.uint8 if maxval < 256 else np.uint16
    count = width * height

    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        pos += 1
        wire = np.dtype(dtype).newbyteorder(">")
        if len(data) - pos != count * wire.itemsize:
            raise ValidationError(f"{path}: expected {count * wire.itemsize} raster bytes, got {len(data) - pos}")
        raw = np.frombuffer(data, dtype=wire, offset=pos)
        pixels = raw.astype(dtype)
    else:
        body = re.sub(rb"#[^\r\n]*", b"", data[pos:]).split()
        if len(body) != count:
            raise ValidationError(f"{path}: expected {count} samples, got {len(body)}")
        try:
            pixels = np.array([int(t) for t in body], dtype=np.int64)
        except ValueError:
            raise ValidationError(f"{path}: non-integer sample") from None

    if pixels.max(initial=0) > maxval:
        raise ValidationError(f"{path}: sample exceeds maxval {maxval}")
    return pixels.astype(dtype).reshape(height, width), maxval


def write_pgm(path, pixels, maxval=None, binary=True):
    """Write a 2-D non-negative integer array as PGM; maxval >= 256 selects 16-bit samples."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValidationError("PGM data must be 2-D")
    if pixels.size and pixels.min() < 0:
        raise ValidationError("PGM samples must be non-negative")
    if maxval is None:
        maxval = 255 if pixels.max(initial=0) < 256 else 65535
    if pixels.max(initial=0) > maxval or maxval > 65535:
        raise ValidationError("samples exceed maxval or maxval exceeds 65535")
    height, width = pixels.shape
    header = f"{'P5' if binary else 'P2'}\n{width} {height}\n{maxval}\n".encode("ascii")
    with atomic_write(path, "wb") as fh:
        fh.write(header)
        if binary:
            dtype = ">u1" if maxval < 256 else ">u2"
            fh.write(pixels.astype(dtype).tobytes())
        else:
            for row in pixels:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode("ascii"))
