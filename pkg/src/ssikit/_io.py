"""Small file helpers: atomic writes, stable number formatting, checksums."""

import hashlib
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path


def fmt(x):
    """Format a number with 6 significant digits.

    Integers are written as integers; ``nan`` is written as an empty field.
    """
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if x != x:
        return ""
    if x == 0.0:
        # avoid "-0"
        return "0"
    return f"{x:.6g}"


@contextmanager
def atomic_write(path, mode="w", newline=None):
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        if "b" in mode:
            fh = os.fdopen(fd, mode)
        else:
            fh = os.fdopen(fd, mode, encoding="utf-8", newline=newline)
        with fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
