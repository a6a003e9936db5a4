"""Serialization helpers: matrix JSON, CSV tables, atomic writes and digests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .policy import InvalidArgument


def matrix_to_json(M) -> dict:
    """``{n, re, im}`` with row-major flattened real and imaginary parts."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgument(f"expected a square matrix, got shape {M.shape}")
    return {"n": int(M.shape[0]), "re": M.real.ravel().tolist(), "im": M.imag.ravel().tolist()}


def matrix_from_json(data: dict) -> np.ndarray:
    try:
        n = int(data["n"])
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data.get("im", np.zeros(n * n)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"malformed matrix record: {exc}") from None
    if re.size != n * n or im.size != n * n:
        raise InvalidArgument(f"matrix record needs {n * n} entries per part")
    return (re + 1j * im).reshape(n, n)


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def format_float(x) -> str:
    # repr round-trips exactly and is platform independent
    return repr(float(x))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else format_float(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write_text(path, csv_text(header, rows))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        r = list(csv.reader(fh))
    return r[0], r[1:]


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_digest(path) -> str:
    return digest_bytes(Path(path).read_bytes())


def json_digest(obj) -> str:
    """Content hash of a JSON-serializable object (canonical key order)."""
    return digest_bytes(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode())


def child_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for one work item, keyed by ``(seed, *keys)`` and independent of scheduling."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, keys)]))
