"""FBLAB1 field snapshots.

Layout: one ASCII header line

    FBLAB1 n m h nx,ny[,nz] origin_1 ... origin_n

followed by ``m`` row-major blocks of little-endian float64, one per
component, concatenated.
"""

import hashlib
from pathlib import Path

import numpy as np

from .grid import GridSpec, VectorField

MAGIC = "FBLAB1"


class MalformedSnapshot(ValueError):
    pass


def header_line(spec):
    shape = ",".join(str(s) for s in spec.shape)
    origin = " ".join(repr(float(v)) for v in spec.lo)
    return f"{MAGIC} {spec.dim_n} {spec.dim_m} {spec.h!r} {shape} {origin}\n"


def to_bytes(U):
    body = np.ascontiguousarray(U.data, dtype="<f8").tobytes(order="C")
    return header_line(U.spec).encode("ascii") + body


def from_bytes(raw):
    nl = raw.find(b"\n")
    if nl < 0:
        raise MalformedSnapshot("malformed snapshot: missing header line")
    try:
        parts = raw[:nl].decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise MalformedSnapshot("malformed snapshot: non-ascii header") from exc
    if len(parts) < 5 or parts[0] != MAGIC:
        raise MalformedSnapshot("malformed snapshot: bad magic or header")
    try:
        n, m = int(parts[1]), int(parts[2])
        h = float(parts[3])
        shape = tuple(int(s) for s in parts[4].split(","))
        origin = tuple(float(v) for v in parts[5:])
    except ValueError as exc:
        raise MalformedSnapshot(f"malformed snapshot: {exc}") from exc
    if len(shape) != n or len(origin) != n:
        raise MalformedSnapshot("malformed snapshot: dimension mismatch in header")
    try:
        spec = GridSpec(n, m, h, origin, shape)
    except ValueError as exc:
        raise MalformedSnapshot(f"malformed snapshot: {exc}") from exc
    body = raw[nl + 1:]
    expected = 8 * m * spec.num_nodes
    if len(body) != expected:
        raise MalformedSnapshot(
            f"malformed snapshot: expected {expected} data bytes, got {len(body)}"
        )
    data = np.frombuffer(body, dtype="<f8").reshape((m,) + shape).astype(float)
    return VectorField(spec, data)


def write_snapshot(path, U):
    Path(path).write_bytes(to_bytes(U))


def read_snapshot(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise MalformedSnapshot(f"malformed snapshot: {exc}") from exc
    return from_bytes(raw)


def snapshot_hash(U):
    return hashlib.sha256(to_bytes(U)).hexdigest()
