import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fblab.grid import GridSpec, VectorField
from fblab.snapshot import (
    MalformedSnapshot,
    from_bytes,
    read_snapshot,
    snapshot_hash,
    to_bytes,
    write_snapshot,
)


@given(st.sampled_from([2, 3]), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_roundtrip_is_bit_exact(n, m, seed):
    spec = GridSpec.unit(n, m, 1 / 4)
    U = VectorField(spec, np.random.default_rng(seed).normal(size=(m,) + spec.shape))
    V = from_bytes(to_bytes(U))
    assert V.spec == U.spec
    assert np.array_equal(V.data, U.data)
    assert snapshot_hash(V) == snapshot_hash(U)


def test_header_layout(tmp_path):
    spec = GridSpec.unit(2, 2, 1 / 8)
    U = VectorField(spec, np.arange(2 * spec.num_nodes, dtype=float).reshape((2,) + spec.shape))
    path = tmp_path / "u.fb"
    write_snapshot(path, U)
    raw = path.read_bytes()
    header, body = raw.split(b"\n", 1)
    parts = header.decode().split()
    assert parts[:5] == ["FBLAB1", "2", "2", "0.125", "25,25"]
    assert float(parts[5]) == spec.lo[0]
    # row-major little-endian, component blocks concatenated
    assert np.array_equal(np.frombuffer(body, "<f8"), np.arange(2 * spec.num_nodes))
    assert np.array_equal(read_snapshot(path).data, U.data)


@pytest.mark.parametrize("raw", [
    b"no newline",
    b"FBLAB2 2 1 0.125 25,25 -1.5 -1.5\n",
    b"FBLAB1 2 x 0.125 25,25 -1.5 -1.5\n",
    b"FBLAB1 2 1 0.125 25 -1.5 -1.5\n",
    b"FBLAB1 2 1 0.125 25,25 -1.5 -1.5\n" + b"\0" * 16,
])
def test_malformed(raw):
    with pytest.raises(MalformedSnapshot, match="malformed snapshot"):
        from_bytes(raw)


def test_missing_file(tmp_path):
    with pytest.raises(MalformedSnapshot):
        read_snapshot(tmp_path / "absent.fb")
