import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from holoretrieve import pfd
from holoretrieve.field import ComplexField, RealImage


@settings(max_examples=60, deadline=None)
@given(
    h=st.integers(1, 9),
    w=st.integers(1, 9),
    c=st.sampled_from([1, 2]),
    code=st.sampled_from([0, 1]),
    px=st.floats(1e-9, 1.0),
    data=st.data(),
)
def test_bytes_round_trip_bitwise(h, w, c, code, px, data):
    dt = np.dtype("<f4") if code == 0 else np.dtype("<f8")
    samples = data.draw(arrays(dt, (h, w, c), elements=st.floats(width=dt.itemsize * 8, allow_nan=False)))
    raw = pfd.PfdFile(samples, px, code).to_bytes()
    back = pfd.PfdFile.from_bytes(raw)
    assert back.to_bytes() == raw
    assert back.samples.tobytes() == samples.tobytes()
    assert len(raw) == 32 + h * w * c * dt.itemsize


def test_header_layout():
    f = RealImage(np.arange(6.0).reshape(2, 3), 1.5e-6)
    raw = pfd.from_field(f).to_bytes()
    magic, version, w, h, c, code, px = struct.unpack_from("<4sIIIIId", raw)
    assert (magic, version, w, h, c, code, px) == (b"PFD1", 1, 3, 2, 1, 1, 1.5e-6)
    assert np.frombuffer(raw[32:], "<f8").tolist() == [0, 1, 2, 3, 4, 5]


def test_complex_interleaved():
    f = ComplexField(np.array([[1 + 2j, 3 + 4j], [5 + 6j, 7 + 8j]]), 1e-6)
    raw = pfd.from_field(f).to_bytes()
    assert np.frombuffer(raw[32:], "<f8").tolist() == [1, 2, 3, 4, 5, 6, 7, 8]


def test_file_round_trip(tmp_path, rng):
    f = ComplexField(rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7)), 3e-6)
    pfd.save(tmp_path / "a.pfd", f)
    first = (tmp_path / "a.pfd").read_bytes()
    g = pfd.load(tmp_path / "a.pfd")
    assert isinstance(g, ComplexField) and g.pixel_size == 3e-6
    np.testing.assert_array_equal(g.data, f.data)
    pfd.save(tmp_path / "b.pfd", g)
    assert (tmp_path / "b.pfd").read_bytes() == first


@pytest.mark.parametrize(
    "mutate",
    [
        lambda b: b[:20],
        lambda b: b + b"\0",
        lambda b: b[:-1],
        lambda b: b"XXXX" + b[4:],
        lambda b: b[:4] + struct.pack("<I", 9) + b[8:],
        lambda b: b[:20] + struct.pack("<I", 7) + b[24:],
    ],
)
def test_malformed(mutate):
    raw = pfd.from_field(RealImage(np.ones((2, 2)), 1e-6)).to_bytes()
    with pytest.raises(pfd.PfdFormatError):
        pfd.PfdFile.from_bytes(mutate(raw))


def test_read_errors_name_path(tmp_path):
    with pytest.raises(OSError, match="missing.pfd"):
        pfd.read(tmp_path / "missing.pfd")
    (tmp_path / "bad.pfd").write_bytes(b"nonsense")
    with pytest.raises(pfd.PfdFormatError, match="bad.pfd"):
        pfd.read(tmp_path / "bad.pfd")
