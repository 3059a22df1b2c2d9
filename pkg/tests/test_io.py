import json
import struct

import numpy as np
import pytest

from mpk.io import (
    read_binary,
    read_csv,
    read_pgm,
    write_binary,
    write_csv,
    write_gabor_csv,
    write_json,
    write_norm_series,
    write_pgm,
)
from mpk.lattice import ConfigurationError, make_grid
from mpk.schrodinger import NormSeries


@pytest.fixture
def grid():
    return make_grid(1, 16, lattice_stride=(2, 2))


def test_csv_roundtrip(tmp_path):
    v = np.random.default_rng(0).normal(size=(4, 3)) + 1j
    write_csv(tmp_path / "a.csv", v)
    np.testing.assert_array_equal(read_csv(tmp_path / "a.csv"), v)


@pytest.mark.parametrize("kind, shape", [("state", (16,)), ("phase_space", (8, 8)), ("symbol", (32, 16)), ("operator", (16, 16))])
def test_binary_roundtrip(tmp_path, grid, kind, shape):
    v = np.random.default_rng(1).normal(size=shape) + 1j * np.random.default_rng(2).normal(size=shape)
    p = write_binary(tmp_path / "x.bin", grid, v, kind)
    raw = p.read_bytes()
    assert raw[:4] == b"MPKT"
    assert len(raw) == 32 + 16 * v.size
    g2, v2, k2 = read_binary(p)
    assert g2 == grid and k2 == kind
    np.testing.assert_array_equal(v2, v)


def test_binary_errors(tmp_path, grid):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"XXXX" + bytes(28))
    with pytest.raises(ConfigurationError):
        read_binary(p)
    p.write_bytes(b"MP")
    with pytest.raises(ConfigurationError):
        read_binary(p)
    write_binary(p, grid, np.zeros(16), "state")
    p.write_bytes(p.read_bytes()[:-16])
    with pytest.raises(ConfigurationError):
        read_binary(p)
    with pytest.raises(ConfigurationError):
        write_binary(p, grid, np.zeros(16), "nosuch")


def test_header_layout(tmp_path, grid):
    p = write_binary(tmp_path / "h.bin", grid, np.zeros((16, 16)), "operator")
    magic, ver, d, N, L, kind, _, sx, se = struct.unpack("<4sIIIdHHHH", p.read_bytes()[:32])
    assert (magic, ver, d, N, kind, sx, se) == (b"MPKT", 1, 1, 16, 3, 2, 2)
    assert L == pytest.approx(4.0)


def test_pgm(tmp_path):
    K = np.eye(6) + 1e-3
    p = write_pgm(tmp_path / "k.pgm", K)
    img = read_pgm(p)
    assert img.shape == (6, 6)
    assert np.all(np.diag(img) == 255)
    assert np.all(img[~np.eye(6, dtype=bool)] == round(9 / 12 * 255))
    zero = read_pgm(write_pgm(tmp_path / "z.pgm", np.zeros((2, 2))))
    assert np.all(zero == 0)


def test_gabor_csv(tmp_path):
    write_gabor_csv(tmp_path / "g.csv", np.array([[1j, 2.0]]))
    rows = (tmp_path / "g.csv").read_text().splitlines()
    assert rows[0] == "w,z,abs,arg"
    w, z, a, ang = rows[1].split(",")
    assert (w, z) == ("0", "0") and float(a) == 1.0 and float(ang) == pytest.approx(np.pi / 2)


def test_json_and_norms(tmp_path):
    p = write_json(tmp_path / "r.json", {"b": np.float64(1.5), "a": [np.nan, np.arange(2)]})
    assert json.loads(p.read_text()) == {"a": [None, [0, 1]], "b": 1.5}
    ns = NormSeries(np.array([0.0, 1.0]), [(2.0, 0.0)], np.array([[2.0, 3.0]]))
    text = write_norm_series(tmp_path / "n.csv", ns).read_text().splitlines()
    assert text[0] == "t,p,s,norm,ratio"
    assert text[2].split(",")[-1] == "1.5"
