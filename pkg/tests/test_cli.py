import json

import numpy as np
import pytest

from mpk.cli import main
from mpk.config import parse_config
from mpk.io import file_hash, read_binary, read_pgm
from mpk.lattice import ConfigurationError

BASE = """
[grid]
N = 32
stride = 2 2

[operator]
kind = metaplectic
matrix = 1 0 0 1

[hamiltonian]
q = harmonic
sigma = nonsmooth_bump amp=0.5
"""


def run(tmp_path, command, text=BASE, *extra):
    cfg = tmp_path / "c.ini"
    cfg.write_text(text)
    out = tmp_path / command
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def test_defaults_parse():
    cfg = parse_config("")
    assert cfg.N == 64 and cfg.stride == (2, 2) and cfg.seed == 0
    assert cfg.pairs == [(2.0, 0.0), (2.0, 2.0)]


def test_overrides():
    cfg = parse_config("[grid]\nN = 32\n", {"grid.N": 16, "run.seed": 7, "output.dir": None})
    assert cfg.N == 16 and cfg.seed == 7 and cfg.out == "mpk-out"


@pytest.mark.parametrize("text, needle", [
    ("[grid]\nN = 48\n", "line 2, [grid] N"),
    ("[grid]\n\nstride = 3 1\n", "line 3, [grid] stride"),
    ("[grid]\nfoo = 1\n", "unknown key"),
    ("[nosuch]\n", "unknown section"),
    ("[analysis]\ntimes = 1 0.5\n", "[analysis] times"),
    ("[operator]\nkind = magic\n", "[operator] kind"),
    ("[operator]\nmatrix = 1 2 3\n", "[operator] matrix"),
    ("[run]\nconvention = other\n", "[run] convention"),
    ("[hamiltonian]\nq = quartic\n", "[hamiltonian] q"),
    ("no header\n", "parse error"),
])
def test_config_diagnostics(text, needle):
    with pytest.raises(ConfigurationError) as exc:
        parse_config(text)
    assert needle in str(exc.value)


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "gabor-matrix", "[grid]\nN = 48\n")
    assert code == 2
    assert "N" in capsys.readouterr().err


def test_precondition_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "gabor-matrix", "[operator]\nmatrix = 1 1 1 1\n")
    assert code == 2
    assert "gabor-matrix" in capsys.readouterr().err


def test_gabor_matrix_identity(tmp_path, capsys):
    code, out = run(tmp_path, "gabor-matrix")
    assert code == 0
    assert "twopi-reversed" in capsys.readouterr().out
    img = read_pgm(out / "gabor.pgm")
    n = img.shape[0]
    assert img.shape == (n, n) == (256, 256)
    # brightest pixel of every row on the flattened diagonal
    assert np.all(np.argmax(img, axis=1) == np.arange(n))
    assert np.all(np.diag(img) == img.max())
    man = json.loads((out / "manifest.json").read_text())
    assert man["convention_flag"] == "twopi-reversed"
    assert {f["path"] for f in man["files"]} == {"gabor.csv", "gabor.pgm", "decay.json"}
    for f in man["files"]:
        assert f["sha256"] == file_hash(out / f["path"])
    assert set(man["versions"]) >= {"mpk", "numpy", "scipy", "python"}
    assert man["inputs"]["grid"]["N"] == "32"


def test_propagate_trivial(tmp_path):
    text = BASE.replace("q = harmonic", "q = zero").replace("nonsmooth_bump amp=0.5", "zero")
    code, out = run(tmp_path, "propagate", text)
    assert code == 0
    rows = np.loadtxt(out / "norms.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(rows[:, -1], 1.0, atol=1e-12)
    grid, U, kind = read_binary(out / "propagator.bin")
    assert kind == "operator" and grid.N == 32
    np.testing.assert_allclose(U, np.eye(32), atol=1e-12)
    side = json.loads((out / "propagator.json").read_text())
    assert side["convention_flag"] == "twopi-reversed"


def test_deterministic(tmp_path):
    text = BASE.replace("matrix = 1 0 0 1", "matrices = random | random")
    hashes = []
    for k in range(2):
        sub = tmp_path / f"r{k}"
        sub.mkdir()
        code, out = run(sub, "compose", text, "--seed", "5")
        assert code == 0
        man = json.loads((out / "manifest.json").read_text())
        hashes.append({f["path"]: f["sha256"] for f in man["files"]})
    assert hashes[0] == hashes[1]
    res = json.loads((tmp_path / "r0" / "compose" / "compose.json").read_text())
    assert res["relative_error"] < 1e-3


@pytest.mark.parametrize("command, files", [
    ("decay-fit", {"decay.json"}),
    ("factorize", {"sigma1.bin", "sigma2.bin", "factorize.json"}),
    ("dyson", {"correction.bin", "terms.csv", "dyson.json"}),
])
def test_other_commands(tmp_path, command, files):
    text = BASE.replace("matrix = 1 0 0 1", "matrix = 1 0.5 0 1")
    code, out = run(tmp_path, command, text)
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert {f["path"] for f in man["files"]} == files


def test_flag_overrides(tmp_path):
    code, out = run(tmp_path, "decay-fit", BASE, "--n", "64", "--convention", "twopi")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["inputs"]["grid"]["N"] == "64"
    assert man["convention_flag"] == "twopi"
