"""INI experiment configuration.

Example::

    [grid]
    d = 1
    N = 64
    stride = 2 2

    [window]
    name = gaussian

    [operator]
    kind = metaplectic
    matrix = 1 0.5 0 1          # or "random"; "matrices = M1 | M2" for products

    [hamiltonian]
    q = harmonic
    sigma = nonsmooth_bump amp=0.5

    [analysis]
    s = 0
    pairs = 2:0 2:2
    times = 0 0.25 0.5 0.75 1
    t = 0.5

    [output]
    dir = out

    [run]
    seed = 0
    convention = twopi-reversed
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lattice import ConfigurationError
from .symplectic import CONVENTIONS, DEFAULT_CONVENTION, HAMILTONIAN_PRESETS

__all__ = ["ExperimentConfig", "load_config", "parse_config", "DEFAULTS"]

DEFAULTS = {
    "grid": {"d": "1", "N": "64", "L": "", "stride": "2 2"},
    "window": {"name": "gaussian", "order": "4"},
    "operator": {"kind": "metaplectic", "matrix": "1 0 0 1", "matrices": "", "sigma": "zero", "phase": ""},
    "hamiltonian": {"q": "harmonic", "sigma": "zero"},
    "analysis": {
        "s": "0",
        "pairs": "2:0 2:2",
        "times": "0 0.25 0.5 0.75 1",
        "t": "0.5",
        "z0": "1 0.5",
        "n_terms": "6",
        "rule": "trapezoid",
        "nodes": "32",
        "n_steps": "16",
    },
    "output": {"dir": "mpk-out"},
    "run": {"seed": "0", "convention": DEFAULT_CONVENTION},
}

OPERATOR_KINDS = ("metaplectic", "type1", "weyl", "composite")
WINDOWS = ("gaussian", "hermite")


@dataclass
class ExperimentConfig:
    d: int = 1
    N: int = 64
    L: float | None = None
    stride: tuple = (2, 2)
    window: str = "gaussian"
    window_order: int = 4
    operator_kind: str = "metaplectic"
    matrices: list = field(default_factory=lambda: [np.eye(2)])
    operator_sigma: str = "zero"
    phase: tuple | None = None
    hamiltonian: str = "harmonic"
    sigma: str = "zero"
    s: float = 0.0
    pairs: list = field(default_factory=lambda: [(2.0, 0.0), (2.0, 2.0)])
    times: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    t: float = 0.5
    z0: tuple = (1.0, 0.5)
    n_terms: int = 6
    rule: str = "trapezoid"
    nodes: int = 32
    n_steps: int = 16
    out: str = "mpk-out"
    seed: int = 0
    convention: str = DEFAULT_CONVENTION
    source: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """Resolved values, for the manifest."""
        return {sec: dict(vals) for sec, vals in self.source.items()}


def _line_numbers(text: str) -> dict:
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]", s)
        if m:
            section = m.group(1).strip()
        elif "=" in s and section and not s.startswith(("#", ";")):
            out[(section, s.split("=", 1)[0].strip())] = i
    return out


class _Reader:
    def __init__(self, merged: dict, lines: dict):
        self.merged = merged
        self.lines = lines

    def fail(self, sec, key, msg):
        where = f"line {self.lines[(sec, key)]}, " if (sec, key) in self.lines else ""
        raise ConfigurationError(f"{where}[{sec}] {key}: {msg}")

    def get(self, sec, key, conv=str):
        raw = self.merged[sec][key]
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            self.fail(sec, key, f"cannot parse {raw!r} ({exc})")

    def floats(self, sec, key):
        return self.get(sec, key, lambda v: [float(x) for x in v.replace(",", " ").split()])


def _pairs(text):
    out = []
    for tok in text.split():
        p, _, s = tok.partition(":")
        out.append((np.inf if p in ("inf", "oo") else float(p), float(s or 0)))
    if not out:
        raise ValueError("empty (p, s) list")
    return out


def parse_config(text: str = "", overrides: dict | None = None) -> ExperimentConfig:
    """Parse INI text over :data:`DEFAULTS`; ``overrides`` maps ``"section.key"`` to strings."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config parse error: {exc}") from None
    merged = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    lines = _line_numbers(text)
    for sec in cp.sections():
        if sec not in merged:
            raise ConfigurationError(f"line {_section_line(text, sec)}: unknown section [{sec}]")
        for key, val in cp[sec].items():
            if key not in merged[sec]:
                ln = lines.get((sec, key))
                raise ConfigurationError(f"line {ln}, [{sec}] {key}: unknown key")
            merged[sec][key] = val.strip()
    for dotted, val in (overrides or {}).items():
        if val is None:
            continue
        sec, key = dotted.split(".")
        merged[sec][key] = str(val)
        lines.pop((sec, key), None)

    r = _Reader(merged, lines)
    cfg = ExperimentConfig(source=merged)
    cfg.d = r.get("grid", "d", int)
    cfg.N = r.get("grid", "N", int)
    cfg.L = r.get("grid", "L", lambda v: float(v) if v else None)
    stride = r.get("grid", "stride", lambda v: tuple(int(x) for x in v.split()))
    if len(stride) != 2:
        r.fail("grid", "stride", "expected two integers")
    cfg.stride = stride
    if cfg.d != 1:
        r.fail("grid", "d", "only d = 1 is supported")
    if cfg.N < 2 or cfg.N & (cfg.N - 1):
        r.fail("grid", "N", f"{cfg.N} is not a power of two")
    if any(s < 1 or cfg.N % s for s in stride):
        r.fail("grid", "stride", f"{stride} must divide N = {cfg.N}")

    cfg.window = r.get("window", "name")
    if cfg.window not in WINDOWS:
        r.fail("window", "name", f"choose from {WINDOWS}")
    cfg.window_order = r.get("window", "order", int)

    cfg.operator_kind = r.get("operator", "kind")
    if cfg.operator_kind not in OPERATOR_KINDS:
        r.fail("operator", "kind", f"choose from {OPERATOR_KINDS}")
    mats = r.get("operator", "matrices") or r.get("operator", "matrix")
    try:
        cfg.matrices = [_matrix2(block) for block in mats.split("|")]
    except ValueError as exc:
        key = "matrices" if merged["operator"]["matrices"] else "matrix"
        r.fail("operator", key, str(exc))
    cfg.operator_sigma = r.get("operator", "sigma")
    phase = r.floats("operator", "phase")
    if phase and len(phase) != 3:
        r.fail("operator", "phase", "expected Q1 Q2 Q3")
    cfg.phase = tuple(phase) if phase else None

    cfg.hamiltonian = r.get("hamiltonian", "q")
    if cfg.hamiltonian not in HAMILTONIAN_PRESETS and ";" not in cfg.hamiltonian:
        r.fail("hamiltonian", "q", f"unknown preset; choose from {HAMILTONIAN_PRESETS} or give 'A ; B ; C'")
    cfg.sigma = r.get("hamiltonian", "sigma")

    cfg.s = r.get("analysis", "s", float)
    cfg.pairs = r.get("analysis", "pairs", _pairs)
    cfg.times = r.floats("analysis", "times")
    if not cfg.times or np.any(np.diff(cfg.times) <= 0):
        r.fail("analysis", "times", "need a strictly increasing list")
    cfg.t = r.get("analysis", "t", float)
    z0 = r.floats("analysis", "z0")
    if len(z0) != 2:
        r.fail("analysis", "z0", "expected x eta")
    cfg.z0 = tuple(z0)
    cfg.n_terms = r.get("analysis", "n_terms", int)
    cfg.rule = r.get("analysis", "rule")
    cfg.nodes = r.get("analysis", "nodes", int)
    cfg.n_steps = r.get("analysis", "n_steps", int)
    if cfg.n_terms < 0:
        r.fail("analysis", "n_terms", "must be >= 0")
    if cfg.nodes < 1 or cfg.n_steps < 1:
        r.fail("analysis", "nodes" if cfg.nodes < 1 else "n_steps", "must be >= 1")

    cfg.out = r.get("output", "dir")
    cfg.seed = r.get("run", "seed", int)
    if cfg.seed < 0:
        r.fail("run", "seed", "must be a non-negative integer")
    cfg.convention = r.get("run", "convention")
    if cfg.convention not in CONVENTIONS:
        r.fail("run", "convention", f"choose from {sorted(CONVENTIONS)}")
    return cfg


def _matrix2(text: str):
    if text.strip() == "random":
        return None  # drawn from the run seed
    vals = [float(v) for v in text.split()]
    if len(vals) != 4:
        raise ValueError(f"expected 4 entries for a 2x2 matrix, got {len(vals)}")
    return np.array(vals).reshape(2, 2)


def _section_line(text, sec):
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{sec}]":
            return i
    return "?"


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides)
