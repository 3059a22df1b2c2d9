"""``mpk`` batch runner.

Exit codes: 0 ok, 1 check failure, 2 configuration or precondition error.
"""

from __future__ import annotations

import argparse
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .acceptance import run_all
from .config import ExperimentConfig, load_config
from .fio import decay_profile, factorize, gabor_matrix, invert_fio, metaplectic, recover_flow, type1_fio
from .io import file_hash, write_binary, write_gabor_csv, write_json, write_norm_series, write_pgm
from .lattice import WeightSpec, gaussian_window, hermite_window, make_grid
from .schrodinger import (
    DysonConfig,
    dense_hamiltonian,
    dyson_correction,
    dyson_tail_bound,
    m_of_t,
    oracle_propagator,
    strang_propagator,
    track_modulation_norms,
)
from .symplectic import (
    CONVENTIONS,
    QuadraticPhase,
    admissible_symplectic,
    parse_hamiltonian,
    phase_function,
    validate_symplectic,
)
from .weyl import sjostrand_norm, symbol_preset, weyl_quantize

COMMANDS = ("gabor-matrix", "decay-fit", "compose", "factorize", "propagate", "dyson", "selftest")


class CheckFailure(RuntimeError):
    pass


class Bundle:
    """Collects emitted files and timings for the manifest."""

    def __init__(self, cfg: ExperimentConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.timings = {}
        self.results = {}

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def timed(self, label, fn, *args, **kw):
        t0 = time.perf_counter()
        val = fn(*args, **kw)
        self.timings[label] = time.perf_counter() - t0
        return val

    def manifest(self) -> Path:
        data = {
            "command": self.command,
            "inputs": self.cfg.echo(),
            "seed": self.cfg.seed,
            "convention_flag": self.cfg.convention,
            "versions": {
                "mpk": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "timings": self.timings,
            "results": self.results,
            "files": [{"path": p.name, "sha256": file_hash(p)} for p in self.files],
        }
        return write_json(self.out / "manifest.json", data)


def _grid(cfg):
    return make_grid(cfg.d, cfg.N, cfg.L, cfg.stride)


def _window(cfg, grid):
    if cfg.window == "gaussian":
        return gaussian_window(grid), "gaussian"
    return hermite_window(grid, cfg.window_order), f"hermite{cfg.window_order}"


def _matrices(cfg):
    rng = np.random.default_rng(cfg.seed)
    out = []
    for M in cfg.matrices:
        out.append(admissible_symplectic(rng, 1)[0] if M is None else validate_symplectic(M))
    return out


def _operator(cfg, grid):
    """Returns ``(T, S)`` where ``S`` is the canonical transformation carried by ``T``."""
    mats = _matrices(cfg)
    kind = cfg.operator_kind
    if kind == "metaplectic":
        return metaplectic(grid, mats[0]).matrix, mats[0]
    if kind == "composite":
        T, S = np.eye(grid.N, dtype=complex), np.eye(2)
        for M in mats:
            T = T @ metaplectic(grid, M).matrix
            S = S @ M.matrix
        return T, validate_symplectic(S)
    sigma = symbol_preset(grid, cfg.operator_sigma)
    if kind == "weyl":
        return weyl_quantize(grid, sigma).matrix, validate_symplectic(np.eye(2))
    # type1
    if cfg.phase is not None:
        q1, q2, q3 = cfg.phase
        phase = QuadraticPhase(np.array([[q1]]), np.array([[q2]]), np.array([[q3]]))
        S = validate_symplectic(np.array([[1 / q2, q3 / q2], [q1 / q2, q2 + q1 * q3 / q2]]))
    else:
        S = mats[0]
        phase = phase_function(S)
    if sigma.values.any():
        return type1_fio(grid, phase, sigma).matrix, S
    return type1_fio(grid, phase).matrix, S


def cmd_gabor_matrix(b: Bundle):
    cfg = b.cfg
    grid = _grid(cfg)
    g, wname = _window(cfg, grid)
    T, S = b.timed("operator", _operator, cfg, grid)
    K = b.timed("gabor_matrix", gabor_matrix, T, g, grid, wname, cfg.operator_kind)
    write_gabor_csv(b.path("gabor.csv"), K.values)
    write_pgm(b.path("gabor.pgm"), K.values)
    rep = b.timed("decay_profile", decay_profile, K, S.matrix, WeightSpec(cfg.s), cfg.convention)
    write_json(b.path("decay.json"), rep.to_dict())
    b.results = {"n_fit": rep.n_fit, "shape": list(K.values.shape)}


def cmd_decay_fit(b: Bundle):
    cfg = b.cfg
    grid = _grid(cfg)
    g, wname = _window(cfg, grid)
    T, S = _operator(cfg, grid)
    K = gabor_matrix(T, g, grid, wname, cfg.operator_kind)
    rep = b.timed("decay_profile", decay_profile, K, S.matrix, WeightSpec(cfg.s), cfg.convention)
    write_json(b.path("decay.json"), rep.to_dict())
    b.results = rep.to_dict()


def cmd_compose(b: Bundle):
    cfg = b.cfg
    grid = _grid(cfg)
    g, wname = _window(cfg, grid)
    cfg.operator_kind = "composite"
    T, S = b.timed("compose", _operator, cfg, grid)
    K = gabor_matrix(T, g, grid, wname, "composite")
    M, resid = b.timed("recover_flow", recover_flow, K)
    err = float(np.linalg.norm(M - S.matrix) / np.linalg.norm(S.matrix))
    rep = decay_profile(K, S.matrix, WeightSpec(cfg.s), cfg.convention)
    b.results = {
        "expected": S.matrix,
        "recovered": M,
        "fit_residual": resid,
        "relative_error": err,
        "decay": rep.to_dict(),
    }
    write_json(b.path("compose.json"), b.results)


def cmd_factorize(b: Bundle):
    cfg = b.cfg
    grid = _grid(cfg)
    T, S = _operator(cfg, grid)
    if cfg.operator_kind == "metaplectic" and cfg.operator_sigma != "zero":
        T = weyl_quantize(grid, symbol_preset(grid, cfg.operator_sigma)).matrix @ T
    res = b.timed("factorize", factorize, grid, T, S)
    write_binary(b.path("sigma1.bin"), grid, res.sigma1.values, "symbol")
    write_binary(b.path("sigma2.bin"), grid, res.sigma2.values, "symbol")
    b.results = {
        "reconstruction_residual": res.reconstruction_residual,
        "sjostrand1": res.sjostrand1,
        "sjostrand2": res.sjostrand2,
        "composition_residual": res.composition_residual,
    }
    try:
        _, rep, info = b.timed("invert", invert_fio, grid, T, S, None, WeightSpec(cfg.s))
        b.results["inverse"] = {"cond": info["cond"], "type2_residual": info.get("type2_residual"),
                                "decay": rep.to_dict()}
    except ValueError as exc:
        b.results["inverse"] = {"error": str(exc)}
    write_json(b.path("factorize.json"), b.results)


def _initial_state(cfg, grid):
    x0, e0 = cfg.z0
    u = np.exp(-np.pi * (grid.x - x0) ** 2 + 2j * np.pi * e0 * grid.x)
    return u / np.sqrt(np.sum(np.abs(u) ** 2) * grid.dx)


def cmd_propagate(b: Bundle):
    cfg = b.cfg
    grid = _grid(cfg)
    g, _ = _window(cfg, grid)
    q = parse_hamiltonian(cfg.hamiltonian)
    sigma = symbol_preset(grid, cfg.sigma)
    u0 = _initial_state(cfg, grid)
    ns = b.timed("norms", track_modulation_norms, grid, q, sigma, u0, cfg.times, cfg.pairs, g)
    write_norm_series(b.path("norms.csv"), ns)
    H = dense_hamiltonian(grid, q, sigma)
    res = b.timed("oracle", oracle_propagator, H, cfg.t)
    write_binary(b.path("propagator.bin"), grid, res.U.matrix, "operator")
    split = b.timed("strang", strang_propagator, grid, q, sigma, cfg.t, cfg.n_steps,
                    convention=cfg.convention, oracle=res.U.matrix)
    side = res.sidecar(cfg.convention)
    side["strang"] = {"n_steps": cfg.n_steps, "error_vs_oracle": split.error_vs_oracle}
    write_json(b.path("propagator.json"), side)
    b.results = {"max_ratio_deviation": float(np.abs(ns.ratios - 1).max()),
                 "strang_error": split.error_vs_oracle}


def cmd_dyson(b: Bundle):
    cfg = b.cfg
    grid = _grid(cfg)
    q = parse_hamiltonian(cfg.hamiltonian)
    sigma = symbol_preset(grid, cfg.sigma)
    dc = DysonConfig(n_terms=cfg.n_terms, rule=cfg.rule, nodes=cfg.nodes)
    C, norms = b.timed("dyson", dyson_correction, grid, q, sigma, cfg.t, dc)
    w = WeightSpec(cfg.s)
    M = m_of_t(grid, q, cfg.t, w, convention=cfg.convention)
    norm = sjostrand_norm(sigma, w, u_stride=2)
    tail = dyson_tail_bound(cfg.t, M, norm, cfg.n_terms)
    write_binary(b.path("correction.bin"), grid, C.matrix, "operator")
    with b.path("terms.csv").open("w") as fh:
        fh.write("n,norm\n")
        for n, v in enumerate(norms):
            fh.write(f"{n},{float(v)!r}\n")
    b.results = {"M": M, "sjostrand": norm, "tail_bound": tail, "term_norms": list(norms)}
    write_json(b.path("dyson.json"), b.results)


def cmd_selftest(b: Bundle):
    checks = run_all(verbose=True)
    b.results = {"checks": [c.to_dict() for c in checks],
                 "passed": sum(c.passed for c in checks), "total": len(checks)}
    write_json(b.path("selftest.json"), {"checks": [{k: v for k, v in c.to_dict().items() if k != "elapsed"}
                                                   for c in checks]})
    failed = [c.name for c in checks if not c.passed]
    if failed:
        raise CheckFailure("failed checks: " + ", ".join(failed))


HANDLERS = {
    "gabor-matrix": cmd_gabor_matrix,
    "decay-fit": cmd_decay_fit,
    "compose": cmd_compose,
    "factorize": cmd_factorize,
    "propagate": cmd_propagate,
    "dyson": cmd_dyson,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpk", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="INI experiment file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="grid size N")
    p.add_argument("--convention", choices=sorted(CONVENTIONS))
    p.add_argument("--version", action="version", version=f"mpk {__version__}")
    return p


def run(cfg: ExperimentConfig, command: str) -> Bundle:
    b = Bundle(cfg, command)
    try:
        HANDLERS[command](b)
    finally:
        b.manifest()
    return b


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"output.dir": args.out, "run.seed": args.seed, "grid.N": args.n,
                 "run.convention": args.convention}
    try:
        cfg = load_config(args.config, overrides)
    except ValueError as exc:
        print(f"mpk: config error: {exc}", file=sys.stderr)
        return 2
    print(f"convention: {cfg.convention}")
    try:
        b = run(cfg, args.command)
    except CheckFailure as exc:
        print(f"mpk {args.command}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"mpk {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(b.files)} files and manifest.json to {b.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
