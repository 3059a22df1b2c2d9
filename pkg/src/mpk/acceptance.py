"""Acceptance experiments at desk scale.

Each ``check_*`` function runs one experiment and returns a :class:`Check`
holding the measured value, the threshold and whether it passed.  The same
functions back the test suite and ``mpk selftest``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .fio import (
    decay_profile,
    gabor_matrix,
    invert_fio,
    metaplectic,
    phase_align,
    recover_flow,
)
from .lattice import WeightSpec, atoms, gaussian_window, hermite_window, make_grid, tf_shift
from .schrodinger import (
    DysonConfig,
    dense_hamiltonian,
    dyson_correction,
    dyson_tail_bound,
    extract_bt,
    m_of_t,
    oracle_propagator,
    quadratic_propagator,
    resolve_convention,
    strang_propagator,
    track_modulation_norms,
)
from .symplectic import (
    DEFAULT_CONVENTION,
    QuadraticHamiltonian,
    admissible_symplectic,
    chirp_matrix,
    flow,
    fourier_matrix,
    phase_function,
    random_symplectic,
    validate_symplectic,
)
from .weyl import (
    SymbolGrid,
    conjugate_symbol_through_phase,
    controlling_function,
    gaussian_bump,
    nonsmooth_bump,
    sjostrand_norm,
    weyl_quantize,
)
from .fio import type1_fio

__all__ = ["Check", "CHECKS", "run_all"]


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: value={self.value:.4g} threshold={self.threshold:.4g}"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "threshold": float(self.threshold),
            "detail": self.detail,
            "elapsed": self.elapsed,
        }


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def check_unitarity(seed: int = 0, N: int = 128) -> Check:
    grid = make_grid(1, N)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        U = metaplectic(grid, random_symplectic(1, rng, 0.6)).matrix
        F = rng.normal(size=(N, 20)) + 1j * rng.normal(size=(N, 20))
        ratio = np.linalg.norm(U @ F, axis=0) / np.linalg.norm(F, axis=0)
        worst = max(worst, float(np.abs(ratio - 1).max()))
    return Check("01 unitarity", worst <= 1e-8, worst, 1e-8)


def check_intertwining(seed: int = 1, N: int = 64) -> Check:
    grid = make_grid(1, N, lattice_stride=(2, 2))
    rng = np.random.default_rng(seed)
    mats = {
        "fourier+": fourier_matrix(1, 1),
        "fourier-": fourier_matrix(1, -1),
        "lower shear": chirp_matrix([[1.0]]),
        "lower shear -2": chirp_matrix([[-2.0]]),
        "upper shear": np.array([[1.0, 1.0], [0.0, 1.0]]),
    }
    eye = np.eye(N)
    worst, per = 0.0, {}
    for name, S in mats.items():
        U = metaplectic(grid, S).matrix
        err = 0.0
        for p in rng.choice(grid.size, 8, replace=False):
            z = grid.points[p]
            lhs = U @ np.stack([tf_shift(grid, z, e) for e in eye], axis=1) @ U.conj().T
            rhs = np.stack([tf_shift(grid, S @ z, e) for e in eye], axis=1)
            lhs = lhs / np.linalg.norm(lhs, axis=0)
            rhs = rhs / np.linalg.norm(rhs, axis=0)
            c = np.sum(rhs.conj() * lhs, axis=0)
            err = max(err, float(np.abs(lhs * (np.abs(c) / c) - rhs).max()))
        per[name] = err
        worst = max(worst, err)
    return Check("02 intertwining", worst <= 1e-6, worst, 1e-6, per)


def check_type1_equivalence(seed: int = 2024, N: int = 128) -> Check:
    grid = make_grid(1, N, lattice_stride=(4, 4))
    G = atoms(grid, gaussian_window(grid))[grid.interior(0.3)].T
    errs = []
    for S in admissible_symplectic(np.random.default_rng(seed), 10, max_norm=1.5, min_det=0.3):
        U1 = metaplectic(grid, S).matrix @ G
        U2 = phase_align(metaplectic(grid, S, "type1").matrix @ G, U1)
        errs.append(float(np.abs(U1 - U2).max() / np.abs(U1).max()))
    worst = max(errs)
    return Check("03 type-I vs generators", worst <= 1e-6, worst, 1e-6, {"errors": errs})


def _metaplectic_set(seed: int = 4):
    return [validate_symplectic(np.eye(2))] + admissible_symplectic(np.random.default_rng(seed), 4)


def _decay_orders(N, window="gaussian", seed=4):
    grid = make_grid(1, N, lattice_stride=(4, 4))
    g = gaussian_window(grid) if window == "gaussian" else hermite_window(grid, 4)
    out = []
    for S in _metaplectic_set(seed):
        K = gabor_matrix(metaplectic(grid, S), g, grid, window)
        out.append(decay_profile(K, S.matrix).n_fit)
    return np.array(out)


def check_metaplectic_decay() -> Check:
    n64 = _decay_orders(64)
    n128 = _decay_orders(128)
    ok = bool(np.all(n128 >= 6) and np.all(n128 >= n64))
    return Check("04 metaplectic decay", ok, float(n128.min()), 6.0,
                 {"n_fit_64": n64.tolist(), "n_fit_128": n128.tolist()})


def check_composition(seed: int = 5, N: int = 64) -> Check:
    grid = make_grid(1, N, lattice_stride=(2, 2))
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(5):
        S1, S2 = admissible_symplectic(rng, 2, max_norm=1.3)
        T = metaplectic(grid, S1).matrix @ metaplectic(grid, S2).matrix
        M, _ = recover_flow(gabor_matrix(T, None, grid))
        errs.append(_rel(M, S1.matrix @ S2.matrix))
    worst = max(errs)
    return Check("05 composition flow", worst <= 1e-3, worst, 1e-3, {"errors": errs})


def check_symbol_conjugation(N: int = 64) -> Check:
    grid = make_grid(1, N)
    sigma = gaussian_bump(grid, (0.5, -0.3), 1.0, 1.0)
    phase = phase_function(flow(QuadraticHamiltonian.preset("free"), 1.0))
    lhs = weyl_quantize(grid, sigma).matrix @ type1_fio(grid, phase).matrix
    rhs = type1_fio(grid, phase, conjugate_symbol_through_phase(sigma, phase)).matrix
    err = float(np.abs(lhs - rhs).max())
    return Check("06 symbol conjugation", err <= 1e-6, err, 1e-6)


def check_controlling_identity(N: int = 32) -> Check:
    grid = make_grid(1, N, lattice_stride=(2, 2))
    sigma = gaussian_bump(grid, (0.3, -0.2), 1.0, 1.0)
    diffs = {}
    for s in (0.0, 2.0):
        w = WeightSpec(s)
        a = sjostrand_norm(sigma, w)
        b = controlling_function(sigma, w=w).weighted_l1
        diffs[s] = abs(b - a) / a
    worst = max(diffs.values())
    return Check("07 controlling identity", worst <= 0.05, worst, 0.05, {"rel_diff": diffs})


def check_pseudo_domination(N: int = 32) -> Check:
    grid = make_grid(1, N, lattice_stride=(2, 2))
    sigma = gaussian_bump(grid, (0.3, -0.2), 1.0, 1.0)
    K = gabor_matrix(weyl_quantize(grid, sigma), None, grid).values
    H = controlling_function(sigma).at(grid.points[:, None, :] - grid.points[None, :, :])
    ratio = float(np.max(np.abs(K) / np.maximum(H, 1e-300)))
    return Check("08 pseudodifferential domination", ratio <= 1.05, ratio, 1.05)


def check_schrodinger_factorization(N: int = 64, amp: float = 0.25) -> Check:
    grid = make_grid(1, N, lattice_stride=(2, 2))
    q = QuadraticHamiltonian.preset("harmonic")
    sigma = nonsmooth_bump(grid, amp=amp)
    H = dense_hamiltonian(grid, q, sigma)
    errs, orders = [], []
    for t in (0.25, 0.5):
        U = oracle_propagator(H, t).U
        _, report, _, K = extract_bt(grid, U, flow(q, t))
        M, _ = recover_flow(K)
        errs.append(float(np.linalg.norm(M - np.eye(2))))
        orders.append(report.n_fit)
    ok = max(errs) <= 1e-2 and min(orders) >= 4
    return Check("09 Schrodinger factorization", ok, max(errs), 1e-2,
                 {"flow_errors": errs, "n_fit": orders, "amp": amp})


def check_dyson(N: int = 64, t: float = 0.5, amp: float = 0.25) -> Check:
    grid = make_grid(1, N, lattice_stride=(2, 2))
    q = QuadraticHamiltonian.preset("harmonic")
    sigma = gaussian_bump(grid, (0.5, 0.0), 1.0, amp)
    norm = sjostrand_norm(sigma, u_stride=2)
    M = m_of_t(grid, q, t)
    cfg = DysonConfig(n_terms=6)
    C, norms = dyson_correction(grid, q, sigma, t, cfg)
    U = oracle_propagator(dense_hamiltonian(grid, q, sigma), t).U.matrix
    err = float(np.linalg.norm(quadratic_propagator(grid, q, t) @ C.matrix - U, 2))
    tail = dyson_tail_bound(t, M, norm, cfg.n_terms)
    formula = np.array([t**n / math.factorial(n) * (M * norm) ** n for n in range(cfg.n_terms + 1)])
    term_ratio = float(np.max(norms[1:] / formula[1:]))
    ok = err <= 2 * tail and term_ratio <= 1.25
    return Check("10 Dyson truncation", ok, err / tail, 2.0,
                 {"error": err, "tail_bound": tail, "M": M, "sjostrand": norm, "term_ratio": term_ratio})


def check_norm_preservation(amp: float = 0.5) -> Check:
    q = QuadraticHamiltonian.preset("harmonic")
    times = np.linspace(0.0, 1.0, 11)
    z0 = (1.0, 0.5)
    Cs, l2dev = [], 0.0
    for N in (64, 128):
        grid = make_grid(1, N)
        x = grid.x
        u0 = np.exp(-np.pi * (x - z0[0]) ** 2 + 2j * np.pi * z0[1] * x)
        u0 /= np.sqrt(np.sum(np.abs(u0) ** 2) * grid.dx)
        ns = track_modulation_norms(grid, q, nonsmooth_bump(grid, amp=amp), u0, times, [(2, 0), (2, 2)])
        r = ns.ratios
        l2dev = max(l2dev, float(np.abs(r[0] - 1).max()))
        Cs.append(float(max(r[1].max(), 1 / r[1].min())))
    drift = abs(Cs[1] / Cs[0] - 1)
    ok = drift <= 0.1 and l2dev <= 1e-6
    return Check("11 norm preservation", ok, drift, 0.1, {"C": Cs, "l2_deviation": l2dev})


def check_window_independence() -> Check:
    ng = _decay_orders(128, "gaussian")
    nh = _decay_orders(128, "hermite4")
    gap = float(np.max(np.abs(ng - nh)))
    return Check("12 window independence", gap <= 1.0, gap, 1.0,
                 {"gaussian": ng.tolist(), "hermite4": nh.tolist()})


def check_inverse_closedness(seed: int = 13, N: int = 64) -> Check:
    grid = make_grid(1, N, lattice_stride=(4, 4))
    sigma = SymbolGrid.constant(grid, 1.0) + gaussian_bump(grid, (0.3, -0.2), 1.0, 0.2)
    P = weyl_quantize(grid, sigma).matrix
    fracs = []
    for S in admissible_symplectic(np.random.default_rng(seed), 4, max_norm=1.3):
        _, report, _ = invert_fio(grid, P @ metaplectic(grid, S).matrix, S)
        fracs.append(report.graph_mass[2])
    worst = min(fracs)
    return Check("13 inverse closedness", worst > 0.9, worst, 0.9, {"r2_fractions": fracs})


def check_strang(N: int = 64, t: float = 1.0, amp: float = 0.5) -> Check:
    grid = make_grid(1, N)
    q = QuadraticHamiltonian.preset("harmonic")
    sigma = nonsmooth_bump(grid, amp=amp)
    U = oracle_propagator(dense_hamiltonian(grid, q, sigma), t).U.matrix
    errs = np.array([strang_propagator(grid, q, sigma, t, n, oracle=U).error_vs_oracle for n in (4, 8, 16, 32)])
    factors = errs[:-1] / errs[1:]
    ok = bool(np.all((factors >= 3.5) & (factors <= 4.5)))
    return Check("14 Strang convergence", ok, float(np.min(factors)), 3.5,
                 {"errors": errs.tolist(), "factors": factors.tolist()})


def check_convention(N: int = 64) -> Check:
    grid = make_grid(1, N, lattice_stride=(2, 2))
    best, scores = resolve_convention(grid, QuadraticHamiltonian.preset("harmonic"), 0.1)
    return Check("convention resolution", best == DEFAULT_CONVENTION, scores[best], 1e-6,
                 {"selected": best, "scores": scores})


CHECKS = [
    check_unitarity,
    check_intertwining,
    check_type1_equivalence,
    check_metaplectic_decay,
    check_composition,
    check_symbol_conjugation,
    check_controlling_identity,
    check_pseudo_domination,
    check_schrodinger_factorization,
    check_dyson,
    check_norm_preservation,
    check_window_independence,
    check_inverse_closedness,
    check_strang,
    check_convention,
]


def run_all(verbose: bool = True) -> list[Check]:
    out = []
    for fn in CHECKS:
        t0 = time.perf_counter()
        c = fn()
        c.elapsed = time.perf_counter() - t0
        if verbose:
            print(c.line(), flush=True)
        out.append(c)
    return out
