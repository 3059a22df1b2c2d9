import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpk.fio import metaplectic, phase_align, recover_flow
from mpk.lattice import ConfigurationError, WeightSpec, atoms, gaussian_window, make_grid
from mpk.schrodinger import (
    DysonConfig,
    NotHermitianError,
    conjugated_perturbation,
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
from mpk.symplectic import DEFAULT_CONVENTION, QuadraticHamiltonian, flow
from mpk.weyl import SymbolGrid, gaussian_bump, nonsmooth_bump, sjostrand_norm, weyl_quantize

HARM = QuadraticHamiltonian.preset("harmonic")
FREE = QuadraticHamiltonian.preset("free")
ZERO = QuadraticHamiltonian.preset("zero")


@pytest.fixture(scope="module")
def grid():
    return make_grid(1, 64, lattice_stride=(2, 2))


@pytest.fixture(scope="module")
def bump(grid):
    return gaussian_bump(grid, (0.3, 0.1), 1.0, 0.5)


def interior_atoms(grid, fraction=0.3):
    return atoms(grid, gaussian_window(grid))[grid.interior(fraction)].T


def test_dense_hamiltonian(grid, bump):
    H = dense_hamiltonian(grid, HARM).matrix
    np.testing.assert_allclose(H, H.conj().T, atol=1e-12)
    assert np.all(dense_hamiltonian(grid, ZERO).matrix == 0)
    Hs = dense_hamiltonian(grid, HARM, bump).matrix
    np.testing.assert_allclose(Hs, Hs.conj().T, atol=1e-12)


def test_ground_energy_refinement():
    e = [np.linalg.eigvalsh(dense_hamiltonian(make_grid(1, N), HARM).matrix)[0] for N in (32, 64, 128)]
    assert e[0] > 0
    assert abs(e[2] - e[1]) <= 1e-10 * abs(e[1])


def test_complex_symbol_rejected(grid):
    s = SymbolGrid(grid, 1j * np.ones((128, 64)))
    with pytest.raises(NotHermitianError):
        oracle_propagator(dense_hamiltonian(grid, HARM, s), 0.5)


def test_oracle_propagator(grid, bump):
    H = dense_hamiltonian(grid, HARM, bump)
    np.testing.assert_allclose(oracle_propagator(H, 0.0).U.matrix, np.eye(64), atol=1e-12)
    U = lambda t: oracle_propagator(H, t).U.matrix
    assert np.abs(U(0.3) @ U(0.4) - U(0.7)).max() <= 1e-8
    assert oracle_propagator(H, 0.7).unitarity_defect <= 1e-12


@pytest.mark.parametrize("t", [0.1, 0.5])
def test_convention_resolution(grid, t):
    best, scores = resolve_convention(grid, HARM, t)
    assert best == DEFAULT_CONVENTION
    assert scores[best] < 1e-6
    others = [v for k, v in scores.items() if k != best]
    assert min(others) > 0.01


def test_strang_trivial_cases(grid, bump):
    zero = SymbolGrid.constant(grid, 0.0)
    res = strang_propagator(grid, HARM, bump, 0.0, 3)
    np.testing.assert_allclose(res.U.matrix, np.eye(64), atol=1e-12)
    # sigma = 0: free evolution agrees with mu(A_t) on the whole torus
    U = strang_propagator(grid, FREE, zero, 0.7, 3).U.matrix
    mu = metaplectic(grid, flow(FREE, 0.7)).matrix
    assert np.abs(phase_align(mu, U) - U).max() <= 1e-6


def test_strang_zero_sigma_harmonic_localized():
    # the harmonic oscillator on the torus matches mu(A_t) away from the seam
    grid = make_grid(1, 64, lattice_stride=(4, 4))
    G = interior_atoms(grid)
    U = strang_propagator(grid, HARM, SymbolGrid.constant(grid, 0.0), 1.0, 4).U.matrix @ G
    mu = metaplectic(grid, flow(HARM, 1.0)).matrix @ G
    assert np.abs(phase_align(mu, U) - U).max() / np.abs(U).max() <= 1e-6


def test_strang_convergence():
    grid = make_grid(1, 64)
    sig = nonsmooth_bump(grid, amp=0.5)
    U = oracle_propagator(dense_hamiltonian(grid, HARM, sig), 1.0).U.matrix
    errs = [strang_propagator(grid, HARM, sig, 1.0, n, oracle=U).error_vs_oracle for n in (4, 8, 16)]
    for a, b in zip(errs, errs[1:]):
        assert 3.5 <= a / b <= 4.5


def test_strang_bad_steps(grid, bump):
    with pytest.raises(ConfigurationError):
        strang_propagator(grid, HARM, bump, 1.0, 0)


@pytest.mark.parametrize("q", [FREE, HARM])
def test_conjugated_perturbation(grid, bump, q):
    B, gap = conjugated_perturbation(grid, q, 0.5, bump)
    assert gap <= 1e-4
    np.testing.assert_allclose(B.matrix, B.matrix.conj().T, atol=1e-8)
    B0, _ = conjugated_perturbation(grid, q, 0.0, bump)
    np.testing.assert_allclose(B0.matrix, weyl_quantize(grid, bump).matrix, atol=1e-12)


def test_dyson_zero_symbol(grid):
    C, norms = dyson_correction(grid, HARM, SymbolGrid.constant(grid, 0.0), 0.5)
    np.testing.assert_array_equal(C.matrix, np.eye(64))
    assert norms[0] == 1 and np.all(norms[1:] == 0)


@pytest.mark.parametrize("rule", ["trapezoid", "midpoint", "chebyshev"])
def test_dyson_reconstruction(grid, rule):
    t = 0.5
    sig = gaussian_bump(grid, (0.5, 0.0), 1.0, 0.25)
    cfg = DysonConfig(n_terms=6, rule=rule, nodes=32)
    C, norms = dyson_correction(grid, HARM, sig, t, cfg)
    U = oracle_propagator(dense_hamiltonian(grid, HARM, sig), t).U.matrix
    err = np.linalg.norm(quadratic_propagator(grid, HARM, t) @ C.matrix - U, 2)
    M = m_of_t(grid, HARM, t)
    nrm = sjostrand_norm(sig, u_stride=2)
    tail = dyson_tail_bound(t, M, nrm, 6)
    assert err <= 2 * tail
    for n in range(1, 7):
        assert norms[n] <= 1.25 * t**n / math.factorial(n) * (M * nrm) ** n


def test_dyson_config_validation():
    with pytest.raises(ConfigurationError):
        DysonConfig(n_terms=-1)
    with pytest.raises(ConfigurationError):
        DysonConfig(nodes=0)
    with pytest.raises(ConfigurationError):
        DysonConfig(rule="simpson")


def test_m_of_t(grid):
    vals = [m_of_t(grid, ZERO, t) for t in (0.0, 0.5, 1.0)]
    np.testing.assert_allclose(vals, vals[0], rtol=1e-12)
    assert vals[0] == pytest.approx(4.0, rel=1e-12)
    w = WeightSpec(2.0)
    ms = [m_of_t(grid, HARM, t, w) for t in (0.25, 0.5, 1.0)]
    assert np.all(np.diff(ms) >= -1e-12)
    a, b = m_of_t(grid, HARM, 1.0, w, samples=16), m_of_t(grid, HARM, 1.0, w, samples=32)
    assert np.isfinite(a) and abs(b / a - 1) <= 0.1
    # a shear flow stretches, so M grows
    shear = [m_of_t(grid, FREE, t, w) for t in (0.5, 4.0)]
    assert shear[1] > shear[0]


def test_tail_bound_values():
    assert dyson_tail_bound(1.0, 1.0, 1.0, 0) == pytest.approx(math.e - 1, abs=1e-12)
    assert dyson_tail_bound(1.0, 1.0, 1.0, 2) == pytest.approx(math.e - 2.5, abs=1e-12)
    # full sum: tail after n_terms plus the partial sum is exp(x)
    x = 0.7
    partial = sum(x**n / math.factorial(n) for n in range(4))
    assert dyson_tail_bound(1.0, x, 1.0, 3) + partial == pytest.approx(math.exp(x), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0), st.integers(0, 12))
def test_tail_bound_monotone(x, n):
    a = dyson_tail_bound(1.0, x, 1.0, n)
    b = dyson_tail_bound(1.0, x, 1.0, n + 1)
    assert 0 <= b <= a


def test_extract_bt_free_unperturbed(grid):
    U = oracle_propagator(dense_hamiltonian(grid, FREE), 0.5).U
    bt, rep, _, _ = extract_bt(grid, U, flow(FREE, 0.5))
    v = bt.values
    assert np.abs(np.abs(v) - 1).max() <= 1e-6
    assert np.abs(v / v[0, 0] - 1).max() <= 1e-6


def test_extract_bt_perturbed(grid, bump):
    t = 0.5
    U = oracle_propagator(dense_hamiltonian(grid, HARM, bump), t).U
    bt, rep, _, K = extract_bt(grid, U, flow(HARM, t))
    M, _ = recover_flow(K)
    np.testing.assert_allclose(M, np.eye(2), atol=1e-2)
    ceiling = math.exp(t * m_of_t(grid, HARM, t) * sjostrand_norm(bump, u_stride=2))
    assert sjostrand_norm(bt, u_stride=2) <= 1.5 * ceiling


def test_norm_tracking(grid):
    u0 = gaussian_window(grid)
    ns = track_modulation_norms(grid, ZERO, None, u0, [0.0, 0.5, 1.0], [(2, 0), (2, 2), (1, 1)])
    np.testing.assert_allclose(ns.ratios, 1.0, atol=1e-12)
    ns = track_modulation_norms(grid, HARM, nonsmooth_bump(grid, amp=0.5), u0, np.linspace(0, 1, 5), [(2, 0)])
    np.testing.assert_allclose(ns.ratios, 1.0, atol=1e-6)
    rows = list(ns.rows())
    assert len(rows) == 5 and rows[0][-1] == 1.0
    with pytest.raises(ConfigurationError):
        track_modulation_norms(grid, HARM, None, u0, [0.5, 0.1], [(2, 0)])
