import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpk.fio import (
    IllConditionedError,
    decay_profile,
    dft_matrix,
    factorize,
    gabor_matrix,
    invert_fio,
    metaplectic,
    phase_align,
    recover_flow,
    type1_fio,
    type2_fio,
)
from mpk.lattice import ConfigurationError, atoms, gaussian_window, make_grid, tf_shift
from mpk.schrodinger import quadratic_propagator
from mpk.symplectic import (
    QuadraticHamiltonian,
    QuadraticPhase,
    SingularBlockError,
    admissible_symplectic,
    flow,
    phase_function,
    random_symplectic,
    standard_j,
)
from mpk.weyl import SymbolGrid, gaussian_bump, pullback_symbol, symbol_from_function, weyl_quantize


@pytest.fixture(scope="module")
def grid():
    return make_grid(1, 64, lattice_stride=(2, 2))


@pytest.fixture(scope="module")
def S1():
    return admissible_symplectic(np.random.default_rng(1), 1)[0]


def test_type1_identity_phase(grid):
    ident = QuadraticPhase.identity()
    np.testing.assert_allclose(type1_fio(grid, ident).matrix, np.eye(64), atol=1e-10)
    phi = np.cos(2 * np.pi * grid.x / grid.L)
    sig = symbol_from_function(grid, lambda X, E: np.cos(2 * np.pi * X / grid.L) + 0 * E)
    np.testing.assert_allclose(type1_fio(grid, ident, sig).matrix, np.diag(phi), atol=1e-10)


@pytest.mark.parametrize("t", [0.5, 1.0])
def test_type1_free_propagator(grid, t):
    free = QuadraticHamiltonian.preset("free")
    T = type1_fio(grid, phase_function(flow(free, t))).matrix
    assert np.abs(T.conj().T @ T - np.eye(64)).max() <= 1e-8
    U = quadratic_propagator(grid, free, t)
    assert np.abs(phase_align(T, U) - U).max() <= 1e-8


def test_type2_contracts(grid):
    np.testing.assert_allclose(type2_fio(grid, QuadraticPhase.identity()).matrix, np.eye(64), atol=1e-10)
    rng = np.random.default_rng(0)
    sig = SymbolGrid(grid, rng.normal(size=(128, 64)) + 1j * rng.normal(size=(128, 64)))
    ph = phase_function(np.array([[1.0, 0.3], [0.2, 1.06]]))
    assert np.abs(type2_fio(grid, ph, sig.conj()).matrix - type1_fio(grid, ph, sig).matrix.conj().T).max() <= 1e-10
    free = phase_function(flow(QuadraticHamiltonian.preset("free"), 1.0))
    np.testing.assert_allclose(type2_fio(grid, free).matrix, type1_fio(grid, free).matrix.conj().T, atol=1e-12)


def test_metaplectic_identity(grid):
    U = metaplectic(grid, np.eye(2)).matrix
    assert np.abs(phase_align(U, np.eye(64)) - np.eye(64)).max() <= 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_metaplectic_unitary(seed):
    grid = make_grid(1, 32)
    U = metaplectic(grid, random_symplectic(1, np.random.default_rng(seed), 0.6)).matrix
    assert np.abs(U.conj().T @ U - np.eye(32)).max() <= 1e-8


def test_metaplectic_homomorphism_on_atoms(grid):
    # exact for Fourier atoms and shears
    F = metaplectic(grid, -standard_j(1)).matrix
    np.testing.assert_allclose(F, dft_matrix(grid), atol=1e-12)
    sh = np.array([[1.0, 0.0], [1.0, 1.0]])
    A, B = metaplectic(grid, sh).matrix, metaplectic(grid, sh @ sh).matrix
    np.testing.assert_allclose(phase_align(A @ A, B), B, atol=1e-12)


def test_type1_path_matches_generators():
    grid = make_grid(1, 128, lattice_stride=(4, 4))
    G = atoms(grid, gaussian_window(grid))[grid.interior(0.3)].T
    for S in admissible_symplectic(np.random.default_rng(7), 3):
        U1 = metaplectic(grid, S).matrix @ G
        U2 = phase_align(metaplectic(grid, S, "type1").matrix @ G, U1)
        assert np.abs(U1 - U2).max() / np.abs(U1).max() <= 1e-6


def test_type1_path_singular_block(grid):
    with pytest.raises(SingularBlockError):
        metaplectic(grid, standard_j(1), "type1")


def test_dft_flow_sign(grid):
    M, _ = recover_flow(gabor_matrix(dft_matrix(grid), None, grid))
    # the centered DFT realizes -J = [[0, 1], [-1, 0]]
    np.testing.assert_allclose(M, -standard_j(1), atol=1e-3)


def test_gabor_identity(grid):
    K = gabor_matrix(np.eye(64), None, grid).values
    assert np.all(np.argmax(np.abs(K), axis=0) == np.arange(grid.size))
    np.testing.assert_allclose(np.diag(K), 1.0, atol=1e-12)


def test_gabor_shift(grid):
    z0 = grid.points[grid.size // 2 + 3 * grid.shape[1] + 2]
    T = np.stack([tf_shift(grid, z0, e) for e in np.eye(64)], axis=1)
    K = gabor_matrix(T, None, grid).values
    pts = grid.points
    target = grid.wrap(pts + z0)
    hit = pts[np.argmax(np.abs(K), axis=0)]
    np.testing.assert_allclose(grid.wrap(hit - target), 0, atol=1e-9)


def test_gabor_requires_grid_and_unit_window(grid):
    with pytest.raises(ConfigurationError):
        gabor_matrix(np.eye(64))
    with pytest.raises(ConfigurationError):
        gabor_matrix(np.eye(64), 2 * gaussian_window(grid), grid)


def test_decay_identity():
    grid = make_grid(1, 128, lattice_stride=(4, 4))
    rep = decay_profile(gabor_matrix(np.eye(128), None, grid), np.eye(2))
    assert rep.n_fit >= 6
    assert np.all(rep.H_est.values >= 0)
    masses = [rep.graph_mass[r] for r in sorted(rep.graph_mass)]
    assert np.all(np.diff(masses) >= 0)
    d = rep.to_dict()
    assert set(d) == {"n_fit", "fit_residual", "l1_mass", "graph_mass", "window", "s", "convention_flag"}
    assert set(d["graph_mass"]) == {"r1", "r2", "r4", "r8"}


def test_decay_wrong_graph(grid):
    rep = decay_profile(gabor_matrix(np.eye(64), None, grid), standard_j(1))
    assert rep.graph_mass[1] < 0.1


def test_recover_flow(grid):
    M, res = recover_flow(gabor_matrix(np.eye(64), None, grid))
    np.testing.assert_allclose(M, np.eye(2), atol=1e-6)
    shear = np.array([[1.0, 1.0], [0.0, 1.0]])
    M, _ = recover_flow(gabor_matrix(metaplectic(grid, shear), None, grid))
    np.testing.assert_allclose(M, shear, atol=1e-3)


def test_recover_flow_product(grid):
    S1, S2 = admissible_symplectic(np.random.default_rng(11), 2, max_norm=1.3)
    T = metaplectic(grid, S1).matrix @ metaplectic(grid, S2).matrix
    M, _ = recover_flow(gabor_matrix(T, None, grid))
    np.testing.assert_allclose(M, S1.matrix @ S2.matrix, atol=1e-3)


def test_factorize_self(grid, S1):
    res = factorize(grid, metaplectic(grid, S1), S1)
    v = res.sigma1.values
    assert np.abs(v / v[0, 0] - 1).max() <= 1e-6
    assert abs(abs(v[0, 0]) - 1) <= 1e-6


def test_factorize_forward(grid, S1):
    sig = gaussian_bump(grid, (0.3, 0.1), 1.0, 0.3)
    T = weyl_quantize(grid, sig).matrix @ metaplectic(grid, S1).matrix
    res = factorize(grid, T, S1)
    assert np.abs(res.sigma1.values - sig.values).max() <= 1e-6
    assert np.abs(res.sigma2.values - pullback_symbol(sig, S1.matrix).values).max() <= 1e-4
    assert res.reconstruction_residual <= 1e-10


def test_factorize_identity(grid):
    res = factorize(grid, np.eye(64), np.eye(2))
    np.testing.assert_allclose(res.sigma1.values, 1.0, atol=1e-12)
    np.testing.assert_allclose(res.sigma2.values, 1.0, atol=1e-12)


def test_invert_metaplectic(grid, S1):
    mu = metaplectic(grid, S1).matrix
    Ti, rep, info = invert_fio(grid, mu, S1)
    np.testing.assert_allclose(Ti.matrix, mu.conj().T, atol=1e-10)
    assert rep.graph_mass[4] > 0.9
    assert info["type2_residual"] <= 1e-10
    Ti, _, _ = invert_fio(grid, np.eye(64), np.eye(2))
    np.testing.assert_allclose(Ti.matrix, np.eye(64), atol=1e-12)


def test_invert_decay_order(S1):
    grid = make_grid(1, 64, lattice_stride=(4, 4))
    sig = SymbolGrid.constant(grid, 1.0) + gaussian_bump(grid, (0.3, 0.1), 1.0, 0.2)
    T = weyl_quantize(grid, sig).matrix @ metaplectic(grid, S1).matrix
    fwd = decay_profile(gabor_matrix(T, None, grid), S1.matrix).n_fit
    _, rep, _ = invert_fio(grid, T, S1)
    assert abs(rep.n_fit - fwd) <= 1


def test_invert_ill_conditioned(grid):
    T = np.eye(64)
    T[0, 0] = 1e-12
    with pytest.raises(IllConditionedError):
        invert_fio(grid, T, np.eye(2))
