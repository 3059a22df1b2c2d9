"""Fourier integral operators with quadratic phase, metaplectic operators and
Gabor-matrix analysis on the periodized grid (d = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    ConfigurationError,
    PhaseSpaceGrid,
    WeightSpec,
    atoms,
    gaussian_window,
)
from .symplectic import (
    Atom,
    GeneratorWord,
    QuadraticPhase,
    SymplecticMatrix,
    generator_factorization,
    phase_function,
    symplectic_residual,
    validate_symplectic,
)
from .weyl import (
    ControllingProfile,
    OperatorMatrix,
    SymbolGrid,
    _mat,
    _upsample2,
    pullback_symbol,
    weyl_quantize,
    weyl_symbol_of_operator,
)

__all__ = [
    "GaborMatrix",
    "DecayReport",
    "FactorizationResult",
    "IllConditionedError",
    "type1_fio",
    "type2_fio",
    "dft_matrix",
    "atom_operator",
    "word_operator",
    "metaplectic",
    "phase_align",
    "gabor_matrix",
    "decay_profile",
    "graph_mass",
    "recover_flow",
    "factorize",
    "type1_symbol_of_operator",
    "invert_fio",
]

GRAPH_RADII = (1, 2, 4, 8)


class IllConditionedError(ValueError):
    pass


@dataclass(frozen=True)
class GaborMatrix:
    values: np.ndarray  # (size, size), K[w, z]
    grid: PhaseSpaceGrid
    window: np.ndarray
    window_name: str = "gaussian"
    provenance: str = ""

    def __post_init__(self):
        n = self.grid.size
        if self.values.shape != (n, n):
            raise ConfigurationError(f"Gabor matrix shape {self.values.shape} != {(n, n)}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("Gabor matrix has non-finite entries")


@dataclass
class DecayReport:
    H_est: ControllingProfile
    n_fit: float
    fit_residual: float
    l1_mass: float
    graph_mass: dict
    window: str = "gaussian"
    s: float = 0.0
    convention: str = ""
    rounding_radius: float = 0.0

    def to_dict(self) -> dict:
        return {
            "n_fit": self.n_fit,
            "fit_residual": self.fit_residual,
            "l1_mass": self.l1_mass,
            "graph_mass": {f"r{r}": float(v) for r, v in self.graph_mass.items()},
            "window": self.window,
            "s": self.s,
            "convention_flag": self.convention,
        }


@dataclass
class FactorizationResult:
    sigma1: SymbolGrid
    sigma2: SymbolGrid
    reconstruction_residual: float
    sjostrand1: float
    sjostrand2: float
    composition_residual: float
    extra: dict = field(default_factory=dict)


# -- type I / type II ----------------------------------------------------------

def dft_matrix(grid: PhaseSpaceGrid, sign: int = 1) -> np.ndarray:
    """Unitary centered DFT (``sign=+1``) or its inverse (``sign=-1``)."""
    k = np.arange(grid.N) - grid.N // 2
    F = np.exp(-2j * np.pi * np.outer(k, k) / grid.N) / np.sqrt(grid.N)
    return F if sign > 0 else F.conj().T


def _symbol_on_nodes(grid, sigma, eta_nodes):
    """``sigma(x_m, eta)`` at arbitrary ``eta`` nodes via trigonometric interpolation."""
    if sigma is None:
        return 1.0
    if np.isscalar(sigma):
        return complex(sigma)
    base = sigma.base  # (N, N) at (x_m, eta_k)
    if np.array_equal(eta_nodes, grid.eta):
        return base
    N = grid.N
    Leta = N * grid.deta
    coef = np.fft.fft(np.fft.ifftshift(base, axes=1), axis=1) / N
    nu = np.fft.fftfreq(N, 1.0 / N)
    ph = np.exp(2j * np.pi * np.outer(eta_nodes, nu) / Leta)
    ph[:, N // 2] = np.cos(2 * np.pi * eta_nodes * (N // 2) / Leta)
    return coef @ ph.T


def _check_symbol(grid, sigma):
    if isinstance(sigma, SymbolGrid) and sigma.values.shape != (2 * grid.N, grid.N):
        raise ConfigurationError("symbol does not live on this grid")


def type1_fio(grid: PhaseSpaceGrid, phase: QuadraticPhase, sigma: SymbolGrid | complex | None = None,
              oversample: int = 1) -> OperatorMatrix:
    """Quadrature of ``Tf(x) = int exp(2 pi i Phi(x, eta)) sigma(x, eta) fhat(eta) d eta``.

    ``oversample = r`` refines the ``eta`` nodes by ``r`` (``fhat`` is then the
    exact non-uniform DFT of the samples), which pushes the periodic copies of
    the kernel ``r`` times further apart.
    """
    _check_symbol(grid, sigma)
    r = int(oversample)
    if r < 1:
        raise ConfigurationError("oversample must be >= 1")
    N = grid.N
    x = grid.x
    eta = (np.arange(r * N) - r * N // 2) * grid.deta / r
    E = np.exp(2j * np.pi * phase(x[:, None], eta[None, :]))
    S = _symbol_on_nodes(grid, sigma, eta)
    F = np.exp(-2j * np.pi * np.outer(eta, x))
    T = (E * S) @ F * (grid.deta / r) * grid.dx
    return OperatorMatrix(T, "type1")


def type2_fio(grid: PhaseSpaceGrid, phase: QuadraticPhase, tau: SymbolGrid | complex | None = None,
              oversample: int = 1) -> OperatorMatrix:
    """``Tf(x) = int int exp(-2 pi i (Phi(y, eta) - x eta)) tau(y, eta) f(y) dy d eta``."""
    _check_symbol(grid, tau)
    r = int(oversample)
    N = grid.N
    x = grid.x
    eta = (np.arange(r * N) - r * N // 2) * grid.deta / r
    E = np.exp(-2j * np.pi * phase(x[:, None], eta[None, :]))  # [n, k]
    S = _symbol_on_nodes(grid, tau, eta)
    Fx = np.exp(2j * np.pi * np.outer(x, eta))  # [m, k]
    T = Fx @ (E * S).T * (grid.deta / r) * grid.dx
    return OperatorMatrix(T, "type2")


# -- metaplectic operators -----------------------------------------------------

def _shear_params(m: float):
    """``diag(m, 1/m) = U(p) L(q) U(r) L(s)`` with ``U``/``L`` upper/lower unit shears."""
    q = np.sqrt(abs(1.0 / m - 1.0) / abs(m))
    r = (1.0 / m - 1.0) / q
    return -r * m, q, r, -q * m


def atom_operator(grid: PhaseSpaceGrid, atom: Atom) -> np.ndarray:
    x = grid.x
    if atom.kind == "FOURIER":
        return dft_matrix(grid, int(atom.param))
    if atom.kind == "CHIRP":
        c = float(np.atleast_2d(atom.param)[0, 0])
        return np.diag(np.exp(1j * np.pi * c * x * x))
    if atom.kind == "DILATE":
        m = float(np.atleast_2d(atom.param)[0, 0])
        out = np.eye(grid.N, dtype=complex)
        if m < 0:
            out = out[(-np.arange(grid.N)) % grid.N]  # f(-x) realizes -I
            m = -m
        if m != 1.0:
            # contract with four shears; expansions go through the Fourier side,
            # which keeps intermediate states narrower
            mm = m if m < 1 else 1.0 / m
            p, q, r, s = _shear_params(mm)
            F, Fi = dft_matrix(grid, 1), dft_matrix(grid, -1)

            def upper(P):
                return Fi @ np.diag(np.exp(-1j * np.pi * P * x * x)) @ F

            def lower(C):
                return np.diag(np.exp(1j * np.pi * C * x * x))

            D = upper(p) @ lower(q) @ upper(r) @ lower(s)
            out = out @ (D if m < 1 else F @ D @ Fi)
        return out
    raise ConfigurationError(f"unknown atom {atom.kind!r}")


def word_operator(grid: PhaseSpaceGrid, word: GeneratorWord) -> np.ndarray:
    if word.d != 1:
        raise ConfigurationError("operators are implemented for d = 1 only")
    U = np.eye(grid.N, dtype=complex)
    for atom in word.atoms:
        U = U @ atom_operator(grid, atom)
    return U


def metaplectic(grid: PhaseSpaceGrid, S, method: str = "generators", oversample: int | None = None
                ) -> OperatorMatrix:
    """Metaplectic operator ``mu(S)``, up to a global unimodular constant.

    ``method='generators'`` multiplies exactly unitary Fourier, chirp and shear
    atoms.  ``method='type1'`` uses the quadratic-phase representation (needs an
    invertible upper-left block) with normalization ``|det A|^(-1/2)``.
    """
    S = S if isinstance(S, SymplecticMatrix) else validate_symplectic(S)
    if not grid.is_square:
        raise ConfigurationError("metaplectic operators need dx == deta (L = sqrt(N))")
    if method == "generators":
        return OperatorMatrix(word_operator(grid, generator_factorization(S)), "metaplectic")
    if method == "type1":
        phase = phase_function(S)
        a = abs(phase.det_source)
        if oversample is None:
            oversample = max(1, int(np.ceil(2.0 / min(a, 1.0))))
        T = type1_fio(grid, phase, None, oversample).matrix / np.sqrt(a)
        return OperatorMatrix(T, "metaplectic")
    raise ConfigurationError(f"unknown method {method!r}")


def phase_align(T: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Multiply ``T`` by the unimodular constant matching ``ref`` at ``ref``'s largest entry."""
    i = np.unravel_index(np.argmax(np.abs(ref)), ref.shape)
    c = ref[i] / T[i]
    return T * (c / abs(c))


# -- Gabor matrices ------------------------------------------------------------

def gabor_matrix(T, g: np.ndarray | None = None, grid: PhaseSpaceGrid | None = None,
                 window_name: str = "gaussian", provenance: str = "") -> GaborMatrix:
    """``K[w, z] = <T pi(z) g, pi(w) g>`` over all lattice pairs."""
    M = _mat(T)
    if grid is None:
        raise ConfigurationError("a grid carrying the lattice is required")
    g = gaussian_window(grid) if g is None else np.asarray(g)
    norm = np.sqrt(np.sum(np.abs(g) ** 2) * grid.dx)
    if abs(norm - 1) > 1e-8:
        raise ConfigurationError(f"window must have unit norm, got {norm:.6f}")
    G = atoms(grid, g)  # rows pi(z) g
    K = (G.conj() @ (M @ G.T)) * grid.dx
    return GaborMatrix(K, grid, g, window_name, provenance or getattr(T, "tag", ""))


def _lattice_index(grid, u):
    """Nearest lattice index (flat, centred layout) of wrapped points ``u``."""
    u = grid.wrap(u)
    n0, n1 = grid.shape
    p = (np.rint(u[..., 0] / grid.a).astype(int) + n0 // 2) % n0
    q = (np.rint(u[..., 1] / grid.b).astype(int) + n1 // 2) % n1
    return p * n1 + q


def graph_mass(K: GaborMatrix, S, radii=GRAPH_RADII, columns: np.ndarray | None = None) -> dict:
    """Fraction of ``sum |K|^2`` within ``r`` cells (of side ``sqrt(ab)``) of ``w = S z``."""
    grid = K.grid
    M = np.asarray(S, dtype=float)
    pts = grid.points
    dist = np.linalg.norm(grid.wrap(pts[:, None, :] - (pts @ M.T)[None, :, :]), axis=-1)
    dist /= np.sqrt(grid.cell)
    P = np.abs(K.values) ** 2
    if columns is not None:
        P = P[:, columns]
        dist = dist[:, columns]
    tot = P.sum()
    return {r: float(P[dist <= r].sum() / tot) for r in radii}


def decay_profile(K: GaborMatrix, S, w: WeightSpec | None = None, convention: str = "",
                  fit_range: tuple[float, float] | None = None, interior: float | None = 0.5
                  ) -> DecayReport:
    """Envelope of ``|K[w, z]|`` as a function of ``w - S z`` and its decay order.

    ``S z`` is rounded to the nearest lattice point; ``H_est`` at each wrapped
    difference is the largest ``|K|`` falling in that bin.  ``n_fit`` is minus the
    slope of ``log H_est`` against ``log <u>`` over ``2 <= |u| / cell <= R / 2``.

    Only columns with ``z`` and ``S z`` in the central ``interior`` fraction of
    the torus enter (``None`` keeps all): elsewhere the seam of non-periodic
    chirps and wrapped images contaminate the envelope.
    """
    w = w or WeightSpec(0.0)
    grid = K.grid
    M = np.asarray(S, dtype=float)
    pts = grid.points
    img = pts @ M.T
    img_r = np.stack([np.rint(img[:, 0] / grid.a) * grid.a, np.rint(img[:, 1] / grid.b) * grid.b], axis=1)
    rounding = float(np.max(np.linalg.norm(grid.wrap(img - img_r), axis=1)))
    if interior is None:
        cols = np.ones(grid.size, bool)
    else:
        half = 0.25 * grid.L * interior * 2
        cols = grid.interior(interior) & np.all(np.abs(img) <= half + 1e-12, axis=1)
    bins = _lattice_index(grid, pts[:, None, :] - img_r[None, cols, :])
    H = np.zeros(grid.size)
    np.maximum.at(H, bins.ravel(), np.abs(K.values[:, cols]).ravel())
    H = H.reshape(grid.shape)

    u = pts  # bin centres, same layout as H
    cells = np.hypot(u[:, 0] / grid.a, u[:, 1] / grid.b)
    R = min(grid.shape) / 2
    lo, hi = fit_range or (2.0, R / 2)
    sel = (cells >= lo) & (cells <= hi) & (H.ravel() > 0)
    hv = H.ravel()[sel]
    xs = np.log(np.sqrt(1 + np.sum(u[sel] ** 2, axis=1)))
    ys = np.log(hv)
    if sel.sum() >= 3:
        A = np.stack([xs, np.ones_like(xs)], axis=1)
        coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
        n_fit = float(-coef[0])
        fit_res = float(np.sqrt(np.mean((A @ coef - ys) ** 2)))
    else:
        n_fit, fit_res = float("nan"), float("nan")
    l1 = float(np.sum(H.ravel() * w(u)) * grid.cell)
    prof = ControllingProfile(grid, H, w.s, l1, truncation_radius=R * np.sqrt(grid.cell))
    gm = graph_mass(K, M, columns=None if interior is None else cols)
    return DecayReport(prof, n_fit, fit_res, l1, gm, K.window_name, w.s, convention, rounding)


def recover_flow(K: GaborMatrix, interior: float = 0.4, core: float = 0.25):
    """Weighted least-squares estimate of the symplectic map a Gabor matrix follows.

    Each column ``z`` is represented by the lattice neighbourhood of its
    largest entry, unwrapped around a first estimate obtained from the
    central columns; columns whose image leaves the central region are
    dropped.  Returns ``(M, residual)`` with residual ``||M^T J M - J||_F``.
    """
    grid = K.grid
    pts = grid.points
    P = np.abs(K.values) ** 2
    if P.sum() <= 0:
        raise ConfigurationError("Gabor matrix vanishes")

    def solve(cols, guess):
        Swz = np.zeros((2, 2))
        Szz = np.zeros((2, 2))
        for c in np.flatnonzero(cols):
            z = pts[c]
            peak = pts[np.argmax(P[:, c])]
            if guess is not None:
                peak = guess @ z + grid.wrap(peak - guess @ z)
            wv = peak + grid.wrap(pts - peak)
            wt = P[:, c]
            Swz += (wt[:, None] * wv).T @ np.broadcast_to(z, wv.shape)
            Szz += wt.sum() * np.outer(z, z)
        if abs(np.linalg.det(Szz)) < 1e-14 * max(1.0, np.abs(Szz).max()) ** 2:
            raise np.linalg.LinAlgError("singular moment matrix")
        return Swz @ np.linalg.inv(Szz)

    M0 = solve(grid.interior(core), None)
    half = 0.5 * grid.L * interior
    cols = grid.interior(interior) & np.all(np.abs(pts @ M0.T) <= half, axis=1)
    M = solve(cols, M0)
    return M, symplectic_residual(M)


# -- factorizations and inverses -----------------------------------------------

def factorize(grid: PhaseSpaceGrid, T, S, method: str = "generators") -> FactorizationResult:
    """Split ``T = sigma1^w mu(S) = mu(S) sigma2^w`` and check ``sigma2 = sigma1 o S``."""
    from .weyl import sjostrand_norm

    S = S if isinstance(S, SymplecticMatrix) else validate_symplectic(S)
    Tm = _mat(T)
    mu = metaplectic(grid, S, method).matrix
    mui = mu.conj().T
    s1 = weyl_symbol_of_operator(Tm @ mui, grid)
    s2 = weyl_symbol_of_operator(mui @ Tm, grid)
    rec = weyl_quantize(grid, s1).matrix @ mu - Tm
    recon = float(np.abs(rec).max() / max(np.abs(Tm).max(), 1e-300))
    pulled = pullback_symbol(s1, S.matrix)
    comp = float(np.abs(pulled.values - s2.values).max() / max(np.abs(s2.values).max(), 1e-300))
    return FactorizationResult(s1, s2, recon, sjostrand_norm(s1, u_stride=2), sjostrand_norm(s2, u_stride=2), comp)


def type1_symbol_of_operator(grid: PhaseSpaceGrid, T, phase: QuadraticPhase) -> SymbolGrid:
    """Symbol ``sigma`` with ``type1_fio(phase, sigma) = T`` (exact on the base grid)."""
    Tm = _mat(T)
    F = np.exp(-2j * np.pi * np.outer(grid.eta, grid.x))
    base = (Tm @ F.conj().T) * np.exp(-2j * np.pi * phase(grid.x[:, None], grid.eta[None, :]))
    return SymbolGrid(grid, _upsample2(base))


def invert_fio(grid: PhaseSpaceGrid, T, S, g: np.ndarray | None = None, w: WeightSpec | None = None,
               max_cond: float = 1e8):
    """Dense inverse of ``T`` with a decay report against ``S^-1``.

    Returns ``(T_inv, report, info)``; ``info`` holds the condition number and,
    when ``S`` has an invertible upper-left block, the residual of writing
    ``T_inv`` as a type-II operator with the phase of ``S``.
    """
    S = S if isinstance(S, SymplecticMatrix) else validate_symplectic(S)
    Tm = _mat(T)
    cond = float(np.linalg.cond(Tm))
    if not np.isfinite(cond) or cond > max_cond:
        raise IllConditionedError(f"condition number {cond:.3e} exceeds {max_cond:.1e}")
    Ti = np.linalg.inv(Tm)
    K = gabor_matrix(Ti, g, grid, provenance="inverse")
    report = decay_profile(K, S.inverse().matrix, w)
    info = {"cond": cond}
    if abs(np.linalg.det(S.A)) > 1e-6:
        phase = phase_function(S)
        # T_inv = type2(Phi, tau)  <=>  T_inv^* = type1(Phi, conj tau)
        sig = type1_symbol_of_operator(grid, Ti.conj().T, phase)
        tau = sig.conj()
        fit = type2_fio(grid, phase, tau).matrix
        info["type2_residual"] = float(np.abs(fit - Ti).max() / np.abs(Ti).max())
        info["tau"] = tau
    return OperatorMatrix(Ti, "inverse"), report, info
