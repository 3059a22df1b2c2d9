"""Weyl and Kohn-Nirenberg quantization on the periodized grid.

Symbols are sampled on a spatially doubled grid: ``X_j = (j - N) dx / 2`` for
``j in 0..2N-1`` and ``eta_k`` as on the base grid, so every midpoint
``(x_m + x_n) / 2`` is a sample point.  Midpoints are taken the short way
round the torus; for ``|x_m - x_n| < L/2`` this is the ordinary midpoint.

Internally both quantizations go through the partial inverse DFT in ``eta``,

    kappa[j, d] = (1/N) sum_k sigma[j, k] exp(2 pi i d (k - N/2) / N),

with ``d = m - n`` wrapped into ``[-N/2, N/2)``.  A Weyl kernel entry is
``kappa`` at the midpoint of ``(m, n)``; the Nyquist offset ``d = -N/2`` has two
equally short midpoints and takes their average, which keeps real symbols
Hermitian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (
    ConfigurationError,
    PhaseSpaceGrid,
    WeightSpec,
    centered_dft,
    centered_idft,
    gaussian_window,
)

__all__ = [
    "SymbolGrid",
    "OperatorMatrix",
    "ControllingProfile",
    "symbol_coords",
    "symbol_from_function",
    "gaussian_bump",
    "cosine_potential",
    "nonsmooth_bump",
    "symbol_preset",
    "weyl_quantize",
    "kn_quantize",
    "weyl_to_kn",
    "weyl_symbol_of_operator",
    "shear_symbol_u1",
    "stretch_symbol_u2",
    "conjugate_symbol_through_phase",
    "pullback_symbol",
    "wigner",
    "symbol_stft_sup",
    "sjostrand_norm",
    "controlling_function",
]


@dataclass(frozen=True)
class SymbolGrid:
    grid: PhaseSpaceGrid
    values: np.ndarray  # shape (2N, N)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (2 * self.grid.N, self.grid.N):
            raise ConfigurationError(f"symbol shape {v.shape} != {(2 * self.grid.N, self.grid.N)}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("symbol has non-finite entries")
        object.__setattr__(self, "values", v)

    def _new(self, values):
        return SymbolGrid(self.grid, values)

    def __add__(self, other):
        other = other.values if isinstance(other, SymbolGrid) else other
        return self._new(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        other = other.values if isinstance(other, SymbolGrid) else other
        return self._new(self.values - other)

    def __mul__(self, c):
        c = c.values if isinstance(c, SymbolGrid) else c
        return self._new(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.values)

    def conj(self):
        return self._new(self.values.conj())

    @property
    def base(self) -> np.ndarray:
        """Samples at the base grid positions ``x_m``, shape ``(N, N)``."""
        return self.values[::2]

    @classmethod
    def constant(cls, grid, c=1.0):
        return cls(grid, np.full((2 * grid.N, grid.N), c, dtype=complex))


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    tag: str = "composite"

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.matrix @ other.matrix, "composite")
        return self.matrix @ other

    @property
    def H(self) -> "OperatorMatrix":
        return OperatorMatrix(self.matrix.conj().T, self.tag)


@dataclass(frozen=True)
class ControllingProfile:
    """Envelope ``H(u)`` on the torus-wrapped difference lattice."""

    grid: PhaseSpaceGrid
    values: np.ndarray  # lattice shape, centred like grid.points
    s: float
    weighted_l1: float
    truncation_radius: float

    def at(self, u: np.ndarray) -> np.ndarray:
        """Look up ``H`` at (wrapped) lattice differences ``u``, shape ``(..., 2)``."""
        g = self.grid
        u = g.wrap(np.asarray(u, dtype=float))
        p = np.rint(u[..., 0] / g.a).astype(int) % g.shape[0]
        q = np.rint(u[..., 1] / g.b).astype(int) % g.shape[1]
        p = (p + g.shape[0] // 2) % g.shape[0]
        q = (q + g.shape[1] // 2) % g.shape[1]
        return self.values[p, q]


def _mat(T) -> np.ndarray:
    return np.asarray(T.matrix if isinstance(T, OperatorMatrix) else T)


# -- symbol construction -------------------------------------------------------

def symbol_coords(grid: PhaseSpaceGrid):
    X = (np.arange(2 * grid.N) - grid.N) * grid.dx / 2
    return np.meshgrid(X, grid.eta, indexing="ij")


def symbol_from_function(grid: PhaseSpaceGrid, fn) -> SymbolGrid:
    X, E = symbol_coords(grid)
    return SymbolGrid(grid, np.broadcast_to(fn(X, E), X.shape).astype(complex))


def _torus(grid, t):
    return (t + grid.L / 2) % grid.L - grid.L / 2


def gaussian_bump(grid, center=(0.0, 0.0), width=1.0, amp=1.0) -> SymbolGrid:
    """``amp * exp(-pi |z - center|^2 / width^2)`` on the phase-space torus."""
    c0, c1 = center
    Leta = grid.N * grid.deta

    def fn(X, E):
        dx = (X - c0 + grid.L / 2) % grid.L - grid.L / 2
        de = (E - c1 + Leta / 2) % Leta - Leta / 2
        return amp * np.exp(-np.pi * (dx**2 + de**2) / width**2)

    return symbol_from_function(grid, fn)


def cosine_potential(grid, amp=1.0, k=1) -> SymbolGrid:
    """``amp * cos(2 pi k x / L)``, frequency independent."""
    return symbol_from_function(grid, lambda X, E: amp * np.cos(2 * np.pi * k * X / grid.L) + 0 * E)


def nonsmooth_bump(grid, amp=1.0, width=1.5) -> SymbolGrid:
    """``V(x) = bump(x) (1 - |sin(2 pi x / L)|)``: bounded, kinked, frequency independent."""

    def fn(X, E):
        bump = np.exp(-np.pi * X**2 / width**2)
        return amp * bump * (1 - np.abs(np.sin(2 * np.pi * X / grid.L))) + 0 * E

    return symbol_from_function(grid, fn)


def symbol_preset(grid, spec: str) -> SymbolGrid:
    """Parse ``"name key=value ..."``, e.g. ``"gaussian_bump center=0,0 width=1 amp=0.2"``."""
    name, *rest = spec.split()
    kw = {}
    for tok in rest:
        key, _, val = tok.partition("=")
        kw[key] = tuple(float(v) for v in val.split(",")) if "," in val else float(val)
    if name == "gaussian_bump":
        return gaussian_bump(grid, **kw)
    if name == "cosine_potential":
        if "k" in kw:
            kw["k"] = int(kw["k"])
        return cosine_potential(grid, **kw)
    if name == "nonsmooth_bump":
        return nonsmooth_bump(grid, **kw)
    if name == "zero":
        return SymbolGrid.constant(grid, 0.0)
    if name == "one":
        return SymbolGrid.constant(grid, 1.0)
    raise ConfigurationError(f"unknown symbol preset {name!r}")


# -- quantization --------------------------------------------------------------

def _kappa(sigma: SymbolGrid) -> np.ndarray:
    # column d + N/2 holds offset d
    return centered_idft(sigma.values, axis=1)


def _offsets(N):
    m = np.arange(N)[:, None]
    n = np.arange(N)[None, :]
    d = (m - n + N // 2) % N - N // 2
    return m, n, d


def _weyl_from_kappa(kappa: np.ndarray, N: int) -> np.ndarray:
    m, n, d = _offsets(N)
    j = (2 * n + d) % (2 * N)
    K = kappa[j, d + N // 2]
    nyq = d == -N // 2
    jn = (2 * n + N // 2) % (2 * N)
    K = np.where(nyq, 0.5 * (K + kappa[jn, 0]), K)
    return K


def weyl_quantize(grid: PhaseSpaceGrid, sigma: SymbolGrid) -> OperatorMatrix:
    if sigma.values.shape != (2 * grid.N, grid.N):
        raise ConfigurationError("symbol does not live on this grid")
    return OperatorMatrix(_weyl_from_kappa(_kappa(sigma), grid.N), "weyl")


def kn_quantize(grid: PhaseSpaceGrid, sigma: SymbolGrid) -> OperatorMatrix:
    if sigma.values.shape != (2 * grid.N, grid.N):
        raise ConfigurationError("symbol does not live on this grid")
    N = grid.N
    kappa = _kappa(sigma)
    m, n, d = _offsets(N)
    return OperatorMatrix(kappa[2 * m, d + N // 2], "kn")


def weyl_to_kn(sigma: SymbolGrid) -> SymbolGrid:
    """Weyl symbol -> Kohn-Nirenberg symbol of the same operator.

    In the 2-D Fourier domain this is multiplication by a chirp in the two dual
    variables; the Nyquist offset uses its cosine (the average of both signs).
    """
    N = sigma.grid.N
    kappa_hat = np.fft.fft(_kappa(sigma), axis=0)
    nu = np.fft.fftfreq(2 * N, 1.0 / (2 * N))[:, None]
    d = (np.arange(N) - N // 2)[None, :]
    chirp = np.exp(-1j * np.pi * nu * d / N)
    chirp[:, 0] = np.cos(np.pi * nu[:, 0] / 2)
    kappa_kn = np.fft.ifft(kappa_hat * chirp, axis=0)
    return SymbolGrid(sigma.grid, centered_dft(kappa_kn, axis=1))


def _upsample2(c: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation of a periodic sequence onto the twice-finer grid."""
    N = c.shape[0]
    C = np.fft.fft(c, axis=0)
    P = np.zeros((2 * N,) + c.shape[1:], dtype=complex)
    h = N // 2
    P[:h] = C[:h]
    P[-h + 1 :] = C[h + 1 :]
    P[h] = 0.5 * C[h]
    P[-h] = 0.5 * C[h]
    return 2 * np.fft.ifft(P, axis=0)


def weyl_symbol_of_operator(T, grid: PhaseSpaceGrid | None = None) -> SymbolGrid:
    """Left inverse of :func:`weyl_quantize` on symbols band-limited in ``x``.

    Each kernel offset ``d`` only samples every other point of the doubled grid;
    the missing half is filled by trigonometric interpolation along ``x``.
    Weyl kernels have an ``N/2``-periodic Nyquist diagonal ``T[n - N/2, n]``; for
    other operators that diagonal is replaced by its periodic average, so
    ``weyl_quantize`` of the result is the orthogonal projection of ``T`` onto
    the Weyl range.
    """
    K = _mat(T)
    N = K.shape[0]
    if grid is None:
        from .lattice import make_grid

        grid = make_grid(1, N)
    n = np.arange(N)
    kappa = np.empty((2 * N, N), dtype=complex)
    for d in range(-N // 2, N // 2):
        c = K[(n + d) % N, n]  # position x_n + d dx / 2, i.e. doubled index 2n + d
        if d == -N // 2:
            c = 0.5 * (c + np.roll(c, -N // 2))
        kappa[:, d + N // 2] = np.roll(_upsample2(c), d)
    return SymbolGrid(grid, centered_dft(kappa, axis=1))


# -- symbol transforms ---------------------------------------------------------

def _resample_eta(values: np.ndarray, grid: PhaseSpaceGrid, new_eta: np.ndarray) -> np.ndarray:
    """Evaluate each row's periodic trig interpolant at ``new_eta`` (same shape)."""
    N = grid.N
    Leta = N * grid.deta
    coef = np.fft.fft(np.fft.ifftshift(values, axes=1), axis=1) / N  # sample k <-> eta_k
    nu = np.fft.fftfreq(N, 1.0 / N)
    # samples sit at eta = (k - N/2) deta; after ifftshift index 0 is eta = 0
    ph = np.exp(2j * np.pi * new_eta[..., None] * nu / Leta)
    nyq = N // 2
    ph[..., nyq] = np.cos(2 * np.pi * new_eta * nyq / Leta)
    return np.einsum("jn,jkn->jk", coef, ph)


def shear_symbol_u1(sigma: SymbolGrid, A_mat) -> SymbolGrid:
    """``(U1 sigma)(x, eta) = sigma(x, eta + A x)``."""
    a = float(np.atleast_2d(A_mat)[0, 0])
    if a == 0:
        return sigma
    X, E = symbol_coords(sigma.grid)
    return SymbolGrid(sigma.grid, _resample_eta(sigma.values, sigma.grid, E + a * X))


def stretch_symbol_u2(sigma: SymbolGrid, B_mat) -> SymbolGrid:
    """``(U2 sigma)(x, eta) = sigma(x, B^T eta)``."""
    b = float(np.atleast_2d(B_mat)[0, 0])
    if abs(b) < 1e-8:
        raise ConfigurationError(f"|det B| = {abs(b):.2e} too small")
    if b == 1:
        return sigma
    X, E = symbol_coords(sigma.grid)
    return SymbolGrid(sigma.grid, _resample_eta(sigma.values, sigma.grid, b * E))


def conjugate_symbol_through_phase(sigma: SymbolGrid, phase) -> SymbolGrid:
    """Symbol ``sigma~`` with ``sigma^w T(Phi, 1) = T(Phi, sigma~)`` for type-I ``T``.

    Composite of the x-quadratic shear, the Weyl-to-KN map and the stretch by
    the mixed block of the phase.
    """
    Q1 = np.atleast_2d(phase.Q1)
    Q2 = np.atleast_2d(phase.Q2)
    if abs(np.linalg.det(Q2)) < 1e-8:
        raise ConfigurationError("phase has a singular mixed block")
    s1 = shear_symbol_u1(sigma, 0.5 * (Q1 + Q1.T))
    return stretch_symbol_u2(weyl_to_kn(s1), Q2.T)


def pullback_symbol(sigma: SymbolGrid, M) -> SymbolGrid:
    """``sigma o M`` for a 2x2 matrix ``M`` by 2-D trigonometric interpolation.

    Points mapped outside the torus wrap around; callers keep ``sigma``
    localized.
    """
    grid = sigma.grid
    M = np.asarray(M, dtype=float)
    X, E = symbol_coords(grid)
    Xn = M[0, 0] * X + M[0, 1] * E
    En = M[1, 0] * X + M[1, 1] * E
    N = grid.N
    Leta = N * grid.deta
    coef = np.fft.fft2(np.fft.ifftshift(sigma.values)) / (2 * N * N)
    nux = np.fft.fftfreq(2 * N, 1.0 / (2 * N)) / grid.L
    nue = np.fft.fftfreq(N, 1.0 / N) / Leta
    # symmetric Nyquist handling: cosine on the Nyquist lines
    ex = np.exp(2j * np.pi * Xn.ravel()[:, None] * nux[None, :])
    ex[:, N] = np.cos(2 * np.pi * Xn.ravel() * nux[N] * -1)
    ee = np.exp(2j * np.pi * En.ravel()[:, None] * nue[None, :])
    ee[:, N // 2] = np.cos(2 * np.pi * En.ravel() * nue[N // 2] * -1)
    out = np.einsum("pa,ab,pb->p", ex, coef, ee, optimize=True)
    return SymbolGrid(grid, out.reshape(X.shape))


# -- Sjostrand-class estimators -----------------------------------------------

def wigner(grid: PhaseSpaceGrid, g: np.ndarray, f: np.ndarray | None = None) -> np.ndarray:
    """Discrete cross-Wigner distribution ``W(g, f)`` on the symbol grid.

    ``W(x, eta) = sum_y g(x + y/2) conj f(x - y/2) exp(-2 pi i y eta) 2 dx``; the
    factor 2 compensates for the parity restriction on ``y`` at each midpoint.
    """
    f = g if f is None else f
    N = grid.N
    m, n, d = _offsets(N)
    j = (2 * n + d) % (2 * N)
    kap = np.zeros((2 * N, N), dtype=complex)
    kap[j, d + N // 2] = g[m] * np.conj(f[n])
    return 2 * grid.dx * centered_dft(kap, axis=1)


def _analytic_wigner_gaussian(grid: PhaseSpaceGrid) -> np.ndarray:
    """``W(g, g)`` of the unit Gaussian ``2^(1/4) exp(-pi x^2)``: ``2^(1/2) exp(-2 pi |z|^2)``."""
    X, E = symbol_coords(grid)
    Leta = grid.N * grid.deta
    out = np.zeros(X.shape)
    for n in range(-3, 4):
        for k in range(-3, 4):
            out += np.exp(-2 * np.pi * ((X + n * grid.L) ** 2 + (E + k * Leta) ** 2))
    dA = grid.dx * grid.deta / 2
    return out / np.sqrt(np.sum(out**2) * dA)


def symbol_stft_sup(sigma: SymbolGrid, window: np.ndarray, u_stride: int = 1) -> np.ndarray:
    """``max_u |V_window sigma(u, zeta)|`` over symbol-grid shifts ``u``.

    Returns an array over the dual grid, shape ``(2N, N)``, with
    ``zeta_x = (i - N) / L`` and ``zeta_eta = (k - N/2) / (N deta)``.
    """
    grid = sigma.grid
    N = grid.N
    dA = grid.dx * grid.deta / 2
    sig = sigma.values
    best = np.zeros((2 * N, N))
    win_c = np.conj(window)
    for sj in range(0, 2 * N, u_stride):
        rolled = np.roll(win_c, sj - N, axis=0)
        for sk in range(0, N, u_stride):
            w = np.roll(rolled, sk - N // 2, axis=1)
            V = np.abs(np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(sig * w))))
            np.maximum(best, V, out=best)
    return best * dA


def _dual_coords(grid):
    N = grid.N
    zx = (np.arange(2 * N) - N) / grid.L
    ze = (np.arange(N) - N // 2) / (N * grid.deta)
    return np.meshgrid(zx, ze, indexing="ij")


def sjostrand_norm(sigma: SymbolGrid, w: WeightSpec | None = None, window: np.ndarray | None = None,
                   u_stride: int = 1) -> float:
    """Quadrature of ``int sup_z |<sigma, pi(z, zeta) Phi>| v_s(zeta) d zeta``.

    The default window is the Wigner distribution of the unit Gaussian, a
    normalized Gaussian on the symbol torus.
    """
    w = w or WeightSpec(0.0)
    grid = sigma.grid
    window = _analytic_wigner_gaussian(grid) if window is None else window
    sup = symbol_stft_sup(sigma, window, u_stride)
    ZX, ZE = _dual_coords(grid)
    dzeta = (1.0 / grid.L) * (1.0 / (grid.N * grid.deta))
    return float(np.sum(sup * w(np.stack([ZX, ZE], axis=-1))) * dzeta)


def controlling_function(sigma: SymbolGrid, g: np.ndarray | None = None, w: WeightSpec | None = None,
                         u_stride: int = 1) -> ControllingProfile:
    """Controlling function ``H(u) = sup_v |V_Phi sigma(v, j(u))|`` with ``Phi = W(g, g)``.

    ``j(u) = (u_eta, -u_x)``.  ``H`` is returned on the difference lattice of
    ``sigma.grid`` together with its weighted lattice l1 mass.
    """
    grid = sigma.grid
    g = gaussian_window(grid) if g is None else np.asarray(g)
    if not np.any(np.abs(g) > 0):
        raise ConfigurationError("window must be non-zero")
    w = w or WeightSpec(0.0)
    Phi = wigner(grid, g)
    sup = symbol_stft_sup(sigma, Phi, u_stride)
    N = grid.N
    pts = grid.points
    # zeta_x = u_eta on the x-dual axis (step 1/L), zeta_eta = -u_x (step dx)
    ix = np.rint(pts[:, 1] * grid.L).astype(int) + N
    ie = (np.rint(-pts[:, 0] / (1.0 / (N * grid.deta))).astype(int) + N // 2) % N
    H = sup[ix % (2 * N), ie].reshape(grid.shape)
    l1 = float(np.sum(H.ravel() * w(pts)) * grid.cell)
    return ControllingProfile(grid, H, w.s, l1, truncation_radius=grid.L / 2)
