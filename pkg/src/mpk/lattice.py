"""Periodized phase-space grids, time-frequency shifts and the discrete STFT.

Everything lives on the torus ``[-L/2, L/2)`` sampled at ``N`` points,
``x_j = (j - N/2) dx`` and ``eta_k = (k - N/2) deta`` with ``dx = L/N`` and
``deta = 1/L``.  Translations are circular, so ``tf_shift`` is exactly unitary
and every transform below is FFT-exact.

The Gabor lattice is the sub-grid obtained by keeping every ``stride[0]``-th
position and every ``stride[1]``-th frequency.  Lattice arrays are indexed
``[p, q]`` with ``p`` the position index and ``q`` the frequency index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import hermite as _herm

__all__ = [
    "ConfigurationError",
    "PhaseSpaceGrid",
    "LatticePoint",
    "WeightSpec",
    "make_grid",
    "centered_dft",
    "centered_idft",
    "gaussian_window",
    "hermite_window",
    "tf_shift",
    "atoms",
    "stft",
    "stft_adjoint",
    "frame_operator",
    "dual_window",
    "reconstruct",
    "modulation_norm",
    "inner",
]

_IMAGES = 3


class ConfigurationError(ValueError):
    """Invalid grid, lattice or operator configuration."""


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhaseSpaceGrid:
    d: int
    N: int
    L: float
    stride: tuple[int, int] = (1, 1)

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def deta(self) -> float:
        return 1.0 / self.L

    @cached_property
    def x(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) * self.dx

    @cached_property
    def eta(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) * self.deta

    @property
    def a(self) -> float:
        """Lattice step in position."""
        return self.stride[0] * self.dx

    @property
    def b(self) -> float:
        """Lattice step in frequency."""
        return self.stride[1] * self.deta

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N // self.stride[0], self.N // self.stride[1])

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def cell(self) -> float:
        return self.a * self.b

    @property
    def redundancy(self) -> float:
        return 1.0 / self.cell

    @property
    def is_square(self) -> bool:
        return np.isclose(self.dx, self.deta, rtol=1e-12, atol=0)

    @cached_property
    def x_index(self) -> np.ndarray:
        """Grid indices of the lattice positions (the origin is always included)."""
        n = self.shape[0]
        return (self.N // 2 + (np.arange(n) - n // 2) * self.stride[0]) % self.N

    @cached_property
    def eta_index(self) -> np.ndarray:
        n = self.shape[1]
        return (self.N // 2 + (np.arange(n) - n // 2) * self.stride[1]) % self.N

    @cached_property
    def lattice_x(self) -> np.ndarray:
        n = self.shape[0]
        return (np.arange(n) - n // 2) * self.a

    @cached_property
    def lattice_eta(self) -> np.ndarray:
        n = self.shape[1]
        return (np.arange(n) - n // 2) * self.b

    @cached_property
    def points(self) -> np.ndarray:
        """Lattice coordinates, shape ``(size, 2)``, flattened position-major."""
        X, E = np.meshgrid(self.lattice_x, self.lattice_eta, indexing="ij")
        return np.stack([X.ravel(), E.ravel()], axis=1)

    def interior(self, fraction: float = 0.5) -> np.ndarray:
        """Boolean mask of lattice points with ``max(|x|, |eta|) <= fraction * L/2``."""
        half = 0.5 * self.L * fraction
        return np.all(np.abs(self.points) <= half + 1e-12, axis=1)

    def wrap(self, u: np.ndarray) -> np.ndarray:
        """Wrap phase-space differences into ``[-L/2, L/2)`` per axis.

        Valid when both periods coincide, i.e. on square grids.
        """
        periods = np.array([self.L, self.N * self.deta])
        return (u + periods / 2) % periods - periods / 2


@dataclass(frozen=True)
class LatticePoint:
    grid: PhaseSpaceGrid
    p: int
    q: int

    def __post_init__(self):
        n0, n1 = self.grid.shape
        if not (0 <= self.p < n0 and 0 <= self.q < n1):
            raise ConfigurationError(f"lattice index ({self.p}, {self.q}) outside {self.grid.shape}")

    @property
    def z(self) -> np.ndarray:
        return np.array([self.grid.lattice_x[self.p], self.grid.lattice_eta[self.q]])

    @property
    def flat(self) -> int:
        return self.p * self.grid.shape[1] + self.q


@dataclass(frozen=True)
class WeightSpec:
    """Polynomial weight ``v_s(z) = (1 + |z|^2)^(s/2)``."""

    s: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.s) or self.s < 0:
            raise ConfigurationError(f"weight exponent must be finite and >= 0, got {self.s}")

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return (1.0 + np.sum(z * z, axis=-1)) ** (0.5 * self.s)


def make_grid(d: int = 1, N: int = 64, L: float | None = None, lattice_stride=(1, 1)) -> PhaseSpaceGrid:
    """Build a grid. ``L`` defaults to ``sqrt(N)`` so that ``dx == deta``."""
    if d != 1:
        raise ConfigurationError("only d = 1 grids are supported")
    N = int(N)
    if not _is_pow2(N):
        raise ConfigurationError(f"N must be a power of two, got {N}")
    L = float(np.sqrt(N)) if L is None else float(L)
    if not L > 0:
        raise ConfigurationError(f"L must be positive, got {L}")
    stride = tuple(int(s) for s in lattice_stride)
    if len(stride) != 2 or any(s < 1 or N % s for s in stride):
        raise ConfigurationError(f"lattice stride {lattice_stride} must divide N={N}")
    grid = PhaseSpaceGrid(d, N, L, stride)
    if grid.redundancy < 2:
        raise ConfigurationError(f"lattice redundancy {grid.redundancy:g} < 2")
    return grid


# -- centered transforms -------------------------------------------------------

def centered_dft(f: np.ndarray, axis: int = -1) -> np.ndarray:
    """``F[k] = sum_m f[m] exp(-2 pi i (k - N/2)(m - N/2) / N)`` along ``axis``."""
    f = np.fft.ifftshift(f, axes=axis)
    return np.fft.fftshift(np.fft.fft(f, axis=axis), axes=axis)


def centered_idft(F: np.ndarray, axis: int = -1) -> np.ndarray:
    """Inverse of :func:`centered_dft` (includes the ``1/N``)."""
    F = np.fft.ifftshift(F, axes=axis)
    return np.fft.fftshift(np.fft.ifft(F, axis=axis), axes=axis)


def inner(grid: PhaseSpaceGrid, f, h) -> complex:
    return complex(np.vdot(h, f) * grid.dx)


def _l2(grid, f) -> float:
    return float(np.sqrt(np.sum(np.abs(f) ** 2) * grid.dx))


# -- windows -------------------------------------------------------------------

def _periodized(grid: PhaseSpaceGrid, fn) -> np.ndarray:
    x = grid.x
    return sum(fn(x + n * grid.L) for n in range(-_IMAGES, _IMAGES + 1))


def gaussian_window(grid: PhaseSpaceGrid) -> np.ndarray:
    g = _periodized(grid, lambda t: np.exp(-np.pi * t * t)).astype(complex)
    return g / _l2(grid, g)


def hermite_window(grid: PhaseSpaceGrid, order: int) -> np.ndarray:
    """Periodized Hermite function ``H_n(sqrt(2 pi) x) exp(-pi x^2)``, unit norm."""
    if order not in range(7):
        raise ConfigurationError(f"Hermite order must be in 0..6, got {order}")
    coef = np.zeros(order + 1)
    coef[order] = 1.0
    fn = lambda t: _herm.hermval(np.sqrt(2 * np.pi) * t, coef) * np.exp(-np.pi * t * t)
    h = _periodized(grid, fn).astype(complex)
    return h / _l2(grid, h)


# -- time-frequency shifts and STFT --------------------------------------------

def _grid_offsets(grid: PhaseSpaceGrid, z) -> tuple[int, int]:
    z = np.asarray(z, dtype=float)
    kx, ke = z[0] / grid.dx, z[1] / grid.deta
    ix, ie = int(np.rint(kx)), int(np.rint(ke))
    if abs(kx - ix) > 1e-9 or abs(ke - ie) > 1e-9:
        raise ConfigurationError(f"z = {tuple(z)} is not on the grid")
    return ix, ie


def tf_shift(grid: PhaseSpaceGrid, z, f: np.ndarray) -> np.ndarray:
    """``pi(z) f (t) = exp(2 pi i eta t) f(t - x)`` with circular translation."""
    if isinstance(z, LatticePoint):
        z = z.z
    ix, ie = _grid_offsets(grid, z)
    eta = ie * grid.deta
    return np.exp(2j * np.pi * eta * grid.x) * np.roll(f, ix)


def atoms(grid: PhaseSpaceGrid, g: np.ndarray) -> np.ndarray:
    """All lattice atoms ``pi(z) g`` as rows, shape ``(grid.size, N)``."""
    shifted = np.stack([np.roll(g, (i - grid.N // 2)) for i in grid.x_index])
    chirps = np.exp(2j * np.pi * np.outer(grid.eta[grid.eta_index], grid.x))
    out = shifted[:, None, :] * chirps[None, :, :]
    return out.reshape(grid.size, grid.N)


def _check_window(g):
    if not np.any(np.abs(g) > 0):
        raise ConfigurationError("window must be non-zero")


def stft(grid: PhaseSpaceGrid, g: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``V_g f(z) = <f, pi(z) g>`` on the lattice, shape ``grid.shape``.

    Works column-wise for a 2-D ``f`` of shape ``(N, k)``, returning
    ``grid.shape + (k,)``.
    """
    _check_window(g)
    f = np.asarray(f)
    shifted = np.stack([np.roll(g, (i - grid.N // 2)) for i in grid.x_index]).conj()
    prod = shifted[:, :, None] * (f[None, :, :] if f.ndim == 2 else f[None, :, None])
    V = centered_dft(prod, axis=1)[:, grid.eta_index, :] * grid.dx
    return V if f.ndim == 2 else V[..., 0]


def stft_adjoint(grid: PhaseSpaceGrid, g: np.ndarray, F: np.ndarray) -> np.ndarray:
    """``sum_z F(z) pi(z) g * cell`` over the lattice."""
    F = np.asarray(F)
    if F.shape != grid.shape:
        raise ConfigurationError(f"array shape {F.shape} does not match lattice {grid.shape}")
    full = np.zeros((grid.shape[0], grid.N), dtype=complex)
    full[:, grid.eta_index] = F
    # sum_k F[k] exp(2 pi i eta_k x_m)
    mod = centered_idft(full, axis=1) * grid.N
    shifted = np.stack([np.roll(g, (i - grid.N // 2)) for i in grid.x_index])
    return np.sum(mod * shifted, axis=0) * grid.cell


def frame_operator(grid: PhaseSpaceGrid, g: np.ndarray) -> np.ndarray:
    """Dense ``S = V_g^* V_g`` as an ``N x N`` matrix."""
    G = atoms(grid, g)
    return (G.T @ G.conj()) * grid.cell * grid.dx


def dual_window(grid: PhaseSpaceGrid, g: np.ndarray) -> np.ndarray:
    """Canonical dual window ``S^{-1} g``."""
    return np.linalg.solve(frame_operator(grid, g), g)


def reconstruct(grid: PhaseSpaceGrid, g: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Invert :func:`stft` exactly using the canonical dual window."""
    return stft_adjoint(grid, dual_window(grid, g), V)


def modulation_norm(grid: PhaseSpaceGrid, g, f, p=2.0, w: WeightSpec | None = None) -> float:
    """Lattice quadrature of the weighted ``M^p`` norm; ``p = inf`` is the weighted max."""
    p = float(p)
    if p < 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    w = w or WeightSpec(0.0)
    A = np.abs(stft(grid, g, f)).ravel() * w(grid.points)
    if np.isinf(p):
        return float(A.max())
    return float((np.sum(A**p) * grid.cell) ** (1.0 / p))
