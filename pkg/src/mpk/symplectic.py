"""Linear symplectic algebra: validation, quadratic Hamiltonians and their flows,
quadratic phase functions and generator factorizations of Sp(d, R).

Block convention: ``A = [[A, B], [C, D]]`` acting on column vectors ``(x, eta)``;
``J = [[0, -I], [I, 0]]`` and ``A^T J A = J``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

__all__ = [
    "NotSymplecticError",
    "SingularBlockError",
    "SymplecticMatrix",
    "QuadraticHamiltonian",
    "QuadraticPhase",
    "Atom",
    "GeneratorWord",
    "CONVENTIONS",
    "DEFAULT_CONVENTION",
    "standard_j",
    "fourier_matrix",
    "chirp_matrix",
    "dilation_matrix",
    "symplectic_residual",
    "validate_symplectic",
    "hamiltonian_matrix",
    "flow",
    "phase_function",
    "generator_factorization",
    "random_symplectic",
    "admissible_symplectic",
    "parse_matrix",
    "parse_hamiltonian",
    "HAMILTONIAN_PRESETS",
]

DELTA_SING = 1e-6

#: Time scaling of the classical flow relative to ``exp(t * Hmat)``.
#: ``"twopi-reversed"`` is the flow actually generated by ``exp(itH)`` for
#: ``i u_t + H u = 0`` with the ``exp(-2 pi i x eta)`` Fourier transform.
CONVENTIONS = {
    "paper": 1.0,
    "twopi": 1.0 / (2 * np.pi),
    "twopi-reversed": -1.0 / (2 * np.pi),
}
DEFAULT_CONVENTION = "twopi-reversed"


class NotSymplecticError(ValueError):
    pass


class SingularBlockError(ValueError):
    """Upper-left block too close to singular for a type-I representation."""


def standard_j(d: int) -> np.ndarray:
    I, Z = np.eye(d), np.zeros((d, d))
    return np.block([[Z, -I], [I, Z]])


def fourier_matrix(d: int, sign: int = 1) -> np.ndarray:
    """Symplectic matrix realized by the (centered) Fourier transform, ``J^{-1}``.

    ``sign = -1`` gives the inverse transform's matrix ``J``.
    """
    return -standard_j(d) if sign > 0 else standard_j(d)


def chirp_matrix(C) -> np.ndarray:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = C.shape[0]
    return np.block([[np.eye(d), np.zeros((d, d))], [C, np.eye(d)]])


def dilation_matrix(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    d = M.shape[0]
    return np.block([[M, np.zeros((d, d))], [np.zeros((d, d)), np.linalg.inv(M).T]])


def symplectic_residual(M: np.ndarray) -> float:
    J = standard_j(M.shape[0] // 2)
    return float(np.linalg.norm(M.T @ J @ M - J))


def _newton_project(M: np.ndarray) -> np.ndarray:
    J = standard_j(M.shape[0] // 2)
    E = M.T @ J @ M - J
    return M @ (np.eye(M.shape[0]) + 0.5 * J @ E)


@dataclass(frozen=True)
class SymplecticMatrix:
    matrix: np.ndarray
    residual: float

    @property
    def d(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def A(self):
        return self.matrix[: self.d, : self.d]

    @property
    def B(self):
        return self.matrix[: self.d, self.d :]

    @property
    def C(self):
        return self.matrix[self.d :, : self.d]

    @property
    def D(self):
        return self.matrix[self.d :, self.d :]

    def inverse(self) -> "SymplecticMatrix":
        J = standard_j(self.d)
        inv = -J @ self.matrix.T @ J
        return SymplecticMatrix(inv, symplectic_residual(inv))

    def __matmul__(self, other):
        if isinstance(other, SymplecticMatrix):
            prod = self.matrix @ other.matrix
            return SymplecticMatrix(prod, symplectic_residual(prod))
        return self.matrix @ other

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def validate_symplectic(M, tol: float = 1e-6, project: bool = True) -> SymplecticMatrix:
    """Wrap ``M`` after checking ``M^T J M = J``.

    Inputs with residual above ``tol`` are rejected; otherwise one Newton step
    pulls the matrix back onto the group when the residual exceeds 1e-10.
    """
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise ValueError(f"expected a 2d x 2d matrix, got shape {M.shape}")
    res = symplectic_residual(M)
    if res > tol:
        raise NotSymplecticError(f"symplectic residual {res:.3e} exceeds {tol:.1e}")
    if project and res > 1e-10:
        M = _newton_project(M)
        res = symplectic_residual(M)
    return SymplecticMatrix(M, res)


# -- quadratic Hamiltonians ------------------------------------------------------

@dataclass(frozen=True)
class QuadraticHamiltonian:
    """``a(x, xi) = 1/2 x A x + xi B x + 1/2 xi C xi``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        for name in "ABC":
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        for name in "AC":
            m = getattr(self, name)
            if np.abs(m - m.T).max() > 1e-12:
                raise ValueError(f"block {name} must be symmetric")

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @classmethod
    def preset(cls, name: str, d: int = 1) -> "QuadraticHamiltonian":
        I, Z = np.eye(d), np.zeros((d, d))
        try:
            A, B, C = {"free": (Z, Z, I), "harmonic": (I, Z, I), "shear": (I, Z, Z), "zero": (Z, Z, Z)}[name]
        except KeyError:
            raise ValueError(f"unknown Hamiltonian preset {name!r}") from None
        return cls(A, B, C)

    def symbol(self, x, xi):
        """Evaluate ``a`` for d = 1 (broadcasting)."""
        a, b, c = self.A[0, 0], self.B[0, 0], self.C[0, 0]
        return 0.5 * a * x * x + b * xi * x + 0.5 * c * xi * xi

    def __neg__(self):
        return QuadraticHamiltonian(-self.A, -self.B, -self.C)


HAMILTONIAN_PRESETS = ("free", "harmonic", "shear", "zero")


def hamiltonian_matrix(q: QuadraticHamiltonian) -> np.ndarray:
    return np.block([[q.B, q.C], [-q.A, -q.B.T]])


def flow(q: QuadraticHamiltonian, t: float, convention: str = DEFAULT_CONVENTION) -> SymplecticMatrix:
    """Classical flow ``exp(c t Hmat)`` with ``c`` fixed by ``convention``."""
    try:
        c = CONVENTIONS[convention]
    except KeyError:
        raise ValueError(f"unknown convention {convention!r}; choose from {sorted(CONVENTIONS)}") from None
    M = expm(c * float(t) * hamiltonian_matrix(q))
    return validate_symplectic(M)


# -- quadratic phases ---------------------------------------------------------

@dataclass(frozen=True)
class QuadraticPhase:
    """``Phi(x, eta) = 1/2 x Q1 x + eta Q2 x - 1/2 eta Q3 eta``."""

    Q1: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray
    det_source: float = 1.0

    def __call__(self, x, eta):
        x = np.asarray(x, dtype=float)
        eta = np.asarray(eta, dtype=float)
        if self.Q1.shape == (1, 1):
            q1, q2, q3 = self.Q1[0, 0], self.Q2[0, 0], self.Q3[0, 0]
            return 0.5 * q1 * x * x + q2 * eta * x - 0.5 * q3 * eta * eta
        return (
            0.5 * np.einsum("...i,ij,...j->...", x, self.Q1, x)
            + np.einsum("...i,ij,...j->...", eta, self.Q2, x)
            - 0.5 * np.einsum("...i,ij,...j->...", eta, self.Q3, eta)
        )

    @classmethod
    def identity(cls, d: int = 1) -> "QuadraticPhase":
        return cls(np.zeros((d, d)), np.eye(d), np.zeros((d, d)))


def phase_function(S: SymplecticMatrix, delta: float = DELTA_SING) -> QuadraticPhase:
    if not isinstance(S, SymplecticMatrix):
        S = validate_symplectic(S)
    det = np.linalg.det(S.A)
    if abs(det) < delta:
        raise SingularBlockError(f"|det A| = {abs(det):.3e} below {delta:.1e}")
    Ainv = np.linalg.inv(S.A)
    sym = lambda m: 0.5 * (m + m.T)
    return QuadraticPhase(sym(S.C @ Ainv), Ainv, sym(Ainv @ S.B), float(det))


# -- generator words ---------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    kind: str  # "FOURIER" | "CHIRP" | "DILATE"
    param: object

    def matrix(self, d: int) -> np.ndarray:
        if self.kind == "FOURIER":
            return fourier_matrix(d, int(self.param))
        if self.kind == "CHIRP":
            return chirp_matrix(self.param)
        if self.kind == "DILATE":
            return dilation_matrix(self.param)
        raise ValueError(self.kind)


@dataclass
class GeneratorWord:
    d: int
    atoms: list = field(default_factory=list)
    phase_unresolved: bool = True

    def matrix(self) -> np.ndarray:
        M = np.eye(2 * self.d)
        for atom in self.atoms:
            M = M @ atom.matrix(self.d)
        return M

    def __len__(self):
        return len(self.atoms)


def _upper_shear_atoms(P: np.ndarray) -> list:
    # [[I, P], [0, I]] = F^{-1} . chirp(-P) . F
    return [Atom("FOURIER", -1), Atom("CHIRP", -P), Atom("FOURIER", 1)]


def _normal_form(M: np.ndarray, d: int) -> list:
    A, B, C = M[:d, :d], M[:d, d:], M[d:, :d]
    Ainv = np.linalg.inv(A)
    word = []
    lower = 0.5 * (C @ Ainv + (C @ Ainv).T)
    upper = 0.5 * (Ainv @ B + (Ainv @ B).T)
    if np.abs(lower).max() > 1e-14:
        word.append(Atom("CHIRP", lower))
    if np.abs(A - np.eye(d)).max() > 1e-14:
        word.append(Atom("DILATE", A.copy()))
    if np.abs(upper).max() > 1e-14:
        word += _upper_shear_atoms(upper)
    return word


def _word_cost(atoms: list) -> float:
    # how far the word strays from the identity: stretch factors and chirp rates
    cost = 0.0
    for a in atoms:
        if a.kind == "DILATE":
            cost += 2 * np.abs(np.log(np.abs(np.linalg.eigvals(np.atleast_2d(a.param))))).max()
        elif a.kind == "CHIRP":
            cost += np.abs(np.atleast_2d(a.param)).max()
    return cost


def generator_factorization(S, delta: float = DELTA_SING) -> GeneratorWord:
    """Write ``S`` as a short product of Fourier, chirp and dilation atoms.

    Invertible upper-left block: ``chirp(C A^-1) dilate(A) upper_shear(A^-1 B)``.
    A leading Fourier atom of either sign is also tried, and the word with the
    mildest stretches and chirps wins.  In d >= 2 an extra upper shear is used
    when no choice makes the block invertible.
    """
    M = np.asarray(S.matrix if isinstance(S, SymplecticMatrix) else S, dtype=float)
    d = M.shape[0] // 2
    if np.abs(M - np.eye(2 * d)).max() < 1e-14:
        return GeneratorWord(d, [])
    candidates = []
    if abs(np.linalg.det(M[:d, :d])) >= delta:
        candidates.append(_normal_form(M, d))
    for sign in (-1, 1):
        rest = np.linalg.inv(fourier_matrix(d, sign)) @ M
        if np.abs(rest - np.eye(2 * d)).max() < 1e-12:
            return GeneratorWord(d, [Atom("FOURIER", sign)])
        if abs(np.linalg.det(rest[:d, :d])) >= delta:
            candidates.append([Atom("FOURIER", sign)] + _normal_form(rest, d))
    if candidates:
        return GeneratorWord(d, min(candidates, key=_word_cost))
    rng = np.random.default_rng(0)
    P = rng.normal(size=(d, d))
    P = 0.5 * (P + P.T)
    U = np.block([[np.eye(d), P], [np.zeros((d, d)), np.eye(d)]])
    rest = np.linalg.inv(U) @ M
    return GeneratorWord(d, _upper_shear_atoms(P) + generator_factorization(rest, delta).atoms)


def random_symplectic(d: int, rng: np.random.Generator, scale: float = 0.5) -> SymplecticMatrix:
    """``exp`` of a random Hamiltonian matrix with entries of size ``scale``."""
    S = rng.normal(scale=scale, size=(2 * d, 2 * d))
    S = 0.5 * (S + S.T)
    M = expm(-standard_j(d) @ S)  # J^{-1} S is Hamiltonian
    return validate_symplectic(M)


# -- plain-text parsing -------------------------------------------------------

def parse_matrix(text: str) -> np.ndarray:
    """Whitespace-separated, row-major entries of a square matrix."""
    vals = np.array([float(tok) for tok in text.split()])
    n = int(round(np.sqrt(vals.size)))
    if n * n != vals.size:
        raise ValueError(f"{vals.size} entries do not form a square matrix")
    return vals.reshape(n, n)


def parse_hamiltonian(text: str) -> QuadraticHamiltonian:
    """Preset name, or three matrices ``A; B; C`` separated by semicolons."""
    text = text.strip()
    if text in HAMILTONIAN_PRESETS:
        return QuadraticHamiltonian.preset(text)
    parts = [p for p in text.split(";")]
    if len(parts) != 3:
        raise ValueError("expected a preset name or 'A ; B ; C' matrix blocks")
    return QuadraticHamiltonian(*(parse_matrix(p) for p in parts))


def admissible_symplectic(rng: np.random.Generator, count: int, max_norm: float = 1.5,
                          min_det: float = 0.3, scale: float = 0.4) -> list:
    """Seeded random symplectic matrices with ``||S|| <= max_norm`` and ``|det A| >= min_det``.

    The norm cap keeps images of central phase-space points inside the torus.
    """
    out = []
    while len(out) < count:
        S = random_symplectic(1, rng, scale)
        if abs(np.linalg.det(S.A)) >= min_det and np.linalg.norm(S.matrix, 2) <= max_norm:
            out.append(S)
    return out
