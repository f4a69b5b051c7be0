"""Truncated Fock-space and qubit operator algebra.

Composite space ordering is cavity1 (slowest) x cavity2 x qubit (fastest), so
the flat index of |n, m, s> is ``(n * (N2 + 1) + m) * 2 + s`` with s = 0 for
|g> and s = 1 for |e>.  Every matrix in the package is built against this
convention via ``np.kron(np.kron(A1, A2), Q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

QUBIT_LEVELS = {"g": 0, "e": 1, 0: 0, 1: 1}
QUBIT_NAMES = ("g", "e")


@dataclass(frozen=True)
class SpaceLayout:
    """Cutoffs of the two cavities; the qubit is always two-level."""

    cavity_cutoffs: tuple[int, int] = (5, 5)
    qubit_dim: int = field(default=2, init=False)

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cavity_cutoffs)
        if len(cuts) != 2 or min(cuts) < 0:
            raise ValueError(f"cavity cutoffs must be two nonnegative integers, got {self.cavity_cutoffs!r}")
        object.__setattr__(self, "cavity_cutoffs", cuts)

    @classmethod
    def uniform(cls, cutoff: int) -> "SpaceLayout":
        return cls((cutoff, cutoff))

    @property
    def cavity_dims(self) -> tuple[int, int]:
        return (self.cavity_cutoffs[0] + 1, self.cavity_cutoffs[1] + 1)

    @property
    def dim(self) -> int:
        d1, d2 = self.cavity_dims
        return d1 * d2 * self.qubit_dim

    def labels(self) -> list[tuple[int, int, str]]:
        return [basis_label(k, self) for k in range(self.dim)]


def basis_index(n: int, m: int, s, layout: SpaceLayout) -> int:
    """Flat index of |n, m, s>; ``s`` may be 'g'/'e' or 0/1."""
    n1, n2 = layout.cavity_cutoffs
    if not 0 <= n <= n1:
        raise IndexError(f"cavity 1 Fock index n={n} outside [0, {n1}]")
    if not 0 <= m <= n2:
        raise IndexError(f"cavity 2 Fock index m={m} outside [0, {n2}]")
    if s not in QUBIT_LEVELS:
        raise IndexError(f"qubit level s={s!r} is not one of 'g', 'e'")
    return (n * (n2 + 1) + m) * 2 + QUBIT_LEVELS[s]


def basis_label(index: int, layout: SpaceLayout) -> tuple[int, int, str]:
    if not 0 <= index < layout.dim:
        raise IndexError(f"flat index {index} outside [0, {layout.dim})")
    rest, s = divmod(index, 2)
    n, m = divmod(rest, layout.cavity_dims[1])
    return n, m, QUBIT_NAMES[s]


@dataclass(frozen=True, eq=False)
class QuantumOperator:
    """Dense operator on the composite space.

    The matrix is copied and made read-only on construction so instances can
    be shared freely between threads and worker processes.
    """

    layout: SpaceLayout
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        d = self.layout.dim
        if mat.shape != (d, d):
            raise ValueError(f"operator shape {mat.shape} does not match layout dimension {d}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def dag(self) -> "QuantumOperator":
        return QuantumOperator(self.layout, self.matrix.conj().T, f"{self.name}^dag" if self.name else "")

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermiticity_error() < tol

    def unitarity_error(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(len(m)))))

    def _coerce(self, other):
        if isinstance(other, QuantumOperator):
            if other.layout != self.layout:
                raise ValueError("operators live on different layouts")
            return other.matrix
        return NotImplemented

    def __matmul__(self, other):
        m = self._coerce(other)
        if m is NotImplemented:
            return NotImplemented
        return QuantumOperator(self.layout, self.matrix @ m)

    def __add__(self, other):
        m = self._coerce(other)
        if m is NotImplemented:
            return NotImplemented
        return QuantumOperator(self.layout, self.matrix + m)

    def __sub__(self, other):
        m = self._coerce(other)
        if m is NotImplemented:
            return NotImplemented
        return QuantumOperator(self.layout, self.matrix - m)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return QuantumOperator(self.layout, self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return QuantumOperator(self.layout, -self.matrix)


def embed(local: np.ndarray, layout: SpaceLayout, which) -> np.ndarray:
    """Tensor a single-factor matrix into the composite space.

    ``which`` is 1 or 2 for a cavity, or ``"qubit"``.
    """
    d1, d2 = layout.cavity_dims
    i1, i2, iq = np.eye(d1), np.eye(d2), np.eye(2)
    if which == 1:
        factors = (local, i2, iq)
    elif which == 2:
        factors = (i1, local, iq)
    elif which == "qubit":
        factors = (i1, i2, local)
    else:
        raise ValueError(f"unknown subsystem {which!r}; expected 1, 2 or 'qubit'")
    expected = {1: d1, 2: d2, "qubit": 2}[which]
    if np.shape(local) != (expected, expected):
        raise ValueError(f"local matrix shape {np.shape(local)} does not fit subsystem {which!r}")
    return np.kron(np.kron(factors[0], factors[1]), factors[2])


def annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1).astype(complex)


def ladder_ops(layout: SpaceLayout, which_cavity: int) -> tuple[QuantumOperator, QuantumOperator]:
    """Return (a, a_dag) of cavity 1 or 2 embedded in the composite space."""
    if which_cavity not in (1, 2):
        raise ValueError(f"which_cavity must be 1 or 2, got {which_cavity!r}")
    a = annihilation(layout.cavity_cutoffs[which_cavity - 1])
    big = embed(a, layout, which_cavity)
    return (QuantumOperator(layout, big, f"a{which_cavity}"),
            QuantumOperator(layout, big.conj().T, f"a{which_cavity}^dag"))


SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)   # |e><g|
SIGMA_MINUS = SIGMA_PLUS.T.copy()                         # |g><e|
EXP_I_PHI = 0.5 * (SIGMA_PLUS - SIGMA_MINUS - SIGMA_Z)


def qubit_ops(layout: SpaceLayout):
    """Return (sigma_z, sigma_plus, sigma_minus, exp(i phi_q)) on the composite space."""
    return tuple(QuantumOperator(layout, embed(q, layout, "qubit"), name)
                 for q, name in ((SIGMA_Z, "sz"), (SIGMA_PLUS, "sp"),
                                 (SIGMA_MINUS, "sm"), (EXP_I_PHI, "exp_i_phi")))


def laguerre(n: int, l: float, x: float) -> float:
    """Generalized Laguerre polynomial L_n^(l)(x) by upward three-term recurrence.

    The superscript may be any real l >= 0; Fock-space uses pass integers.
    """
    if n < 0 or l < 0:
        raise ValueError(f"Laguerre degree and superscript must be nonnegative, got n={n}, l={l}")
    prev, cur = 0.0, 1.0
    for k in range(n):
        prev, cur = cur, ((2 * k + 1 + l - x) * cur - (k + l) * prev) / (k + 1)
    return cur


def _sqrt_factorial_ratio(n: int, l: int) -> float:
    # sqrt(n!/(n+l)!) as a running product; no factorials are formed
    r = 1.0
    for k in range(n + 1, n + l + 1):
        r /= math.sqrt(k)
    return r


def frank_condon(n: int, l: int, lam: float) -> complex:
    """Amplitude for an l-photon up-transition |n> -> |n+l> at zero-point coupling ``lam``."""
    if n < 0 or l < 0:
        raise ValueError(f"Fock index and photon change must be nonnegative, got n={n}, l={l}")
    if lam < 0:
        raise ValueError(f"coupling must be nonnegative, got {lam}")
    return (_sqrt_factorial_ratio(n, l) * (2j * lam) ** l
            * math.exp(-2.0 * lam * lam) * laguerre(n, l, 4.0 * lam * lam))


def displacement_fock(alpha: complex, cutoff: int) -> np.ndarray:
    """Closed-form Fock-basis matrix of D(alpha) truncated to indices 0..cutoff."""
    alpha = complex(alpha)
    if not np.isfinite(alpha):
        raise ValueError("displacement amplitude must be finite")
    x = abs(alpha) ** 2
    env = math.exp(-0.5 * x)
    mat = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    for n in range(cutoff + 1):
        for l in range(cutoff + 1 - n):
            core = _sqrt_factorial_ratio(n, l) * env * laguerre(n, l, x)
            mat[n + l, n] = core * alpha ** l
            if l:
                mat[n, n + l] = core * (-alpha.conjugate()) ** l
    return mat


def displacement_matrix(alpha: complex, layout: SpaceLayout, which_cavity: int) -> QuantumOperator:
    if which_cavity not in (1, 2):
        raise ValueError(f"which_cavity must be 1 or 2, got {which_cavity!r}")
    local = displacement_fock(alpha, layout.cavity_cutoffs[which_cavity - 1])
    return QuantumOperator(layout, embed(local, layout, which_cavity), f"D{which_cavity}")


def unitarity_defect(alpha: complex, cutoff: int, margin: int = 0) -> float:
    """max |D^dag D - I| over Fock indices <= cutoff - margin.

    Truncation leaks probability out of the top levels, so the defect is a
    function of cutoff, |alpha| and the margin kept below the cutoff; it is
    reported rather than asserted against a global bound.
    """
    d = displacement_fock(alpha, cutoff)
    k = cutoff - margin + 1
    if k <= 0:
        raise ValueError("margin leaves no Fock levels")
    defect = d.conj().T @ d - np.eye(cutoff + 1)
    return float(np.max(np.abs(defect[:k, :k])))
