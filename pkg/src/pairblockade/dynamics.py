"""Closed and open time evolution, steady states and two-time correlators.

Density matrices are vectorized by column stacking, ``vec(rho)[i + j*d] =
rho[i, j]``, so that ``vec(A rho B) = (B^T kron A) vec(rho)``.

The full generator is held sparse.  Lindblad generators with the collapse
operators used here keep the span of a small set of matrix elements invariant
(populations plus the coherences the Hamiltonian reaches), so every dense
solve and integration runs on the sector reachable from its starting vector
instead of on all d^2 elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sps
from scipy.integrate import solve_ivp

from .errors import (DegenerateSteadyStateError, IntegrationError, NoEmissionError,
                     NormDriftError, PositivityError)
from .operators import QUBIT_LEVELS, QuantumOperator, SpaceLayout, basis_index, ladder_ops, qubit_ops

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure state vector (1-D data) or density matrix (2-D data)."""

    layout: SpaceLayout
    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=complex)
        d = self.layout.dim
        if arr.shape not in ((d,), (d, d)):
            raise ValueError(f"state data shape {arr.shape} does not fit dimension {d}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def kind(self) -> str:
        return "pure" if self.data.ndim == 1 else "density"

    @classmethod
    def basis(cls, layout: SpaceLayout, n: int, m: int, s) -> "QuantumState":
        psi = np.zeros(layout.dim, dtype=complex)
        psi[basis_index(n, m, s, layout)] = 1.0
        return cls(layout, psi)

    @classmethod
    def ground(cls, layout: SpaceLayout) -> "QuantumState":
        return cls.basis(layout, 0, 0, "g")

    def density(self) -> np.ndarray:
        if self.kind == "pure":
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def to_density(self) -> "QuantumState":
        return self if self.kind == "density" else QuantumState(self.layout, self.density())

    def expect(self, op) -> complex:
        mat = op.matrix if isinstance(op, QuantumOperator) else op
        if self.kind == "pure":
            return complex(self.data.conj() @ mat @ self.data)
        return complex(np.trace(mat @ self.data))

    def diagnostics(self) -> dict:
        """Deviation of the state from its defining invariants."""
        if self.kind == "pure":
            return {"norm_error": abs(float(np.linalg.norm(self.data)) - 1.0)}
        rho = self.data
        herm = rho - rho.conj().T
        return {
            "trace_error": abs(complex(np.trace(rho)) - 1.0),
            "hermiticity_error": float(np.max(np.abs(herm))),
            "min_eigenvalue": float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]),
        }

    def check(self) -> None:
        diag = self.diagnostics()
        if self.kind == "pure":
            if diag["norm_error"] >= 1e-9:
                raise ValueError(f"pure state not normalized: |norm - 1| = {diag['norm_error']:.3e}")
            return
        if diag["trace_error"] >= 1e-8:
            raise ValueError(f"density matrix trace error {diag['trace_error']:.3e}")
        if diag["hermiticity_error"] >= 1e-10:
            raise ValueError(f"density matrix not Hermitian: {diag['hermiticity_error']:.3e}")
        if diag["min_eigenvalue"] <= -1e-8:
            raise ValueError(f"density matrix not positive: min eigenvalue {diag['min_eigenvalue']:.3e}")


@dataclass
class Trajectory:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    states: list[QuantumState] | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory time grid must be strictly increasing")
        for name, vals in self.observables.items():
            if len(vals) != len(self.times):
                raise ValueError(f"observable {name!r} has {len(vals)} samples for {len(self.times)} times")


@dataclass(frozen=True)
class CorrelationSeries:
    """Normalized two-time correlator on a delay grid.

    ``raw`` holds the unnormalized numerator; ``collapse_norm`` and
    ``probe_norm`` are the steady-state denominators it was divided by.
    """

    name: str
    tau: np.ndarray
    kappa_tau: np.ndarray
    values: np.ndarray
    raw: np.ndarray
    collapse_norm: float
    probe_norm: float

    @property
    def zero_delay(self) -> float:
        return float(self.values[0])


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a nonempty 1-D sequence")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def integrate(rhs: Callable, y0: np.ndarray, t_grid: np.ndarray,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Adaptive Dormand-Prince 8(5,3) integration; returns y at every grid point (rows)."""
    t = _check_grid(t_grid)
    y0 = np.asarray(y0, dtype=complex)
    if t.size == 1:
        return y0[None, :].copy()
    sol = solve_ivp(rhs, (t[0], t[-1]), y0, method="DOP853", t_eval=t, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise IntegrationError(f"integration failed at t={sol.t[-1] if sol.t.size else t[0]:.6g} ns: {sol.message}")
    return sol.y.T


def schrodinger_evolve(h_of_t, psi0: QuantumState, t_grid,
                       populations: Sequence[tuple] = (), observables: Mapping[str, QuantumOperator] | None = None,
                       store_states: bool = False, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                       max_norm_drift: float = 1e-6) -> Trajectory:
    """Integrate i dpsi/dt = H(t) psi.

    ``h_of_t`` is a constant QuantumOperator, or a callable of time returning
    a QuantumOperator or an ndarray.  ``populations`` lists (n, m, s) labels.
    The state is never renormalized; a norm drift above ``max_norm_drift``
    at any output point raises NormDriftError.
    """
    if psi0.kind != "pure":
        raise ValueError("schrodinger_evolve needs a pure initial state")
    psi0.check()
    layout = psi0.layout
    if isinstance(h_of_t, QuantumOperator):
        const = h_of_t.matrix
        rhs = lambda t, y: -1j * (const @ y)
    else:
        if hasattr(h_of_t, "matrix") and callable(h_of_t.matrix):
            get = h_of_t.matrix
        else:
            get = lambda t: (lambda h: h.matrix if isinstance(h, QuantumOperator) else np.asarray(h))(h_of_t(t))
        rhs = lambda t, y: -1j * (get(t) @ y)
    ys = integrate(rhs, psi0.data, t_grid, rtol, atol)
    drift = np.abs(np.linalg.norm(ys, axis=1) - 1.0)
    worst = float(drift.max())
    if worst > max_norm_drift:
        bad = int(np.argmax(drift > max_norm_drift))
        raise NormDriftError(f"norm drift {worst:.3e} exceeds {max_norm_drift:.1e} "
                             f"(first at t={np.asarray(t_grid)[bad]:.6g} ns); tighten tolerances")
    obs = {}
    for lab in populations:
        idx = basis_index(*lab, layout)
        obs[population_name(lab)] = np.abs(ys[:, idx]) ** 2
    for name, op in (observables or {}).items():
        obs[name] = np.einsum("ti,ij,tj->t", ys.conj(), op.matrix, ys).real
    states = [QuantumState(layout, y) for y in ys] if store_states else None
    return Trajectory(np.asarray(t_grid, dtype=float), obs, states, {"max_norm_drift": worst})


def population_name(label) -> str:
    n, m, s = label
    return f"P_{n}{m}{'ge'[QUBIT_LEVELS[s]]}"


def vec(mat: np.ndarray) -> np.ndarray:
    return np.asarray(mat).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Lindblad generator on column-stacked density matrices (sparse, d^2 x d^2)."""

    layout: SpaceLayout
    generator: sps.csr_matrix
    kappa: float = 0.0
    gamma: float = 0.0

    @property
    def dim(self) -> int:
        return self.layout.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.generator @ vec(rho), self.dim)

    def dense(self) -> np.ndarray:
        return self.generator.toarray()

    def sector(self, seed) -> np.ndarray:
        """Sorted vectorized indices reachable from ``seed`` under the generator.

        ``seed`` is an index array or a vector whose nonzero entries start the
        search.  The span of the returned indices is invariant under the
        generator.
        """
        n = self.generator.shape[0]
        seed = np.asarray(seed)
        mask = np.zeros(n, dtype=bool)
        if seed.dtype.kind in "iu":
            mask[seed] = True
        else:
            mask[np.flatnonzero(seed)] = True
        pattern = self.generator.copy()
        pattern.data = np.ones_like(pattern.data, dtype=float)
        while True:
            grown = mask | ((pattern @ mask.astype(float)) > 0)
            if grown.sum() == mask.sum():
                return np.flatnonzero(mask)
            mask = grown

    def block(self, indices: np.ndarray) -> np.ndarray:
        return self.generator[indices][:, indices].toarray()

    def diagonal_indices(self) -> np.ndarray:
        return np.arange(self.dim) * (self.dim + 1)


def _spre(a) -> sps.csr_matrix:
    return sps.kron(sps.identity(a.shape[0], format="csr"), sps.csr_matrix(a), format="csr")


def _spost(a) -> sps.csr_matrix:
    return sps.kron(sps.csr_matrix(a).T, sps.identity(a.shape[0], format="csr"), format="csr")


def build_liouvillian(h: QuantumOperator, kappa: float, gamma: float,
                      layout: SpaceLayout | None = None) -> Liouvillian:
    """Generator of -i[H, rho] + sum_j kappa/2 D[a_j] rho + gamma/2 D[sigma_-] rho.

    D[o] rho = 2 o rho o^dag - o^dag o rho - rho o^dag o, so photon number in
    an undriven cavity decays as exp(-kappa t).
    """
    layout = layout or h.layout
    if h.layout != layout:
        raise ValueError("Hamiltonian layout does not match")
    if not h.is_hermitian(1e-12):
        raise ValueError(f"Hamiltonian is not Hermitian (max |H - H^dag| = {h.hermiticity_error():.3e})")
    if kappa < 0 or gamma < 0:
        raise ValueError("damping rates must be nonnegative")
    hm = h.matrix
    gen = -1j * (_spre(hm) - _spost(hm))
    sm = qubit_ops(layout)[2].matrix
    jumps = [(kappa, ladder_ops(layout, 1)[0].matrix), (kappa, ladder_ops(layout, 2)[0].matrix), (gamma, sm)]
    for rate, c in jumps:
        if rate == 0:
            continue
        cdc = c.conj().T @ c
        gen = gen + (rate / 2) * (2 * sps.kron(sps.csr_matrix(c.conj()), sps.csr_matrix(c))
                                  - _spre(cdc) - _spost(cdc))
    gen = sps.csr_matrix(gen)
    gen.eliminate_zeros()
    return Liouvillian(layout, gen, kappa, gamma)


def _density_diagnostics(rho: np.ndarray) -> tuple[float, float, float]:
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = abs(complex(np.trace(rho)) - 1.0)
    mineig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return tr, herm, mineig


def evolve_vector(liou: Liouvillian, v0: np.ndarray, t_grid, rtol: float = DEFAULT_RTOL,
                  atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Propagate a vectorized operator by exp(L t); rows are full d^2 vectors at each grid time."""
    idx = liou.sector(v0)
    blk = liou.block(idx)
    ys = integrate(lambda t, y: blk @ y, np.asarray(v0)[idx], t_grid, rtol, atol)
    out = np.zeros((ys.shape[0], liou.generator.shape[0]), dtype=complex)
    out[:, idx] = ys
    return out


def lindblad_evolve(liou: Liouvillian, rho0: QuantumState, t_grid,
                    populations: Sequence[tuple] = (), observables: Mapping[str, QuantumOperator] | None = None,
                    store_states: bool = False, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                    positivity_floor: float = -1e-6) -> Trajectory:
    """Integrate the master equation; density-matrix invariants are measured at every output time."""
    rho0 = rho0.to_density()
    rho0.check()
    d = liou.dim
    vs = evolve_vector(liou, vec(rho0.data), t_grid, rtol, atol)
    obs: dict[str, list] = {population_name(lab): [] for lab in populations}
    obs.update({name: [] for name in (observables or {})})
    states = [] if store_states else None
    worst_tr = worst_herm = 0.0
    min_eig = np.inf
    t = np.asarray(t_grid, dtype=float)
    for k, v in enumerate(vs):
        rho = unvec(v, d)
        tr, herm, mineig = _density_diagnostics(rho)
        worst_tr, worst_herm, min_eig = max(worst_tr, tr), max(worst_herm, herm), min(min_eig, mineig)
        if mineig < positivity_floor:
            raise PositivityError(f"density matrix eigenvalue {mineig:.3e} at t={t[k]:.6g} ns; "
                                  "raise the cutoff or tighten tolerances")
        for lab in populations:
            i = basis_index(*lab, liou.layout)
            obs[population_name(lab)].append(rho[i, i].real)
        for name, op in (observables or {}).items():
            obs[name].append(np.trace(op.matrix @ rho).real)
        if store_states:
            states.append(QuantumState(liou.layout, rho))
    diag = {"max_trace_error": worst_tr, "max_hermiticity_error": worst_herm, "min_eigenvalue": min_eig}
    return Trajectory(t, {k: np.asarray(v) for k, v in obs.items()}, states, diag)


@dataclass(frozen=True)
class SteadyStateInfo:
    residual: float
    smallest_singular: float
    second_singular: float
    sector_size: int
    spectral_gap: float


def steady_state(liou: Liouvillian, gap_ratio: float = 1e3, return_info: bool = False):
    """Unique null vector of the generator with unit trace.

    The solve runs on the sector reachable from all populations, which holds
    every stationary state.  Uniqueness is checked by the singular-value gap
    of that block; the first row is replaced by the trace functional.
    """
    d = liou.dim
    diag_idx = liou.diagonal_indices()
    idx = liou.sector(diag_idx)
    blk = liou.block(idx)
    sv = np.linalg.svd(blk, compute_uv=False)
    smallest = float(sv[-1])
    second = float(sv[-2]) if sv.size > 1 else 0.0
    roundoff = float(sv[0]) * sv.size * np.finfo(float).eps
    if not second > gap_ratio * max(smallest, roundoff):
        raise DegenerateSteadyStateError(
            f"steady state not unique: singular values {smallest:.3e}, {second:.3e} "
            "(zero damping or disconnected blocks)")
    trace_row = np.isin(idx, diag_idx).astype(complex)
    mat = blk.copy()
    mat[0, :] = trace_row
    rhs = np.zeros(idx.size, dtype=complex)
    rhs[0] = 1.0
    try:
        x = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSteadyStateError(f"steady-state system is singular: {exc}") from None
    full = np.zeros(d * d, dtype=complex)
    full[idx] = x
    rho = unvec(full, d)
    rho = 0.5 * (rho + rho.conj().T)
    residual = float(np.linalg.norm(liou.generator @ vec(rho)))
    state = QuantumState(liou.layout, rho)
    state.check()
    if not return_info:
        return state
    ev = np.linalg.eigvals(blk)
    nonzero = np.sort(-ev.real)[1:]
    gap = float(nonzero[0]) if nonzero.size else np.inf
    return state, SteadyStateInfo(residual, smallest, second, int(idx.size), gap)


def regression_correlator(liou: Liouvillian, rho_ss: QuantumState, collapse: QuantumOperator,
                          probe: QuantumOperator, tau_grid, name: str = "",
                          rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                          floor: float = 1e-14) -> CorrelationSeries:
    """Tr[P^dag P exp(L tau)(C rho C^dag)] / (<C^dag C> <P^dag P>) via quantum regression.

    The propagated operator has trace <C^dag C>, so the absolute tolerance is
    scaled by it to keep the normalized values at the requested accuracy.
    """
    tau = _check_grid(tau_grid)
    if tau[0] < 0:
        raise ValueError("delays must be nonnegative")
    rho = rho_ss.density()
    c, p = collapse.matrix, probe.matrix
    pp = p.conj().T @ p
    c_norm = float(np.trace(c.conj().T @ c @ rho).real)
    p_norm = float(np.trace(pp @ rho).real)
    if c_norm < floor or p_norm < floor:
        raise NoEmissionError(f"correlator {name or '?'} has vanishing normalization "
                              f"({c_norm:.3e}, {p_norm:.3e}); the steady state does not emit")
    x0 = c @ rho @ c.conj().T
    vs = evolve_vector(liou, vec(x0), tau, rtol, atol * c_norm)
    raw = vs @ vec(pp.T)
    raw = raw.real
    kappa = liou.kappa
    return CorrelationSeries(name, tau, tau * kappa, raw / (c_norm * p_norm), raw, c_norm, p_norm)
