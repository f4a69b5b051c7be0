"""Circuit parameters, validity diagnostics and the two model Hamiltonians.

Internally every frequency and rate is angular, in rad/ns, and time is in ns.
User-facing values are ordinary frequencies in GHz; ``ModelParams.from_ghz``
and ``ModelParams.to_ghz`` are the only places the factor 2*pi appears.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import constants

from .operators import (SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, QuantumOperator, SpaceLayout,
                        basis_index, displacement_fock, frank_condon)

TWO_PI = 2.0 * math.pi
R_K = constants.h / constants.e ** 2     # resistance quantum, ohm


def ghz_to_angular(f_ghz: float) -> float:
    return TWO_PI * f_ghz


def angular_to_ghz(w: float) -> float:
    return w / TWO_PI


@dataclass(frozen=True)
class CircuitParams:
    """Hardware values: inductance in nH, capacitance in fF, energies in GHz (E/h), bias in uV."""

    inductance_nh: tuple[float, float]
    capacitance_ff: tuple[float, float]
    e_j0: float
    flux_ratio: float
    e_c: float
    e_jq: float
    bias_uv: float | None = None

    def __post_init__(self):
        for name in ("inductance_nh", "capacitance_ff"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 2 or min(vals) <= 0:
                raise ValueError(f"{name} needs two positive values, got {vals}")
            object.__setattr__(self, name, vals)
        for name in ("e_j0", "e_c", "e_jq"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.flux_ratio < 1:
            raise ValueError(f"flux_ratio must lie in [0, 1), got {self.flux_ratio}")
        if self.bias_uv is not None and not self.bias_uv > 0:
            raise ValueError(f"bias_uv must be positive, got {self.bias_uv}")
        if not self.e_c > self.e_jq:
            raise ValueError(f"charge qubit needs E_c > E_Jq, got E_c={self.e_c}, E_Jq={self.e_jq}")


@dataclass(frozen=True)
class ModelParams:
    """Quantized model constants, angular units (rad/ns)."""

    omega_1: float
    omega_2: float
    delta: float
    e_j: float
    lambda_1: float
    lambda_2: float
    omega_j: float
    kappa: float = 0.0
    gamma: float = 0.0
    cutoff: int = 5

    def __post_init__(self):
        for name in ("omega_1", "omega_2", "delta", "e_j", "omega_j", "kappa", "gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        for name in ("lambda_1", "lambda_2"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ValueError(f"cutoff must be an integer >= 2, got {self.cutoff}")
        object.__setattr__(self, "cutoff", int(self.cutoff))

    @classmethod
    def from_ghz(cls, *, omega_1, omega_2, delta, e_j, lambda_1, lambda_2,
                 omega_j=None, kappa=0.0, gamma=0.0, cutoff=5) -> "ModelParams":
        """Build from ordinary frequencies in GHz; ``omega_j=None`` means exact resonance."""
        w1, w2, dl = (ghz_to_angular(v) for v in (omega_1, omega_2, delta))
        wj = w1 + w2 + dl if omega_j is None else ghz_to_angular(omega_j)
        return cls(w1, w2, dl, ghz_to_angular(e_j), lambda_1, lambda_2, wj,
                   ghz_to_angular(kappa), ghz_to_angular(gamma), cutoff)

    def to_ghz(self) -> dict:
        out = asdict(self)
        for k in ("omega_1", "omega_2", "delta", "e_j", "omega_j", "kappa", "gamma"):
            out[k] = angular_to_ghz(out[k])
        return out

    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout.uniform(self.cutoff)

    def with_cutoff(self, cutoff: int) -> "ModelParams":
        return replace(self, cutoff=cutoff)


def benchmark_params(**overrides) -> ModelParams:
    """Default benchmark values (GHz), at exact resonance."""
    values = dict(omega_1=9.0, omega_2=7.0, delta=5.0, e_j=0.5, lambda_1=0.2, lambda_2=0.2)
    values.update(overrides)
    return ModelParams.from_ghz(**values)


def omega_j_from_bias(bias_uv: float) -> float:
    """Josephson frequency 2eV/hbar in rad/ns."""
    return 2 * constants.e * bias_uv * 1e-6 / constants.hbar * 1e-9


def circuit_to_model(c: CircuitParams, kappa: float = 0.0, gamma: float = 0.0,
                     cutoff: int = 5) -> ModelParams:
    """Map hardware values to model constants; ``kappa``/``gamma`` in rad/ns.

    Without an explicit bias the Josephson frequency is set on resonance.
    """
    cos_flux = math.cos(math.pi * c.flux_ratio)
    if cos_flux < 0:
        raise ValueError(
            f"flux ratio {c.flux_ratio} gives a negative effective Josephson energy; "
            f"use flux ratio 1 - {c.flux_ratio} = {1 - c.flux_ratio:g} for the same |E_J|")
    omegas, lams = [], []
    for l_nh, c_ff in zip(c.inductance_nh, c.capacitance_ff):
        ind, cap = l_nh * 1e-9, c_ff * 1e-15
        omegas.append(1.0 / math.sqrt(ind * cap) * 1e-9)
        lams.append(math.sqrt(math.pi * math.sqrt(ind / cap) / R_K))
    delta = ghz_to_angular(c.e_jq)
    if c.bias_uv is None:
        omega_j = delta + omegas[0] + omegas[1]
    else:
        omega_j = omega_j_from_bias(c.bias_uv)
    return ModelParams(omegas[0], omegas[1], delta, ghz_to_angular(2 * c.e_j0 * cos_flux),
                       lams[0], lams[1], omega_j, kappa, gamma, cutoff)


def impedance_ohm(c: CircuitParams) -> tuple[float, float]:
    return tuple(math.sqrt(l * 1e-9 / (cap * 1e-15))
                 for l, cap in zip(c.inductance_nh, c.capacitance_ff))


def solve_bias_voltage(m: ModelParams) -> float:
    """Bias voltage in uV that puts the Josephson frequency on delta + omega_1 + omega_2."""
    target = m.delta + m.omega_1 + m.omega_2
    return constants.hbar * target * 1e9 / (2 * constants.e) * 1e6


@dataclass(frozen=True)
class ResonanceReport:
    detuning: float
    tolerance: float
    passed: bool


def check_resonance(m: ModelParams, tolerance: float = 1e-9) -> ResonanceReport:
    det = m.omega_j - (m.delta + m.omega_1 + m.omega_2)
    return ResonanceReport(det, tolerance, abs(det) < tolerance)


@dataclass(frozen=True)
class RWAReport:
    ratio: float
    ratio_all_levels: float
    smallest_frequency: float
    threshold: float
    passed: bool


def check_rwa(m: ModelParams, threshold: float = 0.05, n_max: int = 0) -> RWAReport:
    """Pair-coupling strength over the smallest frequency that must dominate it.

    ``ratio`` maximizes over n, m <= n_max (the ground-manifold coupling by
    default); ``ratio_all_levels`` maximizes over every pair transition that
    fits below the cutoff and is reported for information.
    """
    if m.omega_1 == m.omega_2:
        raise ValueError("degenerate cavities (omega_1 == omega_2); the pair resonance needs nondegenerate resonators")
    floor = min(m.delta, m.omega_1, m.omega_2, abs(m.omega_1 - m.omega_2))

    def worst(limit):
        b1 = [abs(frank_condon(n, 1, m.lambda_1)) for n in range(limit + 1)]
        b2 = [abs(frank_condon(k, 1, m.lambda_2)) for k in range(limit + 1)]
        return m.e_j / 4 * max(b1) * max(b2) / floor if floor > 0 else math.inf

    r = worst(n_max)
    return RWAReport(r, worst(m.cutoff - 1), floor, threshold, r < threshold)


@dataclass(frozen=True)
class TwoLevelReport:
    ratio: float
    threshold: float
    passed: bool


def check_two_level(c: CircuitParams, threshold: float = 10.0) -> TwoLevelReport:
    ratio = math.inf if c.e_jq == 0 else 6 * c.e_c / c.e_jq
    return TwoLevelReport(ratio, threshold, ratio > threshold)


def g_eff(n: int, m: int, params: ModelParams) -> complex:
    """Effective coupling of |n, m, g> <-> |n+1, m+1, e>, rad/ns."""
    return params.e_j / 4 * frank_condon(n, 1, params.lambda_1) * frank_condon(m, 1, params.lambda_2)


def build_h_eff(params: ModelParams, layout: SpaceLayout | None = None) -> QuantumOperator:
    layout = layout or params.layout
    n1, n2 = layout.cavity_cutoffs
    if min(n1, n2) < 1:
        raise ValueError("effective Hamiltonian needs cavity cutoffs >= 1")
    h = np.zeros((layout.dim, layout.dim), dtype=complex)
    for n in range(n1):
        for k in range(n2):
            g = g_eff(n, k, params)
            lo = basis_index(n, k, "g", layout)
            hi = basis_index(n + 1, k + 1, "e", layout)
            h[lo, hi] += g
            h[hi, lo] += g.conjugate()
    return QuantumOperator(layout, h, "H_eff")


class InteractionHamiltonian:
    """Full interaction-picture Hamiltonian as a function of time.

    The displacement amplitude 2i*lambda*exp(i*omega*t) only rotates the phase,
    so D(t) = R(t) D(0) R(t)^dag with R = diag(exp(i n omega t)).  The D(0)
    matrices are fixed by the parameters; every call assembles H(t) afresh.
    """

    def __init__(self, params: ModelParams, layout: SpaceLayout | None = None):
        self.params = params
        self.layout = layout or params.layout
        n1, n2 = self.layout.cavity_cutoffs
        self._d1 = displacement_fock(2j * params.lambda_1, n1)
        self._d2 = displacement_fock(2j * params.lambda_2, n2)
        self._n1 = np.arange(n1 + 1)
        self._n2 = np.arange(n2 + 1)

    def matrix(self, t: float) -> np.ndarray:
        p = self.params
        r1 = np.exp(1j * p.omega_1 * t * self._n1)
        r2 = np.exp(1j * p.omega_2 * t * self._n2)
        d1 = r1[:, None] * self._d1 * r1.conj()[None, :]
        d2 = r2[:, None] * self._d2 * r2.conj()[None, :]
        q = (SIGMA_PLUS * np.exp(1j * p.delta * t) - SIGMA_MINUS * np.exp(-1j * p.delta * t) - SIGMA_Z)
        a = (-p.e_j / 4 * np.exp(1j * p.omega_j * t)) * np.kron(np.kron(d1, d2), q)
        return a + a.conj().T

    def __call__(self, t: float) -> QuantumOperator:
        return QuantumOperator(self.layout, self.matrix(t), "H_I")


def build_h_I(t: float, params: ModelParams, layout: SpaceLayout | None = None) -> QuantumOperator:
    return InteractionHamiltonian(params, layout)(t)
