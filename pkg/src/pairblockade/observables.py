"""Populations, steady-state photon correlators and the pair emission rate."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dynamics import (DEFAULT_ATOL, DEFAULT_RTOL, CorrelationSeries, QuantumState, build_liouvillian,
                       population_name, regression_correlator, steady_state)
from .errors import NoEmissionError
from .model import ModelParams, build_h_eff
from .operators import basis_index, ladder_ops

__all__ = ["CorrelationSeries", "EmissionPoint", "SteadyStateEngine", "populations", "g2_standard",
           "g2_cross", "g2_pair", "emission_rate", "CORRELATORS", "zero_delay_summary", "ConvergenceReport",
           "cutoff_convergence"]


def populations(state: QuantumState, labels) -> dict[str, float]:
    """Occupation probabilities of the basis states ``labels`` ((n, m, s) tuples)."""
    out = {}
    for lab in labels:
        i = basis_index(*lab, state.layout)
        if state.kind == "pure":
            out[population_name(lab)] = float(abs(state.data[i]) ** 2)
        else:
            out[population_name(lab)] = float(state.data[i, i].real)
    return out


class SteadyStateEngine:
    """Effective-Hamiltonian master equation at one parameter point.

    Builds the generator and the steady state once; correlator and emission
    queries reuse them.  Nothing here mutates after construction.
    """

    def __init__(self, params: ModelParams, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL):
        if params.kappa <= 0:
            raise ValueError("steady-state observables need kappa > 0")
        self.params = params
        self.layout = params.layout
        self.rtol, self.atol = rtol, atol
        self.h_eff = build_h_eff(params, self.layout)
        self.liouvillian = build_liouvillian(self.h_eff, params.kappa, params.gamma, self.layout)
        self.rho_ss, self.info = steady_state(self.liouvillian, return_info=True)
        self.a1 = ladder_ops(self.layout, 1)[0]
        self.a2 = ladder_ops(self.layout, 2)[0]

    @cached_property
    def pair(self):
        return self.a1 @ self.a2

    def expect(self, op) -> float:
        return self.rho_ss.expect(op).real

    def photon_numbers(self) -> tuple[float, float]:
        return (self.expect(self.a1.dag() @ self.a1), self.expect(self.a2.dag() @ self.a2))

    def correlator(self, collapse, probe, tau_grid, name: str) -> CorrelationSeries:
        return regression_correlator(self.liouvillian, self.rho_ss, collapse, probe, tau_grid, name,
                                     self.rtol, self.atol)

    def direct_zero_delay(self, name: str) -> float:
        """Zero-delay correlator from normally ordered steady-state moments."""
        a1, a2, pair = self.a1, self.a2, self.pair
        n1, n2 = self.photon_numbers()
        if name == "g11":
            return self.expect(a1.dag() @ a1.dag() @ a1 @ a1) / n1 ** 2
        if name == "g22":
            return self.expect(a2.dag() @ a2.dag() @ a2 @ a2) / n2 ** 2
        if name == "g12":
            return self.expect(a1.dag() @ a2.dag() @ a2 @ a1) / (n1 * n2)
        if name == "g1212":
            npair = self.expect(pair.dag() @ pair)
            return self.expect(pair.dag() @ pair.dag() @ pair @ pair) / npair ** 2
        raise KeyError(name)


def g2_standard(p: int, engine: SteadyStateEngine, tau_grid) -> CorrelationSeries:
    if p not in (1, 2):
        raise ValueError(f"cavity index must be 1 or 2, got {p!r}")
    a = engine.a1 if p == 1 else engine.a2
    return engine.correlator(a, a, tau_grid, f"g{p}{p}")


def g2_cross(engine: SteadyStateEngine, tau_grid) -> CorrelationSeries:
    return engine.correlator(engine.a1, engine.a2, tau_grid, "g12")


def g2_pair(engine: SteadyStateEngine, tau_grid) -> CorrelationSeries:
    pair = engine.pair
    if engine.expect(pair.dag() @ pair) < 1e-14:
        raise NoEmissionError("no pair emission: <a1^dag a2^dag a1 a2> vanishes in the steady state")
    return engine.correlator(pair, pair, tau_grid, "g1212")


CORRELATORS = {
    "g11": lambda eng, tau: g2_standard(1, eng, tau),
    "g22": lambda eng, tau: g2_standard(2, eng, tau),
    "g12": g2_cross,
    "g1212": g2_pair,
}


@dataclass(frozen=True)
class EmissionPoint:
    """Steady-state emission; ``rate`` is photons/ns, ``rate_mhz`` the same in MHz."""

    gamma_over_kappa: float
    nbar: float
    nbar_1: float
    nbar_2: float
    kappa: float
    rate: float

    @property
    def rate_mhz(self) -> float:
        return self.rate * 1e3


def emission_rate(engine: SteadyStateEngine) -> EmissionPoint:
    """S = kappa * nbar with nbar the mean occupation of the two cavities."""
    n1, n2 = engine.photon_numbers()
    nbar = 0.5 * (n1 + n2)
    kappa = engine.params.kappa
    return EmissionPoint(engine.params.gamma / kappa, nbar, n1, n2, kappa, kappa * nbar)


def zero_delay_summary(engine: SteadyStateEngine) -> dict[str, float]:
    """Zero-delay correlators (from steady-state moments) and the emission rate."""
    out = {}
    for name in CORRELATORS:
        try:
            out[name] = engine.direct_zero_delay(name)
        except ZeroDivisionError:
            out[name] = float("nan")
    out["S"] = emission_rate(engine).rate
    return out


@dataclass(frozen=True)
class ConvergenceReport:
    cutoff: int
    compared_with: int
    changes: dict
    tolerance: float
    passed: bool
    escalated: bool


def _relative_changes(a: dict, b: dict) -> dict:
    out = {}
    for k in a:
        x, y = a[k], b[k]
        if np.isnan(x) and np.isnan(y):
            out[k] = 0.0
        elif y == x:
            out[k] = 0.0
        else:
            out[k] = abs(x - y) / max(abs(y), 1e-300)
    return out


def cutoff_convergence(params: ModelParams, tolerance: float = 1e-6, step: int = 2,
                       escalate: bool = True, rtol: float = DEFAULT_RTOL,
                       atol: float = DEFAULT_ATOL) -> ConvergenceReport:
    """Compare steady-state observables at ``cutoff`` and ``cutoff + step``.

    With ``escalate`` a failed comparison is retried once one step higher;
    the report's ``cutoff`` is the lower cutoff of the last comparison.
    """
    cut = params.cutoff
    low = zero_delay_summary(SteadyStateEngine(params, rtol, atol))
    high = zero_delay_summary(SteadyStateEngine(params.with_cutoff(cut + step), rtol, atol))
    changes = _relative_changes(low, high)
    passed = max(changes.values()) < tolerance
    if passed or not escalate:
        return ConvergenceReport(cut, cut + step, changes, tolerance, passed, False)
    higher = zero_delay_summary(SteadyStateEngine(params.with_cutoff(cut + 2 * step), rtol, atol))
    changes = _relative_changes(high, higher)
    return ConvergenceReport(cut + step, cut + 2 * step, changes, tolerance,
                             max(changes.values()) < tolerance, True)
