import math
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants

from pairblockade.model import (R_K, CircuitParams, InteractionHamiltonian, ModelParams, angular_to_ghz,
                                build_h_eff, build_h_I, check_resonance, check_rwa, check_two_level,
                                circuit_to_model, benchmark_params, g_eff, ghz_to_angular, impedance_ohm,
                                omega_j_from_bias, solve_bias_voltage)
from pairblockade.operators import SIGMA_Z, SpaceLayout, basis_index, basis_label, embed


def lc_for(f_ghz, z_ohm):
    w = 2 * math.pi * f_ghz * 1e9
    return z_ohm / w * 1e9, 1 / (z_ohm * w) * 1e15   # nH, fF


Z_LAMBDA_02 = R_K * 0.04 / math.pi


def circuit(**kw):
    l1, c1 = lc_for(9.0, Z_LAMBDA_02)
    l2, c2 = lc_for(7.0, Z_LAMBDA_02)
    base = dict(inductance_nh=(l1, l2), capacitance_ff=(c1, c2), e_j0=0.25, flux_ratio=0.0,
                e_c=20.0, e_jq=5.0)
    base.update(kw)
    return CircuitParams(**base)


# circuit mapping

def test_designed_circuit_reproduces_benchmark():
    m = circuit_to_model(circuit())
    g = m.to_ghz()
    assert g["omega_1"] == pytest.approx(9.0, rel=1e-12)
    assert g["omega_2"] == pytest.approx(7.0, rel=1e-12)
    assert g["lambda_1"] == pytest.approx(0.2, rel=1e-12)
    assert g["e_j"] == pytest.approx(0.5)
    assert check_resonance(m).passed


def test_high_impedance_resonator():
    # 452.1 nH with 0.6918 fF resonates at 9 GHz, but Z ~ 25.6 kOhm puts lambda above 1
    l_nh, c_ff = 452.1, 0.6918
    assert 1 / (2 * math.pi * math.sqrt(l_nh * 1e-9 * c_ff * 1e-15)) * 1e-9 == pytest.approx(9.0, rel=1e-3)
    with pytest.raises(ValueError, match="lambda_1"):
        circuit_to_model(circuit(inductance_nh=(l_nh, l_nh), capacitance_ff=(c_ff, c_ff)))


@settings(max_examples=50)
@given(st.floats(1, 20), st.floats(50, 2000))
def test_frequency_impedance_round_trip(f, z):
    l_nh, c_ff = lc_for(f, z)
    c = circuit(inductance_nh=(l_nh, l_nh), capacitance_ff=(c_ff, c_ff))
    m = circuit_to_model(c)
    assert angular_to_ghz(m.omega_2) == pytest.approx(f, rel=1e-12)
    assert impedance_ohm(c)[0] == pytest.approx(z, rel=1e-12)


def test_impedance_for_lambda_point_two():
    assert R_K == pytest.approx(25812.807, rel=1e-7)
    z = R_K * 0.04 / math.pi
    assert z == pytest.approx(328.7, abs=0.05)
    l_nh, c_ff = lc_for(9.0, z)
    m = circuit_to_model(circuit(inductance_nh=(l_nh, l_nh), capacitance_ff=(c_ff, c_ff)))
    assert m.lambda_1 == pytest.approx(0.2, rel=1e-12)


@pytest.mark.parametrize("flux,factor", [(0.0, 2.0), (0.25, math.sqrt(2.0)), (0.5, 0.0)])
def test_flux_tunes_josephson_energy(flux, factor):
    m = circuit_to_model(circuit(flux_ratio=flux))
    assert angular_to_ghz(m.e_j) == pytest.approx(factor * 0.25, abs=1e-15)


def test_negative_josephson_energy_rejected():
    with pytest.raises(ValueError, match="flux"):
        circuit_to_model(circuit(flux_ratio=0.7))


def test_bias_sets_josephson_frequency():
    m = circuit_to_model(circuit(bias_uv=43.43))
    assert angular_to_ghz(m.omega_j) == pytest.approx(2 * constants.e * 43.43e-6 / constants.h * 1e-9)
    assert angular_to_ghz(m.delta) == 5.0


def test_circuit_invariants():
    with pytest.raises(ValueError):
        circuit(e_c=1.0, e_jq=2.0)
    with pytest.raises(ValueError):
        circuit(flux_ratio=1.0)
    with pytest.raises(ValueError):
        circuit(inductance_nh=(1.0, -1.0))


def test_model_invariants():
    with pytest.raises(ValueError):
        benchmark_params(lambda_1=1.0)
    with pytest.raises(ValueError):
        benchmark_params(lambda_2=-0.1)
    with pytest.raises(ValueError):
        replace(benchmark_params(), cutoff=1)
    with pytest.raises(ValueError):
        replace(benchmark_params(), kappa=-1.0)


def test_ghz_round_trip():
    p = benchmark_params(kappa=0.1, gamma=0.01)
    assert p.to_ghz()["omega_1"] == pytest.approx(9.0)
    assert p.omega_1 == pytest.approx(2 * math.pi * 9.0)
    assert angular_to_ghz(ghz_to_angular(3.3)) == pytest.approx(3.3)


# validity checks

def test_resonance_at_defaults():
    rep = check_resonance(benchmark_params())
    assert rep.passed and rep.detuning == 0.0


def test_detuned_by_one_ghz():
    rep = check_resonance(benchmark_params(omega_j=20.0))
    assert angular_to_ghz(rep.detuning) == pytest.approx(-1.0)
    assert not rep.passed


def test_resonance_exact_from_bias_voltage():
    p = benchmark_params()
    q = replace(p, omega_j=omega_j_from_bias(solve_bias_voltage(p)))
    assert check_resonance(q).passed


def test_bias_voltage_values():
    p = benchmark_params()
    assert solve_bias_voltage(p) == pytest.approx(constants.h * 21e9 / (2 * constants.e) * 1e6)
    assert solve_bias_voltage(p) == pytest.approx(43.42, abs=0.01)
    doubled = replace(p, omega_1=2 * p.omega_1, omega_2=2 * p.omega_2, delta=2 * p.delta)
    assert solve_bias_voltage(doubled) == pytest.approx(2 * solve_bias_voltage(p))
    zero = replace(p, omega_1=0.0, omega_2=0.0, delta=0.0)
    assert solve_bias_voltage(zero) == 0.0


def test_rwa_ratio_at_defaults():
    rep = check_rwa(benchmark_params())
    assert rep.ratio == pytest.approx(0.0085, abs=5e-5)
    assert rep.ratio == pytest.approx(0.125 * 0.369246538554654 ** 2 / 2.0, rel=1e-9)
    assert rep.passed
    assert rep.ratio_all_levels > rep.ratio


def test_rwa_limits():
    assert check_rwa(benchmark_params(e_j=0.0)).ratio == 0.0
    rep = check_rwa(benchmark_params(e_j=40.0))
    assert rep.ratio > 0.05 and not rep.passed
    with pytest.raises(ValueError, match="degenerate"):
        check_rwa(benchmark_params(omega_2=9.0))


def test_two_level():
    rep = check_two_level(circuit(e_c=20.0, e_jq=5.0))
    assert rep.ratio == 24.0 and rep.passed
    assert not check_two_level(circuit(e_c=1.0, e_jq=0.9)).passed
    # the ratio-1 boundary lies outside the CircuitParams invariants; the check has no preconditions
    assert check_two_level(SimpleNamespace(e_c=1.0, e_jq=6.0)).ratio == 1.0
    assert not check_two_level(SimpleNamespace(e_c=1.0, e_jq=6.0)).passed
    assert check_two_level(SimpleNamespace(e_c=1.0, e_jq=0.0)).passed


# effective coupling and Hamiltonians

def test_g_eff_ground_value():
    g = g_eff(0, 0, benchmark_params())
    assert abs(g) / (2 * math.pi) == pytest.approx(0.0170429, abs=5e-7)
    assert abs(g) / (2 * math.pi) == pytest.approx(0.125 * 0.369246538554654 ** 2, rel=1e-12)
    assert g.imag == 0.0 and g.real < 0


def test_g_eff_zero_coupling():
    assert g_eff(2, 1, benchmark_params(e_j=0.0)) == 0


def test_h_eff_structure():
    p = benchmark_params(cutoff=3)
    h = build_h_eff(p).matrix
    lay = p.layout
    assert np.abs(h - h.conj().T).max() == 0
    for n in range(3):
        for m in range(3):
            assert h[basis_index(n, m, "g", lay), basis_index(n + 1, m + 1, "e", lay)] == g_eff(n, m, p)
    assert np.count_nonzero(h) == 2 * 9


def test_h_eff_spectrum_is_symmetric():
    ev = np.linalg.eigvalsh(build_h_eff(benchmark_params(lambda_1=0.3, cutoff=4)).matrix)
    np.testing.assert_allclose(np.sort(ev), np.sort(-ev), atol=1e-15)


def test_h_eff_needs_photons():
    with pytest.raises(ValueError):
        build_h_eff(benchmark_params(), SpaceLayout((0, 3)))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 50))
def test_h_i_is_hermitian(t):
    h = build_h_I(t, benchmark_params(cutoff=3))
    assert h.hermiticity_error() < 1e-13


def test_h_i_without_coupling():
    # lambda = 0: D = 1 and H(0) = (E_J/2) sigma_z
    p = benchmark_params(lambda_1=0.0, lambda_2=0.0, cutoff=2)
    expected = p.e_j / 2 * embed(SIGMA_Z, p.layout, "qubit")
    np.testing.assert_allclose(build_h_I(0.0, p).matrix, expected, atol=1e-15)


def test_h_i_period_average():
    """One-period average keeps the pair terms and the resonant sigma_z term at omega_J = 3 omega_2."""
    p = benchmark_params(cutoff=4)
    hi = InteractionHamiltonian(p)
    samples = 1024                         # every frequency is a whole number of GHz, period 1 ns
    avg = sum(hi.matrix(k / samples) for k in range(samples)) / samples
    heff = build_h_eff(p).matrix
    diff = avg - heff
    lay = p.layout
    for i, j in zip(*np.nonzero(np.abs(diff) > 1e-12)):
        n, m, s = basis_label(i, lay)
        n2, m2, s2 = basis_label(j, lay)
        assert (n, s) == (n2, s2) and abs(m - m2) == 3
    pair = np.abs(heff) > 0
    np.testing.assert_allclose(avg[pair], heff[pair], atol=1e-12)


def test_interaction_hamiltonian_matches_direct_displacement():
    from pairblockade.operators import SIGMA_MINUS, SIGMA_PLUS, displacement_fock
    p = benchmark_params(cutoff=3)
    t = 0.37
    d1 = displacement_fock(2j * p.lambda_1 * np.exp(1j * p.omega_1 * t), 3)
    d2 = displacement_fock(2j * p.lambda_2 * np.exp(1j * p.omega_2 * t), 3)
    q = SIGMA_PLUS * np.exp(1j * p.delta * t) - SIGMA_MINUS * np.exp(-1j * p.delta * t) - SIGMA_Z
    a = -p.e_j / 4 * np.exp(1j * p.omega_j * t) * np.kron(np.kron(d1, d2), q)
    np.testing.assert_allclose(build_h_I(t, p).matrix, a + a.conj().T, atol=1e-13)
