import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm, null_space

from pairblockade.dynamics import (CorrelationSeries, QuantumState, Trajectory, build_liouvillian,
                                   evolve_vector, lindblad_evolve, regression_correlator, schrodinger_evolve,
                                   steady_state, unvec, vec)
from pairblockade.errors import DegenerateSteadyStateError, NoEmissionError, NormDriftError
from pairblockade.model import InteractionHamiltonian, build_h_eff, benchmark_params, g_eff
from pairblockade.operators import QuantumOperator, SpaceLayout, basis_index, ladder_ops
from pairblockade.observables import SteadyStateEngine


def random_density(d, rng):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


def zero_h(layout):
    return QuantumOperator(layout, np.zeros((layout.dim, layout.dim)))


# states

def test_state_constructors():
    lay = SpaceLayout((2, 2))
    psi = QuantumState.basis(lay, 1, 1, "e")
    assert psi.kind == "pure" and psi.data[basis_index(1, 1, "e", lay)] == 1
    rho = psi.to_density()
    assert rho.kind == "density"
    rho.check()
    assert rho.expect(np.eye(lay.dim)) == pytest.approx(1.0)


def test_state_check_rejects_bad_states():
    lay = SpaceLayout((1, 1))
    with pytest.raises(ValueError, match="normalized"):
        QuantumState(lay, 2 * QuantumState.ground(lay).data).check()
    bad = np.diag([1.5, -0.5, 0, 0, 0, 0, 0, 0]).astype(complex)
    with pytest.raises(ValueError, match="positive"):
        QuantumState(lay, bad).check()
    with pytest.raises(ValueError):
        QuantumState(lay, np.ones(3))


def test_vec_convention():
    a, b, x = (np.random.default_rng(0).normal(size=(3, 3)) for _ in range(3))
    np.testing.assert_allclose(vec(a @ x @ b), np.kron(b.T, a) @ vec(x), atol=1e-12)
    np.testing.assert_array_equal(unvec(vec(x), 3), x)


def test_trajectory_validates_grid():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), {})
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 1.0]), {"x": np.zeros(3)})


# closed evolution

def test_zero_hamiltonian_keeps_state():
    lay = SpaceLayout((2, 2))
    psi0 = QuantumState.basis(lay, 1, 0, "e")
    traj = schrodinger_evolve(zero_h(lay), psi0, np.linspace(0, 10, 5), store_states=True)
    for s in traj.states:
        np.testing.assert_array_equal(s.data, psi0.data)


def test_effective_rabi_closed_form():
    # |0,0,g> couples only to |1,1,e>: P_11e = sin^2(|g| t)
    p = benchmark_params(cutoff=3)
    g = abs(g_eff(0, 0, p))
    t = np.linspace(0, 2 * math.pi / g, 301)
    traj = schrodinger_evolve(build_h_eff(p), QuantumState.ground(p.layout), t, [(0, 0, "g"), (1, 1, "e")])
    np.testing.assert_allclose(traj.observables["P_11e"], np.sin(g * t) ** 2, atol=1e-7)
    np.testing.assert_allclose(traj.observables["P_00g"], np.cos(g * t) ** 2, atol=1e-7)
    assert traj.diagnostics["max_norm_drift"] < 1e-6


def test_time_dependent_hamiltonian_callable_forms():
    p = benchmark_params(cutoff=2)
    hi = InteractionHamiltonian(p)
    t = np.linspace(0, 2, 11)
    psi0 = QuantumState.ground(p.layout)
    a = schrodinger_evolve(hi, psi0, t, [(0, 0, "g")])
    b = schrodinger_evolve(lambda s: hi(s), psi0, t, [(0, 0, "g")])
    c = schrodinger_evolve(lambda s: hi.matrix(s), psi0, t, [(0, 0, "g")])
    np.testing.assert_array_equal(a.observables["P_00g"], b.observables["P_00g"])
    np.testing.assert_array_equal(a.observables["P_00g"], c.observables["P_00g"])


def test_norm_drift_aborts():
    p = benchmark_params(cutoff=3)
    t = np.linspace(0, 400, 50)
    with pytest.raises(NormDriftError):
        schrodinger_evolve(InteractionHamiltonian(p), QuantumState.ground(p.layout), t,
                           rtol=1e-3, atol=1e-3, max_norm_drift=1e-9)


def test_schrodinger_needs_pure_state():
    lay = SpaceLayout((1, 1))
    with pytest.raises(ValueError):
        schrodinger_evolve(zero_h(lay), QuantumState.ground(lay).to_density(), [0, 1])


# open evolution

@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 2), st.floats(0, 2))
def test_generator_preserves_trace_and_hermiticity(seed, kappa, gamma):
    rng = np.random.default_rng(seed)
    p = benchmark_params(cutoff=2)
    liou = build_liouvillian(build_h_eff(p), kappa, gamma, p.layout)
    x = rng.normal(size=(p.layout.dim,) * 2) + 1j * rng.normal(size=(p.layout.dim,) * 2)
    rho = x + x.conj().T
    out = unvec(liou.apply(vec(rho)), p.layout.dim)
    assert abs(np.trace(out)) < 1e-12
    assert np.abs(out - out.conj().T).max() < 1e-12


def test_generator_matches_explicit_lindblad_form():
    rng = np.random.default_rng(3)
    p = benchmark_params(cutoff=2)
    lay = p.layout
    h = build_h_eff(p).matrix
    kappa, gamma = 0.7, 0.3
    ops = [(kappa, ladder_ops(lay, 1)[0].matrix), (kappa, ladder_ops(lay, 2)[0].matrix)]
    from pairblockade.operators import qubit_ops
    ops.append((gamma, qubit_ops(lay)[2].matrix))
    rho = random_density(lay.dim, rng)
    ref = -1j * (h @ rho - rho @ h)
    for rate, c in ops:
        cd = c.conj().T
        ref += rate / 2 * (2 * c @ rho @ cd - cd @ c @ rho - rho @ cd @ c)
    liou = build_liouvillian(build_h_eff(p), kappa, gamma, lay)
    np.testing.assert_allclose(unvec(liou.apply(vec(rho)), lay.dim), ref, atol=1e-13)


def test_non_hermitian_hamiltonian_rejected():
    lay = SpaceLayout((1, 1))
    with pytest.raises(ValueError):
        build_liouvillian(ladder_ops(lay, 1)[0], 0.1, 0.1, lay)


def test_sector_evolution_matches_dense_exponential():
    p = benchmark_params(cutoff=2)
    liou = build_liouvillian(build_h_eff(p), 0.4, 0.1, p.layout)
    v0 = vec(QuantumState.ground(p.layout).density())
    t = np.array([0.0, 3.0, 11.0])
    got = evolve_vector(liou, v0, t)
    full = liou.dense()
    for k, tk in enumerate(t):
        np.testing.assert_allclose(got[k], expm(full * tk) @ v0, atol=1e-8)
    assert liou.sector(v0).size < liou.dim ** 2


def test_photon_decay():
    lay = SpaceLayout((2, 2))
    kappa = 0.5
    liou = build_liouvillian(zero_h(lay), kappa, 0.0, lay)
    t = np.linspace(0, 8, 41)
    traj = lindblad_evolve(liou, QuantumState.basis(lay, 1, 0, "g"), t, [(1, 0, "g"), (0, 0, "g")])
    np.testing.assert_allclose(traj.observables["P_10g"], np.exp(-kappa * t), atol=1e-8)
    np.testing.assert_allclose(traj.observables["P_00g"], 1 - np.exp(-kappa * t), atol=1e-8)


def test_pair_state_survival():
    # with E_J = 0, |1,1,e> survives with probability exp(-(2 kappa + gamma) t)
    p = benchmark_params(e_j=0.0, cutoff=2)
    kappa, gamma = 0.3, 0.05
    liou = build_liouvillian(build_h_eff(p), kappa, gamma, p.layout)
    t = np.linspace(0, 10, 21)
    traj = lindblad_evolve(liou, QuantumState.basis(p.layout, 1, 1, "e"), t, [(1, 1, "e")])
    np.testing.assert_allclose(traj.observables["P_11e"], np.exp(-(2 * kappa + gamma) * t), atol=1e-8)


def test_unitary_limit_preserves_purity():
    p = benchmark_params(cutoff=3)
    liou = build_liouvillian(build_h_eff(p), 0.0, 0.0, p.layout)
    t = np.linspace(0, 80, 9)
    traj = lindblad_evolve(liou, QuantumState.ground(p.layout), t, store_states=True)
    for s in traj.states:
        assert np.trace(s.data @ s.data).real == pytest.approx(1.0, abs=1e-8)


def test_steady_state_is_fixed_point():
    p = benchmark_params(kappa=0.1, gamma=0.01)
    liou = build_liouvillian(build_h_eff(p), p.kappa, p.gamma, p.layout)
    rho_ss = steady_state(liou)
    n1 = ladder_ops(p.layout, 1)[0]
    obs = {"n1": n1.dag() @ n1}
    t = np.linspace(0, 10 / p.kappa, 11)
    traj = lindblad_evolve(liou, rho_ss, t, [(0, 0, "g"), (1, 1, "e")], obs)
    for vals in traj.observables.values():
        assert np.ptp(vals) < 1e-8
    assert traj.diagnostics["max_trace_error"] < 1e-8


def test_steady_state_matches_dense_null_space():
    p = benchmark_params(cutoff=2, kappa=0.2, gamma=0.05)
    liou = build_liouvillian(build_h_eff(p), p.kappa, p.gamma, p.layout)
    ns = null_space(liou.dense())
    assert ns.shape[1] == 1
    ref = unvec(ns[:, 0], p.layout.dim)
    ref /= np.trace(ref)
    rho, info = steady_state(liou, return_info=True)
    np.testing.assert_allclose(rho.data, ref, atol=1e-10)
    assert info.residual < 1e-10


def test_vacuum_steady_state_without_drive():
    p = benchmark_params(e_j=0.0, kappa=0.1, gamma=0.01)
    rho = steady_state(build_liouvillian(build_h_eff(p), p.kappa, p.gamma, p.layout))
    expected = QuantumState.ground(p.layout).density()
    np.testing.assert_allclose(rho.data, expected, atol=1e-12)


def test_no_damping_is_degenerate():
    p = benchmark_params(cutoff=2)
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(build_liouvillian(build_h_eff(p), 0.0, 0.0, p.layout))


# quantum regression

@pytest.fixture(scope="module")
def engine():
    return SteadyStateEngine(benchmark_params(kappa=0.1, gamma=0.01))


def test_regression_zero_delay_matches_direct(engine):
    a1, a2 = engine.a1, engine.a2
    for name, c, q in (("g11", a1, a1), ("g22", a2, a2), ("g12", a1, a2), ("g1212", engine.pair, engine.pair)):
        series = engine.correlator(c, q, np.array([0.0]), name)
        assert series.zero_delay == pytest.approx(engine.direct_zero_delay(name), rel=1e-8)


def test_regression_long_delay_factorizes(engine):
    tau = np.array([0.0, 30 / engine.params.kappa])
    for c, q in ((engine.a1, engine.a1), (engine.a1, engine.a2), (engine.pair, engine.pair)):
        series = engine.correlator(c, q, tau, "x")
        assert isinstance(series, CorrelationSeries)
        assert abs(series.values[-1] - 1) < 0.05
        np.testing.assert_allclose(series.kappa_tau, tau * engine.params.kappa)


def test_regression_matches_dense_propagation():
    p = benchmark_params(cutoff=2, kappa=0.3, gamma=0.1)
    liou = build_liouvillian(build_h_eff(p), p.kappa, p.gamma, p.layout)
    rho = steady_state(liou)
    a1 = ladder_ops(p.layout, 1)[0].matrix
    a2 = ladder_ops(p.layout, 2)[0].matrix
    tau = np.array([0.0, 2.0, 7.0])
    series = regression_correlator(liou, rho, ladder_ops(p.layout, 1)[0], ladder_ops(p.layout, 2)[0], tau)
    full = liou.dense()
    r = rho.data
    x0 = vec(a1 @ r @ a1.conj().T)
    norm = np.trace(a1.conj().T @ a1 @ r).real * np.trace(a2.conj().T @ a2 @ r).real
    for k, t in enumerate(tau):
        x = unvec(expm(full * t) @ x0, p.layout.dim)
        assert series.values[k] == pytest.approx(np.trace(a2.conj().T @ a2 @ x).real / norm, rel=1e-7)


def test_regression_without_emission_raises():
    p = benchmark_params(e_j=0.0, kappa=0.1, gamma=0.01, cutoff=2)
    liou = build_liouvillian(build_h_eff(p), p.kappa, p.gamma, p.layout)
    rho = steady_state(liou)
    a1 = ladder_ops(p.layout, 1)[0]
    with pytest.raises(NoEmissionError):
        regression_correlator(liou, rho, a1, a1, [0.0, 1.0])


def test_regression_rejects_negative_delay(engine):
    with pytest.raises(ValueError):
        engine.correlator(engine.a1, engine.a1, np.array([-1.0, 0.0]), "g11")
