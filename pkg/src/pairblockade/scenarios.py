"""Scenario runners: each turns a RunConfig into CSV files plus a run manifest."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from . import __version__
from .config import RunConfig, serialize
from .dynamics import QuantumState, lindblad_evolve, schrodinger_evolve
from .errors import ConfigError, NumericalError
from .model import (InteractionHamiltonian, ModelParams, angular_to_ghz, build_h_eff, check_resonance,
                    check_rwa, check_two_level, g_eff, impedance_ohm, omega_j_from_bias,
                    solve_bias_voltage)
from .observables import (CORRELATORS, SteadyStateEngine, cutoff_convergence, emission_rate)
from .operators import annihilation, displacement_fock, frank_condon, laguerre

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4


@dataclass
class ScenarioResult:
    exit_code: int
    manifest: dict
    files: list[Path] = field(default_factory=list)


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows) -> Path:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return obj


def parameter_record(p: ModelParams) -> dict:
    return {"ghz": p.to_ghz(), "rad_per_ns": asdict(p)}


def write_manifest(out: Path, cfg: RunConfig, files: list[Path], body: dict, started: float) -> dict:
    manifest = {
        "tool": "pairblockade",
        "version": __version__,
        "scenario": cfg.scenario,
        "config": serialize(cfg),
        **body,
        "timings": {**body.get("timings", {}), "wall_clock_s": time.perf_counter() - started},
        "files": {f.name: {"sha256": sha256(f), "bytes": f.stat().st_size} for f in files},
    }
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n", encoding="utf-8")
    return manifest


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def validity_checks(p: ModelParams, cfg: RunConfig) -> dict:
    tol = cfg.tolerances
    checks = {"resonance": check_resonance(p, tol["resonance"])}
    try:
        checks["rwa"] = check_rwa(p, tol["rwa_threshold"])
    except ValueError as exc:
        checks["rwa"] = {"passed": False, "error": str(exc)}
    c = cfg.circuit_params()
    if c is not None:
        checks["two_level"] = check_two_level(c, tol["two_level_threshold"])
    return checks


def first_maximum(t: np.ndarray, y: np.ndarray) -> float:
    """Time of the first local maximum above half the global maximum, parabola-refined."""
    if y.size < 3 or y.max() <= 0:
        return float("nan")
    level = 0.5 * y.max()
    for i in range(1, y.size - 1):
        if y[i] >= level and y[i] >= y[i - 1] and y[i] > y[i + 1]:
            y0, y1, y2 = y[i - 1], y[i], y[i + 1]
            denom = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
            return float(t[i] + shift * (t[i + 1] - t[i]))
    return float("nan")


def run_rabi(cfg: RunConfig, allow_detuned: bool = False) -> ScenarioResult:
    """Closed dynamics from |0,0,g> under the full and the effective Hamiltonian."""
    started = time.perf_counter()
    p = cfg.model_params()
    checks = validity_checks(p, cfg)
    if not checks["resonance"].passed and not allow_detuned:
        raise ConfigError(f"Josephson frequency is detuned by {angular_to_ghz(checks['resonance'].detuning):.6g} GHz "
                          "from delta + omega_1 + omega_2; pass --allow-detuned to run anyway")
    warnings = []
    rwa = checks["rwa"]
    if not (rwa.passed if hasattr(rwa, "passed") else rwa["passed"]):
        warnings.append("rotating-wave validity check failed; effective dynamics may not track the full model")
        log.warning(warnings[-1])
    g00 = abs(g_eff(0, 0, p))
    t_stop = cfg.grid.t_stop or (2 * math.pi / g00 if g00 > 0 else 100.0)
    t = np.linspace(0.0, t_stop, cfg.grid.t_points)
    labels = [(0, 0, "g"), (1, 1, "e")]
    psi0 = QuantumState.ground(p.layout)
    rtol, atol = cfg.tolerances["rtol"], cfg.tolerances["atol"]
    t0 = time.perf_counter()
    full = schrodinger_evolve(InteractionHamiltonian(p), psi0, t, labels, rtol=rtol, atol=atol)
    t1 = time.perf_counter()
    eff = schrodinger_evolve(build_h_eff(p), psi0, t, labels, rtol=rtol, atol=atol)
    t2 = time.perf_counter()
    out = _outdir(cfg)
    rows = zip(t, full.observables["P_00g"], full.observables["P_11e"],
               eff.observables["P_00g"], eff.observables["P_11e"])
    csv = write_csv(out / "rabi.csv", ["t_ns", "P_00g_full", "P_11e_full", "P_00g_eff", "P_11e_eff"], rows)
    pf, pe = full.observables["P_11e"], eff.observables["P_11e"]
    results = {
        "max_deviation_P_11e": float(np.max(np.abs(pf - pe))),
        "max_deviation_P_00g": float(np.max(np.abs(full.observables["P_00g"] - eff.observables["P_00g"]))),
        "P_11e_full_range": [float(pf.min()), float(pf.max())],
        "P_11e_eff_range": [float(pe.min()), float(pe.max())],
        "first_maximum_full_ns": first_maximum(t, pf),
        "first_maximum_eff_ns": first_maximum(t, pe),
        "predicted_first_maximum_ns": math.pi / (2 * g00) if g00 > 0 else float("nan"),
        "g_eff_00_ghz": angular_to_ghz(g00),
        "t_stop_ns": t_stop,
        "norm_drift": {"full": full.diagnostics["max_norm_drift"], "eff": eff.diagnostics["max_norm_drift"]},
    }
    body = {"parameters": parameter_record(p), "bias_voltage_uv": solve_bias_voltage(p),
            "checks": checks, "results": results, "warnings": warnings,
            "timings": {"full_s": t1 - t0, "effective_s": t2 - t1}}
    manifest = write_manifest(out, cfg, [csv], body, started)
    return ScenarioResult(EXIT_OK, manifest, [csv])


def family_values(cfg: RunConfig) -> list[float]:
    if cfg.sweep is None:
        p = cfg.model_params()
        return [p.gamma / p.kappa]
    if cfg.sweep.parameter != "gamma_over_kappa":
        raise ConfigError("correlations and emission-sweep sweep only 'gamma_over_kappa'")
    return [float(v) for v in cfg.sweep.points()]


def run_correlations(cfg: RunConfig) -> ScenarioResult:
    """Four steady-state correlators over kappa*tau for each configured gamma/kappa."""
    started = time.perf_counter()
    base = cfg.model_params()
    if base.kappa <= 0:
        raise ConfigError("correlations need kappa > 0")
    kt = np.linspace(0.0, cfg.grid.kappa_tau_stop, cfg.grid.tau_points)
    tol = cfg.tolerances
    out = _outdir(cfg)
    files, per_value = [], {}
    for gk in family_values(cfg):
        p = cfg.model_params(gamma_over_kappa=gk)
        conv = cutoff_convergence(p, tol["convergence"], rtol=tol["rtol"], atol=tol["atol"])
        if not conv.passed:
            raise NumericalError(f"cutoff convergence failed at gamma/kappa={gk:g}: "
                                 f"changes {conv.changes} between cutoffs {conv.cutoff} and {conv.compared_with}")
        if conv.cutoff != p.cutoff:
            p = p.with_cutoff(conv.cutoff)
        eng = SteadyStateEngine(p, tol["rtol"], tol["atol"])
        tau = kt / p.kappa
        summary = {}
        for name, fn in CORRELATORS.items():
            series = fn(eng, tau)
            path = write_csv(out / f"{name}_gk{gk:g}.csv", ["kappa_tau", "value"], zip(kt, series.values))
            files.append(path)
            summary[name] = {
                "zero_delay": series.zero_delay,
                "direct_zero_delay": eng.direct_zero_delay(name),
                "final_value": float(series.values[-1]),
                "min_value": float(series.values.min()),
                "collapse_norm": series.collapse_norm,
                "probe_norm": series.probe_norm,
            }
        er = emission_rate(eng)
        per_value[repr(float(gk))] = {"correlators": summary, "cutoff": p.cutoff, "convergence": conv,
                              "steady_state": eng.info, "nbar": er.nbar, "S_MHz": er.rate_mhz}
    body = {"parameters": parameter_record(base), "checks": validity_checks(base, cfg),
            "kappa_tau_stop": cfg.grid.kappa_tau_stop, "results": per_value}
    manifest = write_manifest(out, cfg, files, body, started)
    return ScenarioResult(EXIT_OK, manifest, files)


def emission_point(params: ModelParams, rtol: float, atol: float):
    """One sweep point; returns (gamma_over_kappa, nbar, S_MHz) or an error string."""
    try:
        er = emission_rate(SteadyStateEngine(params, rtol, atol))
        return (er.gamma_over_kappa, er.nbar, er.rate_mhz)
    except (NumericalError, ValueError, np.linalg.LinAlgError) as exc:
        return f"{type(exc).__name__}: {exc}"


def run_emission_sweep(cfg: RunConfig, workers: int = 1) -> ScenarioResult:
    """Emission rate over a gamma/kappa sweep at fixed kappa; points may run in parallel."""
    started = time.perf_counter()
    values = family_values(cfg) if cfg.sweep is not None else [float(v) for v in np.linspace(0.02, 0.5, 25)]
    tol = cfg.tolerances
    params = [cfg.model_params(gamma_over_kappa=gk) for gk in values]
    args = [(p, tol["rtol"], tol["atol"]) for p in params]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(emission_point, *zip(*args)))
    else:
        results = [emission_point(*a) for a in args]
    rows, failures = [], {}
    for gk, res in zip(values, results):
        if isinstance(res, str):
            failures[repr(float(gk))] = res
        else:
            rows.append(res)
    out = _outdir(cfg)
    csv = write_csv(out / "emission.csv", ["gamma_over_kappa", "nbar", "S_MHz"], rows)
    s = np.array([r[2] for r in rows])
    results_body = {
        "points": len(values),
        "failed": failures,
        "strictly_increasing": bool(s.size > 1 and np.all(np.diff(s) > 0)),
        "S_MHz_min": float(s.min()) if s.size else None,
        "S_MHz_max": float(s.max()) if s.size else None,
    }
    body = {"parameters": parameter_record(cfg.model_params()), "checks": validity_checks(params[0], cfg),
            "workers": workers, "results": results_body}
    manifest = write_manifest(out, cfg, [csv], body, started)
    return ScenarioResult(EXIT_NUMERICAL if failures else EXIT_OK, manifest, [csv])


# validate ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    threshold: float
    passed: bool
    detail: str = ""


def _below(name, measured, threshold, detail=""):
    return Check(name, float(measured), float(threshold), bool(measured < threshold), detail)


def check_displacement_expm(tol: float, cutoff: int = 30, pad: int = 40,
                            amplitudes=(0.5, 0.5j, 0.3 + 0.4j, -0.25 + 0.1j, 0.05)) -> Check:
    """Closed form vs exp(alpha a^dag - alpha* a); the exponential is taken in a padded space."""
    big = annihilation(cutoff + pad)
    worst = 0.0
    for alpha in amplitudes:
        ref = expm(alpha * big.conj().T - np.conj(alpha) * big)[:cutoff + 1, :cutoff + 1]
        worst = max(worst, float(np.linalg.norm(displacement_fock(alpha, cutoff) - ref)))
    return _below("displacement_vs_expm", worst, tol, f"|alpha| <= 0.5, cutoff {cutoff}, Frobenius norm")


def check_frank_condon(tol: float, cutoff: int = 30, couplings=(0.05, 0.2, 0.35, 0.6)) -> Check:
    worst = 0.0
    for lam in couplings:
        d = displacement_fock(2j * lam, cutoff)
        for n in range(cutoff + 1):
            for l in range(cutoff + 1 - n):
                worst = max(worst, abs(frank_condon(n, l, lam) - d[n + l, n]))
    return _below("frank_condon_vs_displacement", worst, tol)


def laguerre_recurrence_residual(samples: int = 500, seed: int = 7) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(1, 20))
        a = float(rng.uniform(0, 5))
        x = float(rng.uniform(0, 10))
        terms = ((n + 1) * laguerre(n + 1, a, x), (2 * n + 1 + a - x) * laguerre(n, a, x),
                 (n + a) * laguerre(n - 1, a, x))
        scale = max(1.0, *(abs(v) for v in terms))
        worst = max(worst, abs(terms[0] - terms[1] + terms[2]) / scale)
    return worst


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def long_time_horizon(p: ModelParams, spectral_gap: float, decades: float = 12.0) -> float:
    """Integration time long enough for the slowest mode to decay by 10**-decades, at least 50/kappa."""
    return max(50.0 / p.kappa, decades * math.log(10) / spectral_gap)


def run_checks(cfg: RunConfig) -> list[Check]:
    tol = cfg.tolerances
    rtol, atol = tol["rtol"], tol["atol"]
    checks = [check_displacement_expm(tol["displacement"]),
              check_frank_condon(tol["frank_condon"]),
              _below("laguerre_recurrence", laguerre_recurrence_residual(), tol["laguerre"])]
    p = cfg.model_params()
    eng = SteadyStateEngine(p, rtol, atol)
    worst = 0.0
    for name, fn in CORRELATORS.items():
        z = fn(eng, np.array([0.0])).zero_delay
        d = eng.direct_zero_delay(name)
        worst = max(worst, abs(z - d) / abs(d))
    checks.append(_below("regression_tau0", worst, tol["regression"], "relative, all four correlators"))
    checks.append(_below("steady_state_residual", eng.info.residual, tol["steady_residual"]))
    checks.append(Check("steady_state_unique", eng.info.second_singular / max(eng.info.smallest_singular, 1e-300),
                        1e3, eng.info.second_singular > 1e3 * eng.info.smallest_singular))
    horizon = long_time_horizon(p, eng.info.spectral_gap)
    t = np.linspace(0.0, horizon, 401)
    traj = lindblad_evolve(eng.liouvillian, QuantumState.ground(p.layout), t, store_states=True,
                           rtol=rtol, atol=atol)
    checks.append(_below("trajectory_trace", traj.diagnostics["max_trace_error"], tol["trace"]))
    checks.append(_below("trajectory_hermiticity", traj.diagnostics["max_hermiticity_error"], tol["hermiticity"]))
    checks.append(_below("trajectory_positivity", -traj.diagnostics["min_eigenvalue"], tol["positivity"],
                         "negated smallest eigenvalue"))
    checks.append(_below("steady_state_vs_long_time",
                         trace_distance(traj.states[-1].data, eng.rho_ss.data), tol["long_time"],
                         f"trace distance at t = {horizon:.6g} ns"))
    g00 = abs(g_eff(0, 0, p))
    if g00 > 0:
        rabi = schrodinger_evolve(build_h_eff(p), QuantumState.ground(p.layout),
                                  np.linspace(0, 2 * math.pi / g00, 201), rtol=rtol, atol=atol)
        checks.append(_below("schrodinger_norm", rabi.diagnostics["max_norm_drift"], tol["norm"]))
    conv = cutoff_convergence(p, tol["convergence"], escalate=False, rtol=rtol, atol=atol)
    checks.append(_below("cutoff_convergence", max(conv.changes.values()), tol["convergence"],
                         f"cutoff {conv.cutoff} vs {conv.compared_with}"))
    return checks


def run_validate(cfg: RunConfig) -> ScenarioResult:
    started = time.perf_counter()
    checks = run_checks(cfg)
    out = _outdir(cfg)
    csv = write_csv_checks(out / "validate.csv", checks)
    ok = all(c.passed for c in checks)
    body = {"parameters": parameter_record(cfg.model_params()), "results": {"checks": checks, "all_passed": ok}}
    manifest = write_manifest(out, cfg, [csv], body, started)
    return ScenarioResult(EXIT_OK if ok else EXIT_VALIDATION, manifest, [csv])


def write_csv_checks(path: Path, checks: list[Check]) -> Path:
    lines = ["check,measured,threshold,passed"]
    lines += [f"{c.name},{fmt(c.measured)},{fmt(c.threshold)},{int(c.passed)}" for c in checks]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def run_design(cfg: RunConfig) -> ScenarioResult:
    """Derived model constants, required bias and validity checks for a [circuit] block."""
    started = time.perf_counter()
    c = cfg.circuit_params()
    if c is None:
        raise ConfigError("design needs a [circuit] section")
    p = cfg.model_params()
    resonant = replace(p, omega_j=p.delta + p.omega_1 + p.omega_2)
    checks = validity_checks(p, cfg)
    report = {
        "model_ghz": p.to_ghz(),
        "impedance_ohm": impedance_ohm(c),
        "required_bias_uv": solve_bias_voltage(resonant),
        "configured_bias_uv": c.bias_uv,
        "josephson_frequency_ghz": angular_to_ghz(p.omega_j if c.bias_uv is None else omega_j_from_bias(c.bias_uv)),
        "checks": checks,
    }
    out = _outdir(cfg)
    path = out / "design.json"
    path.write_text(json.dumps(_jsonable(report), indent=2) + "\n", encoding="utf-8")
    ok = all((v.passed if hasattr(v, "passed") else v["passed"]) for v in checks.values())
    manifest = write_manifest(out, cfg, [path], {"parameters": parameter_record(p), "results": report}, started)
    return ScenarioResult(EXIT_OK if ok else EXIT_VALIDATION, manifest, [path])


RUNNERS = {
    "rabi": run_rabi,
    "correlations": run_correlations,
    "emission-sweep": run_emission_sweep,
    "validate": run_validate,
    "design": run_design,
}
