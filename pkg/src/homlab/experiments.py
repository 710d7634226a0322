"""End-to-end experiment runners behind the CLI.

Each runner takes an :class:`ExperimentConfig`, writes its CSV/JSON outputs to
``out_dir`` and returns a :class:`RunResult`.  Outputs contain no timestamps
or host details, so a rerun with the same seed is byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import (ExperimentConfig, Section, classical_setup, delay_grid, jsa_model,
                     mzi_config, phase_distribution, quantum_params, sample_setting)
from .correlator import (DipCurve, EnsembleRecord, analytic_visibility, cross_correlation,
                         mismatch_factor, raw_cross_correlation)
from .ensemble import (PILOT_SAMPLES, auto_sample_count, correlation_ci, draw_phases,
                       exact_ensemble, map_ordered, simulate_delay, visibility_ci)
from .errors import ConfigError, HomlabError, PreconditionError
from .fit import fit_classical, fit_quantum
from .fock import derived_visibility, hom_coincidence_noisy, mzi_quantum_coincidence, sigma_nm_from_omega
from .stats import SampleSummary, bootstrap_ci, coverage_study, min_samples
from .streams import Stream

# substream key for the joint visibility bootstrap; delay indices never reach it
VISIBILITY_KEY = 2 ** 31


@dataclass
class RunResult:
    name: str
    summary: dict
    files: list = field(default_factory=list)
    passed: bool = True


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def write_table(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def _sampling(cfg: ExperimentConfig) -> tuple[int, float]:
    sec = cfg.section("sampling")
    return (sec.integer("n_resamples", 10_000, minimum=100),
            sec.number("level", 0.95, lo=1e-6, hi=1 - 1e-6))


def _zero_index(tau: np.ndarray) -> int:
    return int(np.argmin(np.abs(tau)))


# ---------------------------------------------------------------------------
# classical dip
# ---------------------------------------------------------------------------

def classical_ensembles(cfg: ExperimentConfig, delays: np.ndarray, samples=None,
                        rf: bool = False) -> tuple[list[EnsembleRecord], list[int]]:
    """One ensemble per delay; ``samples`` is "auto", "exact" or an integer."""
    setup = classical_setup(cfg, rf)
    dist = phase_distribution(cfg)
    grid = setup.grid(delays)
    stream = Stream(cfg.seed)
    pilot_n = cfg.section("sampling").integer("pilot", PILOT_SAMPLES, minimum=2)

    def one(k: int):
        d = float(delays[k])
        if samples == "exact":
            rec = exact_ensemble(setup, grid, d, dist)
            return rec, rec.sample_count
        if samples == "auto":
            pilot = simulate_delay(setup, grid, d, draw_phases(dist, stream, k, pilot_n))
            n = auto_sample_count(pilot, floor=pilot_n)
            if n == pilot_n:
                return pilot, n
            # phase draws are prefix-consistent, so the pilot is the head of the full run
            rest = draw_phases(dist, stream, k, n)[pilot_n:]
            tail = simulate_delay(setup, grid, d, rest)
            rec = EnsembleRecord(d, np.concatenate([pilot.i_plus, tail.i_plus]),
                                 np.concatenate([pilot.i_minus, tail.i_minus]))
            return rec, n
        return simulate_delay(setup, grid, d, draw_phases(dist, stream, k, samples)), samples

    out = map_ordered(one, list(range(len(delays))))
    return [r for r, _ in out], [n for _, n in out]


def run_classical_dip(cfg: ExperimentConfig, out_dir: Path, samples: str | None = None,
                      rf: bool = False, check: bool = False) -> RunResult:
    delays = delay_grid(cfg, default=np.arange(-7, 8) * 1e-3)
    mode = _sample_mode(cfg, samples)
    n_res, level = _sampling(cfg)
    records, counts = classical_ensembles(cfg, delays, mode, rf)
    stream = Stream(cfg.seed)
    cis = map_ordered(lambda k: correlation_ci(records[k], n_res, level, stream.child(k, 2)),
                      list(range(len(delays))))
    c = np.array([ci.estimate for ci in cis])
    curve = DipCurve(delays, c, np.array([ci.lo for ci in cis]), np.array([ci.hi for ci in cis]))

    iz = _zero_index(delays)
    far = curve.far_indices(3)
    if iz in far:
        raise PreconditionError("the delay grid needs 3 far points distinct from tau = 0")
    v_ci = visibility_ci(records[iz], [records[i] for i in far], n_res, level,
                         stream.child(VISIBILITY_KEY))

    dist = phase_distribution(cfg)
    setup = classical_setup(cfg, rf)
    try:
        target = analytic_visibility(dist) * float(mismatch_factor(setup.amplitude_ratio))
    except PreconditionError:
        target = None
    passed = True
    if check:
        passed = target is not None and v_ci.contains(target)

    out_dir = Path(out_dir)
    csv_path = out_dir / "classical_dip.csv"
    curve.to_csv(csv_path)
    summary = {
        "kind": "classical-dip", "seed": cfg.seed, "config": cfg.as_record(),
        "phase_distribution": repr(dist), "rf_chain": setup.rf is not None,
        "samples_per_delay": counts, "tau_zero_s": delays[iz], "far_tau_s": delays[far],
        "c_zero": c[iz], "c_far": curve.far_reference(),
        "visibility": v_ci.estimate, "visibility_ci": [v_ci.lo, v_ci.hi],
        "visibility_std_error": v_ci.std_error, "level": level,
        "target_visibility": target, "check_requested": check, "passed": passed,
    }
    js = write_json(out_dir / "classical_dip.json", summary)
    return RunResult("classical-dip", summary, [csv_path, js], passed)


def _sample_mode(cfg: ExperimentConfig, override):
    raw = override if override is not None else cfg.section("sampling").raw("samples", "auto")
    if raw == "exact":
        return "exact"
    return sample_setting(cfg, override)


# ---------------------------------------------------------------------------
# complementarity
# ---------------------------------------------------------------------------

def classical_mzi_ensemble(cfg: ExperimentConfig, blocked: str, arm_phase: float | None = None,
                           delay: float = 0.0, samples="exact") -> EnsembleRecord:
    setup = classical_setup(cfg)
    mzi = mzi_config(cfg, blocked)
    if arm_phase is not None:
        mzi = replace(mzi, arm_phase=arm_phase)
    setup = replace(setup, mzi=mzi)
    dist = phase_distribution(cfg)
    grid = setup.grid([delay])
    if samples == "exact":
        return exact_ensemble(setup, grid, delay, dist)
    n = PILOT_SAMPLES if samples == "auto" else samples
    return simulate_delay(setup, grid, delay, draw_phases(dist, Stream(cfg.seed), 0, n))


def run_complementarity(cfg: ExperimentConfig, out_dir: Path, mode: str | None = None,
                        check: bool = False) -> RunResult:
    if mode is None:
        mode = "quantum" if cfg.kind == "complementarity-quantum" else "classical"
    sec = cfg.section("mzi")
    blocked = sec.choice("blocked", ("none", "plus_arm", "minus_arm"), "minus_arm")
    arm_phase = sec.number("arm_phase", 0.0)
    summary = {"kind": f"complementarity-{mode}", "seed": cfg.seed, "config": cfg.as_record(),
               "blocked": blocked, "arm_phase": arm_phase}
    if mode == "classical":
        delay = sec.number("delay", 0.0)
        samples = _sample_mode(cfg, None) if "samples" in cfg.section("sampling") else "exact"
        case_a = classical_mzi_ensemble(cfg, "none", delay=delay, samples=samples)
        case_b = classical_mzi_ensemble(cfg, blocked, delay=delay, samples=samples)
        raw_a, raw_b = raw_cross_correlation(case_a), raw_cross_correlation(case_b)
        ratio = raw_b / raw_a
        summary.update({
            "raw_correlation_a": raw_a, "raw_correlation_b": raw_b,
            "normalized_correlation_a": cross_correlation(case_a),
            "normalized_correlation_b": cross_correlation(case_b),
            "ratio": ratio, "expected_ideal": 0.5 if blocked != "none" else 1.0,
        })
    elif mode == "quantum":
        q = cfg.section("quantum")
        t = q.number("t_power", 0.5, lo=0.0, hi=1.0)
        block = {"none": None, "plus_arm": 1, "minus_arm": 2}[blocked]
        p_a = mzi_quantum_coincidence(arm_phase, t, None)
        p_b = mzi_quantum_coincidence(arm_phase, t, block)
        if p_a == 0:
            raise PreconditionError("case A coincidence probability is zero; ratio undefined")
        ratio = p_b / p_a
        summary.update({"coincidence_a": p_a, "coincidence_b": p_b, "ratio": ratio,
                        "expected_ideal": 0.25 if block is not None else 1.0})
    else:
        raise ConfigError("mode", f"must be classical or quantum, got {mode!r}")
    passed = True
    if check:
        passed = abs(summary["ratio"] - summary["expected_ideal"]) <= 1e-9
    summary.update({"check_requested": check, "passed": passed})
    js = write_json(Path(out_dir) / f"complementarity_{mode}.json", summary)
    return RunResult(summary["kind"], summary, [js], passed)


# ---------------------------------------------------------------------------
# quantum dip
# ---------------------------------------------------------------------------

def quantum_delays(cfg: ExperimentConfig, sigma_omega: float) -> np.ndarray:
    sec = cfg.section("quantum")
    n = sec.integer("n_delays", 15, minimum=3)
    span = sec.number("span_sigmas", 3.0, positive=True)
    return delay_grid(cfg, default=np.linspace(-span, span, n) / sigma_omega)


def run_quantum_dip(cfg: ExperimentConfig, out_dir: Path, check: bool = False) -> RunResult:
    params = quantum_params(cfg)
    jsa = jsa_model(cfg)
    sec = cfg.section("quantum")
    delays = quantum_delays(cfg, jsa.sigma_omega)
    model = np.atleast_1d(hom_coincidence_noisy(delays, params, jsa))
    noise = sec.choice("noise", ("none", "poisson"), "none")
    reps = sec.integer("repetitions", 100, minimum=2)
    stream = Stream(cfg.seed)
    if noise == "poisson":
        z = 1.959963984540054
        means, lo, hi = [], [], []
        for k, mu in enumerate(model):
            draws = stream.child(k, 0).generator().poisson(mu, size=reps).astype(float)
            m, s = draws.mean(), draws.std(ddof=1)
            half = z * s / math.sqrt(reps)
            means.append(m), lo.append(m - half), hi.append(m + half)
        curve = DipCurve(delays, means, lo, hi, "counts")
    else:
        curve = DipCurve.without_band(delays, model,
                                      "quantum" if params.scale_k == 1 else "counts")
    v_model = derived_visibility(params)
    iz = _zero_index(delays)
    v_curve = 1.0 - curve.c_mean[iz] / curve.far_reference()
    tol = sec.number("check_tolerance", 1e-6 if noise == "none" else 0.02, positive=True)
    passed = (abs(v_curve - v_model) <= tol) if check else True

    out_dir = Path(out_dir)
    csv_path = out_dir / "quantum_dip.csv"
    curve.to_csv(csv_path)
    summary = {
        "kind": "quantum-dip", "seed": cfg.seed, "config": cfg.as_record(),
        "t_power": params.t_power, "eta": params.eta, "zeta": params.zeta,
        "scale_k": params.scale_k, "sigma_omega": jsa.sigma_omega,
        "sigma_nm": sigma_nm_from_omega(jsa.sigma_omega, sec.number("center_nm", 810.0)),
        "noise": noise, "repetitions": reps if noise == "poisson" else None,
        "derived_visibility": v_model, "curve_visibility": v_curve,
        "check_tolerance": tol, "check_requested": check, "passed": passed,
    }
    js = write_json(out_dir / "quantum_dip.json", summary)
    return RunResult("quantum-dip", summary, [csv_path, js], passed)


# ---------------------------------------------------------------------------
# MZI phase scan
# ---------------------------------------------------------------------------

def run_mzi_scan(cfg: ExperimentConfig, out_dir: Path, check: bool = False) -> RunResult:
    sec = cfg.section("mzi")
    n = sec.integer("points", 100, minimum=2)
    t = cfg.section("quantum").number("t_power", 0.5, lo=0.0, hi=1.0)
    theta = np.linspace(0.0, 2.0 * math.pi, n)
    quantum = np.array([mzi_quantum_coincidence(th, t) for th in theta])
    ideal = np.cos(theta / 2.0) ** 2
    records = map_ordered(lambda th: classical_mzi_ensemble(cfg, "none", arm_phase=float(th)),
                          list(theta))
    mean_p = np.array([r._mean(r.i_plus) for r in records])
    mean_m = np.array([r._mean(r.i_minus) for r in records])
    q_dev = float(np.max(np.abs(quantum - ideal)))
    c_dev = float(max(np.ptp(mean_p) / mean_p[0], np.ptp(mean_m) / mean_m[0]))
    passed = (q_dev <= 1e-12 and c_dev <= 1e-12) if check else True

    out_dir = Path(out_dir)
    rows = zip(theta, quantum, ideal, mean_p, mean_m)
    csv_path = write_table(out_dir / "mzi_scan.csv",
                           ["theta_rad", "quantum_coincidence", "cos2_half_theta",
                            "classical_mean_plus", "classical_mean_minus"], rows)
    summary = {"kind": "mzi-scan", "seed": cfg.seed, "config": cfg.as_record(), "points": n,
               "quantum_max_deviation": q_dev, "classical_relative_spread": c_dev,
               "check_requested": check, "passed": passed}
    js = write_json(out_dir / "mzi_scan.json", summary)
    return RunResult("mzi-scan", summary, [csv_path, js], passed)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def run_fit(cfg: ExperimentConfig, out_dir: Path, data_path: str | None = None,
            check: bool = False) -> RunResult:
    sec = cfg.section("fit")
    model = sec.choice("model", ("quantum", "classical"), "quantum")
    path = data_path or sec.text("data")
    if not path:
        raise ConfigError("fit.data", "is required (a tau_s,c_mean,ci_lo,ci_hi CSV)")
    try:
        curve = DipCurve.from_csv(cfg.resolve_path(path) if data_path is None else Path(path))
    except OSError as exc:
        raise ConfigError("fit.data", str(exc)) from None
    if model == "quantum":
        free = sec.strings("free", ["K", "sigma_omega"])
        params = quantum_params(cfg)
        fixed = {"t_power": params.t_power, "eta": params.eta, "zeta": params.zeta,
                 "K": params.scale_k}
        init = Section("fit.initial", sec.raw("initial"))
        initial = {k: init.number(k) for k in ("K", "sigma_omega", "zeta", "eta") if k in init}
        try:
            result = fit_quantum(curve.tau, curve.c_mean, jsa_model(cfg), fixed, free, initial,
                                 sec.integer("max_iterations", 200, minimum=1))
        except HomlabError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("fit", str(exc)) from None
    else:
        result = fit_classical(curve, phase_distribution(cfg),
                               cfg.section("pulse").number("envelope_sigma", 1e-3, positive=True),
                               sec.flag("fit_sigma", False),
                               sec.integer("max_iterations", 200, minimum=1))
    min_r2 = sec.number("min_r_squared", 0.99)
    passed = (result.converged and result.r_squared >= min_r2) if check else True
    summary = {"kind": "fit", "model": model, "seed": cfg.seed, "config": cfg.as_record(),
               "data": str(path), "points": len(curve), **result.to_dict(),
               "check_requested": check, "passed": passed}
    js = write_json(Path(out_dir) / "fit.json", summary)
    return RunResult("fit", summary, [js], passed)


# ---------------------------------------------------------------------------
# statistics utilities
# ---------------------------------------------------------------------------

def run_min_n(cfg: ExperimentConfig, out_dir: Path, rf: bool = False) -> RunResult:
    """Minimum N per delay from a pilot run, or a single value from ``[min-n]`` moments."""
    sec = cfg.section("min-n")
    rel = sec.number("rel_halfwidth", 0.05, positive=True)
    z = sec.number("z", 1.96, positive=True)
    out_dir = Path(out_dir)
    if "mean" in sec:
        summ = SampleSummary(sec.number("mean", positive=True),
                             sec.number("std_dev", required=True, nonneg=True),
                             sec.integer("count", 2, minimum=2))
        n = min_samples(summ, rel, z)
        summary = {"kind": "min-n", "seed": cfg.seed, "config": cfg.as_record(),
                   "mean": summ.mean, "std_dev": summ.std_dev, "min_samples": n}
        return RunResult("min-n", summary, [write_json(out_dir / "min_n.json", summary)])

    delays = delay_grid(cfg, default=np.arange(-7, 8) * 1e-3)
    pilot_n = cfg.section("sampling").integer("pilot", PILOT_SAMPLES, minimum=2)
    records, _ = classical_ensembles(cfg, delays, pilot_n, rf)
    rows = []
    for rec in records:
        row = [rec.delay]
        need = 2
        for inten in (rec.i_plus, rec.i_minus):
            s = SampleSummary.of(inten)
            n = min_samples(s, rel, z) if s.mean > 0 else 2
            need = max(need, n)
            row += [s.mean, s.std_dev, n]
        rows.append(row + [need, max(need, pilot_n)])
    csv_path = write_table(out_dir / "min_n.csv",
                           ["tau_s", "mean_plus", "std_plus", "n_plus", "mean_minus",
                            "std_minus", "n_minus", "n_required", "n_auto"], rows)
    summary = {"kind": "min-n", "seed": cfg.seed, "config": cfg.as_record(), "pilot": pilot_n,
               "rel_halfwidth": rel, "z": z, "max_required": max(r[7] for r in rows)}
    js = write_json(out_dir / "min_n.json", summary)
    return RunResult("min-n", summary, [csv_path, js])


def _read_column(path: Path) -> np.ndarray:
    values = []
    with path.open(newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if i == 0:
                    continue  # header
                raise ConfigError("bootstrap.data", f"line {i + 1}: not a number: {row[0]!r}") from None
    return np.array(values)


def run_bootstrap(cfg: ExperimentConfig, out_dir: Path, data_path: str | None = None,
                  check: bool = False) -> RunResult:
    """Percentile CI of the mean of a data column, or a coverage study on normal samples."""
    sec = cfg.section("bootstrap")
    n_res = sec.integer("n_resamples", 10_000, minimum=100)
    level = sec.number("level", 0.95, lo=1e-6, hi=1 - 1e-6)
    stream = Stream(cfg.seed)
    summary = {"kind": "bootstrap", "seed": cfg.seed, "config": cfg.as_record(),
               "n_resamples": n_res, "level": level}
    passed = True
    path = data_path or sec.text("data")
    if path:
        p = Path(path) if data_path else cfg.resolve_path(path)
        try:
            x = _read_column(p)
        except OSError as exc:
            raise ConfigError("bootstrap.data", str(exc)) from None
        ci = bootstrap_ci(x, n_res, level, stream)
        summary.update({"data": str(path), "count": x.size, "mean": ci.estimate,
                        "ci": [ci.lo, ci.hi], "std_error": ci.std_error})
    else:
        trials = sec.integer("trials", 1000, minimum=1)
        size = sec.integer("sample_size", 100, minimum=2)
        cov = coverage_study(trials, size, n_res, level, stream)
        lo, hi = sec.number("coverage_lo", level - 0.02), sec.number("coverage_hi", level + 0.02)
        passed = (lo <= cov <= hi) if check else True
        summary.update({"trials": trials, "sample_size": size, "coverage": cov,
                        "coverage_window": [lo, hi]})
    summary.update({"check_requested": check, "passed": passed})
    js = write_json(Path(out_dir) / "bootstrap.json", summary)
    return RunResult("bootstrap", summary, [js], passed)
