"""Scenario execution: build engines from a validated config, run, score and write artifacts.

CSV schemas (one header row, floats written with ``repr``):

- ``timeseries.csv`` (store-release, cat-entangle, single-photon):
  ``t, omega1, omega2, theta, phi, dark_population, n_p1, n_p2, n_A, n_C, n_D``
- ``residuals.csv`` (algebra-check): ``check, draw, residual, tolerance``
- ``scan.csv`` (adiabatic-scan): ``ramp, fidelity, infidelity, stored_fidelity, min_dark_population``
- ``velocity.csv`` (propagate-1d): ``theta, velocity, predicted, rel_error``
- ``probe.csv`` (propagate-1d): ``t, re_E1, im_E1, re_E2, im_E2`` at the probe plane
- ``field.csv`` (propagate-1d, when ``options.record_every > 0``): ``t, z, re_E1, ..., im_sigma_bc``
- ``s_norm.csv`` (pulse-matching): ``t, s_norm``; ``ratio.csv``: ``z, ratio_E2_E1``
- ``bandwidth.csv`` (bandwidth-scan): ``quantity, measured, predicted, rel_error``
- ``sweep.csv`` (sweep): ``parameter, value, passed, <metric>...``
"""
from __future__ import annotations

import copy
import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, dynamics, ensemble, propagation
from .config import ConfigError, ScenarioConfig, set_path, validate
from .controls import ControlSchedule, Segment
from .fock import build_space

log = logging.getLogger(__name__)

# metric -> (comparator, tolerance); value must satisfy ``value <cmp> tolerance``
DEFAULT_TOLERANCES = {
    "store-release": {"fidelity": (">=", 0.99), "stored_fidelity": (">=", 0.99),
                      "min_dark_population": (">=", 0.9)},
    "cat-entangle": {"fidelity": (">=", 0.99), "entropy_error": ("<=", 1e-3)},
    "single-photon": {"fidelity": (">=", 0.999)},
    "algebra-check": {"dark_residual": ("<=", 1e-10), "commutator_residual": ("<=", 1e-10),
                      "spectrum_residual": ("<=", 1e-9), "mixing_overlap": ("<=", 1e-6)},
    "adiabatic-scan": {"final_fidelity": (">=", 0.99), "monotone_violations": ("<=", 0)},
    "propagate-1d": {"velocity_rel_error": ("<=", 0.02), "split_rel_error": ("<=", 0.02),
                     "efficiency": (">=", 0.9)},
    "pulse-matching": {"ratio_deviation": ("<=", 0.01), "rate_rel_error": ("<=", 0.1),
                       "lifetime_factor": ("<=", 2.0)},
    "bandwidth-scan": {"width_rel_error": ("<=", 0.05), "narrowband_transmission": (">=", 0.95),
                       "broadband_transmission": ("<=", 0.95), "window_rel_error": ("<=", 0.05)},
}

# reference lifetime of the mismatch field at g = 1e5 /s, N = 1e8, Gamma = 1e8 /s
REFERENCE_LIFETIME = 1e-10

_FOCK = {"g1": 1.0, "g2": 1.0, "N": 1.0, "gamma": 0.0}
_CONT = {"g1": 1e5, "g2": 1e5, "N": 1e8, "gamma": 1e8, "c": 3e8}

PRESETS = {
    "store-release": {"engine": {**_FOCK, "cutoff": 12},
                      "protocol": {"input": "coherent", "alpha": 1.0, "phi_e": math.pi / 4}},
    "cat-entangle": {"engine": {**_FOCK, "cutoff": 12},
                     "protocol": {"input": "cat", "alpha": 1.0, "sign": -1, "phi_e": math.pi / 4}},
    "single-photon": {"engine": {**_FOCK, "cutoff": 3},
                      "protocol": {"input": "single-photon", "phi_e": math.pi / 4}},
    "algebra-check": {"engine": {"cutoff": 8}, "options": {"draws": 20}},
    "adiabatic-scan": {"engine": {**_FOCK, "cutoff": 12},
                       "protocol": {"input": "coherent", "alpha": 1.0, "phi_e": math.pi / 4},
                       "options": {"ramps": [20.0, 40.0, 80.0]}},
    "propagate-1d": {"engine": {**_CONT, "L": 60.0, "nz": 2000, "pad": 15.0},
                     "protocol": {"phi_e": math.pi / 4},
                     "options": {"thetas": [math.pi / 4], "theta": math.pi / 3, "tau": 8e-8,
                                 "release_ramp": 2e-7, "release_hold": 1e-7}},
    "pulse-matching": {"engine": {**_CONT, "L": 0.3, "nz": 400},
                       "options": {"omega1": 5e8, "omega2": 5e8}},
    "bandwidth-scan": {"engine": {**_CONT, "L": 120.0, "nz": 2000},
                       "options": {"theta0": math.pi / 6, "theta1": math.pi / 3}},
}


class ScenarioError(RuntimeError):
    """Engine failure during a run, tagged with the scenario and config hash."""


@dataclass
class Metric:
    name: str
    value: float
    comparator: str
    tolerance: float

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.value):
            return False
        return self.value <= self.tolerance if self.comparator == "<=" else self.value >= self.tolerance

    def to_dict(self) -> dict:
        return {"name": self.name, "value": float(self.value), "comparator": self.comparator,
                "tolerance": float(self.tolerance), "passed": self.passed}


@dataclass
class RunSummary:
    scenario: str
    wall_time: float
    metrics: list
    config_hash: str
    config: dict
    details: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics)

    def metric(self, name: str) -> Metric:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_dict(self) -> dict:
        # wall time is left out so identical runs give identical files
        return {"scenario": self.scenario, "config_hash": self.config_hash, "passed": self.passed,
                "metrics": [m.to_dict() for m in self.metrics], "details": _clean(self.details),
                "config": self.config}


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in (v.tolist() if isinstance(v, np.ndarray) else v)]
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    return v


def preset(scenario: str) -> dict:
    """Raw config mapping for a scenario's default run."""
    if scenario not in PRESETS:
        raise ConfigError([f"unknown scenario {scenario!r}"])
    raw = copy.deepcopy(PRESETS[scenario])
    raw["scenario"] = scenario
    return raw


def preset_config(scenario: str) -> ScenarioConfig:
    return validate(preset(scenario))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(cfg: ScenarioConfig) -> ScenarioConfig:
    """Fill every field the config leaves out from the scenario preset."""
    return validate(_merge(preset(cfg.scenario), cfg.to_dict()))


# ------------------------------------------------------------ engine builders

def coupling_params(cfg: ScenarioConfig) -> ensemble.CouplingParams:
    e = cfg.engine
    return ensemble.CouplingParams(e.get("g1", 1.0), e.get("g2", 1.0), e.get("N", 1.0), e.get("gamma", 0.0))


def continuum_params(cfg: ScenarioConfig) -> propagation.ContinuumParams:
    e = cfg.engine
    missing = [k for k in ("g1", "g2", "gamma", "c", "L") if k not in e]
    if missing:
        raise ConfigError([f"engine: missing field {k!r} for scenario {cfg.scenario!r}" for k in missing])
    N = e.get("N", 1.0)
    return propagation.ContinuumParams(e["g1"] * math.sqrt(N), e["g2"] * math.sqrt(N), e["gamma"], e["c"], e["L"], N)


def protocol_spec(cfg: ScenarioConfig, **over) -> dynamics.ProtocolSpec:
    kw = dict(cfg.protocol)
    kw.update(over)
    return dynamics.ProtocolSpec(**kw)


def _space(cfg: ScenarioConfig, default: int = 12):
    return build_space(cfg.engine.get("cutoff", default))


def _metrics(cfg: ScenarioConfig, values: dict) -> list[Metric]:
    table = DEFAULT_TOLERANCES[cfg.scenario]
    out = []
    for name, value in values.items():
        cmp, tol = table[name]
        out.append(Metric(name, float(value), cmp, float(cfg.tolerances.get(name, tol))))
    return out


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


# ------------------------------------------------------------------ scenarios

def _protocol_run(cfg: ScenarioConfig, out: Path | None):
    space, params = _space(cfg), coupling_params(cfg)
    spec = protocol_spec(cfg)
    res = dynamics.run_protocol(space, params, spec)
    files = []
    if out is not None:
        o1, o2 = res.schedule(res.times)
        rows = [[t, a, b, th, ph, d, *occ] for t, a, b, th, ph, d, occ in
                zip(res.times, o1, o2, res.theta, res.phi, res.dark_population, res.occupations)]
        _write_csv(out / "timeseries.csv", ["t", "omega1", "omega2", "theta", "phi", "dark_population",
                                            "n_p1", "n_p2", "n_A", "n_C", "n_D"], rows)
        files.append("timeseries.csv")
    return space, spec, res, files


def _store_release(cfg, out):
    _, spec, res, files = _protocol_run(cfg, out)
    values = {"fidelity": res.fidelity, "stored_fidelity": res.stored_fidelity,
              "min_dark_population": float(res.dark_population.min())}
    return values, {"n_steps": res.n_steps, "phi_e": spec.phi_e, "norm_final": float(np.linalg.norm(res.final))}, files


def _cat_entangle(cfg, out):
    space, spec, res, files = _protocol_run(cfg, out)
    if spec.input != "cat":
        raise ConfigError(["protocol.input: cat-entangle needs a cat input"])
    entropy = analysis.entanglement_entropy(analysis.reduce(space, res.final, [0]))
    ideal = analysis.entanglement_entropy(analysis.reduce(space, res.target, [0]))
    values = {"fidelity": res.fidelity, "entropy_error": abs(entropy - ideal)}
    return values, {"entropy": entropy, "ideal_entropy": ideal, "phi_e": spec.phi_e, "n_steps": res.n_steps}, files


def _single_photon(cfg, out):
    _, spec, res, files = _protocol_run(cfg, out)
    if spec.input != "single-photon":
        raise ConfigError(["protocol.input: single-photon needs a single-photon input"])
    return {"fidelity": res.fidelity}, {"phi_e": spec.phi_e, "n_steps": res.n_steps}, files


def _headroom_columns(space, depth: int) -> np.ndarray:
    return np.flatnonzero(space.totals <= space.cutoff - depth)


def algebra_checks(cutoff: int = 8, draws: int = 20, seed: int = 0, nmax: int = 3, max_class: int = 4) -> dict:
    """Random-parameter residuals of the dark-state, commutator, spectrum and no-mixing relations.

    Returns ``{check: [residual per draw]}``. Dark-state draws use independent
    g1, g2; the enlarged zero-energy class needs g1 = g2.
    """
    rng = np.random.default_rng(seed)
    space = build_space(cutoff)
    head1, head2 = _headroom_columns(space, 1), _headroom_columns(space, 2)
    out = {"dark_residual": [], "commutator_residual": [], "spectrum_residual": [], "mixing_overlap": []}
    tuples = [ensemble.DegeneracyIndex(i, j, k, l, n)
              for i in range(max_class + 1) for j in range(max_class + 1) for k in range(max_class + 1)
              for l in range(max_class + 1) for n in range(max_class + 1) if i + j + k + l + n <= max_class]
    zero = [t for t in tuples if t.sector is not None]
    for _ in range(draws):
        g1, g2 = rng.uniform(0.5, 2.0, 2)
        N = rng.uniform(1.0, 10.0)
        o1, o2 = rng.uniform(0.1, 3.0, 2)
        p = ensemble.CouplingParams(g1, g2, N)
        V = ensemble.build_hamiltonian(space, p, o1, o2)
        vnorm = float(dynamics.hamiltonian_norm(p, o1, o2, cutoff)[0])
        ang = ensemble.mixing_angles(p, o1, o2)
        res = max(np.linalg.norm(V @ ensemble.dark_state(space, n, ang)) for n in range(nmax + 1))
        out["dark_residual"].append(float(res / vnorm))

        ps = ensemble.CouplingParams(g1, g1, N)
        V = ensemble.build_hamiltonian(space, ps, o1, o2)
        pset = ensemble.polariton_set(space, ps, o1, o2)
        e1, e2 = pset.eps1, pset.eps2
        worst = 0.0
        for name, e in (("d", 0.0), ("Qp", e1), ("Qm", -e1), ("Pp", e2), ("Pm", -e2)):
            op = pset.creator(name)
            r = (V @ op - op @ V - e * op)[:, head1]
            worst = max(worst, abs(r).max() if r.nnz else 0.0)
        for a in ("Pp", "Pm"):
            for b in ("Qp", "Qm"):
                A, B = pset.creator(a), pset.creator(b)
                r = (A @ B - B @ A)[:, head2]
                worst = max(worst, abs(r).max() if r.nnz else 0.0)
        out["commutator_residual"].append(float(worst))

        spec_res = 0.0
        for t in tuples:
            st = ensemble.degeneracy_state(space, pset, t)
            resid = np.linalg.norm(V @ st.psi - st.energy * st.psi)
            spec_res = max(spec_res, resid / max(abs(st.energy), e1))
        out["spectrum_residual"].append(float(spec_res))

        overlap = 0.0
        for which in ("theta", "phi"):
            M = ensemble.adiabatic_mixing_matrix(space, pset, zero, which)
            labels = [(t.i, t.k, t.n) for t in zero]
            for r_, a in enumerate(labels):
                for c_, b in enumerate(labels):
                    if a != b:
                        overlap = max(overlap, abs(M[r_, c_]))
        out["mixing_overlap"].append(float(overlap))
    return out


def _algebra_check(cfg, out):
    draws = cfg.options.get("draws", 20)
    cutoff = cfg.engine.get("cutoff", 8)
    if cutoff < 6:
        raise ConfigError(["engine.cutoff: algebra-check needs cutoff >= 6 for class states up to 4 excitations"])
    res = algebra_checks(cutoff, draws, cfg.seed)
    values = {k: max(v) for k, v in res.items()}
    files = []
    if out is not None:
        tol = DEFAULT_TOLERANCES["algebra-check"]
        rows = [[k, n, r, cfg.tolerances.get(k, tol[k][1])] for k, v in res.items() for n, r in enumerate(v)]
        _write_csv(out / "residuals.csv", ["check", "draw", "residual", "tolerance"], rows)
        files.append("residuals.csv")
    return values, {"draws": draws, "cutoff": cutoff}, files


def _adiabatic_scan(cfg, out):
    space, params = _space(cfg), coupling_params(cfg)
    ramps = cfg.options.get("ramps") or [20.0, 40.0, 80.0]
    rows = []
    for T in ramps:
        res = dynamics.run_protocol(space, params, protocol_spec(cfg, ramp=T), monitor=False)
        rows.append([T, res.fidelity, 1 - res.fidelity, res.stored_fidelity, float(res.dark_population.min())])
    infid = [r[2] for r in rows]
    order = np.argsort(ramps)
    violations = sum(1 for a, b in zip(order[:-1], order[1:]) if not infid[b] < infid[a])
    values = {"final_fidelity": rows[int(order[-1])][1], "monotone_violations": violations}
    files = []
    if out is not None:
        _write_csv(out / "scan.csv", ["ramp", "fidelity", "infidelity", "stored_fidelity", "min_dark_population"],
                   rows)
        files.append("scan.csv")
    return values, {"ramps": list(ramps), "infidelity": infid}, files


def _continuum_schedule(cfg, params) -> tuple[ControlSchedule, propagation.GaussianPulse]:
    r = params.rate_unit
    opt = cfg.options
    tau = opt.get("tau", 8.0 / r)
    pulse = propagation.GaussianPulse(4 * tau, tau, 1.0, 1)
    if cfg.schedule is not None:
        segs = [Segment(s["t_start"], s["t_end"], tuple(s["omega1"]), tuple(s["omega2"]), s["shape"])
                for s in cfg.schedule]
        return ControlSchedule(segs), pulse
    omega = opt.get("omega", params.gN1 / math.tan(opt.get("theta", math.pi / 3)))
    t_off = pulse.t0 + 2 * tau + 30.0 / r
    sched = propagation.storage_schedule(params, omega, cfg.protocol.get("phi_e", math.pi / 4), t_off,
                                         opt.get("release_ramp", 20.0 / r), opt.get("release_hold", 10.0 / r))
    return sched, pulse


def _split_error(summary: dict) -> float:
    phi = summary["phi_e"]
    e1, e2 = summary["released_E1"], summary["released_E2"]
    if 1e-6 < phi < math.pi / 2 - 1e-6:
        return abs((e1 / e2) / (math.cos(phi) ** 2 / math.sin(phi) ** 2) - 1)
    return abs(summary["split_E1"] - summary["target_split_E1"])


def _propagate_1d(cfg, out):
    params = continuum_params(cfg)
    nz = cfg.engine.get("nz", 2000)
    vel_rows = []
    for th in cfg.options.get("thetas", [math.pi / 4]):
        v = propagation.dsp_velocity(params, th, nz=nz)
        vel_rows.append([th, v["velocity"], v["predicted"], v["rel_error"]])
    sched, pulse = _continuum_schedule(cfg, params)
    pad = cfg.engine.get("pad", 0.25 * params.L)
    every = cfg.options.get("record_every", 0)
    run = propagation.run_storage_scenario(params, sched, pulse, nz=nz, pad=pad,
                                           t_end=sched.t_end + 100.0 / params.rate_unit, record_every=every)
    s = run.summary
    values = {"velocity_rel_error": max(abs(r[3]) for r in vel_rows), "split_rel_error": _split_error(s),
              "efficiency": s["efficiency"]}
    files = []
    if out is not None:
        _write_csv(out / "velocity.csv", ["theta", "velocity", "predicted", "rel_error"], vel_rows)
        _write_csv(out / "probe.csv", ["t", "re_E1", "im_E1", "re_E2", "im_E2"],
                   [[t, a.real, a.imag, b.real, b.imag] for t, a, b in zip(run.probe_t, run.probe_E1, run.probe_E2)])
        files += ["velocity.csv", "probe.csv"]
        if run.record is not None:
            propagation.write_record_csv(out / "field.csv", run.record)
            files.append("field.csv")
            if cfg.output.get("npz", False):
                propagation.write_record_npz(out / "field.npz", run.record)
                files.append("field.npz")
    details = {k: v for k, v in s.items()}
    details["velocities"] = [{"theta": r[0], "velocity": r[1], "predicted": r[2]} for r in vel_rows]
    return values, details, files


def _pulse_matching(cfg, out):
    params = continuum_params(cfg)
    o1, o2 = cfg.options.get("omega1", 5e8), cfg.options.get("omega2", 5e8)
    res = propagation.pulse_matching_probe(params, o1, o2, nz=cfg.engine.get("nz", 400))
    life = res["lifetime"]
    values = {"ratio_deviation": res["ratio_max_dev"], "rate_rel_error": abs(res["rate_rel_error"]),
              "lifetime_factor": max(life / REFERENCE_LIFETIME, REFERENCE_LIFETIME / life)}
    files = []
    if out is not None:
        _write_csv(out / "s_norm.csv", ["t", "s_norm"], zip(res["s_norm_t"], res["s_norm"]))
        _write_csv(out / "ratio.csv", ["z", "ratio_E2_E1"], [[z, float(np.real(r))] for z, r in
                                                            zip(res["z_interior"], res["ratio"])])
        files += ["s_norm.csv", "ratio.csv"]
    details = {k: res[k] for k in ("decay_rate", "predicted_rate", "lifetime", "predicted_lifetime", "tan_phi",
                                   "theta", "phi")}
    return values, details, files


def _bandwidth_scan(cfg, out):
    params = continuum_params(cfg)
    th0, th1 = cfg.options.get("theta0", math.pi / 6), cfg.options.get("theta1", math.pi / 3)
    res = propagation.bandwidth_scan(params, th0, th1, nz=cfg.engine.get("nz", 2000))
    b1, b2, b4, b5 = res["band1"], res["band2"], res["band4"], res["band5"]
    values = {"width_rel_error": abs(b1["rel_error"]), "narrowband_transmission": b5["narrow"],
              "broadband_transmission": b5["broad"],
              "window_rel_error": abs(b2["measured_ratio"] / b2["closed_form_ratio"] - 1)}
    files = []
    if out is not None:
        rows = [["width_ratio", b1["width_ratio"], b1["predicted"], b1["rel_error"]],
                ["window_ratio", b2["measured_ratio"], b2["predicted"], b2["rel_error"]],
                ["window_ratio_closed_form", b2["measured_ratio"], b2["closed_form_ratio"],
                 b2["measured_ratio"] / b2["closed_form_ratio"] - 1],
                ["width_over_window", b4["measured"], b4["predicted"], b4["rel_error"]],
                ["narrowband_transmission", b5["narrow"], 1.0, b5["narrow"] - 1.0],
                ["broadband_transmission", b5["broad"], 1.0, b5["broad"] - 1.0]]
        _write_csv(out / "bandwidth.csv", ["quantity", "measured", "predicted", "rel_error"], rows)
        files.append("bandwidth.csv")
    return values, res, files


RUNNERS = {
    "store-release": _store_release,
    "cat-entangle": _cat_entangle,
    "single-photon": _single_photon,
    "algebra-check": _algebra_check,
    "adiabatic-scan": _adiabatic_scan,
    "propagate-1d": _propagate_1d,
    "pulse-matching": _pulse_matching,
    "bandwidth-scan": _bandwidth_scan,
}


def run(cfg: ScenarioConfig, out_dir=None) -> RunSummary:
    """Run one scenario; writes ``summary.json`` plus CSV artifacts when an output directory is given."""
    cfg = resolve(cfg)
    out_dir = out_dir if out_dir is not None else cfg.output.get("dir")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    write_csv = cfg.output.get("csv", True)
    t0 = time.perf_counter()
    log.info("running %s (config %s)", cfg.scenario, cfg.digest())
    try:
        values, details, files = RUNNERS[cfg.scenario](cfg, out if write_csv else None)
    except (ConfigError, KeyboardInterrupt):
        raise
    except Exception as exc:
        raise ScenarioError(f"{cfg.scenario} run (config {cfg.digest()}) aborted: {exc}") from exc
    summary = RunSummary(cfg.scenario, time.perf_counter() - t0, _metrics(cfg, values), cfg.digest(),
                         cfg.to_dict(), details, files)
    if out is not None:
        (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
        summary.artifacts = files + ["summary.json"]
    for m in summary.metrics:
        log.info("%s %s = %.6g (%s %.3g) %s", cfg.scenario, m.name, m.value, m.comparator, m.tolerance,
                 "pass" if m.passed else "FAIL")
    return summary


def _run_point(args):
    raw, out = args
    return run(validate(raw), out)


def sweep(cfg: ScenarioConfig, parameter: str, grid, out_dir=None, workers: int = 1) -> list[RunSummary]:
    """One run per grid value of ``parameter`` (a dotted config path such as ``protocol.phi_e``).

    Values are SI numbers or unit strings. With ``out_dir`` each point writes to
    ``point_<k>/`` and the table goes to ``sweep.csv``.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError(["sweep grid is empty"])
    jobs = []
    for k, value in enumerate(grid):
        raw = cfg.to_dict()
        set_path(raw, parameter, value)
        validate(raw)
        jobs.append((raw, None if out_dir is None else Path(out_dir) / f"point_{k:03d}"))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    if out_dir is not None:
        names = [m.name for m in results[0].metrics]
        rows = [[parameter, v if isinstance(v, str) else float(v), int(r.passed), *[r.metric(n).value for n in names]]
                for v, r in zip(grid, results)]
        _write_csv(Path(out_dir) / "sweep.csv", ["parameter", "value", "passed", *names], rows)
    return results


def summary_table(results) -> list[dict]:
    return [{"scenario": r.scenario, "passed": r.passed, **{m.name: m.value for m in r.metrics}} for r in results]


__all__ = ["DEFAULT_TOLERANCES", "PRESETS", "Metric", "RunSummary", "ScenarioError", "algebra_checks",
           "continuum_params", "coupling_params", "preset", "preset_config", "protocol_spec", "resolve", "run", "sweep",
           "summary_table"]
