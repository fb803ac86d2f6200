"""``auger-sim`` command line: one experiment per invocation, CSV + JSON outputs."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import traceback
from pathlib import Path
from typing import Callable

import numpy as np

from . import config as cfgmod
from . import fitlab, io, lambda_sim, ramsey
from .qdcore import PLANCK_H
from .relaxation import cascade, phonon, wkb

log = logging.getLogger("auger_sim")


class UsageError(ValueError):
    pass


def _solver_kw(params) -> dict:
    return {k: params[k] for k in ("rtol", "atol") if k in params}


def _areas(params) -> np.ndarray:
    try:
        return cfgmod.expand_grid(params["areas"], "areas")
    except cfgmod.ConfigError as exc:
        raise UsageError(str(exc)) from None


def cmd_rabi(cfg, jobs: int = 1):
    p = cfg["params"]
    areas = _areas(p)
    spec = cfgmod.hamiltonian_spec(cfg)
    diss = cfgmod.dissipators(p)
    kw = _solver_kw(p)
    target = spec.basis[2]
    summary = {"target": target, "n_areas": int(areas.size)}

    delta_opt = p.get("delta_opt", 0.0)
    if delta_opt == "auto":
        delta_opt, transfer = lambda_sim.stark_optimal_detuning(spec, diss=diss, **kw)
        summary["stark_transfer"] = transfer
    summary["delta_opt_meV"] = float(delta_opt)

    def sweep(s):
        try:
            return lambda_sim.rabi_sweep_populations(s, areas, delta_opt, diss, jobs, **kw)
        except lambda_sim.IntegrationError as exc:
            raise lambda_sim.IntegrationError(f"{exc} (sweep over areas {areas[0]:.4g}..{areas[-1]:.4g} rad)",
                                              exc.last_time) from exc

    if p.get("compare", False):
        from dataclasses import replace
        off = sweep(replace(spec, cross_coupling=False))[:, 1]
        on = sweep(replace(spec, cross_coupling=True))[:, 1]
        header = ["theta_rad", "p_T+_cross_off", "p_T+_cross_on"]
        rows = np.column_stack([areas, off, on])
        for name, col in (("cross_off", off), ("cross_on", on)):
            summary[f"minima_rad_{name}"] = lambda_sim.curve_minima(areas, col).tolist()
    else:
        pops = sweep(spec)
        header = ["theta_rad", "p_T+", "p_h1", f"p_{target}"]
        rows = np.column_stack([areas, pops[:, 1], pops[:, 0], pops[:, 2]])
        summary["minima_rad"] = lambda_sim.curve_minima(areas, pops[:, 1]).tolist()
    summary["cross_coupling"] = spec.cross_coupling
    return header, rows, summary


def cmd_map(cfg, jobs: int = 1):
    p = cfg["params"]
    areas = _areas(p)
    try:
        deltas = cfgmod.expand_grid(p["deltas"], "deltas")
    except cfgmod.ConfigError as exc:
        raise UsageError(str(exc)) from None
    spec = cfgmod.hamiltonian_spec(cfg)
    grid = lambda_sim.detuning_area_map(spec, deltas, areas, cfgmod.dissipators(p), jobs, **_solver_kw(p))
    dd, aa = np.meshgrid(deltas, areas, indexing="ij")
    header = ["delta_meV", "theta_rad", "p_T+"]
    cols = [dd.ravel(), aa.ravel(), grid.ravel()]
    summary = {"n_deltas": int(deltas.size), "n_areas": int(areas.size),
               "cross_coupling": spec.cross_coupling}
    if p.get("argmin", False):
        best = deltas[np.argmin(grid, axis=0)]
        header.append("delta_star_meV")
        cols.append(np.broadcast_to(best, grid.shape).ravel())
        summary["delta_star_meV"] = best.tolist()
    return header, np.column_stack(cols), summary


def cmd_ramsey(cfg, jobs: int = 1):
    p = cfg["params"]
    system = cfgmod.level_system(cfg)
    rng = np.random.default_rng(cfg["seed"])
    nu = p.get("nu", system.splitting("h2") / PLANCK_H)
    params = ramsey.CoherenceParams(p.get("tau_h2", system.hole_lifetime.get("h2", 161.0)),
                                    p.get("t2_star", 1930.0), nu)
    summary = {"tau_h2_ps": params.tau_h2, "t2_star_ps": params.t2_star, "nu_THz": params.nu,
               "t2_model_ps": params.t2, "warnings": []}

    if "data_path" in p:
        delays, values = ramsey.read_fringe_csv(cfgmod.resolve_path(cfg, p["data_path"]))
        header = ["delta_t_ps", "intensity"]
        cols = [delays, values]
    else:
        delays = cfgmod.expand_grid(p.get("fine_delays", {"start": 0.0, "stop": 24.0, "num": 241}),
                                    "fine_delays")
        values = ramsey.ramsey_population(params, delays)
        noise = p.get("noise", 0.0)
        if noise:
            values = values * (1.0 + noise * rng.standard_normal(values.shape))
        header = ["delta_t_ps", "p_h2_analytic"]
        cols = [delays, values]
        if p.get("simulate", False):
            seq = lambda_sim.ramsey_pulse_sequence()
            diss = lambda_sim.Dissipators.standard(trion_lifetime=None, hole_lifetime=params.tau_h2,
                                                   pure_dephasing=params.t2_star)
            skw = {"delta12": nu * PLANCK_H, "cross_coupling": p.get("cross_coupling", False),
                   "dipole_ratio": p.get("dipole_ratio", 5.0), **_solver_kw(p)}
            sim = [lambda_sim.ramsey_sequence_sim(seq, float(d), diss, **skw)["T+"] for d in delays]
            header.append("p_T+_sim")
            cols.append(np.array(sim))

    if delays.size >= 16:
        try:
            summary["dft_peak_THz"] = ramsey.dft_peak(delays, values, expected_nu=nu)
        except (ramsey.AliasingError, ValueError) as exc:
            summary["warnings"].append(f"DFT skipped: {exc}")
    else:
        summary["warnings"].append(f"DFT skipped: only {delays.size} delay samples")

    coarse = cfgmod.expand_grid(p.get("coarse_delays", {"start": 0.0, "stop": 800.0, "num": 20}),
                                "coarse_delays")
    if coarse.size < 4:
        summary["warnings"].append(f"envelope fit skipped: {coarse.size} coarse delay(s), need 4")
    else:
        amps = ramsey.fringe_amplitudes(params, coarse)
        if p.get("noise", 0.0):
            amps = amps * (1.0 + p["noise"] * rng.standard_normal(amps.shape))
        env = ramsey.fringe_envelope_fit(coarse, amps)
        summary["t2_fit_ps"] = env.t2
        summary["t2_fit_stderr_ps"] = env.stderr
        summary["envelope_amplitude"] = env.amplitude
        summary["t2_star_from_fit_ps"] = ramsey.coherence_relation(params.tau_h2, env.t2)
    for w in summary["warnings"]:
        log.warning(w)
    return header, np.column_stack(cols), summary


def cmd_cascade(cfg, jobs: int = 1):
    p = cfg["params"]
    system = cfgmod.level_system(cfg)
    initial = p.get("initial", "h5")
    n = int(initial[1:])
    lifetimes = p.get("lifetimes") or [system.hole_lifetime[f"h{k}"] for k in range(2, n + 1)]
    t_max, dt = p.get("t_max", 1000.0), p.get("dt", 1.0)
    grid = np.arange(0.0, t_max + 0.5 * dt, dt)
    spec = cascade.CascadeSpec(initial, tuple(lifetimes), grid)
    traj = cascade.cascade_evolve(spec)
    window = tuple(p["window"]) if "window" in p else None
    fit = cascade.fit_filling_time(traj, window, p.get("model", "exponential_fill"), spec.lifetimes)
    header = ["t_ps"] + [f"P_{lb}" for lb in traj.labels] + ["sum"]
    rows = np.column_stack([traj.times, traj.populations, traj.populations.sum(axis=1)])
    summary = {"initial": initial, "lifetimes_ps": list(spec.lifetimes), "tau_fill_ps": fit.tau_fill,
               "tau_fill_stderr_ps": fit.stderr, "window_ps": list(fit.window), "model": fit.model,
               "max_sum_deviation": float(np.max(np.abs(rows[:, -1] - 1.0)))}
    if n > 2:
        starts = p.get("sensitivity_starts", [0.0, 25.0, 50.0, 65.0, 100.0])
        end = fit.window[1]
        table = cascade.filling_sensitivity(traj, [s for s in starts if s < end], end)
        summary["sensitivity"] = [{"window_start_ps": r[0], "tau_fill_free_offset_ps": r[1],
                                   "tau_fill_pure_ps": r[2]} for r in table]
    return header, rows, summary


def cmd_phonon(cfg, jobs: int = 1):
    p = cfg["params"]
    rng = np.random.default_rng(cfg["seed"])
    if "data" in p:
        data = np.asarray(p["data"], dtype=float).reshape(-1, 2)
    elif "data_path" in p:
        _, data = io.read_csv(cfgmod.resolve_path(cfg, p["data_path"]))
        data = data[:, :2]
    elif "synthetic" in p:
        s = p["synthetic"]
        truth = phonon.PhononSpectralDensity.from_energy(s["alpha"], s["hbar_omega_c"])
        E = cfgmod.expand_grid(s["energies"], "energies")
        tau = phonon.phonon_tau(E, truth)
        if s.get("noise", 0.0):
            tau = tau * (1.0 + s["noise"] * rng.standard_normal(tau.shape))
        data = np.column_stack([E, tau])
    else:
        raise UsageError("phonon needs one of data, data_path or synthetic")
    fit = phonon.fit_phonon_params([tuple(r) for r in data])
    E_out = cfgmod.expand_grid(p.get("energies_out", {"start": 0.5, "stop": 8.0, "num": 76}), "energies_out")
    tau_model = phonon.phonon_tau(E_out, fit.density)
    summary = {**fit.to_dict(), "n_points": int(len(data)),
               "normalisation": "1/tau = J(dE/hbar); alpha absorbs the proportionality constant"}
    return ["delta_E_meV", "tau_model_ps"], np.column_stack([E_out, tau_model]), summary


def _barrier(b, bias: float | None = None) -> wkb.BarrierProfile:
    kw = {k: b[k] for k in ("l_qd", "m_b", "m_dot") if k in b}
    if "z" in b:
        z, ev = np.asarray(b["z"], float), np.asarray(b["ev"], float)
        if bias is not None:
            slope = b.get("slope_per_volt", 0.0)
            ev = ev - slope * bias * (z - z[0]) / max(z[-1] - z[0], 1e-300)
        return wkb.BarrierProfile(z, ev, **kw)
    if "height" not in b or "width" not in b:
        raise UsageError("barrier needs either z/ev knots or height and width")
    if bias is None:
        return wkb.rectangular_barrier(b["height"], b["width"], **kw)
    return wkb.biased_barrier(b["height"], b["width"], bias, b.get("slope_per_volt", 0.0), **kw)


def cmd_wkb(cfg, jobs: int = 1):
    p = cfg["params"]
    b = p["barrier"]
    rows = []
    summary: dict = {}
    if "biases" in p:
        E = p.get("energy", 30.0)
        xs = cfgmod.expand_grid(p["biases"], "biases")
        header = ["bias_V", "TC", "tau_t_ps"]
        for v in xs:
            est = wkb.tunneling_estimate(E, _barrier(b, float(v)))
            rows.append((v, est.transmission, est.tau_ps))
        summary["energy_meV"] = E
    else:
        xs = cfgmod.expand_grid(p.get("energies", [p.get("energy", 30.0)]), "energies")
        header = ["E_meV", "TC", "tau_t_ps"]
        prof = _barrier(b)
        for e in xs:
            est = wkb.tunneling_estimate(float(e), prof)
            rows.append((e, est.transmission, est.tau_ps))
    rows = np.array(rows, dtype=float)
    tau = rows[:, 2]
    d = np.diff(tau)
    finite = np.isfinite(tau)
    summary.update({
        "n_rows": int(len(rows)),
        "tau_monotone": bool(np.all(d >= 0) or np.all(d <= 0)),
        "over_barrier_rows": int(np.sum(rows[:, 1] == 1.0)),
        "underflow_rows": int(np.sum(~finite)),
        "tau_min_ps": float(np.min(tau[finite])) if finite.any() else math.inf,
    })
    if "height" in b and "width" in b and "z" not in b:
        rect = _barrier(b)
        E0 = p.get("energy", 30.0) if "biases" in p else float(xs[0])
        if 0 < E0 < rect.height:
            closed = math.exp(-2 * rect.width * math.sqrt(2 * rect.m_b * wkb.M0 * (rect.height - E0)) / wkb.HBAR)
            tc = wkb.wkb_transmission(E0, rect)
            summary["rectangular_check_rel_err"] = abs(tc - closed) / closed if closed > 0 else 0.0
    return header, rows, summary


def cmd_fit(cfg, jobs: int = 1):
    p = cfg["params"]
    model = fitlab.get_model(p["model"])
    rng = np.random.default_rng(cfg["seed"])
    weights = None
    if "data_path" in p:
        names, data = io.read_csv(cfgmod.resolve_path(cfg, p["data_path"]))
        if data.shape[1] < 2:
            raise UsageError("fit data needs at least x and y columns")
        x, y = data[:, 0], data[:, 1]
        if data.shape[1] >= 3:
            weights = data[:, 2]
    elif "synthetic" in p:
        s = p["synthetic"]
        x = cfgmod.expand_grid(s["x"], "x")
        y = model(x, np.asarray(s["params"], float))
        if s.get("noise", 0.0):
            y = y + s["noise"] * rng.standard_normal(y.shape)
    else:
        raise UsageError("fit needs data_path or synthetic")
    res = fitlab.nls_fit(model, x, y, p0=p.get("p0"), weights=weights, fixed=p.get("fixed"))
    fitted = model(x, res.values)
    return ["x", "y", "y_fit"], np.column_stack([x, y, fitted]), res.to_dict()


COMMANDS: dict[str, Callable] = {
    "rabi": cmd_rabi, "map": cmd_map, "ramsey": cmd_ramsey, "cascade": cmd_cascade,
    "phonon": cmd_phonon, "wkb": cmd_wkb, "fit": cmd_fit,
}


def run(command: str, cfg: dict, prefix: str | Path, jobs: int = 1) -> dict:
    """Execute one experiment and write ``<prefix>.csv`` and ``<prefix>.json``."""
    if cfg.get("experiment", command) != command:
        raise UsageError(f"config is for experiment {cfg['experiment']!r}, not {command!r}")
    header, rows, summary = COMMANDS[command](cfg, jobs)
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    io.write_csv(Path(str(prefix) + ".csv"), header, rows)
    doc = {"experiment": command, "seed": cfg.get("seed", 0), "status": "ok", "result": summary}
    io.write_json(Path(str(prefix) + ".json"), doc)
    return doc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="auger-sim", description="Stimulated Auger / hole relaxation toolkit")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output path prefix (overrides the config's 'output')")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for grid sweeps")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    prefix = args.out
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = cfgmod.load_config(args.config)
        prefix = prefix or cfg.get("output") or args.command
        run(args.command, cfg, prefix, args.jobs)
        return 0
    except Exception as exc:  # surfaced as machine-readable JSON
        err = {"experiment": args.command, "status": "error", "error_type": type(exc).__name__,
               "message": exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)}
        if isinstance(exc, lambda_sim.IntegrationError):
            err["last_time_ps"] = exc.last_time
        if args.verbose:
            err["traceback"] = traceback.format_exc()
        text = io.dumps(err)
        if prefix:
            try:
                Path(str(prefix)).parent.mkdir(parents=True, exist_ok=True)
                Path(str(prefix) + ".json").write_text(text)
            except OSError:
                pass
        sys.stderr.write(text)
        return 2 if isinstance(exc, (UsageError, cfgmod.ConfigError)) else 1


if __name__ == "__main__":
    sys.exit(main())
