"""Scenario execution: tasks, sweeps, CSV exports and the JSON manifest.

All files are written with fixed float formatting so that repeated runs of
the same scenario produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import Scenario, SweepSpec, build_system, scenario_from_dict, set_path
from .greens import scattered_projection
from .lindblad import (
    DickeBasis,
    EmissionTrace,
    InvariantError,
    extended_dicke_rates,
    ideal_cascade,
    simulate,
)
from .modes import LSPModeSet, extract_modes, weak_coupling_ratio
from .presets import preset_trees
from .rates import (
    RateMatrices,
    brightness_report,
    classical_eigenstates,
    collective_rates,
    gamma_matrix_green,
    route_discrepancy,
)

__all__ = [
    "resolve_threads",
    "run_scenario",
    "run_preset",
    "run_sweep",
    "sweep_table",
    "emit_plot_data",
    "incoherent_curves",
    "write_trace",
    "write_rate_matrix",
    "write_manifest",
]

log = logging.getLogger(__name__)

W0_TOL = 1e-8
WSPLIT_TOL = 1e-10


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return "nan"
    return format(x, ".12e")


def _csv_text(header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def resolve_threads(requested: int | None = None) -> int:
    """Worker count: ``requested`` (or the CPU count), capped by ``PLASMODICKE_THREADS``."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("PLASMODICKE_THREADS")
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            log.warning("ignoring non-integer PLASMODICKE_THREADS=%r", cap)
    return max(1, int(n))


# ----------------------------------------------------------------- writers


def write_rate_matrix(path: Path, matrix: np.ndarray, rates: RateMatrices, label: str) -> Path:
    n = matrix.shape[0]
    comments = [
        f"quantity={label} units=Gamma0",
        f"omega0_eV={_fmt(rates.omega0)} route={rates.route} N={rates.n_modes}",
        f"gamma0_eV={_fmt(rates.gamma0_ev)}",
    ]
    rows = [[i + 1, *matrix[i]] for i in range(n)]
    return _write(path, _csv_text(["row", *[f"col{j + 1}" for j in range(n)]], rows, comments))


def write_trace(path: Path, trace: EmissionTrace) -> Path:
    n = trace.n_emitters
    header = ["t_over_tau1", "W_over_gamma1", "WP", "WC", "Wrad", "eta"] + [f"pop_exc_{k}" for k in range(n + 1)]
    rows = (
        [trace.t[m], trace.W[m], trace.WP[m], trace.WC[m], trace.Wrad[m], trace.eta[m], *trace.populations[m]]
        for m in range(trace.t.size)
    )
    return _write(path, _csv_text(header, rows))


def _write_mode_report(path: Path, ms: LSPModeSet) -> Path:
    n_e = ms.g.shape[1]
    header = ["n", "omega_n_eV", "gamma_n_eV", "residual"]
    header += [f"g_{i + 1}_eV" for i in range(n_e)]
    header += [f"mu_{i + 1}_{j + 1}" for i in range(n_e) for j in range(n_e)]
    rows = []
    for k, m in enumerate(ms.modes):
        rows.append([m.order, m.omega_n, m.gamma_n, m.fit_residual, *ms.g[k], *ms.mu[k].ravel()])
    return _write(path, _csv_text(header, rows))


def _write_greens_spectrum(path: Path, scenario: Scenario, ms: LSPModeSet) -> Path:
    cfg = scenario.config
    e0 = cfg.emitters[0]
    lo = max(0.05, ms.modes[0].omega_n - 0.3)
    hi = ms.modes[-1].omega_n + 0.1
    grid = np.linspace(lo, hi, 121)
    labels: list = list(range(1, cfg.controls.max_multipole + 1)) + ["all"]
    rows = []
    for w in grid:
        for lab in labels:
            v = scattered_projection(e0, e0, float(w), lab, cfg.controls, sphere=cfg.sphere).value
            rows.append([w, str(lab), v.real, v.imag])
    return _write(path, _csv_text(["omega_eV", "mode", "re_projection", "im_projection"], rows))


# ----------------------------------------------------------------- plot data


def incoherent_curves(t: np.ndarray, gamma_diag: np.ndarray, rad_diag: np.ndarray | None = None):
    """Independent-emitter emission ``sum_i G_i exp(-G_i t)`` (rates in units of the reference)."""
    t = np.asarray(t, dtype=float)[:, None]
    g = np.asarray(gamma_diag, dtype=float)[None, :]
    decay = np.exp(-g * t)
    w = np.sum(g * decay, axis=1)
    wrad = np.sum(np.asarray(rad_diag)[None, :] * decay, axis=1) if rad_diag is not None else np.full(t.shape[0], np.nan)
    return w, wrad


def emit_plot_data(
    trace: EmissionTrace,
    out_dir,
    style: dict | None = None,
    rates: RateMatrices | None = None,
    prefix: str = "plot",
) -> list[Path]:
    """Write the computed curve plus the ideal and incoherent references on one grid.

    ``rates`` (already normalised to the reference rate) supplies the
    per-emitter rates of the incoherent curve; without it every emitter is
    taken to decay at the reference rate.
    """
    if trace.t.size == 0:
        raise ValueError("empty trace")
    style = {"overlay_ideal": True, "overlay_incoherent": True, **(style or {})}
    out = Path(out_dir)
    n = trace.n_emitters
    files = []
    files.append(
        _write(
            out / f"{prefix}_computed.csv",
            _csv_text(["t_over_tau1", "W_over_gamma1", "Wrad_over_gamma1"], zip(trace.t, trace.W, trace.Wrad)),
        )
    )
    curves = ["computed"]
    if style["overlay_ideal"]:
        _, w_ideal = ideal_cascade(n, 1.0, trace.t)
        files.append(_write(out / f"{prefix}_ideal.csv", _csv_text(["t_over_tau1", "W_over_gamma1"], zip(trace.t, w_ideal))))
        curves.append("ideal")
    if style["overlay_incoherent"]:
        if rates is not None:
            w_inc, wrad_inc = incoherent_curves(trace.t, np.diag(rates.gamma), np.diag(rates.gamma_rad))
        else:
            w_inc, wrad_inc = incoherent_curves(trace.t, np.ones(n))
        files.append(
            _write(
                out / f"{prefix}_incoherent.csv",
                _csv_text(["t_over_tau1", "W_over_gamma1", "Wrad_over_gamma1"], zip(trace.t, w_inc, wrad_inc)),
            )
        )
        curves.append("incoherent")
    desc = {
        "x": {"column": "t_over_tau1", "label": "t Gamma_1", "normalization": "time in units of 1/Gamma_1"},
        "y": {"column": "W_over_gamma1", "label": "W(t)/Gamma_1", "normalization": "rates in units of Gamma_1"},
        "curves": {c: f"{prefix}_{c}.csv" for c in curves},
        "dashed": "Wrad_over_gamma1 (far-field part) where present",
        "n_emitters": n,
    }
    files.append(_write(out / f"{prefix}_description.json", json.dumps(desc, indent=2, sort_keys=True) + "\n"))
    return files


# ----------------------------------------------------------------- tasks


def _check_rates(rates: RateMatrices, warn: list[str]) -> None:
    for problem in rates.check():
        if problem.startswith("gamma_rad: radiative"):
            # the quasi-static radiative estimate can exceed the total rate
            # very close to large spheres; this is reported, not fatal
            warn.append(problem)
        else:
            raise InvariantError(f"rate matrices: {problem}")


def _trace_checks(trace: EmissionTrace) -> None:
    n = trace.n_emitters
    if abs(trace.W[0] - n) > W0_TOL * n:
        raise InvariantError(f"W(0)={trace.W[0]!r} differs from N*Gamma_1={n}")
    split = np.max(np.abs(trace.W - trace.WP - trace.WC))
    if split > WSPLIT_TOL * max(1.0, np.max(np.abs(trace.W))):
        raise InvariantError(f"W != WP + WC (max deviation {split:.3g})")


def _execute(scenario: Scenario, out: Path, threads: int) -> tuple[list[Path], dict, list[str]]:
    cfg = scenario.config
    files: list[Path] = []
    summary: dict = {}
    warn: list[str] = []
    tasks = scenario.tasks
    ms = None
    rates = None

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if tasks & {"modes", "rates", "evolve", "ladder"}:
            ms = extract_modes(cfg)
            summary["weak_coupling_ratio"] = weak_coupling_ratio(cfg, ms)
        if "modes" in tasks:
            files.append(_write_mode_report(out / "modes.csv", ms))
            files.append(_write_greens_spectrum(out / "greens_spectrum.csv", scenario, ms))
            summary["omega_n_eV"] = [m.omega_n for m in ms.modes[:3]]
        if tasks & {"rates", "evolve", "ladder"}:
            rates = collective_rates(cfg, ms)
            _check_rates(rates, warn)
            mode_sum = rates.meta["mode_sum_gamma"]
            g1 = float(rates.gamma[0, 0])
            summary["gamma1_over_gamma0"] = g1
            if cfg.n_emitters > 1:
                summary["gamma12_over_gamma1"] = float(rates.gamma[0, 1] / g1)
            disc = route_discrepancy(rates, RateMatrices(mode_sum, rates.delta, rates.gamma_rad, rates.omega0, "mode_sum"))
            summary["route_discrepancy_max"] = float(disc.max())
        if "rates" in tasks:
            files.append(write_rate_matrix(out / "gamma.csv", rates.gamma, rates, "gamma"))
            files.append(write_rate_matrix(out / "delta.csv", rates.delta, rates, "delta"))
            files.append(write_rate_matrix(out / "gamma_rad.csv", rates.gamma_rad, rates, "gamma_rad"))
            msr = RateMatrices(rates.meta["mode_sum_gamma"], rates.delta, rates.gamma_rad, rates.omega0, "mode_sum",
                               rates.n_modes, rates.gamma0_ev)
            files.append(write_rate_matrix(out / "gamma_mode_sum.csv", msr.gamma, msr, "gamma"))
        if "eigenstates" in tasks:
            summary["brightest_over_gamma1"] = {}
            summary["darkest_over_gamma1"] = {}
            for mode in scenario.eigen_modes:
                states = classical_eigenstates(cfg, mode, fixed_orientation=scenario.fixed_orientation)
                rows = brightness_report(states, cfg)
                files.append(
                    _write(
                        out / f"eigenstates_{mode}.csv",
                        _csv_text(
                            ["rank", "gamma_over_gamma0", "gamma_over_gamma1", "delta_over_gamma0", "pattern"],
                            [[r[k] for k in ("rank", "gamma_over_gamma0", "gamma_over_gamma1",
                                             "delta_over_gamma0", "pattern")] for r in rows],
                            [f"omega0_eV={_fmt(cfg.omega0)} mode={mode} fixed_orientation={scenario.fixed_orientation}"],
                        ),
                    )
                )
                summary["brightest_over_gamma1"][str(mode)] = rows[0]["gamma_over_gamma1"]
                summary["darkest_over_gamma1"][str(mode)] = rows[-1]["gamma_over_gamma1"]
        if "evolve" in tasks:
            g1 = float(rates.gamma[0, 0])
            trace, _ = simulate(rates, scenario.evolve_times, gamma_ref=g1,
                                time_step_factor=cfg.controls.time_step_factor)
            _trace_checks(trace)
            files.append(write_trace(out / "trace.csv", trace))
            files += emit_plot_data(trace, out, rates=rates.scaled(1.0 / g1))
            t_pk, w_pk = trace.peak()
            k = int(np.argmax(trace.W))
            summary.update(
                W0_over_gamma1=float(trace.W[0]),
                peak_W_over_gamma1=w_pk,
                t_peak=t_pk,
                eta_initial=float(trace.eta[0]),
                eta_at_peak=float(trace.eta[k]),
            )
        if "ladder" in tasks:
            g1 = float(rates.gamma[0, 0])
            lad = extended_dicke_rates(rates.scaled(1.0 / g1), DickeBasis.build(cfg.n_emitters))
            rows = []
            for k, m in enumerate(lad.ms):
                if k < len(lad.ladder):
                    rows.append([m, lad.gamma_m[k], lad.ladder[k], lad.leak[k], lad.feed[k]])
                else:
                    rows.append([m, lad.gamma_m[k], "", "", ""])
            files.append(
                _write(
                    out / "ladder.csv",
                    _csv_text(["M", "gamma_M_over_gamma1", "gamma_M_to_next", "leak", "feed"], rows),
                )
            )
            summary["ladder_over_gamma1"] = [float(x) for x in lad.ladder]
            summary["min_leak"] = float(lad.leak.min())
        if "sweep" in tasks:
            header, rows = sweep_table(scenario, threads)
            files.append(_write(out / "sweep.csv", _csv_text(header, rows)))
            summary["sweep_points"] = len(rows)
    warn += sorted({str(w.message) for w in caught})
    return files, summary, warn


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, entries: list[dict], files: list[Path]) -> dict:
    manifest = {
        "package": "plasmodicke",
        "scenarios": entries,
        "files": [
            {"path": p.relative_to(out).as_posix(), "sha256": _digest(p), "bytes": p.stat().st_size}
            for p in sorted(set(files))
        ],
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _entry(scenario: Scenario, summary: dict, warn: list[str]) -> dict:
    return {
        "name": scenario.name,
        "tasks": sorted(scenario.tasks),
        "config": scenario.raw,
        "summary": summary,
        "warnings": warn,
    }


def run_scenario(scenario: Scenario, out_dir=None, threads: int | None = None) -> dict:
    """Run every task of ``scenario``; returns (and writes) the manifest."""
    out = Path(out_dir or scenario.out_dir or f"out/{scenario.name}")
    out.mkdir(parents=True, exist_ok=True)
    files, summary, warn = _execute(scenario, out, resolve_threads(threads))
    return write_manifest(out, [_entry(scenario, summary, warn)], files)


def _run_sub(tree: dict, sub_out: str, threads: int):
    sc = scenario_from_dict(tree)
    files, summary, warn = _execute(sc, Path(sub_out), threads)
    return [str(f) for f in files], _entry(sc, summary, warn)


def run_preset(name: str, out_dir=None, threads: int | None = None, max_multipole: int | None = None) -> dict:
    """Run all scenarios of a preset, each into its own subdirectory."""
    trees = preset_trees(name)
    if max_multipole is not None:
        trees = [set_path(t, "controls.max_multipole", int(max_multipole)) for t in trees]
    # validate everything before doing any work
    scenarios = [scenario_from_dict(t) for t in trees]
    out = Path(out_dir or f"out/{name.replace('@', '_')}")
    out.mkdir(parents=True, exist_ok=True)
    n = resolve_threads(threads)
    subs = [(s.raw, str(out / s.name)) for s in scenarios]
    if n > 1 and len(subs) > 1:
        with ProcessPoolExecutor(max_workers=min(n, len(subs))) as pool:
            results = list(pool.map(_run_sub, *zip(*subs), [1] * len(subs)))
    else:
        results = [_run_sub(t, o, n) for t, o in subs]
    files = [Path(f) for r in results for f in r[0]]
    return write_manifest(out, [r[1] for r in results], files)


# ----------------------------------------------------------------- sweeps


def _point_summary(tree: dict, summaries: Sequence[str], times: np.ndarray, step_factor: float) -> list[float]:
    cfg = build_system(tree)
    out: dict[str, float] = {}
    need_dyn = {"peak_W_over_gamma1", "t_peak", "eta_at_peak", "eta_initial"} & set(summaries)
    green = gamma_matrix_green(cfg)
    g1 = float(green.gamma[0, 0])
    out["gamma1_over_gamma0"] = g1
    out["gamma12_over_gamma1"] = float(green.gamma[0, 1] / g1) if cfg.n_emitters > 1 else float("nan")
    if "brightest_over_gamma1" in summaries:
        out["brightest_over_gamma1"] = classical_eigenstates(cfg, fixed_orientation=True)[0].ratio_gamma1
    if need_dyn:
        rates = collective_rates(cfg)
        trace, _ = simulate(rates, times, gamma_ref=float(rates.gamma[0, 0]), time_step_factor=step_factor)
        k = int(np.argmax(trace.W))
        out.update(
            peak_W_over_gamma1=float(trace.W[k]),
            t_peak=float(trace.t[k]),
            eta_at_peak=float(trace.eta[k]),
            eta_initial=float(trace.eta[0]),
        )
    return [out[s] for s in summaries]


def _point_task(args):
    tree, summaries, times, factor = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _point_summary(tree, summaries, times, factor)


def sweep_table(scenario: Scenario, threads: int | None = None) -> tuple[list[str], list[list]]:
    """One row per sweep point, ordered by (series value, parameter value)."""
    spec: SweepSpec = scenario.sweep
    if spec is None:
        raise ValueError("scenario has no sweep specification")
    base = scenario.raw
    series = spec.series_values if spec.series_param else (None,)
    jobs, keys = [], []
    for s in series:
        tree = set_path(base, spec.series_param, s) if spec.series_param else base
        for v in spec.values:
            jobs.append((set_path(tree, spec.param, float(v)), spec.summaries, scenario.evolve_times,
                         scenario.config.controls.time_step_factor))
            keys.append(([s] if spec.series_param else []) + [float(v)])
    n = resolve_threads(threads)
    if n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
            results = list(pool.map(_point_task, jobs, chunksize=max(1, len(jobs) // (4 * n))))
    else:
        results = [_point_task(j) for j in jobs]
    header = ([spec.series_param] if spec.series_param else []) + [spec.param, *spec.summaries]
    return header, [k + r for k, r in zip(keys, results)]


def run_sweep(scenario: Scenario, out_dir=None, threads: int | None = None) -> dict:
    """Run only the sweep of ``scenario``; writes ``sweep.csv`` and the manifest."""
    out = Path(out_dir or scenario.out_dir or f"out/{scenario.name}")
    header, rows = sweep_table(scenario, threads)
    path = _write(out / "sweep.csv", _csv_text(header, rows))
    entry = _entry(scenario, {"sweep_points": len(rows)}, [])
    return write_manifest(out, [entry], [path])
