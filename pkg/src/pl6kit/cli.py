"""Command-line front end: one subcommand per analysis, CSV + SVG reports.

Exit status: 0 success, 2 input error, 3 numerical failure,
4 non-convergence, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import rabi_frequency_from_power, simulate_lambda_rabi, simulate_optical_rabi
from .errors import ConvergenceError, InputError, NumericalError, Pl6Error
from .finestructure import LABELS, labeled_energies, levels_at, strain_sweep, transition_table
from .fitting import models as fm
from .fitting.spectrum import Spectrum
from .inference import (
    GLOBAL_NAMES,
    credible_interval,
    mcmc_sample,
    posterior_predictive,
    rhat_diagnostic,
)
from .io import Report, Table, config_from_dict, emit_report, ingest_csv, load_config
from .synthetic import B_FIELD_MT, KAPPA, RABI_POWERS, fixture_path

log = logging.getLogger("pl6kit")

# column layouts are part of the output contract
SWEEP_COLUMNS = ("delta_perp_ghz",) + LABELS
FIT_COLUMNS = ("parameter", "estimate", "uncertainty")

DEFAULT_INPUTS = {
    "ple-fit": {"spectrum": "ple_spectrum"},
    "linewidth-fit": {"spectrum": "linewidth_power"},
    "decay-fit": {"decay": "pumping_decay"},
    "flip-rate-fit": {"spectrum": "flip_rates"},
    "rabi-fit": {f"P{p:g}": f"rabi_{p:g}uW" for p in RABI_POWERS},
    "visibility-fit": {"plus": "qwp_plus", "minus": "qwp_minus"},
    "eseem-fit": {"spectrum": "eseem"},
    "dd-scaling": {"xy8": "xy8_decay", "t2_scaling": "t2_scaling"},
    "infer": {"line_list": "line_list"},
}

OPTIONS = {
    "levels": {},
    "sweep": {"max_ghz": 12.416, "n_points": 125},
    "ple-fit": {"n_peaks": 5},
    "linewidth-fit": {},
    "decay-fit": {"fit_start_ns": 200.0},
    "flip-rate-fit": {},
    "rabi-sim": {"powers_uw": list(RABI_POWERS), "kappa": KAPPA, "t1_ns": 16.0, "pulse_ns": 20.0, "noise": 0.0},
    "rabi-fit": {"powers_uw": {f"P{p:g}": p for p in RABI_POWERS}},
    "lambda-sim": {"omega_ghz": 1.610, "t1_plus_ns": 15.0, "t1_minus_ns": 19.0, "pulse_ns": 20.0, "sigma": 0.01},
    "visibility-fit": {},
    "eseem-fit": {"b_field_mt": B_FIELD_MT},
    "dd-scaling": {"n_predict": 16},
    "infer": {"n_chains": 4, "n_steps": 20000, "grid_points": 125, "n_draws": 200},
    "report-all": {},
}
STOCHASTIC = {"infer"}


def _options(cmd, cfg):
    allowed = OPTIONS[cmd]
    unknown = sorted(set(cfg.options) - set(allowed))
    if unknown:
        raise InputError(f"{cmd}: unknown option(s) {unknown}; allowed: {sorted(allowed)}")
    return {**allowed, **cfg.options}


def _inputs(cmd, cfg):
    if cfg.inputs:
        return dict(cfg.inputs)
    return {k: str(fixture_path(v)) for k, v in DEFAULT_INPUTS.get(cmd, {}).items()}


def _fit_table(name, fit):
    rows = [(n, v, e) for n, v, e in zip(fit.names, fit.values, fit.errors)]
    rows += [("chi2_red", fit.chi2_red, 0.0), ("iterations", fit.iterations, 0)]
    rows += [(k, v, 0.0) for k, v in sorted(fit.derived.items()) if not k.endswith("_err")]
    return Table(name, FIT_COLUMNS, rows)


def _curve(model, fit):
    return lambda x: model(x, fit.values)


# --- subcommands -------------------------------------------------------------

def cmd_levels(cfg, opts, inputs, plots):
    """Zero-strain level table."""
    ls = levels_at(cfg.params)
    lines = {ln.upper_label: ln for ln in transition_table(ls)}
    rows = [
        (lv.label, lv.energy, *lv.ms_weight, lines[lv.label].spin_branch)
        for lv in ls.levels
    ]
    cols = ("label", "energy_ghz", "ms_plus1", "ms_0", "ms_minus1", "spin_branch")
    rep = Report("levels", [Table("levels", cols, rows)], notes={"level_set": ls.to_dict()})
    if plots:
        from .plotting import levels_figure

        rep.figures["levels"] = levels_figure(ls)
    return rep


def cmd_sweep(cfg, opts, inputs, plots):
    """Labeled levels along a transverse-strain grid."""
    grid = np.linspace(0.0, float(opts["max_ghz"]), int(opts["n_points"]))
    sets = strain_sweep(cfg.params, grid)
    rows = [(g, *(s.energy(lab) for lab in LABELS)) for g, s in zip(grid, sets)]
    rep = Report("sweep", [Table("sweep", SWEEP_COLUMNS, rows)])
    if plots:
        from .plotting import sweep_figure

        branches = {lab: np.array([s.energy(lab) for s in sets]) for lab in LABELS}
        rep.figures["sweep"] = sweep_figure(grid, branches)
    return rep


def cmd_ple_fit(cfg, opts, inputs, plots):
    """Lorentzian multiplet fit of a PLE scan."""
    s = ingest_csv(inputs["spectrum"], "spectrum")
    s = Spectrum(s.x, s.y, s.sigma, s.sigma_known, "GHz", s.y_unit, s.metadata)
    n = int(opts["n_peaks"])
    fit = fm.fit_lorentzian_multiplet(s, n)
    rows = []
    for k in range(1, n + 1):
        rows.append((
            k, fit[f"center_{k}"], fit.error(f"center_{k}"), 1e3 * fit[f"fwhm_{k}"], 1e3 * fit.error(f"fwhm_{k}"),
            fit[f"amplitude_{k}"], fit.error(f"amplitude_{k}"),
        ))
    cols = ("peak", "center_ghz", "center_err_ghz", "fwhm_mhz", "fwhm_err_mhz", "amplitude", "amplitude_err")
    rep = Report("ple-fit", [Table("peaks", cols, rows), _fit_table("fit", fit)], inputs=inputs)
    if plots:
        from .plotting import fit_figure

        rep.figures["ple_fit"] = fit_figure(s, _curve(fm.lorentzian_multiplet_model(n), fit), "detuning (GHz)", "PL (norm.)", n=4000)
    return rep


def _simple_fit(cmd, kind, fitter, model, xlabel, ylabel, extra=None):
    def run(cfg, opts, inputs, plots):
        s = ingest_csv(inputs[kind], kind)
        fit = fitter(s)
        tables = [_fit_table("fit", fit)]
        if extra:
            tables += extra(fit)
        rep = Report(cmd, tables, inputs=inputs, notes={"flags": fit.flags})
        if plots:
            from .plotting import fit_figure

            rep.figures[cmd.replace("-", "_")] = fit_figure(s, _curve(model, fit), xlabel, ylabel)
        return rep

    run.__doc__ = f"{model.name.replace('_', ' ').capitalize()} fit."
    return run


cmd_linewidth_fit = _simple_fit(
    "linewidth-fit", "spectrum", fm.fit_power_broadening, fm.POWER_BROADENING, "power (nW)", "linewidth (MHz)"
)
cmd_flip_rate_fit = _simple_fit(
    "flip-rate-fit", "spectrum", fm.fit_saturation, fm.SATURATION, "power (uW)", "spin-flip rate (kHz)"
)


def cmd_decay_fit(cfg, opts, inputs, plots):
    """Bi-exponential fit of a pumping transient and the spin fidelity."""
    d = ingest_csv(inputs["decay"], "decay")
    keep = d.x >= float(opts["fit_start_ns"])
    if keep.sum() <= 6:
        raise InputError("decay-fit: fewer than 6 points after fit_start_ns")
    w = Spectrum(d.x[keep], d.y[keep], d.sigma[keep], True, "ns", "counts")
    fit = fm.fit_biexponential(w)
    f, ferr = fm.fidelity_from_biexp(fit)
    fid = Table("fidelity", ("quantity", "value", "uncertainty"), [("fidelity", f, ferr)])
    rep = Report("decay-fit", [_fit_table("fit", fit), fid], inputs=inputs, notes={"flags": fit.flags})
    if plots:
        from .plotting import fit_figure

        rep.figures["decay_fit"] = fit_figure(w, _curve(fm.BIEXPONENTIAL, fit), "time (ns)", "counts", logy=True)
    return rep


def cmd_rabi_sim(cfg, opts, inputs, plots):
    """Simulate and fit optical Rabi traces over a set of powers."""
    powers = [float(p) for p in opts["powers_uw"]]
    if opts["noise"] > 0:
        cfg.require_seed("rabi-sim with noise")
    rng = np.random.Generator(np.random.PCG64(cfg.seed or 0))
    traces, omegas, fitted = {}, [], []
    for p in powers:
        om = float(rabi_frequency_from_power(p, float(opts["kappa"])))
        ts = simulate_optical_rabi(om, 0.0, float(opts["t1_ns"]), float(opts["pulse_ns"]))
        y = ts.values + float(opts["noise"]) * rng.standard_normal(ts.t.size)
        traces[p] = (ts.t, y)
        sig = np.full(y.size, max(float(opts["noise"]), 1e-3))
        fit = fm.fit_damped_cosine(Spectrum(ts.t, y, sig))
        omegas.append(om)
        fitted.append((fit["omega"], fit.error("omega"), fit["tau"], fit.error("tau")))
    kappa, kerr, r2 = fm.fit_rabi_power_scaling(powers, [f[0] for f in fitted])
    t = next(iter(traces.values()))[0]
    trace_tab = Table("traces", ("t_ns",) + tuple(f"p{p:g}uw" for p in powers), [
        (ti, *(traces[p][1][i] for p in powers)) for i, ti in enumerate(t)
    ])
    fit_tab = Table("rabi_fits", ("power_uw", "omega_true_ghz", "omega_fit_ghz", "omega_err_ghz", "tau_ns", "tau_err_ns"), [
        (p, om, *f) for p, om, f in zip(powers, omegas, fitted)
    ])
    scal = Table("scaling", ("quantity", "value", "uncertainty"), [("kappa_ghz_per_sqrt_uw", kappa, kerr), ("r2", r2, 0.0)])
    rep = Report("rabi-sim", [trace_tab, fit_tab, scal], seed=cfg.seed)
    if plots:
        from .plotting import traces_figure

        rep.figures["rabi_traces"] = traces_figure({f"{p:g} uW": traces[p] for p in powers}, "time (ns)", "excited population")
    return rep


def cmd_rabi_fit(cfg, opts, inputs, plots):
    """Fit measured Rabi traces and the Omega-versus-sqrt(P) law."""
    powers = opts["powers_uw"]
    missing = sorted(set(inputs) - set(powers))
    if missing:
        raise InputError(f"rabi-fit: no power given for input(s) {missing}")
    rows = []
    for name in sorted(inputs, key=lambda k: float(powers[k])):
        fit = fm.fit_damped_cosine(ingest_csv(inputs[name], "spectrum"))
        rows.append((float(powers[name]), fit["omega"], fit.error("omega"), fit["tau"], fit.error("tau"),
                     fit.derived.get("contrast", float("nan"))))
    kappa, kerr, r2 = fm.fit_rabi_power_scaling([r[0] for r in rows], [r[1] for r in rows])
    fits = Table("rabi_fits", ("power_uw", "omega_ghz", "omega_err_ghz", "tau_ns", "tau_err_ns", "contrast"), rows)
    scal = Table("scaling", ("quantity", "value", "uncertainty"), [("kappa_ghz_per_sqrt_uw", kappa, kerr), ("r2", r2, 0.0)])
    rep = Report("rabi-fit", [fits, scal], inputs=inputs)
    if plots:
        from .plotting import fit_figure

        x = Spectrum([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows])
        rep.figures["rabi_scaling"] = fit_figure(x, lambda p: kappa * np.sqrt(p), "power (uW)", "Omega (GHz)")
    return rep


def cmd_lambda_sim(cfg, opts, inputs, plots):
    """Drive each Lambda branch, fit both runs and compare lifetimes."""
    t_plus, t_minus = float(opts["t1_plus_ns"]), float(opts["t1_minus_ns"])
    fits, traces = {}, {}
    for branch in ("plus", "minus"):
        run = simulate_lambda_rabi(float(opts["omega_ghz"]), branch, 1 / t_plus, 1 / t_minus, float(opts["pulse_ns"]))
        data = Spectrum(run.t, run.excited, np.full(run.t.size, float(opts["sigma"])), True, "ns")
        fits[branch] = fm.fit_lambda_rabi(data, branch)
        traces[f"drive {branch}"] = (run.t, run.excited)
    rows = [
        (b, f["omega"], f.error("omega"), f["t1"], f.error("t1"), f["t_leak"], f.error("t_leak"))
        for b, f in fits.items()
    ]
    fit_tab = Table("lambda_fits", ("branch", "omega_ghz", "omega_err", "t1_ns", "t1_err", "t_leak_ns", "t_leak_err"), rows)
    recip = []
    for a, b in (("plus", "minus"), ("minus", "plus")):
        x, y = fits[a], fits[b]
        diff = x["t1"] - y["t_leak"]
        sig = float(np.hypot(x.error("t1"), y.error("t_leak")))
        recip.append((f"t1_{a}", x["t1"], f"t_leak_{b}", y["t_leak"], diff, sig, abs(diff) <= sig))
    rec_tab = Table("reciprocity", ("driven", "t1_ns", "other", "t_leak_ns", "difference_ns", "sigma_ns", "within_sigma"), recip)
    rep = Report("lambda-sim", [fit_tab, rec_tab])
    if plots:
        from .plotting import traces_figure

        rep.figures["lambda_traces"] = traces_figure(traces, "time (ns)", "A2 population")
    return rep


def cmd_visibility_fit(cfg, opts, inputs, plots):
    """Cosine fits of counts versus QWP angle."""
    rows, fits, data = [], {}, {}
    for branch in sorted(inputs):
        s = ingest_csv(inputs[branch], "spectrum")
        f = fm.fit_visibility(s)
        fits[branch], data[branch] = f, s
        rows.append((branch, f["mean"], f.error("mean"), f["visibility"], f.error("visibility"),
                     f["theta0"], f.error("theta0"), ";".join(f.flags)))
    cols = ("branch", "mean", "mean_err", "visibility", "visibility_err", "theta0_deg", "theta0_err_deg", "flags")
    tables = [Table("visibility", cols, rows)]
    if {"plus", "minus"} <= set(fits):
        d = (fits["minus"]["theta0"] - fits["plus"]["theta0"]) % 360.0
        tables.append(Table("phase", ("quantity", "value"), [("theta0_difference_deg", d), ("qwp_angle_difference_deg", d / 2)]))
    rep = Report("visibility-fit", tables, inputs=inputs)
    if plots:
        from .plotting import fit_figure

        for b, f in fits.items():
            rep.figures[f"visibility_{b}"] = fit_figure(data[b], _curve(fm.VISIBILITY, f), "QWP angle (deg)", "counts")
    return rep


def cmd_eseem_fit(cfg, opts, inputs, plots):
    """ESEEM fit of a Hahn-echo decay."""
    s = ingest_csv(inputs["spectrum"], "spectrum")
    fit = fm.fit_eseem(s, float(opts["b_field_mt"]))
    ratio = fit["nu_c"] / fit["nu_si"]
    gamma_ratio = fm.GAMMA_C13_KHZ_PER_MT / fm.GAMMA_SI29_KHZ_PER_MT
    check = Table("ratio_check", ("quantity", "value"), [
        ("nu_c_over_nu_si", ratio), ("gamma_c_over_gamma_si", gamma_ratio), ("relative_difference", ratio / gamma_ratio - 1),
    ])
    rep = Report("eseem-fit", [_fit_table("fit", fit), check], inputs=inputs, notes={"flags": fit.flags})
    if plots:
        from .plotting import fit_figure

        rep.figures["eseem_fit"] = fit_figure(s, _curve(fm.ESEEM, fit), "tau (ms)", "echo (norm.)", n=3000)
    return rep


def cmd_dd_scaling(cfg, opts, inputs, plots):
    """Stretched-exponential XY8 fit and T2(N) power law."""
    tables, figs = [], {}
    if "xy8" in inputs:
        s = ingest_csv(inputs["xy8"], "spectrum")
        f = fm.fit_stretched_exponential(s)
        tables.append(_fit_table("xy8_fit", f))
        figs["xy8_fit"] = (s, _curve(fm.STRETCHED, f), "time (ms)", "echo (norm.)", False)
    sc = ingest_csv(inputs["t2_scaling"], "t2_scaling")
    pl = fm.fit_power_law(sc)
    n = float(opts["n_predict"])
    pred = pl["alpha"] * n ** pl["beta"]
    grad = np.array([n ** pl["beta"], pl["alpha"] * n ** pl["beta"] * np.log(n)])
    pred_err = float(np.sqrt(grad @ pl.covariance @ grad))
    tables.append(_fit_table("power_law", pl))
    tables.append(Table("prediction", ("n_pulses", "t2_ms", "t2_err_ms"), [(n, pred, pred_err)]))
    figs["t2_scaling"] = (sc, _curve(fm.POWER_LAW, pl), "pulses N", "T2 (ms)", True)
    rep = Report("dd-scaling", tables, inputs=inputs)
    if plots:
        from .plotting import fit_figure

        for k, (d, c, xl, yl, lg) in figs.items():
            rep.figures[k] = fit_figure(d, c, xl, yl, logx=lg, logy=lg)
    return rep


def cmd_infer(cfg, opts, inputs, plots):
    """Global MCMC fit of the fine-structure parameters."""
    seed = cfg.require_seed("infer")
    datasets = ingest_csv(inputs["line_list"], "line_list")
    chains = mcmc_sample(datasets, n_chains=int(opts["n_chains"]), n_steps=int(opts["n_steps"]), seed=seed, workers=cfg.workers)
    names = chains[0].names
    post_rows = []
    for c in chains:
        for i, (s, lp) in enumerate(zip(c.samples, c.log_post)):
            post_rows.append((c.chain_index, i, *s, lp))
    posterior = Table("posterior", ("chain", "draw") + names + ("log_post",), post_rows)
    rhat = rhat_diagnostic(chains)
    iv_rows = []
    for level in (0.95, 0.68):
        for ci, r in zip(credible_interval(chains, level), rhat):
            iv_rows.append((ci.name, level, ci.estimate, ci.lower, ci.upper, r))
    intervals = Table("intervals", ("parameter", "level", "median", "lower", "upper", "rhat"), iv_rows)
    acc = Table("chains", ("chain", "acceptance_rate", "n_draws"), [(c.chain_index, c.acceptance_rate, len(c.samples)) for c in chains])
    dmax = max(ci.upper for ci in credible_interval(chains, 0.95)[len(GLOBAL_NAMES):]) * 1.1
    grid = np.linspace(0.0, dmax, int(opts["grid_points"]))
    band = posterior_predictive(chains, grid, n_draws=int(opts["n_draws"]), seed=seed)
    band_rows = [(g, *(band[lab][q, i] for lab in LABELS for q in range(3))) for i, g in enumerate(grid)]
    band_cols = ("delta_perp_ghz",) + tuple(f"{lab}_{q}" for lab in LABELS for q in ("q05", "q50", "q95"))
    tables = [posterior, intervals, acc, Table("predictive_band", band_cols, band_rows)]
    notes = {"max_rhat": float(np.max(rhat)), "converged": bool(np.all(rhat < 1.05))}
    rep = Report("infer", tables, inputs=inputs, seed=seed, notes=notes)
    if plots:
        from .plotting import sweep_figure

        med = np.array([ci.estimate for ci in credible_interval(chains, 0.95)])
        xs, ys = [], []
        for ds, d in zip(datasets, med[len(GLOBAL_NAMES):]):
            xs += [d] * len(ds.lines)
            ys += list(ds.offsets)
        branches = {lab: band[lab][1] for lab in LABELS}
        rep.figures["posterior_band"] = sweep_figure(grid, branches, bands=band, points=(xs, ys))
    if not notes["converged"]:
        log.warning("R-hat above 1.05 (max %.3f); intervals are not reliable", notes["max_rhat"])
    return rep


COMMANDS = {
    "levels": cmd_levels,
    "sweep": cmd_sweep,
    "ple-fit": cmd_ple_fit,
    "linewidth-fit": cmd_linewidth_fit,
    "decay-fit": cmd_decay_fit,
    "flip-rate-fit": cmd_flip_rate_fit,
    "rabi-sim": cmd_rabi_sim,
    "rabi-fit": cmd_rabi_fit,
    "lambda-sim": cmd_lambda_sim,
    "visibility-fit": cmd_visibility_fit,
    "eseem-fit": cmd_eseem_fit,
    "dd-scaling": cmd_dd_scaling,
    "infer": cmd_infer,
}


def run_subcommand(cmd, cfg):
    """Run one analysis and write its report under ``cfg.out_dir``."""
    if cmd == "report-all":
        return run_report_all(cfg)
    if cmd not in COMMANDS:
        raise InputError(f"unknown command {cmd!r}")
    opts = _options(cmd, cfg)
    inputs = _inputs(cmd, cfg)
    t0 = time.perf_counter()
    try:
        rep = COMMANDS[cmd](cfg, opts, inputs, cfg.plots)
    except Pl6Error as exc:
        exc.args = (f"{cmd}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise
    rep.runtime_s = time.perf_counter() - t0
    rep.seed = cfg.seed
    rep.inputs = inputs
    return emit_report(rep, cfg.out_dir)


def run_report_all(cfg):
    """Every analysis on the bundled fixtures, one subdirectory per command."""
    _options("report-all", cfg)
    if cfg.inputs:
        raise InputError("report-all always uses the bundled fixtures; remove 'inputs'")
    seed = cfg.require_seed("report-all")
    t0 = time.perf_counter()
    done = {}
    for cmd in COMMANDS:
        sub = config_from_dict({"seed": seed, "params": cfg.params.to_dict(), "workers": cfg.workers, "plots": cfg.plots,
                                "out_dir": str(Path(cfg.out_dir, cmd))})
        log.info("report-all: %s", cmd)
        rep = run_subcommand(cmd, sub)
        done[cmd] = rep.outputs
    summary = Report("report-all", seed=seed, notes={"commands": sorted(done)})
    summary.runtime_s = time.perf_counter() - t0
    return emit_report(summary, cfg.out_dir)


def build_parser():
    ap = argparse.ArgumentParser(prog="pl6kit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in list(COMMANDS) + ["report-all"]:
        fn = COMMANDS.get(name, run_report_all)
        p = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        p.add_argument("-c", "--config", help="JSON run configuration")
        p.add_argument("-o", "--out", help="output directory (overrides config out_dir)")
        p.add_argument("--seed", type=int, help="random seed (overrides config)")
        p.add_argument("--workers", type=int, help="parallel workers for chains (default 1)")
        p.add_argument("-i", "--input", action="append", default=[], metavar="NAME=PATH",
                       help="input file; repeatable, e.g. spectrum=scan.csv")
        p.add_argument("--no-plots", action="store_true", help="skip SVG figures")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def _config(args):
    raw = {}
    base = "."
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise InputError(f"{args.config}: cannot read config ({exc.strerror})") from None
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise InputError(f"{args.config}: invalid JSON ({exc})") from None
        base = str(Path(args.config).resolve().parent)
        load_config(args.config)  # full validation, including input paths
    if args.out:
        raw["out_dir"] = args.out
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.workers is not None:
        raw["workers"] = args.workers
    if args.no_plots:
        raw["plots"] = False
    if args.input:
        inputs = {}
        for item in args.input:
            name, sep, path = item.partition("=")
            if not sep or not name or not path:
                raise InputError(f"--input expects NAME=PATH, got {item!r}")
            inputs[name] = str(Path(path).resolve())
        raw["inputs"] = {**{k: str(Path(base, v)) for k, v in raw.get("inputs", {}).items()}, **inputs}
        base = "."
    return config_from_dict(raw, base)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        rep = run_subcommand(args.command, cfg)
    except ConvergenceError as exc:
        print(f"pl6kit: did not converge: {exc}", file=sys.stderr)
        return exc.exit_code
    except NumericalError as exc:
        print(f"pl6kit: numerical failure: {exc}", file=sys.stderr)
        return exc.exit_code
    except InputError as exc:
        print(f"pl6kit: input error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Pl6Error as exc:
        print(f"pl6kit: {exc}", file=sys.stderr)
        return exc.exit_code
    print(f"{rep.command}: wrote {len(rep.outputs) + 1} files to {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
