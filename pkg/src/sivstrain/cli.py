"""
Command-line front end.

    sivstrain <command> [--config FILE] [--seed N] [--out FILE] [--in FILE]

Commands: levels, phonon, pumpprobe, cpt, powerscan, fit, defaults.  Each
simulation command writes a CSV table (to --out, or stdout) whose '#'
header carries the version and the full resolved configuration, then prints
a one-line JSON summary on stdout.

Exit codes: 0 success, 1 runtime or fit failure, 2 configuration or input
schema error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .actuator import (
    CantileverGeometry,
    SivOrientation,
    crystal_strain_tensor,
    emitter_strain,
    to_defect_frame,
)
from .config import ConfigError, RunConfig, default_ini, load_config
from .cpt import (
    LambdaConfig,
    cpt_spectrum,
    expected_fwhm,
    gamma_phi_from_t2star,
    linewidth_at_zero_power,
    scan_grid,
    t2star_from_fwhm,
)
from .csvio import CsvTable, SchemaError, format_table, read_table
from .fitting import (
    FitError,
    exp_relaxation,
    fit_linear,
    fit_lorentzian_dips,
    fit_strain_response,
    format_uncertainty,
    lines_model,
)
from .levels import (
    GHZ_PER_THZ,
    SpinOrbitParams,
    StrainSusceptibilities,
    diagram_from_strain,
    nm_to_thz,
    strain_to_terms,
)
from .phonons import (
    BathParams,
    RelaxationTrace,
    bose_occupation,
    boltzmann_factor,
    extract_rates,
    gamma_down,
    gamma_up,
    simulate_pump_probe,
)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


# --------------------------------------------------------------------------
# config -> model objects


def _spin_orbit(cfg):
    d = cfg["defect"]
    return SpinOrbitParams(d["lambda_gs_ghz"], d["lambda_es_ghz"])


def _susceptibilities(cfg):
    d = cfg["defect"]
    gs = StrainSusceptibilities(d["t_par_gs_ghz"], d["t_perp_gs_ghz"], d["d_gs_ghz"], d["f_gs_ghz"])
    es = StrainSusceptibilities(d["t_par_es_ghz"], d["t_perp_es_ghz"], d["d_es_ghz"], d["f_es_ghz"])
    return gs, es


def _geometry(cfg):
    c = cfg["cantilever"]
    return CantileverGeometry(c["length_um"], c["width_um"], c["thickness_um"], c["gap_um"], c["youngs_gpa"],
                              c["poisson"], c["emitter_x_um"], c["emitter_depth_um"])


def _bath(cfg):
    b = cfg["bath"]
    return BathParams(b["chi_hz"], b["exponent_n"], b["temp_k"])


def _lambda_config(cfg) -> LambdaConfig:
    p = cfg["cpt"]
    gamma_phi = p["gamma_phi_mhz"] if p["t2star_us"] is None else gamma_phi_from_t2star(p["t2star_us"])
    up = down = 0.0
    if p["model"] == "microscopic":
        bath = _bath(cfg)
        up = gamma_up(p["delta_gs_ghz"], bath) / 1e6
        down = gamma_down(p["delta_gs_ghz"], bath) / 1e6
    return LambdaConfig(p["rabi_1_mhz"], p["rabi_2_mhz"], p["detuning_1_mhz"], p["detuning_2_mhz"],
                        p["gamma_e_mhz"], p["branching_1"], p["branching_2"], p["model"], gamma_phi, up, down,
                        cfg["defect"]["delta_z_ghz"], p["hf_offset_mhz"], p["hf_weight"])


def _defect_strain(cfg, eps_axial):
    c = cfg["cantilever"]
    orient = SivOrientation.from_axis(c["siv_axis"])
    axis = np.asarray(c["long_axis"], dtype=float)
    return to_defect_frame(crystal_strain_tensor(eps_axial, axis / np.linalg.norm(axis), c["poisson"]), orient)


def _header(cfg: RunConfig, command: str) -> list[str]:
    return [f"sivstrain {__version__}", f"command: {command}", "config:"] + cfg.snapshot()


def _fmt(cfg):
    return cfg["output"]["float_format"]


# --------------------------------------------------------------------------
# commands; each returns (table or None, summary dict)


def cmd_levels(cfg: RunConfig):
    d = cfg["defect"]
    nu_mean = float(nm_to_thz(d["zpl_nm"]))
    spin_orbit = _spin_orbit(cfg)
    gs, es = _susceptibilities(cfg)
    cols = {}
    if d["sweep"] == "voltage":
        c = cfg["cantilever"]
        volts = np.linspace(c["voltage_min_v"], c["voltage_max_v"], c["voltage_points"])
        geom = _geometry(cfg)
        strain = np.array([emitter_strain(v, geom) for v in volts])
        cols["volts"] = volts
    else:
        strain = np.linspace(d["strain_min"], d["strain_max"], d["strain_points"])
    cols["strain"] = strain
    diagrams = [diagram_from_strain(_defect_strain(cfg, e), nu_mean, spin_orbit, gs, es) for e in strain]
    lines = np.array([dg.lines for dg in diagrams])
    for i, name in enumerate("ABCD"):
        cols[f"line_{name}_thz"] = lines[:, i]
    for i, name in enumerate("ABCD"):
        cols[f"line_{name}_nm"] = np.array([dg.wavelengths_nm[i] for dg in diagrams])
    cols["delta_gs_ghz"] = np.array([dg.delta_gs for dg in diagrams])
    cols["delta_es_ghz"] = np.array([dg.delta_es for dg in diagrams])

    # per-unit-axial-strain response along this loading ray
    unit = _defect_strain(cfg, 1.0)
    tg, te = strain_to_terms(unit, gs), strain_to_terms(unit, es)
    summary = {
        "rows": int(strain.size),
        "nu_mean_thz": nu_mean,
        "delta_gs_ghz_max": float(cols["delta_gs_ghz"].max()),
        "delta_es_ghz_max": float(cols["delta_es_ghz"].max()),
        "ray_d_gs_ghz": float(tg.beta),
        "ray_d_es_ghz": float(te.beta),
        "ray_shift_slope_ghz": float(te.alpha - tg.alpha),
    }
    return CsvTable(cols, _header(cfg, "levels")), summary


def cmd_phonon(cfg: RunConfig):
    b = cfg["bath"]
    bath = _bath(cfg)
    delta = np.linspace(b["delta_min_ghz"], b["delta_max_ghz"], b["delta_points"])
    up = gamma_up(delta, bath)
    down = gamma_down(delta, bath)
    ref = gamma_up(np.array([cfg["defect"]["lambda_gs_ghz"]]), bath)[0]
    boltz = boltzmann_factor(delta, bath.T)
    ratio = up / down
    cols = {
        "delta_gs_ghz": delta,
        "n_be": bose_occupation(delta, bath.T),
        "gamma_up_hz": up,
        "gamma_down_hz": down,
        "gamma_up_normalized": up / ref,
        "up_down_ratio": ratio,
        "boltzmann_factor": boltz,
    }
    i = int(np.argmax(up))
    summary = {
        "argmax_gamma_up_ghz": float(delta[i]),
        "gamma_up_max_hz": float(up[i]),
        "gamma_up_ref_hz": float(ref),
        "detailed_balance_max_dev": float(np.max(np.abs(ratio - boltz))),
    }
    return CsvTable(cols, _header(cfg, "phonon")), summary


def _rate_summary(est, truth=None):
    out = {
        "gamma_up_hz": est.gamma_up,
        "gamma_up_err_hz": est.gamma_up_err,
        "gamma_down_hz": est.gamma_down,
        "gamma_down_err_hz": est.gamma_down_err,
        "p_eq": est.p_eq,
        "converged": bool(est.result.converged),
        "iterations": int(est.result.iterations),
    }
    if truth:
        out["gamma_up_true_hz"] = truth["gamma_up"]
        out["gamma_down_true_hz"] = truth["gamma_down"]
        out["gamma_up_rel_error"] = est.gamma_up / truth["gamma_up"] - 1.0
        out["gamma_down_rel_error"] = est.gamma_down / truth["gamma_down"] - 1.0
    return out


def cmd_pumpprobe(cfg: RunConfig):
    b = cfg["bath"]
    time = np.linspace(0.0, b["pp_t_max_ns"] * 1e-9, b["pp_points"])
    trace = simulate_pump_probe(b["pp_delta_ghz"], _bath(cfg), b["pp_p0"], time, b["pp_noise"],
                                cfg["output"]["seed"])
    est = extract_rates(trace)
    cols = {
        "time_s": trace.time,
        "population": trace.population,
        "population_fit": exp_relaxation(trace.time, est.result.params),
    }
    return CsvTable(cols, _header(cfg, "pumpprobe")), _rate_summary(est, trace.truth)


def _dip_summary(fit, expected=None):
    out = {
        "baseline": fit.baseline,
        "contrast": fit.contrast,
        "centers_mhz": [d.center for d in fit.dips],
        "center_errs_mhz": [d.center_err for d in fit.dips],
        "fwhm_mhz": [d.fwhm for d in fit.dips],
        "fwhm_errs_mhz": [d.fwhm_err for d in fit.dips],
        "t2star_us": [t2star_from_fwhm(d.fwhm) for d in fit.dips],
    }
    if len(fit.dips) == 2:
        a, b = fit.dips
        out["separation_mhz"] = abs(b.center - a.center)
        out["separation_err_mhz"] = float(np.hypot(a.center_err, b.center_err))
    if expected is not None:
        out["expected_fwhm_mhz"] = expected
    return out


def _n_dips(lc: LambdaConfig) -> int:
    return 2 if lc.hf_weight > 0 and lc.hf_offset != 0 else 1


def cmd_cpt(cfg: RunConfig):
    p = cfg["cpt"]
    lc = _lambda_config(cfg)
    if p["scan_min_mhz"] is None:
        grid = scan_grid(lc, points=p["scan_points"])
    else:
        grid = np.linspace(p["scan_min_mhz"], p["scan_max_mhz"], p["scan_points"])
    spec = cpt_spectrum(lc, grid, noise=p["noise"], seed=cfg["output"]["seed"])
    cols = {"two_photon_detuning_mhz": spec.detuning, "signal": spec.signal}
    summary = {}
    off = float(max(spec.signal[0], spec.signal[-1]))
    summary["min_over_offresonant"] = float(spec.signal.min() / off) if off > 0 else float("nan")
    fit = fit_lorentzian_dips(spec, k=_n_dips(lc), baseline=cfg["fit"]["baseline"])
    summary.update(_dip_summary(fit, expected_fwhm(lc)))
    return CsvTable(cols, _header(cfg, "cpt")), summary


def cmd_powerscan(cfg: RunConfig):
    p = cfg["cpt"]
    lc = _lambda_config(cfg)
    powers = np.linspace(p["power_min_mhz2"], p["power_max_mhz2"], p["power_points"])
    zp = linewidth_at_zero_power(lc, powers, points=p["scan_points"], noise=p["noise"],
                                 seed=cfg["output"]["seed"])
    cols = {
        "power_mhz2": zp.powers,
        "fwhm_mhz": zp.widths,
        "fwhm_err_mhz": zp.width_errs,
        "fwhm_line_mhz": zp.fwhm + zp.slope * zp.powers,
    }
    summary = {
        "zero_power_fwhm_mhz": zp.fwhm,
        "zero_power_fwhm_err_mhz": zp.fwhm_err,
        "slope_mhz_per_mhz2": zp.slope,
        "slope_err": zp.slope_err,
        "t2star_us": zp.t2star,
        "t2star_err_us": zp.t2star_err,
        "zero_power_fwhm_text": format_uncertainty(zp.fwhm, zp.fwhm_err, "MHz"),
        "injected_fwhm_mhz": lc.gamma_phi / (2 * np.pi),
    }
    return CsvTable(cols, _header(cfg, "powerscan")), summary


# input schemas for `fit`
FIT_SCHEMAS = {
    "strain": ("strain", "line_A_thz", "line_B_thz", "line_C_thz", "line_D_thz"),
    "cpt": ("two_photon_detuning_mhz", "signal"),
    "linear": ("power_mhz2", "fwhm_mhz"),
    "pumpprobe": ("time_s", "population"),
}


def cmd_fit(cfg: RunConfig, table: CsvTable):
    model = cfg["fit"]["model"]
    table.require(*FIT_SCHEMAS[model])
    head = _header(cfg, f"fit {model}")
    if model == "strain":
        x = table["strain"]
        lines = np.column_stack([table[f"line_{n}_thz"] for n in "ABCD"])
        sf = fit_strain_response(x, lines)
        ref = float(np.mean(lines))
        fitted = lines_model(x, sf.result.params).reshape(4, -1).T / GHZ_PER_THZ + ref
        resid = (lines - fitted) * GHZ_PER_THZ
        cols = {"strain": x}
        for i, n in enumerate("ABCD"):
            cols[f"residual_{n}_ghz"] = resid[:, i]
        summary = {
            "lambda_gs_ghz": sf.lambda_gs, "d_gs_ghz": sf.d_gs,
            "lambda_es_ghz": sf.lambda_es, "d_es_ghz": sf.d_es,
            "nu_mean_thz": sf.nu_mean, "shift_slope_ghz": sf.shift_slope,
            "stderr": sf.stderr, "iterations": int(sf.result.iterations),
        }
        return CsvTable(cols, head), summary
    if model == "cpt":
        x, y = table["two_photon_detuning_mhz"], table["signal"]
        fit = fit_lorentzian_dips(x, y, k=cfg["fit"]["dips"], baseline=cfg["fit"]["baseline"])
        resid = fit.result.residuals
        cols = {"two_photon_detuning_mhz": x, "signal": y, "fit": y - resid, "residual": resid}
        return CsvTable(cols, head), _dip_summary(fit)
    if model == "linear":
        x, y = table["power_mhz2"], table["fwhm_mhz"]
        sigma = table["fwhm_err_mhz"] if "fwhm_err_mhz" in table.columns else None
        line = fit_linear(x, y, sigma=sigma)
        fitted = line.slope * x + line.intercept
        cols = {"power_mhz2": x, "fwhm_mhz": y, "fit": fitted, "residual": y - fitted}
        summary = {
            "intercept_mhz": line.intercept, "intercept_err_mhz": line.intercept_err,
            "slope": line.slope, "slope_err": line.slope_err, "chi2": line.chi2, "dof": line.dof,
            "intercept_text": line.intercept_text("MHz"),
            "t2star_us": t2star_from_fwhm(line.intercept) if line.intercept > 0 else float("nan"),
        }
        return CsvTable(cols, head), summary
    # pumpprobe
    t, y = table["time_s"], table["population"]
    trace = RelaxationTrace(t, y, noise=None)
    est = extract_rates(trace)
    resid = est.result.residuals
    cols = {"time_s": t, "population": y, "fit": y - resid, "residual": resid}
    return CsvTable(cols, head), _rate_summary(est)


COMMANDS = {
    "levels": cmd_levels,
    "phonon": cmd_phonon,
    "pumpprobe": cmd_pumpprobe,
    "cpt": cmd_cpt,
    "powerscan": cmd_powerscan,
}


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sivstrain", description="SiV strain, phonon and CPT simulations.")
    parser.add_argument("--version", action="version", version=f"sivstrain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["fit"]:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="FILE", help="INI configuration (defaults if omitted)")
        p.add_argument("--seed", type=int, help="RNG seed, overrides [output] seed")
        p.add_argument("--out", metavar="FILE", help="output CSV (stdout if omitted)")
        if name == "fit":
            p.add_argument("--in", dest="infile", metavar="FILE", required=True, help="input CSV")
    sub.add_parser("defaults", help="print the default configuration")
    return parser


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj).__name__)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        stdout.write(default_ini())
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.values["output"]["seed"] = args.seed
        if args.command == "fit":
            table, summary = cmd_fit(cfg, read_table(args.infile))
        else:
            table, summary = COMMANDS[args.command](cfg)
    except (ConfigError, SchemaError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except FitError as exc:
        stderr.write(f"fit failed: {exc}\n")
        res = exc.result
        if res is not None:
            stderr.write(f"  parameters: {list(map(float, res.params))}\n")
            stderr.write(f"  iterations: {res.iterations}, residual norm: {res.residual_norm:.6g}\n")
        return EXIT_RUNTIME
    except (ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME
    text = format_table(table, _fmt(cfg))
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            stderr.write(f"error: cannot write {args.out}: {exc}\n")
            return EXIT_RUNTIME
    else:
        stdout.write(text)
    summary = {"command": args.command, **summary}
    stdout.write(json.dumps(summary, sort_keys=True, default=_json_default) + "\n")
    return EXIT_OK


def main(argv=None):
    try:
        code = run(argv)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        code = EXIT_RUNTIME
    sys.exit(code)


if __name__ == "__main__":
    main()
