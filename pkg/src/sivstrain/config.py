"""
INI run configuration with strict key checking.

Every key carries its unit in the suffix (_ghz, _mhz, _k, _um, _v, ...).
Rates written with _mhz in the [cpt] section are rates in 1/us.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending location."""


def _axis(text: str) -> tuple:
    parts = text.replace(",", " ").split()
    if len(parts) != 3:
        raise ValueError("expected three components")
    return tuple(float(p) for p in parts)


def _optional_float(text: str):
    t = text.strip().lower()
    return None if t in ("", "none") else float(t)


# section -> key -> (parser, default)
SCHEMA = {
    "defect": {
        "lambda_gs_ghz": (float, 46.0),
        "lambda_es_ghz": (float, 255.0),
        # placeholder; read the mean ZPL off the measured spectrum
        "zpl_nm": (float, 737.0),
        "delta_z_ghz": (float, 1.0),
        "t_par_gs_ghz": (float, -1.0e6),
        "t_perp_gs_ghz": (float, 0.1e6),
        "d_gs_ghz": (float, 1.0e6),
        "f_gs_ghz": (float, -1.0e6),
        "t_par_es_ghz": (float, -2.0e6),
        "t_perp_es_ghz": (float, -0.3e6),
        "d_es_ghz": (float, 2.0e6),
        "f_es_ghz": (float, -2.0e6),
        "sweep": (str, "strain"),
        "strain_min": (float, 0.0),
        "strain_max": (float, 4.0e-4),
        "strain_points": (int, 41),
    },
    "cantilever": {
        "length_um": (float, 19.0),
        "width_um": (float, 1.2),
        "thickness_um": (float, 0.3),
        "gap_um": (float, 3.0),
        "youngs_gpa": (float, 1050.0),
        "poisson": (float, 0.2),
        "emitter_x_um": (float, 2.0),
        "emitter_depth_um": (float, 0.05),
        "long_axis": (_axis, (1.0, 1.0, 0.0)),
        "siv_axis": (_axis, (-1.0, 1.0, 1.0)),
        "voltage_min_v": (float, 0.0),
        "voltage_max_v": (float, 200.0),
        "voltage_points": (int, 21),
    },
    "bath": {
        "chi_hz": (float, 7.0e6),
        "exponent_n": (float, 2.0),
        "temp_k": (float, 4.0),
        "delta_min_ghz": (float, 46.0),
        "delta_max_ghz": (float, 600.0),
        "delta_points": (int, 5541),
        "pp_delta_ghz": (float, 46.0),
        "pp_p0": (float, 0.0),
        "pp_t_max_ns": (float, 200.0),
        "pp_points": (int, 401),
        "pp_noise": (float, 0.0),
    },
    "cpt": {
        "model": (str, "effective"),
        "rabi_1_mhz": (float, 2.0),
        "rabi_2_mhz": (float, 2.0),
        "detuning_1_mhz": (float, 0.0),
        "detuning_2_mhz": (float, 0.0),
        "gamma_e_mhz": (float, 1.0 / 1.7e-3),
        "branching_1": (float, 0.5),
        "branching_2": (float, 0.5),
        "gamma_phi_mhz": (float, 4.0),
        "t2star_us": (_optional_float, None),
        "delta_gs_ghz": (float, 46.0),
        "hf_offset_mhz": (float, 0.0),
        "hf_weight": (float, 0.0),
        "scan_min_mhz": (_optional_float, None),
        "scan_max_mhz": (_optional_float, None),
        "scan_points": (int, 201),
        "noise": (float, 0.0),
        "power_min_mhz2": (float, 2.0),
        "power_max_mhz2": (float, 24.0),
        "power_points": (int, 6),
    },
    "fit": {
        "model": (str, "strain"),
        "dips": (int, 1),
        "baseline": (str, "quadratic"),
    },
    "output": {
        "seed": (int, 0),
        "float_format": (str, ".12g"),
    },
}


@dataclass
class RunConfig:
    """Resolved configuration: section -> key -> typed value."""

    values: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, section):
        return self.values[section]

    def snapshot(self) -> list[str]:
        """INI text of every resolved value, one line per entry."""
        lines = []
        for section, entries in self.values.items():
            lines.append(f"[{section}]")
            for key, value in entries.items():
                lines.append(f"{key} = {format_value(value)}")
        return lines


def format_value(value) -> str:
    if isinstance(value, tuple):
        return " ".join(format_value(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def default_config() -> RunConfig:
    return RunConfig({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})


def default_ini() -> str:
    return "\n".join(default_config().snapshot()) + "\n"


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and line.split("=", 1)[0].strip().lower() == key:
            return no
    return None


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_file(io.StringIO(text), source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    cfg = default_config()
    cfg.source = source
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            where = f"{source}:{_line_of(text, section, key) or '?'}: [{section}] {key}"
            if key not in SCHEMA[section]:
                raise ConfigError(f"{where}: unknown key")
            conv = SCHEMA[section][key][0]
            try:
                cfg.values[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from exc
    validate(cfg)
    return cfg


def load_config(path: str | None) -> RunConfig:
    if path is None:
        cfg = default_config()
        validate(cfg)
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path)


def _require(cond, where, message):
    if not cond:
        raise ConfigError(f"{where}: {message}")


def validate(cfg: RunConfig) -> None:
    """Check every value against the model invariants before anything runs."""
    from .actuator import CantileverGeometry, SivOrientation
    from .cpt import LambdaConfig
    from .levels import SpinOrbitParams, StrainSusceptibilities
    from .phonons import BathParams

    src = cfg.source
    d, c, b, p, f = cfg["defect"], cfg["cantilever"], cfg["bath"], cfg["cpt"], cfg["fit"]

    def check(section, build):
        try:
            build()
        except ValueError as exc:
            raise ConfigError(f"{src}: [{section}] {exc}") from exc

    check("defect", lambda: SpinOrbitParams(d["lambda_gs_ghz"], d["lambda_es_ghz"]))
    check("defect", lambda: StrainSusceptibilities(d["t_par_gs_ghz"], d["t_perp_gs_ghz"], d["d_gs_ghz"], d["f_gs_ghz"]))
    check("defect", lambda: StrainSusceptibilities(d["t_par_es_ghz"], d["t_perp_es_ghz"], d["d_es_ghz"], d["f_es_ghz"]))
    _require(d["zpl_nm"] > 0, f"{src}: [defect] zpl_nm", "must be > 0")
    _require(d["delta_z_ghz"] >= 0, f"{src}: [defect] delta_z_ghz", "must be >= 0")
    _require(d["sweep"] in ("strain", "voltage"), f"{src}: [defect] sweep", "must be 'strain' or 'voltage'")
    _require(d["strain_points"] >= 2, f"{src}: [defect] strain_points", "must be >= 2")
    _require(d["strain_max"] > d["strain_min"], f"{src}: [defect] strain_max", "must exceed strain_min")

    check("cantilever", lambda: CantileverGeometry(
        c["length_um"], c["width_um"], c["thickness_um"], c["gap_um"], c["youngs_gpa"], c["poisson"],
        c["emitter_x_um"], c["emitter_depth_um"]))
    check("cantilever", lambda: SivOrientation.from_axis(c["siv_axis"]))
    _require(np.linalg.norm(c["long_axis"]) > 0, f"{src}: [cantilever] long_axis", "must be non-zero")
    _require(c["voltage_points"] >= 2, f"{src}: [cantilever] voltage_points", "must be >= 2")
    _require(c["voltage_max_v"] > c["voltage_min_v"], f"{src}: [cantilever] voltage_max_v", "must exceed voltage_min_v")

    check("bath", lambda: BathParams(b["chi_hz"], b["exponent_n"], b["temp_k"]))
    _require(0 < b["delta_min_ghz"] < b["delta_max_ghz"], f"{src}: [bath] delta_min_ghz", "need 0 < min < max")
    _require(b["delta_points"] >= 2, f"{src}: [bath] delta_points", "must be >= 2")
    _require(b["pp_delta_ghz"] > 0, f"{src}: [bath] pp_delta_ghz", "must be > 0")
    _require(0 <= b["pp_p0"] <= 1, f"{src}: [bath] pp_p0", "must lie in [0, 1]")
    _require(b["pp_t_max_ns"] > 0, f"{src}: [bath] pp_t_max_ns", "must be > 0")
    _require(b["pp_points"] >= 5, f"{src}: [bath] pp_points", "must be >= 5")
    _require(b["pp_noise"] >= 0, f"{src}: [bath] pp_noise", "must be >= 0")

    check("cpt", lambda: LambdaConfig(
        p["rabi_1_mhz"], p["rabi_2_mhz"], p["detuning_1_mhz"], p["detuning_2_mhz"], p["gamma_e_mhz"],
        p["branching_1"], p["branching_2"], p["model"], p["gamma_phi_mhz"], 0.0, 0.0,
        d["delta_z_ghz"], p["hf_offset_mhz"], p["hf_weight"]))
    _require(p["t2star_us"] is None or p["t2star_us"] > 0, f"{src}: [cpt] t2star_us", "must be > 0")
    _require(p["delta_gs_ghz"] > 0, f"{src}: [cpt] delta_gs_ghz", "must be > 0")
    _require(p["scan_points"] >= 8, f"{src}: [cpt] scan_points", "must be >= 8")
    _require((p["scan_min_mhz"] is None) == (p["scan_max_mhz"] is None), f"{src}: [cpt] scan_min_mhz",
             "set both scan_min_mhz and scan_max_mhz or neither")
    if p["scan_min_mhz"] is not None:
        _require(p["scan_max_mhz"] > p["scan_min_mhz"], f"{src}: [cpt] scan_max_mhz", "must exceed scan_min_mhz")
    _require(p["noise"] >= 0, f"{src}: [cpt] noise", "must be >= 0")
    _require(0 <= p["power_min_mhz2"] < p["power_max_mhz2"], f"{src}: [cpt] power_min_mhz2", "need 0 <= min < max")
    _require(p["power_points"] >= 4, f"{src}: [cpt] power_points", "must be >= 4")

    _require(f["model"] in ("strain", "cpt", "linear", "pumpprobe"), f"{src}: [fit] model",
             "must be one of strain, cpt, linear, pumpprobe")
    _require(f["dips"] in (1, 2), f"{src}: [fit] dips", "must be 1 or 2")
    _require(f["baseline"] in ("constant", "quadratic"), f"{src}: [fit] baseline", "must be constant or quadratic")
    try:
        format(1.0, cfg["output"]["float_format"])
    except ValueError as exc:
        raise ConfigError(f"{src}: [output] float_format: {exc}") from exc
