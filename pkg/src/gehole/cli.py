"""Batch front-end: one experiment per invocation, INI-style config, deterministic outputs.

Usage::

    python -m gehole --config run.ini [--experiment NAME] [--seed N] [--out DIR] [--threads N]
    python -m gehole --list-presets
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import sys
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, circuit, dqd, gate, kp, qtm
from .materials import GE, SI, StrainState, UNSTRAINED, quantum_well
from .presets import CATALOG, render_catalog

EXPERIMENTS = (
    "bands",
    "mass-vs-angle",
    "dqd-sweep",
    "wkb-fit",
    "exchange-vs-vbg",
    "gate-time",
    "variability",
    "oscillation",
    "ansatz-fidelity",
)

AUTO = "auto"

# section -> key -> (kind, default); kind "float?" accepts "auto" (resolved at run time)
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "run": {"experiment": ("str", None), "seed": ("int", 0), "threads": ("int", 1), "out": ("str", "out")},
    "material": {
        "preset": ("str", "Ge"),
        "well_thickness": ("float", 20.0),
        "barrier_thickness": ("float", 30.0),
        "band_offset": ("float", 0.3),
        "dz": ("float", 0.5),
        "strain": ("bool", True),
    },
    "bands": {
        "direction_deg": ("float", 0.0),
        "k_max": ("float", 0.3),
        "n_k": ("int", 16),
        "n_states": ("int", 12),
        "fit_window": ("float", 0.15),
        "n_angles": ("int", 7),
    },
    "dqd": {
        "L_S": ("float", 35.0),
        "V_BG_mV": ("float", 40.0),
        "m_star": ("float?", AUTO),
        "eps_r": ("float?", AUTO),
        "dot_width": ("float", 26.0),
        "well_depth": ("float", 60.0),
        "E_b0": ("float", 40.0),
        "beta": ("float", 0.5),
        "smoothing": ("float", 2.0),
        "dx": ("float", 0.1),
    },
    "sweep": {
        "L_S_list": ("floats", [25.0, 30.0, 35.0, 40.0, 45.0, 50.0]),
        "V_BG_mV_list": ("floats", [0.0, 20.0, 40.0]),
    },
    "wkb": {
        "t0": ("float?", AUTO),
        "m_star": ("float?", AUTO),
        "E_b0": ("float?", AUTO),
        "beta": ("float?", AUTO),
    },
    "gate": {
        "t_c": ("float", 28.4),
        "U1": ("float", 11.0),
        "U2": ("float", 11.0),
        "epsilon": ("float", 0.0),
        "E_z": ("float", 1.0),
        "dE_z": ("float", 0.1),
        "V_BG_mV": ("float", 40.0),
        "L_S": ("float", 30.0),
        "L_S_min": ("float", 10.0),
        "L_S_max": ("float", 50.0),
        "L_S_step": ("float", 1.0),
        "V_min_mV": ("float", 0.0),
        "V_max_mV": ("float", 40.0),
        "n_V": ("int", 41),
    },
    "variability": {
        "L_S0": ("float?", AUTO),
        "sigma_LS": ("float", 0.5),
        "n_samples": ("int", 10000),
        "bins": ("int", 40),
    },
    "noise": {"A_n": ("float", 0.24), "tau_n": ("float", 1000.0)},
    "oscillation": {
        "t_max": ("float", 500.0),
        "n_t": ("int", 2001),
        "n_traj": ("int", 2000),
        "protocol": ("str", "conditional"),
    },
    "circuit": {
        "rows": ("int", 2),
        "cols": ("int", 3),
        "N_list": ("ints", [1, 2, 3, 4, 5, 6]),
        "n_traj": ("int", 1000),
        "noise_mode": ("str", "per_gate"),
        "angle_seed": ("int?", AUTO),
    },
}


class ConfigError(ValueError):
    pass


def _convert(kind: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind.endswith("?") and raw.lower() == AUTO:
            return AUTO
        base = kind.rstrip("?")
        if base == "float":
            return float(raw)
        if base == "int":
            return int(raw, 0)
        if base == "str":
            return raw.strip('"').strip("'")
        if base == "bool":
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if base in ("floats", "ints"):
            items = [s for s in raw.strip("[]").replace(",", " ").split()]
            conv = float if base == "floats" else int
            return [conv(s) for s in items]
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from None
    raise ConfigError(f"{where}: unsupported type {kind}")


def default_config() -> dict:
    return {s: {k: (list(v[1]) if isinstance(v[1], list) else v[1]) for k, v in keys.items()}
            for s, keys in SCHEMA.items()}


def parse_config(text: str) -> dict:
    """Parse INI text against the schema; unknown sections or keys are errors."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    cfg = default_config()
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp[section].items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            cfg[section][key] = _convert(SCHEMA[section][key][0], raw, f"[{section}] {key}")
    return cfg


def validate(cfg: dict) -> None:
    exp = cfg["run"]["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
    if cfg["material"]["preset"] not in ("Ge", "Si"):
        raise ConfigError("[material] preset must be Ge or Si")
    if not 0 <= cfg["run"]["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg["run"]["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    if cfg["oscillation"]["protocol"] not in qtm.PROTOCOLS:
        raise ConfigError(f"[oscillation] protocol must be one of {qtm.PROTOCOLS}")
    if cfg["circuit"]["noise_mode"] not in circuit.NOISE_MODES:
        raise ConfigError(f"[circuit] noise_mode must be one of {circuit.NOISE_MODES}")


def resolve(cfg: dict) -> dict:
    """Replace every ``auto`` with the concrete value the run will use."""
    cfg = json.loads(json.dumps(cfg))
    preset = cfg["material"]["preset"]
    wkb0 = gate.WKB_PRESETS[preset]
    mat = GE if preset == "Ge" else SI
    for key, val in (("m_star", wkb0.m_star), ("eps_r", mat.dielectric_constant)):
        if cfg["dqd"][key] == AUTO:
            cfg["dqd"][key] = val
    for key in ("t0", "m_star", "E_b0", "beta"):
        if cfg["wkb"][key] == AUTO:
            cfg["wkb"][key] = getattr(wkb0, key)
    if cfg["variability"]["L_S0"] == AUTO:
        cfg["variability"]["L_S0"] = round(gate.crossover_spacing(_wkb(cfg), _gate_params(cfg),
                                                                   cfg["gate"]["V_BG_mV"] * 1e-3), 6)
    if cfg["circuit"]["angle_seed"] == AUTO:
        cfg["circuit"]["angle_seed"] = cfg["run"]["seed"]
    return cfg


# --- builders from a resolved config -----------------------------------------------


def _profile(cfg):
    m = cfg["material"]
    return quantum_well(
        GE if m["preset"] == "Ge" else SI,
        m["well_thickness"],
        barrier_thickness=m["barrier_thickness"],
        strain=StrainState() if m["strain"] else UNSTRAINED,
        band_offset=m["band_offset"],
        dz=m["dz"],
    )


def _wkb(cfg):
    w = cfg["wkb"]
    base = gate.WKB_PRESETS[cfg["material"]["preset"]]
    vals = {k: (getattr(base, k) if w[k] == AUTO else w[k]) for k in ("t0", "m_star", "E_b0", "beta")}
    return replace(base, **vals)


def _gate_params(cfg):
    g = cfg["gate"]
    return gate.GateParams(g["t_c"], g["U1"], g["U2"], g["epsilon"], g["E_z"], g["dE_z"])


def _dqd_cfg(cfg):
    d = cfg["dqd"]
    return dqd.DQDConfig(
        L_S=d["L_S"], V_BG=d["V_BG_mV"] * 1e-3, dot_width=d["dot_width"], m_star=d["m_star"],
        well_depth=d["well_depth"], E_b0=d["E_b0"], beta=d["beta"], eps_r=d["eps_r"],
        smoothing=d["smoothing"], dx=d["dx"],
    )


def _noise(cfg):
    n = cfg["noise"]
    return qtm.NoiseModel(n["A_n"], n["tau_n"], cfg["run"]["seed"])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not np.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


# --- experiments: each returns {filename: text} ---------------------------------


def exp_bands(cfg, threads):
    b = cfg["bands"]
    prof = _profile(cfg)
    th = np.deg2rad(b["direction_deg"])
    disp = kp.dispersion_sweep(prof, (np.cos(th), np.sin(th)), b["k_max"], b["n_k"], b["n_states"],
                               workers=threads)
    hh = kp.extract_effective_mass(disp, "HH", b["fit_window"])
    lh = kp.extract_effective_mass(disp, "LH", b["fit_window"])
    summary = {
        "m_HH": hh.m_star, "m_LH": lh.m_star,
        "HH_band_index": hh.band_index, "LH_band_index": lh.band_index,
        "HH_fit_relative_residual": hh.relative_residual,
        "HH_LH_split_eV": kp.hh_lh_splitting(prof, strain=cfg["material"]["strain"]),
        "HH_LH_split_unstrained_eV": kp.hh_lh_splitting(prof, strain=False),
    }
    return {"bands.csv": disp.to_csv(), "summary.json": _dump_json(summary)}


def exp_mass_vs_angle(cfg, threads):
    b = cfg["bands"]
    am = kp.mass_vs_angle(_profile(cfg), b["n_angles"], "HH", b["fit_window"], workers=threads)
    summary = {"anisotropy": am.anisotropy, "m_mean": float(np.mean(am.m_star))}
    return {"mass_vs_angle.csv": am.to_csv(), "summary.json": _dump_json(summary)}


def _sweep(cfg):
    s = cfg["sweep"]
    return dqd.tc_sweep(_dqd_cfg(cfg), s["L_S_list"], [v * 1e-3 for v in s["V_BG_mV_list"]])


def exp_dqd_sweep(cfg, threads):
    c = _dqd_cfg(cfg)
    rows = _sweep(cfg)
    prof = dqd.build_dqd_potential(c)
    pair = dqd.solve_bound_states(prof, c.m_star)
    vert = _profile(cfg)
    sb = kp.solve_subbands(kp.assemble_lk_hamiltonian(vert), 2, vert.dz)
    dens = np.sum(np.abs(sb.envelopes[0]) ** 2, axis=-1)
    U = dqd.dot_coulomb_energy(c, vert.z, dens)
    summary = {
        "t_c_ueV": dqd.tunnel_coupling(pair),
        "U_meV": U,
        "failed_rows": [{"L_S": r.L_S, "V_BG_mV": r.V_BG * 1e3, "error": r.error} for r in rows if not r.ok],
    }
    return {
        "tc_sweep.csv": dqd.sweep_to_csv(rows),
        "profile.csv": prof.to_csv(pair),
        "summary.json": _dump_json(summary),
    }


def exp_wkb_fit(cfg, threads):
    rows = _sweep(cfg)
    fit = gate.fit_wkb(_wkb(cfg), rows)
    summary = {
        "t0_meV": fit.model.t0, "E_b0_meV": fit.model.E_b0, "beta": fit.model.beta,
        "m_star": fit.model.m_star, "max_log_residual": fit.max_log_residual,
        "max_rel_deviation": fit.max_rel_deviation,
        "r2_by_V_bg_mV": {f"{v * 1e3:g}": r for v, r in sorted(fit.r2.items())},
        "n_points": fit.n_points,
    }
    return {"tc_sweep.csv": dqd.sweep_to_csv(rows), "wkb_fit.json": _dump_json(summary)}


def exp_exchange_vs_vbg(cfg, threads):
    g = cfg["gate"]
    res = gate.exchange_slope(_wkb(cfg), _gate_params(cfg), g["L_S"],
                              (g["V_min_mV"] * 1e-3, g["V_max_mV"] * 1e-3), g["n_V"])
    lines = ["V_bg_mV,J_ueV"] + [f"{float(v) * 1e3!r},{float(j)!r}" for v, j in zip(res.V_BG, res.J)]
    summary = {"L_S_nm": g["L_S"], "inverse_slope_mV_per_dec": res.inverse_slope}
    return {"exchange_vs_vbg.csv": "\n".join(lines) + "\n", "summary.json": _dump_json(summary)}


def exp_gate_time(cfg, threads):
    g = cfg["gate"]
    model, p = _wkb(cfg), _gate_params(cfg)
    n = int(round((g["L_S_max"] - g["L_S_min"]) / g["L_S_step"])) + 1
    L = g["L_S_min"] + g["L_S_step"] * np.arange(n)
    T = gate.gate_time_vs_spacing(model, p, L, g["V_BG_mV"] * 1e-3)
    op = gate.cz_gate_time(p)
    summary = {
        "crossover_10ns_L_S_nm": gate.crossover_spacing(model, p, g["V_BG_mV"] * 1e-3),
        "operating_point": {"t_c_ueV": p.t_c, "J_ueV": op.J, "T_CZ_ns": op.T_CZ,
                            "conditional_phase_exact_rad": op.phase_exact},
    }
    lines = ["L_s_nm,T_cz_ns"] + [f"{float(l)!r},{float(t)!r}" for l, t in zip(L, T)]
    return {"gate_time.csv": "\n".join(lines) + "\n", "summary.json": _dump_json(summary)}


def exp_variability(cfg, threads):
    v = cfg["variability"]
    spec = gate.VariabilitySpec(v["sigma_LS"], v["n_samples"], cfg["run"]["seed"])
    res = gate.variability_mc(_wkb(cfg), _gate_params(cfg), v["L_S0"], spec,
                              cfg["gate"]["V_BG_mV"] * 1e-3, v["bins"])
    summary = {
        "L_S0_nm": v["L_S0"],
        "ln_tc_std": res.ln_tc_std,
        "ln_tc_sensitivity_analytic": res.analytic_ln_tc,
        "ln_T_CZ_std": res.ln_T_std,
        "T_CZ_over_median_std": res.T_norm_std,
        "n_rejected": res.n_rejected,
    }
    return {"variability_hist.csv": res.histogram_csv(), "summary.json": _dump_json(summary)}


def exp_oscillation(cfg, threads):
    o = cfg["oscillation"]
    res = qtm.exchange_oscillation(_gate_params(cfg), _noise(cfg), o["t_max"], o["n_traj"], o["n_t"],
                                   o["protocol"])
    summary = dict(res.summary(), protocol=o["protocol"])
    return {"oscillation.csv": res.to_csv(), "summary.json": _dump_json(summary)}


def exp_ansatz_fidelity(cfg, threads):
    c = cfg["circuit"]
    edge = circuit.Edge(_gate_params(cfg), _noise(cfg))
    topo = circuit.QdArrayTopology(c["rows"], c["cols"]).with_edges(edge)
    seed = cfg["run"]["seed"]
    rows = circuit.ansatz_fidelity_vs_depth(topo, c["N_list"], c["n_traj"], seed, c["angle_seed"],
                                            c["noise_mode"])
    deepest = circuit.build_vqe_ansatz(topo, max(c["N_list"]), seed=c["angle_seed"])
    return {
        "ansatz_fidelity.csv": circuit.depth_csv(rows),
        "ansatz_fidelity.json": _dump_json([r.__dict__ for r in rows]),
        f"circuit_N{max(c['N_list'])}.txt": deepest.to_text(),
    }


RUNNERS = {
    "bands": exp_bands,
    "mass-vs-angle": exp_mass_vs_angle,
    "dqd-sweep": exp_dqd_sweep,
    "wkb-fit": exp_wkb_fit,
    "exchange-vs-vbg": exp_exchange_vs_vbg,
    "gate-time": exp_gate_time,
    "variability": exp_variability,
    "oscillation": exp_oscillation,
    "ansatz-fidelity": exp_ansatz_fidelity,
}


def run(cfg: dict, out: Path, threads: int = 1) -> dict:
    """Execute a resolved config; returns the manifest (also written to ``out``)."""
    out.mkdir(parents=True, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    manifest = {
        "tool": "gehole",
        "version": __version__,
        "experiment": cfg["run"]["experiment"],
        "seed": cfg["run"]["seed"],
        "config": cfg,
        "started_utc": started,
    }
    try:
        files = RUNNERS[cfg["run"]["experiment"]](cfg, threads)
    except Exception as exc:
        tb = traceback.extract_tb(exc.__traceback__)
        frame = next((f for f in reversed(tb) if "gehole" in f.filename), tb[-1])
        manifest["status"] = "error"
        manifest["error"] = {
            "type": type(exc).__name__,
            "message": str(exc),
            "module": Path(frame.filename).stem,
            "operation": frame.name,
        }
        manifest["finished_utc"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        (out / "manifest.json").write_text(_dump_json(manifest), encoding="utf-8")
        raise
    for name, text in files.items():
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    manifest["status"] = "ok"
    manifest["files"] = sorted(files)
    manifest["finished_utc"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    (out / "manifest.json").write_text(_dump_json(manifest), encoding="utf-8")
    return manifest


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gehole", description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, help="INI run configuration")
    ap.add_argument("--experiment", choices=EXPERIMENTS, help="overrides [run] experiment")
    ap.add_argument("--seed", type=int, help="overrides [run] seed (unsigned 64-bit)")
    ap.add_argument("--out", type=Path, help="output directory (overrides [run] out)")
    ap.add_argument("--threads", type=int, help="worker cap; results do not depend on it")
    ap.add_argument("--list-presets", action="store_true", help="print the constant catalog and exit")
    return ap


def _fail(code: int, kind: str, message: str, **extra) -> int:
    rec = {"status": "error", "kind": kind, "message": message, **extra}
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.list_presets:
        sys.stdout.write(render_catalog(CATALOG))
        return 0
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text)
        if args.experiment:
            cfg["run"]["experiment"] = args.experiment
        if args.seed is not None:
            cfg["run"]["seed"] = args.seed
        if args.threads is not None:
            cfg["run"]["threads"] = args.threads
        if args.out is not None:
            cfg["run"]["out"] = str(args.out)
        validate(cfg)
        cfg = resolve(cfg)
    except (ConfigError, OSError) as exc:
        return _fail(2, "config", str(exc))
    try:
        run(cfg, Path(cfg["run"]["out"]), cfg["run"]["threads"])
    except Exception as exc:  # noqa: BLE001 - reported as a machine-readable record
        return _fail(1, "compute", str(exc), type=type(exc).__name__, out=cfg["run"]["out"])
    return 0
