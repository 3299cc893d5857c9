"""Experiment runner: INI configs in, CSV tables and summary lines out.

A config names one experiment and its parameters::

    [experiment]
    type = chain              ; mobility | chain | dimer | selftest-ou
    seed = 42
    replicas = 2
    out = results

    [chain]
    n = 32
    b_values = 0.02,0.04,0.08
    total_time = 1e4

For every sweep point the runner builds the control variate (Galerkin
solve, harmonic fit, or radial profile), runs the replicas on distinct
Philox streams, merges their reports, and appends one CSV row per
(sweep point, observable).  All numbers are written with 17 significant
digits and LF line endings, so a rerun with the same seed produces
byte-identical files.

Exit codes: 0 success, 1 config error, 2 runtime/integration error,
3 failed self-test.
"""

from __future__ import annotations

import argparse
import configparser
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

from . import chain as chain_mod
from . import dimer as dimer_mod
from . import experiments as ex
from . import galerkin as gk
from .estimators import save_acf_profile, save_cumulated_acf
from .stochastics import IntegrationDivergedError

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "serialize_config",
    "validate",
    "run",
    "main",
]

EXPERIMENTS = ("mobility", "chain", "dimer", "selftest-ou")

# declared parameter schema: name -> default (the default's type is binding);
# *_values entries are comma-separated float lists
DEFAULTS: Dict[str, Dict[str, object]] = {
    "mobility": {
        "mass": 1.0,
        "gamma": 1.0,
        "beta": 1.0,
        "dt": 0.02,
        "total_time": 2.0e4,
        "burn_in_fraction": 0.1,
        "eta_values": [0.01, 0.02, 0.04, 0.08, 0.16],
        "k_q": 15,
        "k_p": 10,
        "t_deco": 6.0,
        "record_acf": False,
        "acf_stride": 25,
    },
    "chain": {
        "n": 32,
        "mass": 1.0,
        "gamma": 1.0,
        "t_left": 2.0,
        "t_right": 2.0,
        "a": 1.0,
        "b_values": [0.02, 0.04, 0.08, 0.16],
        "dt": 1.0e-2,
        "total_time": 1.0e4,
        "burn_in_fraction": 0.1,
        "t_deco_modified": 32.0,
        "record_acf": False,
        "acf_stride": 25,
    },
    # dt, n_steps, and t_deco below are not taken from the source material
    # (which leaves them unspecified); see the README.
    "dimer": {
        "n": 64,
        "box": 8.0,
        "beta": 1.0,
        "h": 1.0,
        "r0": 3.0,
        "delta_r": 1.0,
        "solvent": "soft",
        "eps": 1.0,
        "sigma": 0.5,
        "rcut": 2.5,
        "dt": 5.0e-4,
        "n_steps": 250_000,
        "burn_in_fraction": 0.1,
        "nu_values": [0.0, 0.25, 0.5, 1.0],
        "t_deco": 50.0,
        "r_max": 10.0,
        "dr_grid": 1.0e-3,
        "record_acf": False,
        "acf_stride": 100,
    },
    "selftest-ou": {
        "dt": 0.01,
        "t_deco": 10.0,
        "time_factor": 1.0e4,
        "repetitions": 100,
    },
}


class ConfigError(ValueError):
    """Unparseable or invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    replicas: int = 1
    out_dir: str = "results"
    params: Dict[str, object] = field(default_factory=dict)


def _parse_value(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            return [float(tok) for tok in raw.split(",") if tok.strip()]
        return raw
    except ValueError as exc:
        raise ConfigError(f"field {key!r}: cannot parse {raw!r}") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse an INI config; unknown sections, keys, or bad numbers raise."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"INI parse error: {exc}") from exc
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    exp_sec = cp["experiment"]
    experiment = exp_sec.get("type", "").strip()
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment type {experiment!r}; expected one of {EXPERIMENTS}")
    cfg = ExperimentConfig(experiment=experiment)
    try:
        cfg.seed = int(exp_sec.get("seed", "0"))
        cfg.replicas = int(exp_sec.get("replicas", "1"))
    except ValueError as exc:
        raise ConfigError(f"[experiment]: {exc}") from exc
    cfg.out_dir = exp_sec.get("out", cfg.out_dir).strip()
    for key in exp_sec:
        if key not in ("type", "seed", "replicas", "out"):
            raise ConfigError(f"unknown key {key!r} in [experiment]")
    defaults = DEFAULTS[experiment]
    cfg.params = dict(defaults)
    for section in cp.sections():
        if section == "experiment":
            continue
        if section != experiment:
            raise ConfigError(f"unexpected section [{section}] for experiment {experiment!r}")
        for key, raw in cp[section].items():
            if key not in defaults:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            cfg.params[key] = _parse_value(key, raw, defaults[key])
    return cfg


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical INI text; parse(serialize(cfg)) reproduces cfg exactly."""
    out = io.StringIO()
    out.write("[experiment]\n")
    out.write(f"type = {cfg.experiment}\n")
    out.write(f"seed = {cfg.seed}\n")
    out.write(f"replicas = {cfg.replicas}\n")
    out.write(f"out = {cfg.out_dir}\n\n")
    out.write(f"[{cfg.experiment}]\n")
    for key in sorted(cfg.params):
        out.write(f"{key} = {_format_value(cfg.params[key])}\n")
    return out.getvalue()


def validate(cfg: ExperimentConfig) -> List[str]:
    """Pure diagnostics; empty list means run() would accept the config."""
    notes: List[str] = []
    p = cfg.params
    if cfg.replicas < 1:
        notes.append("replicas must be at least 1")
    if not 0 <= cfg.seed < 2**64:
        notes.append("seed must fit in an unsigned 64-bit integer")
    if cfg.experiment in ("mobility", "chain", "dimer"):
        if p["dt"] <= 0:
            notes.append("dt must be strictly positive")
        if not 0 <= p["burn_in_fraction"] < 1:
            notes.append("burn_in_fraction must lie in [0, 1)")
    if cfg.experiment == "mobility":
        if not p["eta_values"]:
            notes.append("eta_values must not be empty")
        if p["k_q"] % 2 == 0 or p["k_q"] < 1:
            notes.append("k_q must be odd and positive")
        if p["k_p"] < 2:
            notes.append("k_p must be at least 2")
        for name in ("mass", "gamma", "beta", "total_time", "t_deco"):
            if p[name] <= 0:
                notes.append(f"{name} must be strictly positive")
    elif cfg.experiment == "chain":
        if not p["b_values"]:
            notes.append("b_values must not be empty")
        for name in ("mass", "gamma", "t_left", "t_right", "a", "total_time"):
            if p[name] <= 0:
                notes.append(f"{name} must be strictly positive")
        if p["n"] < 2:
            notes.append("n must be at least 2")
        if p["t_left"] == p["t_right"]:
            notes.append("t_left == t_right: conductivity is undefined, kappa column will be nan")
    elif cfg.experiment == "dimer":
        if not p["nu_values"]:
            notes.append("nu_values must not be empty")
        if p["rcut"] >= p["box"] / 2.0:
            notes.append("rcut must stay below box/2 (minimum-image convention)")
        try:
            dimer_mod.DimerParams(
                n=int(p["n"]), box=p["box"], beta=p["beta"], h=p["h"], r0=p["r0"],
                delta_r=p["delta_r"], solvent=str(p["solvent"]), eps=p["eps"],
                sigma=p["sigma"], rcut=p["rcut"], dt=p["dt"],
            )
        except ValueError as exc:
            if "rcut must stay below" not in str(exc):
                notes.append(str(exc))
    else:  # selftest-ou
        if p["repetitions"] < 1:
            notes.append("repetitions must be at least 1")
        if p["dt"] <= 0 or p["t_deco"] <= 0 or p["time_factor"] <= 0:
            notes.append("dt, t_deco, and time_factor must be strictly positive")
    return notes


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _maybe_save_acf(reports, out_dir: Path, tag: str, enabled: bool) -> None:
    if not enabled:
        return
    for name, rep in reports.items():
        if hasattr(rep, "acf_profile") and rep.acf_profile is not None:
            save_acf_profile(rep, out_dir / f"acf_{tag}_{name}.csv")
            save_cumulated_acf(rep, out_dir / f"cumulated_acf_{tag}_{name}.csv")


def _say(quiet: bool, *parts) -> None:
    if not quiet:
        print(*parts)


def _run_mobility(cfg: ExperimentConfig, out_dir: Path, quiet: bool) -> None:
    p = cfg.params
    basis = gk.TensorBasis(int(p["k_q"]), int(p["k_p"]), p["beta"], p["mass"])
    sol = gk.solve(basis, p["gamma"])
    d_gk = gk.mobility(sol)
    alpha = gk.cv_prefactor(sol)
    gk.save_coefficients(sol, out_dir / "galerkin_coefficients.csv")
    _say(quiet, f"galerkin mobility D = {d_gk:.6f}, variance prefactor alpha = {alpha:.6f}")
    n_steps = int(round(p["total_time"] / p["dt"]))
    burn_in = int(p["burn_in_fraction"] * n_steps)
    rows = []
    for j, eta in enumerate(p["eta_values"]):
        merged = ex.run_replicas(
            lambda stream, e=eta: ex.simulate_mobility(
                sol, p["gamma"], p["dt"], e, n_steps, burn_in, stream,
                t_deco=p["t_deco"], record_acf=p["record_acf"], acf_stride=int(p["acf_stride"]),
            ),
            cfg.seed, cfg.replicas, first_stream=j * cfg.replicas,
        )
        for name in ("velocity", "modified"):
            rep = merged[name]
            eff = rep.mean / eta if eta != 0.0 else math.nan
            rows.append([_fmt(eta), name, _fmt(rep.mean), _fmt(rep.mean_error_bar),
                         _fmt(rep.asym_variance), _fmt(rep.variance_error_bar), _fmt(eff)])
        _maybe_save_acf(merged, out_dir, f"mobility_eta{eta:g}", p["record_acf"])
        _say(quiet, f"eta = {eta:g}: velocity mean {merged['velocity'].mean:.5f}, "
                    f"modified var {merged['modified'].asym_variance:.3e}")
    _write_csv(out_dir / "mobility.csv",
               "eta,observable,mean,mean_err,asym_var,var_err,eff_mobility", rows)


def _run_chain(cfg: ExperimentConfig, out_dir: Path, quiet: bool) -> None:
    p = cfg.params
    n = int(p["n"])
    n_steps = int(round(p["total_time"] / p["dt"]))
    burn_in = int(p["burn_in_fraction"] * n_steps)
    equilibrium = p["t_left"] == p["t_right"]
    rows = []
    for j, b in enumerate(p["b_values"]):
        params = chain_mod.ChainParams.with_fit(
            n=n, mass=p["mass"], gamma=p["gamma"], t_left=p["t_left"],
            t_right=p["t_right"], a=p["a"], b=b, dt=p["dt"],
        )
        merged = ex.run_replicas(
            lambda stream, cp=params: ex.simulate_chain(
                cp, n_steps, burn_in, stream,
                t_deco_modified=p["t_deco_modified"],
                record_acf=p["record_acf"], acf_stride=int(p["acf_stride"]),
            ),
            cfg.seed, cfg.replicas, first_stream=j * cfg.replicas,
        )
        for name in ex.CHAIN_OBSERVABLES:
            rep = merged[name]
            kappa = math.nan if equilibrium else chain_mod.conductivity(rep.mean, params)
            rows.append([_fmt(b), str(n), _fmt(p["t_left"]), _fmt(p["t_right"]), name,
                         _fmt(rep.mean), _fmt(rep.mean_error_bar),
                         _fmt(rep.asym_variance), _fmt(rep.variance_error_bar), _fmt(kappa)])
        _maybe_save_acf(merged, out_dir, f"chain_b{b:g}", p["record_acf"])
        _say(quiet, f"b = {b:g}: std-flux var {merged['standard'].asym_variance:.4f}, "
                    f"modified var {merged['modified'].asym_variance:.3e}")
    _write_csv(out_dir / "chain.csv",
               "b,N,TL,TR,observable,mean,mean_err,asym_var,var_err,kappa", rows)


def _run_dimer(cfg: ExperimentConfig, out_dir: Path, quiet: bool) -> None:
    p = cfg.params
    params = dimer_mod.DimerParams(
        n=int(p["n"]), box=p["box"], beta=p["beta"], h=p["h"], r0=p["r0"],
        delta_r=p["delta_r"], solvent=str(p["solvent"]), eps=p["eps"],
        sigma=p["sigma"], rcut=p["rcut"], dt=p["dt"],
    )
    profile = dimer_mod.solve_radial_poisson(params, r_max=p["r_max"], dr=p["dr_grid"])
    dimer_mod.save_profile(profile, out_dir / "radial_profile.csv")
    _say(quiet, f"radial profile: rstar = {profile.rstar:.8f}")
    n_steps = int(p["n_steps"])
    burn_in = int(p["burn_in_fraction"] * n_steps)
    rows = []
    for j, nu in enumerate(p["nu_values"]):
        merged = ex.run_replicas(
            lambda stream, s=nu: ex.simulate_dimer(
                params, s, profile, n_steps, burn_in, stream,
                t_deco=p["t_deco"], record_acf=p["record_acf"], acf_stride=int(p["acf_stride"]),
            ),
            cfg.seed, cfg.replicas, first_stream=j * cfg.replicas,
        )
        plain, cv = merged["length"], merged["modified"]
        rows.append([_fmt(nu), str(p["solvent"]), _fmt(plain.mean), _fmt(plain.mean_error_bar),
                     _fmt(plain.asym_variance), _fmt(plain.variance_error_bar),
                     _fmt(cv.asym_variance), _fmt(cv.variance_error_bar)])
        _maybe_save_acf({k: v for k, v in merged.items() if k != "clamped_evaluations"},
                        out_dir, f"dimer_nu{nu:g}", p["record_acf"])
        _say(quiet, f"nu = {nu:g}: length {plain.mean:.5f} +- {plain.mean_error_bar:.5f}, "
                    f"var plain {plain.asym_variance:.3e} vs cv {cv.asym_variance:.3e}")
    _write_csv(out_dir / "dimer.csv",
               "nu,solvent,mean_len,mean_err,var_plain,var_plain_err,var_cv,var_cv_err", rows)


def run(cfg: ExperimentConfig, out_dir=None, quiet: bool = False) -> int:
    """Execute the configured experiment; returns the process exit code."""
    notes = validate(cfg)
    hard = [n for n in notes if "kappa column" not in n]
    if hard:
        for note in hard:
            print(f"config error: {note}", file=sys.stderr)
        return 1
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if cfg.experiment == "mobility":
            _run_mobility(cfg, out, quiet)
        elif cfg.experiment == "chain":
            _run_chain(cfg, out, quiet)
        elif cfg.experiment == "dimer":
            _run_dimer(cfg, out, quiet)
        else:
            p = cfg.params
            result = ex.ou_selftest(cfg.seed, dt=p["dt"], t_deco=p["t_deco"],
                                    time_factor=p["time_factor"],
                                    repetitions=int(p["repetitions"]))
            _say(quiet, f"ou selftest: {result.passes}/{result.repetitions} repetitions "
                        f"covered sigma^2 = 2 (needs >= {math.ceil(0.95 * result.repetitions)})")
            if not result.ok:
                return 3
    except IntegrationDivergedError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except (dimer_mod.DomainTooSmallError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pertcv",
        description="control-variate experiments for diffusions (mobility, chain flux, sheared dimer)",
    )
    parser.add_argument("--config", required=True, help="INI experiment configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--replicas", type=int, default=None, help="override the replica count")
    parser.add_argument("--quiet", action="store_true", help="suppress the summary lines")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(Path(args.config).read_text())
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("config error: seed must fit in an unsigned 64-bit integer", file=sys.stderr)
            return 1
        cfg.seed = args.seed
    if args.replicas is not None:
        cfg.replicas = args.replicas
    return run(cfg, out_dir=args.out, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
