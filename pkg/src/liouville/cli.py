"""Batch front door: config ingestion, command dispatch, artifact emission.

Exit codes: 0 success, 1 acceptance failure, 2 config error, 3 numerical
error.  Artifacts are deterministic functions of the config (fixed grids,
fixed quadrature tolerances), so re-running a command reproduces its output
files byte-for-byte.  Formats are documented in docs/formats.md.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import golden
from . import normal_form as NF
from . import verify as verify_mod
from .action_map import RegionIndex, action_table_csv, build_action_table, \
    region_domains, _continued
from .convexity import convexity_profile, convexity_profile_csv
from .errors import BoundViolation, DegenerateCritical, \
    DistinctValueViolation, LiouvilleError
from .potential import PeriodicPotential, critical_count_bound, morse_profile
from .separatrix import fit_singular_rep, separatrix_samples, \
    singular_fit_csv, singular_rep_to_dict
from .standard_form import make_standard_form

EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["potential", "eps"],
    "additionalProperties": False,
    "properties": {
        "potential": {
            "type": "object",
            "required": ["coeffs"],
            "additionalProperties": False,
            "properties": {
                "coeffs": {"type": "array", "minItems": 1,
                           "items": {"type": "number"}},
                "sin_coeffs": {"type": "array", "items": {"type": "number"}},
                "beta": {"type": ["number", "null"],
                         "exclusiveMinimum": 0.0},
            },
        },
        "eps": {"type": "number", "exclusiveMinimum": 0.0},
        "mu": {"type": "number", "minimum": 0.0},
        "nu": {"type": "string", "enum": ["zero", "cos_q1"]},
        "p_hat": {"type": "array",
                  "items": {"type": "array", "items": {"type": "number"}}},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "quad": {"type": "number", "exclusiveMinimum": 0.0},
                "fit_residual": {"type": "number", "exclusiveMinimum": 0.0},
                "nf_residual": {"type": "number", "exclusiveMinimum": 0.0},
            },
        },
        "lambda_grid": {"type": "array",
                        "items": {"type": "number", "exclusiveMinimum": 0.0}},
        "energy_grid": {
            "type": "object",
            "patternProperties": {
                "^[0-9]+$": {"type": "array", "items": {"type": "number"}}},
            "additionalProperties": False,
        },
        "nf_order": {"type": "integer", "minimum": 2, "maximum": 10},
        "out_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS = {
    "mu": 0.0,
    "nu": "zero",
    "p_hat": [],
    "tolerances": {"quad": 1e-12, "fit_residual": 1e-8, "nf_residual": 1e-6},
    "lambda_grid": [1e-2],
    "energy_grid": {},
    "nf_order": 6,
    "out_dir": "artifacts",
    "seed": 0,
}

PENDULUM_CONFIG = {"potential": {"coeffs": [0.0, 1.0]}, "eps": 1.0}

# admissible singular branches by region kind; well bottoms are analytic but
# their (flat) representation is still an artifact consumers want
BRANCH_KINDS = {
    "rotation_low": ("minus",),
    "rotation_high": ("minus",),
    "libration": ("minus", "plus"),
    "annulus": ("minus", "plus"),
}


class ConfigError(Exception):
    pass


def load_config(path):
    """Parse, schema-validate, and default-fill a run config."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    return _fill(raw)


def _fill(raw):
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"config rejected: {e.message}")
    cfg = dict(DEFAULTS)
    cfg["tolerances"] = dict(DEFAULTS["tolerances"])
    cfg.update({k: v for k, v in raw.items() if k != "tolerances"})
    cfg["tolerances"].update(raw.get("tolerances", {}))
    try:
        lam_cap = 1.0 / golden.get("C_window")
    except Exception:
        # unreadable golden store: skip the cap here so `verify` still runs
        # and names the failing criteria instead of dying on config load
        lam_cap = None
    for lam in cfg["lambda_grid"]:
        if lam_cap is not None and not 0.0 < lam <= lam_cap:
            raise ConfigError(
                f"lambda = {lam} outside (0, {lam_cap}]")
    return cfg


def build_system(cfg):
    """StandardFormHamiltonian from the config's potential / eps / nu spec."""
    pot = cfg["potential"]
    G0 = PeriodicPotential(pot["coeffs"], pot.get("sin_coeffs"))
    kw = {"beta": pot["beta"]} if pot.get("beta") else {}
    if cfg["nu"] == "cos_q1" and cfg["mu"] > 0.0:
        mu = cfg["mu"]
        kw["nu"] = lambda p1, q1, phat=(), m=mu: \
            m * np.cos(q1) + 0.0 * np.asarray(p1)
        kw["nu_p"] = lambda p1, q1, phat=(): 0.0 * np.asarray(p1)
        kw["mu"] = mu
    return make_standard_form(G0, cfg["eps"], **kw)


# ---------------------------------------------------------------------------
# deterministic writers
# ---------------------------------------------------------------------------

def _write_text(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _write_json(path, obj):
    return _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _pmap(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _hats(cfg):
    return [tuple(p) for p in cfg["p_hat"]] or [()]


def _regions(cfg, H):
    n_wells = len(_continued(H).base) // 2
    return list(range(2 * n_wells + 1)), n_wells


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_analyze_potential(cfg, out, threads):
    pot = cfg["potential"]
    G0 = PeriodicPotential(pot["coeffs"], pot.get("sin_coeffs"))
    profile = morse_profile(G0, beta=pot.get("beta"))
    _write_json(out / "morse_profile.json", {
        "n_wells": profile.n_wells,
        "beta": profile.beta,
        "max_second_derivative": profile.max_second_derivative,
        "critical_count_bound": critical_count_bound(profile),
        "eps": cfg["eps"],
        "seed": cfg["seed"],
    })
    lines = ["i,location,value,kind"]
    for k, cp in enumerate(profile.criticals):
        lines.append(f"{k},{cp.location:.17g},{cp.value:.17g},{cp.kind}")
    _write_text(out / "criticals.csv", "\n".join(lines) + "\n")
    return ["morse_profile.json", "criticals.csv"]


def _table_energies(cfg, i):
    custom = cfg["energy_grid"].get(str(i))
    return np.asarray(custom, dtype=float) if custom else None


def cmd_action_table(cfg, out, threads):
    H = build_system(cfg)
    regions, _ = _regions(cfg, H)
    tol = cfg["tolerances"]["quad"]
    jobs = [(i, hat) for hat in _hats(cfg) for i in regions]
    tables = _pmap(
        lambda job: build_action_table(job[0], job[1], H,
                                       energies=_table_energies(cfg, job[0]),
                                       tol=tol),
        jobs, threads)
    _write_text(out / "action_table.csv", action_table_csv(tables))
    windows = {}
    crit = _continued(H)
    for lam in cfg["lambda_grid"]:
        dom = region_domains(lam, crit, _hats(cfg)[0], H)
        windows[f"{lam:.17g}"] = {
            "lambda_max": dom["lambda_max"],
            "regions": {str(i): r for i, r in dom["regions"].items()},
        }
    _write_json(out / "windows.json", windows)
    return ["action_table.csv", "windows.json"]


def _fit_branch(H, i, br):
    s = separatrix_samples(i, br, (), H)
    try:
        return s, fit_singular_rep(s, br)
    except BoundViolation:
        # narrow-gap annulus: the next singularity limits the usable degree
        return s, fit_singular_rep(s, br, degree=4)


def cmd_fit_separatrix(cfg, out, threads):
    H = build_system(cfg)
    regions, n_wells = _regions(cfg, H)
    jobs = []
    for i in regions:
        for br in BRANCH_KINDS[RegionIndex(i).kind(n_wells)]:
            jobs.append((i, br))
    fits = _pmap(lambda job: _fit_branch(H, *job), jobs, threads)
    reps = {}
    written = []
    for (i, br), (s, rep) in zip(jobs, fits):
        d = singular_rep_to_dict(rep)
        d["psi0"] = rep.psi0()
        reps[f"region{i}_{br}"] = d
        name = f"singular_fit_region{i}_{br}.csv"
        _write_text(out / name, singular_fit_csv(rep, s))
        written.append(name)
    _write_json(out / "singular_rep.json", reps)
    return ["singular_rep.json"] + written


def cmd_normal_form(cfg, out, threads):
    H = build_system(cfg)
    _, n_wells = _regions(cfg, H)
    order = cfg["nf_order"]
    tol = cfg["tolerances"]["nf_residual"]
    entries = {}
    for j in range(2 * n_wells):
        nf, _ = NF.birkhoff_normalize(H, j, order=order, tol_nf=tol)
        entries[str(j)] = NF.normal_form_to_dict(nf)
    _write_json(out / "normal_form.json", entries)
    return ["normal_form.json"]


def cmd_convexity(cfg, out, threads):
    H = build_system(cfg)
    regions, _ = _regions(cfg, H)

    def profile(i):
        energies = _table_energies(cfg, i)
        if energies is None:
            energies = build_action_table(i, (), H).samples[:, 0]
        return convexity_profile(i, energies, (), H)

    profiles = _pmap(profile, regions, threads)
    written = []
    for i, pr in zip(regions, profiles):
        name = f"convexity_region{i}.csv"
        _write_text(out / name, convexity_profile_csv(pr))
        written.append(name)
    return written


def cmd_verify(cfg, out, threads, quick=False):
    names = verify_mod.QUICK if quick else None
    results = verify_mod.run(names=names, threads=threads)
    print(verify_mod.format_table(results))
    _write_json(out / "verify_report.json", [
        {"name": r.name, "passed": r.passed, "detail": r.detail}
        for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

COMMANDS = {
    "analyze-potential": cmd_analyze_potential,
    "action-table": cmd_action_table,
    "fit-separatrix": cmd_fit_separatrix,
    "normal-form": cmd_normal_form,
    "convexity": cmd_convexity,
}


def _parser():
    p = argparse.ArgumentParser(
        prog="liouville",
        description="action-angle analysis of 1-DOF standard-form "
                    "Hamiltonians")
    sub = p.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "verify"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run config"
                        + ("" if name == "verify" else " (required)"))
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--threads", type=int, default=1)
        if name == "verify":
            sp.add_argument("--quick", action="store_true",
                            help="fast subset of the acceptance criteria")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        elif args.command == "verify":
            cfg = _fill(dict(PENDULUM_CONFIG))
        else:
            raise ConfigError(f"{args.command} requires --config")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out if args.out else cfg["out_dir"])

    if args.command == "verify":
        return cmd_verify(cfg, out, args.threads, quick=args.quick)
    try:
        written = COMMANDS[args.command](cfg, out, args.threads)
    except (DistinctValueViolation, DegenerateCritical) as e:
        # the configured potential itself is inadmissible
        print(f"config error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except LiouvilleError as e:
        print(f"numerical error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name in written:
        print(out / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
