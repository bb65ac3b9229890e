#!/usr/bin/env python3
"""Re-measure the empirical constants frozen in src/liouville/data/golden.json.

The derivative/deficit/window estimates all carry constants that depend only
on (n, kappa) but are not computable from their derivations, so the library
asserts against empirical stand-ins calibrated on the eps = 1 pendulum (plus
the two-well potential cos + 0.3 cos 2 where a second region topology is
needed).  This script reruns every calibration probe, prints measured extreme
vs frozen value, and fails if a frozen value no longer covers its probe (or
for floors, no longer sits below it).

The frozen values are hand-picked round numbers with comfortable headroom
over the measured extremes; PROPOSED below is the record of that choice.
Hessian and deficit caps are pendulum-family constants: the two-well system
has kappa = eps/beta = 78 (vs 4) and its scaled second derivative (11.1) and
deficit ratio (16.1) legitimately exceed the pendulum numbers, so those
probes are reported but not folded into the caps.

Usage: python3 tools/calibrate.py [--write] [--quick]
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from liouville import golden
from liouville.action_map import (
    _continued,
    build_action_table,
    dIdE,
    energy_window,
    measure_deficit,
    region_domains,
)
from liouville.normal_form import birkhoff_normalize
from liouville.potential import PeriodicPotential
from liouville.separatrix import (
    analyticity_window,
    fit_singular_rep,
    hessian_bounds,
    perturbation_drift,
    separatrix_samples,
    taylor_radius_probe,
)
from liouville.standard_form import make_standard_form, pendulum_standard_form

PROPOSED = {
    "_calibration": "pendulum eps=1 and two-well cos+0.3cos2 (see tools/calibrate.py)",
    "C_hat": 12.0,            # pendulum deficit ratio peaks at 10.26 (lam = 0.1)
    "c_didE_interior": 0.35,  # half the measured floor 0.707 (= pendulum bottom)
    "c_didE_rotation": 0.45,  # 0.9 x measured floor 0.5025
    "deficit_band": 3.0,      # pendulum band 2.53 over lam = 1e-1..1e-6
    "C_window": 2.0,          # max required C is 1.38 (two-well, lam = 4e-3)
    "C_hess_first": 3.0,      # measured 1.20 on the canonical pendulum probe
    "C_hess_second": 4.0,     # measured 2.46 (pendulum lam = 1e-2)
    "C_nf_drift": 1.0,        # measured 0.354 (g) / 0.094 (R) per mu
    "C_drift": 8.0,           # measured 0.325; wide slack for the lam-range edge
}

FLOORS = {"c_didE_interior", "c_didE_rotation"}


def _systems():
    pend = pendulum_standard_form(1.0)
    twow = make_standard_form(
        PeriodicPotential([0.0, 1.0, 0.3]), 1.3, beta=1.0 / 60.0)
    return pend, twow


def _perturbed_pendulum(mu):
    return make_standard_form(
        PeriodicPotential([0.0, 1.0]), 1.0,
        nu=lambda p1, q1, phat=(), m=mu: m * np.cos(q1) + 0.0 * np.asarray(p1),
        nu_p=lambda p1, q1, phat=(): 0.0 * np.asarray(p1), mu=mu)


def probe_didE_floors(pend, twow, n=100):
    interior = []
    for H, regions in ((pend, (1,)), (twow, (1, 2, 3))):
        eps = H.chars.eps
        for idx in regions:
            rd = region_domains(1e-6, _continued(H), (), H)["regions"][idx]
            grid = np.linspace(rd["E_lo"], rd["E_hi"], n)
            interior.append(
                min(dIdE(idx, E, (), H) for E in grid) * np.sqrt(eps))
    rotation = []
    for H, regions in ((pend, (0, 2)), (twow, (0, 4))):
        eps = H.chars.eps
        for idx in regions:
            win = energy_window(idx, _continued(H), (), H.chars)
            grid = np.geomspace(win.E_minus + 1e-6 * eps, 100.0 * eps, 60)
            rotation.append(
                min(dIdE(idx, E, (), H) * np.sqrt(E + eps) for E in grid))
    return min(interior), min(rotation)


def probe_deficit(pend, lams=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)):
    eps = pend.chars.eps
    ratios = [measure_deficit(l, pend) / (np.sqrt(eps) * l * abs(np.log(l)))
              for l in lams]
    return max(ratios), max(ratios) / min(ratios)


def probe_fit_sups(pend):
    """sup(|phi|+|psi|)/sqrt(eps) and sqrt(eps)/|psi0| over pendulum fits."""
    worst_sup = worst_inv = 0.0
    for idx, branch in ((1, "plus"), (0, "minus"), (2, "minus"), (1, "minus")):
        rep = fit_singular_rep(
            separatrix_samples(idx, branch, (), pend, k_max=20), branch)
        r_pow = rep.radius ** np.arange(len(rep.phi_coeffs))
        top = (np.sum(np.abs(rep.phi_coeffs) * r_pow)
               + np.sum(np.abs(rep.psi_coeffs) * r_pow))
        worst_sup = max(worst_sup, top)
        if not (branch == "minus" and idx % 2 == 1):
            worst_inv = max(worst_inv, 1.0 / abs(rep.psi0()))
    return max(worst_sup, worst_inv)


def probe_window(pend, twow):
    need = 0.0
    for H, lams in ((pend, (1e-2, 1e-3, 1e-4)), (twow, (4e-3, 1e-3, 1e-4))):
        eps = H.chars.eps
        for l in lams:
            rho = taylor_radius_probe(1, l, (), H)
            need = max(need, np.sqrt(eps) * l * abs(np.log(l)) / rho)
    return need


def probe_hessian(H, idx, lam, n=33):
    """The canonical probe: Chebyshev grid on the lambda-shrunk window."""
    eps = H.chars.eps
    rd = region_domains(lam, _continued(H), (), H)["regions"][idx]
    lo, hi = rd["E_lo"], rd["E_hi"]
    ts = (1.0 - np.cos(np.linspace(0.02, np.pi - 0.02, n))) / 2.0
    table = build_action_table(idx, (), H, energies=lo + (hi - lo) * ts)
    return hessian_bounds(table, analyticity_window(lam, eps))


def probe_drift(pend, mus=(1e-4, 1e-3, 1e-2), lams=(0.05, 0.1)):
    worst = 0.0
    for mu in mus:
        pert = _perturbed_pendulum(mu)
        for lam in lams:
            if 2.0 * mu > lam:
                continue
            rpt = perturbation_drift(pert, pend, lam)
            worst = max(worst, rpt.didE_scaled, rpt.coeff_scaled)
    return worst


def probe_nf_drift(pend, mu=1e-3):
    nf0, _ = birkhoff_normalize(pend, 0)
    nf1, _ = birkhoff_normalize(_perturbed_pendulum(mu), 0)
    g_drift = abs(nf1.g - nf0.g) / mu
    r_drift = max(abs(a - b) for a, b in zip(nf0.R_coeffs, nf1.R_coeffs)) / mu
    return max(g_drift, r_drift)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--write", action="store_true",
                    help="rewrite golden.json from the PROPOSED table")
    ap.add_argument("--quick", action="store_true",
                    help="skip the slow deficit/drift sweeps")
    args = ap.parse_args(argv)

    pend, twow = _systems()
    measured = {}
    measured["c_didE_interior"], measured["c_didE_rotation"] = \
        probe_didE_floors(pend, twow)
    hess = [probe_hessian(pend, 1, l) for l in (1e-2, 1e-3, 1e-4)]
    measured["C_hess_first"] = max(h.max_first_scaled for h in hess)
    measured["C_hess_second"] = max(h.max_second_scaled for h in hess)
    measured["C_window"] = probe_window(pend, twow)
    measured["C_nf_drift"] = probe_nf_drift(pend)
    if not args.quick:
        ratio_max, band = probe_deficit(pend)
        measured["C_hat"] = max(ratio_max, probe_fit_sups(pend))
        measured["deficit_band"] = band
        measured["C_drift"] = probe_drift(pend)

    ok = True
    print(f"{'key':18s} {'measured':>10s} {'frozen':>8s}  margin")
    for key, frozen in PROPOSED.items():
        if key.startswith("_") or key not in measured:
            continue
        m = measured[key]
        if key in FLOORS:
            covered = frozen <= 0.95 * m
            margin = m / frozen
        else:
            covered = m <= 0.95 * frozen
            margin = frozen / m
        ok &= covered
        print(f"{key:18s} {m:10.4g} {frozen:8.3g}  {margin:5.2f}x"
              f"{'' if covered else '  ** NOT COVERED **'}")

    # informational: the non-pendulum-family extremes
    tw_hess = probe_hessian(twow, 1, 1e-3)
    print(f"\n(two-well, kappa = {twow.chars.kappa:.0f}, not folded in: "
          f"hessian second {tw_hess.max_second_scaled:.3g})")

    if args.write:
        golden.GOLDEN_PATH.write_text(json.dumps(PROPOSED, indent=2) + "\n")
        print(f"wrote {golden.GOLDEN_PATH}")
    if not ok:
        print("calibration drifted: adjust PROPOSED and rerun with --write")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
