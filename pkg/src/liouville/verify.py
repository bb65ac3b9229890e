"""Release gate: the thirteen checks behind `liouville verify`.

Every criterion recomputes its inputs from scratch against closed-form
oracles or the calibrated golden constants; nothing is cached between
criteria, so a single criterion can be re-run in isolation.  Criteria are
keyed by short slugs; `run` executes a subset (or all) and returns one
result row per criterion.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import golden
from . import normal_form as NF
from .action_map import RegionIndex, action, build_action_table, dIdE, \
    measure_deficit
from .convexity import a0_ratio, inner_cosine_bound, outer_convexity_check
from .errors import BoundViolation
from .oracle import HamiltonianSystem, pendulum_action, symplectic_flow
from .potential import PeriodicPotential, phase_shift_b
from .separatrix import analyticity_window, check_derivative_bounds, \
    fit_singular_rep, perturbation_drift, psi_zero_prediction, \
    separatrix_samples, taylor_radius_probe
from .standard_form import make_standard_form, pendulum_standard_form

PSI0_QUOTED = 0.112540        # eps/(4 pi g) for the eps = 1 pendulum
TWO_WELL_COEFFS = (0.0, 1.0, 0.3)
TWO_WELL_EPS = 1.3
TWO_WELL_BETA = 1.0 / 60.0    # symmetric minima collide in value; declared


def _pendulum(eps=1.0):
    return pendulum_standard_form(eps)


def _two_well():
    return make_standard_form(PeriodicPotential(list(TWO_WELL_COEFFS)),
                              TWO_WELL_EPS, beta=TWO_WELL_BETA)


def _perturbed_pendulum(mu):
    return make_standard_form(
        PeriodicPotential([0.0, 1.0]), 1.0,
        nu=lambda p1, q1, phat=(), m=mu: m * np.cos(q1) + 0.0 * np.asarray(p1),
        nu_p=lambda p1, q1, phat=(): 0.0 * np.asarray(p1), mu=mu)


# ---------------------------------------------------------------------------
# criteria; each returns (passed, detail)
# ---------------------------------------------------------------------------

def crit_oracle_equivalence():
    """action vs the elliptic-integral pendulum oracle, 100 energies/region."""
    H = _pendulum()
    worst = 0.0
    z = np.geomspace(1e-6, 100.0, 100)
    for i in (0, 2):
        for zz in z:
            E = 1.0 + zz
            rel = abs(action(i, E, (), H) / pendulum_action(E, 1.0, "rotation")
                      - 1.0)
            worst = max(worst, rel)
    for t in np.geomspace(1e-6, 1.0 - 1e-6, 100):
        E = -1.0 + 2.0 * t
        rel = abs(action(1, E, (), H) / pendulum_action(E, 1.0, "libration")
                  - 1.0)
        worst = max(worst, rel)
    return worst <= 1e-8, f"max rel err {worst:.3e} <= 1e-8, 300 energies"


def crit_universal_fit():
    """Degree-6 log-singular fit on dyadic z in [2^-26, 2^-4], both top branches."""
    H = _pendulum()
    resids = {}
    for i, br in ((1, "plus"), (0, "minus")):
        s = separatrix_samples(i, br, (), H)
        z = s.metadata["z"]
        if not (z[0] == 2.0**-4 and z[-1] == 2.0**-26):
            return False, f"grid not dyadic [2^-26, 2^-4] on branch {br}"
        resids[br] = fit_singular_rep(s, br).fit_residual
    ok = all(r <= 1e-8 for r in resids.values())
    return ok, ("resid plus {plus:.2e}, minus {minus:.2e} <= 1e-8"
                .format(**resids))


def crit_psi0_prediction():
    """psi(0) = eps/(4 pi g): quoted value at eps = 1, sqrt(eps) scaling."""
    scaled = {}
    for eps in (0.25, 1.0, 4.0):
        rep = fit_singular_rep(
            separatrix_samples(2, "minus", (), _pendulum(eps)), "minus")
        scaled[eps] = abs(rep.psi0()) / math.sqrt(eps)
    ok = abs(scaled[1.0] / PSI0_QUOTED - 1.0) <= 0.01
    spread = max(scaled.values()) / min(scaled.values()) - 1.0
    ok = ok and spread <= 0.01
    return ok, (f"|psi0| = {scaled[1.0]:.6f} vs {PSI0_QUOTED} "
                f"(sqrt-eps spread {spread:.2e} over eps 0.25/1/4)")


def crit_bottom_analytic():
    """Minimum branches carry no singular part: |psi|, |phi(0)| <= 1e-9 sqrt(eps)."""
    worst = 0.0
    cases = [(_pendulum(), 1.0, (1,)), (_two_well(), TWO_WELL_EPS, (1, 3))]
    for H, eps, wells in cases:
        for i in wells:
            rep = fit_singular_rep(separatrix_samples(i, "minus", (), H),
                                   "minus")
            top = max(np.max(np.abs(rep.psi_coeffs)), abs(rep.phi_coeffs[0]))
            worst = max(worst, top / math.sqrt(eps))
    return worst <= 1e-9, f"max |psi|, |phi(0)| = {worst:.2e} <= 1e-9 (3 wells)"


def _fit_branch(H, i, br):
    s = separatrix_samples(i, br, (), H)
    try:
        return fit_singular_rep(s, br)
    except BoundViolation:
        # narrow-gap annulus: the well-bottom singularity sits inside the fit
        # radius, so degree > 4 coefficients blow past the majorant cap
        return fit_singular_rep(s, br, degree=4)


def crit_sign_table():
    """psi+(0) > 0 interior, psi-(0) < 0 from above, both model systems."""
    cases = [(_pendulum(), [(0, "minus"), (1, "plus"), (2, "minus")]),
             (_two_well(), [(0, "minus"), (1, "plus"), (2, "minus"),
                            (2, "plus"), (3, "plus"), (4, "minus")])]
    rows = []
    for H, branches in cases:
        for i, br in branches:
            p0 = _fit_branch(H, i, br).psi0()
            ok = p0 > 0.0 if br == "plus" else p0 < 0.0
            rows.append(ok)
    return all(rows), f"{sum(rows)}/{len(rows)} branch signs correct"


def crit_derivative_bounds():
    """dI/dE floors inside and outside, and the |ln z| slope near the top."""
    H = _pendulum()
    rpt = check_derivative_bounds(build_action_table(1, (), H))
    inside = rpt.passed and rpt.min_scaled >= golden.get("c_didE_interior")
    far = dIdE(0, 100.0, (), H) * math.sqrt(101.0)
    outside = 0.45 <= far <= 0.55
    z = 2.0 ** -np.arange(8, 23, dtype=float)
    d = np.array([dIdE(0, 1.0 + zz, (), H) for zz in z])
    slope = np.polyfit(np.abs(np.log(z)), d, 1)[0]
    pred = psi_zero_prediction(math.sqrt(0.5), 1.0)
    slope_ok = abs(slope / pred - 1.0) <= 0.02
    return inside and outside and slope_ok, (
        f"interior {rpt.min_scaled:.4f}, E=100eps {far:.4f}, "
        f"ln-slope {slope:.6f} vs {pred:.6f}")


def crit_perturbative_drift():
    """nu = mu cos q1: scaled drift bounded and linear in mu over two decades."""
    H0 = _pendulum()
    C = golden.get("C_drift")
    scaled = []
    for mu in (1e-4, 1e-3, 1e-2):
        r = perturbation_drift(_perturbed_pendulum(mu), H0, 0.1)
        if not (r.passed and r.didE_scaled <= C and r.coeff_scaled <= C):
            return False, f"drift report failed at mu = {mu}"
        scaled.append(r.didE_scaled)
    spread = max(scaled) / min(scaled) - 1.0
    return spread <= 0.2, (
        f"didE_scaled {scaled[1]:.5f} <= {C}, mu-linearity spread "
        f"{spread:.3f} <= 0.2")


def crit_normal_form():
    """Quadratic saddle exact, order-6 pendulum residual, gauge uniqueness."""
    K = NF.Poly2.zeros(6)
    K.c[1, 1] = 0.7
    Knf, U, V = NF._normalize_diag(K, 0.35, 1.0, 6)
    quad = ((Knf - K).max_abs() == 0.0
            and np.count_nonzero(U.c) == 1 and U.c[1, 0] == 1.0
            and np.count_nonzero(V.c) == 1 and V.c[0, 1] == 1.0)

    H = _pendulum()
    nf, ts = NF.birkhoff_normalize(H, 0, order=6)
    res = NF.measure_residual(H, nf, ts, radius=0.15)

    Kd, g = _diag_pendulum_taylor()
    K1, _, _ = NF._normalize_diag(Kd, g, 1.0, 6)
    K2, _, _ = NF._normalize_diag(Kd, g, 1.0, 6, kernel_gauge=0.37)
    hh = np.arange(4)
    uniq = float(np.max(np.abs(K1.c[hh, hh] - K2.c[hh, hh])))
    ok = quad and res <= 1e-9 and uniq < 1e-12
    return ok, (f"quadratic exact {quad}, residual {res:.2e} <= 1e-9, "
                f"gauge drift {uniq:.1e} < 1e-12")


def _diag_pendulum_taylor():
    H = _pendulum()
    lam, delta, g = NF.local_quadratic_data(H, 0)
    K, _ = NF._scaled_taylor(H, (), 0.0, delta, 6)
    K.c[0, 1] = 0.0
    s = 1.0 / NF.SQ2
    return K.compose_linear(s, s, -s, s), g


def crit_energy_time():
    """Closed-form (y1, x1)(E, t) vs the implicit-midpoint flow."""
    nf, _ = NF.birkhoff_normalize(_pendulum(), 0, order=6)
    Hh, dHy, dHx = NF.nf_hamiltonian(nf)
    sysm = HamiltonianSystem(dHdp=dHy, dHdq=dHx, H=Hh)
    T = 0.5 / math.sqrt(nf.eps)
    worst = 0.0
    for d in (0.01, 0.03, 0.05, 0.08, 0.12):
        E = nf.E_c - d
        mJ = math.sqrt(nf.eps) * NF.invert_energy_J(nf, (nf.E_c - E) / nf.eps)
        _, traj = symplectic_flow(sysm, (0.0, math.sqrt(mJ)), T, T / 8000)
        y1, x1 = NF.energy_time_coords(nf, E, T)
        worst = max(worst, abs(traj[-1, 0] - y1), abs(traj[-1, 1] - x1))
    return worst <= 1e-8, f"max flow mismatch {worst:.2e} <= 1e-8 (5 energies)"


def crit_convexity():
    """Rotation d2E/dI2 >= 2, cosine well <= -1/4, a0 ratio limit and growth."""
    pend = _pendulum()
    rpt = outer_convexity_check(pend, 1.0 + np.geomspace(1e-3, 50.0, 50))
    tw = _two_well()
    rpt2 = outer_convexity_check(
        tw, TWO_WELL_EPS + TWO_WELL_EPS * np.geomspace(1e-3, 50.0, 50))
    inner = inner_cosine_bound(PeriodicPotential([0.0, 1.0]),
                               np.linspace(-0.999, 0.95, 50))
    a0_lim = a0_ratio(-1.0 + 1e-6)
    grid = [a0_ratio(E) for E in np.linspace(-1.0 + 1e-6, 0.99, 20)]
    increasing = all(a < b for a, b in zip(grid, grid[1:]))
    ok = (abs(a0_lim / 0.25 - 1.0) <= 0.01 and increasing
          and np.max(inner.d2E) <= -0.25)
    return ok, (f"outer min {min(rpt.d2E_min, rpt2.d2E_min):.3f} >= 2, "
                f"inner max {np.max(inner.d2E):.4f} <= -1/4, "
                f"a0(-1+1e-6) = {a0_lim:.8f}, increasing {increasing}")


def crit_measure_deficit():
    """deficit / (sqrt(eps) lam |log lam|) within a factor-3 band, 6 decades."""
    H = _pendulum()
    lams = 10.0 ** -np.arange(1, 7, dtype=float)
    ratios = np.array([measure_deficit(lam, H) / (lam * abs(math.log(lam)))
                       for lam in lams])
    band = float(ratios.max() / ratios.min())
    ok = band <= golden.get("deficit_band")
    return ok, f"band {band:.3f} <= {golden.get('deficit_band')} over 6 decades"


def crit_window_probe():
    """Chebyshev coefficient-decay radius of E(I) >= the certified rho(lam)."""
    H = _pendulum()
    margins = []
    for lam in (1e-2, 1e-3, 1e-4):
        rho = analyticity_window(lam, 1.0).rho
        margins.append(taylor_radius_probe(1, lam, (), H) / rho)
    ok = all(m >= 1.0 for m in margins)
    return ok, ("radius/rho = "
                + ", ".join(f"{m:.1f}" for m in margins) + " (>= 1 required)")


def crit_phase_shift():
    """Recover b from w = cos(z + b) and bound |b| on the quarter strip."""
    x = np.linspace(0.0, 2.0 * np.pi, 1001)
    cos = PeriodicPotential([0.0, 1.0])
    err = sup = 0.0
    for amp, k in ((0.01, 1), (0.0003, 1), (0.005, 2)):
        w = PeriodicPotential.from_callable(
            lambda z, a=amp, kk=k: np.cos(z + a * np.sin(kk * z)))
        b = phase_shift_b(w)
        err = max(err, float(np.max(np.abs(b(x) - amp * np.sin(k * x)))))
        tau0 = (w - cos).strip_sup(1.0)
        sup = max(sup, b.strip_sup(0.25) / (9.0 * math.sqrt(tau0)))
    return err < 1e-8 and sup <= 1.0, (
        f"recovery err {err:.2e} < 1e-8, |b|_1/4 margin {sup:.3f} <= 1")


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

CRITERIA = [
    ("oracle-equivalence", crit_oracle_equivalence),
    ("universal-fit", crit_universal_fit),
    ("psi0-prediction", crit_psi0_prediction),
    ("bottom-analytic", crit_bottom_analytic),
    ("sign-table", crit_sign_table),
    ("derivative-bounds", crit_derivative_bounds),
    ("perturbative-drift", crit_perturbative_drift),
    ("normal-form", crit_normal_form),
    ("energy-time", crit_energy_time),
    ("convexity", crit_convexity),
    ("measure-deficit", crit_measure_deficit),
    ("window-probe", crit_window_probe),
    ("phase-shift", crit_phase_shift),
]

QUICK = ("universal-fit", "psi0-prediction", "bottom-analytic",
         "derivative-bounds", "normal-form", "phase-shift")


@dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _run_one(name, fn):
    t0 = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as e:            # a crashed criterion is a failed one
        passed, detail = False, f"{type(e).__name__}: {e}"
    return CriterionResult(name, bool(passed), detail,
                           time.perf_counter() - t0)


def run(names=None, threads=1):
    """Execute the selected criteria; returns results in CRITERIA order."""
    chosen = [(n, f) for n, f in CRITERIA if names is None or n in names]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(_run_one, n, f) for n, f in chosen]
            return [f.result() for f in futs]
    return [_run_one(n, f) for n, f in chosen]


def format_table(results):
    width = max(len(r.name) for r in results)
    lines = []
    for r in results:
        tag = "PASS" if r.passed else "FAIL"
        lines.append(f"{tag}  {r.name:<{width}}  [{r.seconds:6.2f}s]  "
                     f"{r.detail}")
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} criteria passed")
    return "\n".join(lines)
