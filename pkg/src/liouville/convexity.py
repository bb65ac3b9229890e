"""Convexity profile of the energy-as-a-function-of-action maps.

Everything here concerns the unperturbed angle slice H = p1^2 + G(q1): the
second derivative d2E/dI2 along a region, the Jensen lower bound >= 2 above
all separatrices, and the cosine-like well upper bound <= -1/27 (sharpened to
<= -1/4 for the exact cosine).  The pivot identity is

    d2E/dI2 = - I''(E) / I'(E)^3,

so the work is in producing trustworthy I''(E).  Two routes are used and
cross-checked: in rotation regions the integrand of I'(E) can be
differentiated under the integral (the orbit never touches a turning point),
while in librational and annular regions the differentiated integrand is not
integrable and I'' comes from Richardson-extrapolated central differences of
dIdE instead.

The cosine-like well bound goes through the affine rescaling of the potential
to range [-1, 1] (which leaves d2E/dI2 invariant) and a sandwich of the
rescaled action derivatives between 1/2 and 3/2 of the exact-cosine reference
integrals A0', A0''.  The reference integrals are evaluated after the
substitution removing the turning-point singularity, which leaves fixed
endpoint singularities t^{-1/2}, (1-t)^{+-1/2} that tanh-sinh quadrature
absorbs; their ratio A0''/(A0')^3 is increasing with limit 1/4 at the well
bottom.
"""

import numpy as np
from dataclasses import dataclass, field

from .errors import (
    BoundViolation,
    NotCosineLike,
    OutOfRange,
    QuadratureTolNotMet,
)
from .quadrature import tanh_sinh
from .potential import cosine_like_params, rescale_to_unit
from .standard_form import make_standard_form
from .action_map import RegionIndex, _geometry, _check_window, action, dIdE

LOOP_N0 = 64
LOOP_N_MAX = 1 << 16
LOOP_TOL = 1e-12
A0_TOL = 1e-13
RICHARDSON_H = 1e-4          # base step, in units of eps
JENSEN_SLACK = 1e-9          # rounding allowance on the (2I')^3 <= -4I'' chain
OUTER_FLOOR = 2.0
INNER_CEIL = -1.0 / 27.0
COSINE_CEIL = -0.25
SANDWICH = (0.5, 1.5)        # guaranteed factor range for g_hat <= 2^-38
GHAT_STRICT = 2.0 ** -40
GHAT_LOOSE = 2.0 ** -12      # keeps the cos(z + b(z)) representation valid
VERDICT_TOL = 1e-9


# ---------------------------------------------------------------------------
# second derivative of the action
# ---------------------------------------------------------------------------
def _loop_mean(f, tol=LOOP_TOL):
    """(1/2pi) * integral of a smooth 2pi-periodic f, doubling trapezoid."""
    n = LOOP_N0
    prev = None
    while n <= LOOP_N_MAX:
        th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        val = float(np.mean(f(th)))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    raise QuadratureTolNotMet(
        f"periodic trapezoid stalled at n = {LOOP_N_MAX}")


def d2IdE2(i, E, p_hat, H, tol=LOOP_TOL):
    """I''(E) of region i.

    Rotation regions of an unperturbed slice integrate the differentiated
    integrand -(1/8pi) * loop (E - G)^(-3/2) directly; every other case falls
    back to sixth-order Richardson differences of dIdE with steps h, h/2, h/4
    and h = 1e-4 eps (the differentiated librational integrand is not
    integrable across the turning points).
    """
    idx = i.i if isinstance(i, RegionIndex) else int(i)
    geom = _geometry(H, p_hat)
    _check_window(idx, E, geom, H)
    if idx in (0, 2 * geom.N) and H.nu_is_zero:
        Gq = geom.Gq
        return -0.25 * _loop_mean(lambda th: (E - Gq(th)) ** -1.5, tol)
    h = RICHARDSON_H * H.chars.eps

    def cdiff(hh):
        return (dIdE(idx, E + hh, p_hat, H) - dIdE(idx, E - hh, p_hat, H)) / (2.0 * hh)

    d_h, d_2, d_4 = cdiff(h), cdiff(h / 2), cdiff(h / 4)
    r_a = (4.0 * d_2 - d_h) / 3.0
    r_b = (4.0 * d_4 - d_2) / 3.0
    return float((16.0 * r_b - r_a) / 15.0)


def d2E_dI2(i, E, p_hat, H):
    """d2E/dI2 of region i at energy E, via -I''/(I')^3."""
    Ip = dIdE(i, E, p_hat, H)
    return float(-d2IdE2(i, E, p_hat, H) / Ip ** 3)


# ---------------------------------------------------------------------------
# exact-cosine reference integrals
# ---------------------------------------------------------------------------
def a0_derivatives(E, tol=A0_TOL):
    """(A0'(E), A0''(E)) for the well of p^2 + cos q, -1 < E < 1.

    Uses the turning-point substitution u = E - (1+E)t, after which

        A0'(E)  = (1/pi)  int_0^1 dt / sqrt(t (1-t) ((1-E) + (1+E) t)),
        A0''(E) = (1/2pi) int_0^1 sqrt((1-t)/t) ((1-E) + (1+E) t)^(-3/2) dt.

    Endpoint singularities are exactly the tanh-sinh da/db distances, so both
    integrals converge to full precision.
    """
    if not -1.0 < E < 1.0:
        raise OutOfRange(f"E = {E} outside the cosine well (-1, 1)")
    c0, c1 = 1.0 - E, 1.0 + E

    def f_prime(x, da, db):
        return 1.0 / np.sqrt(da * db * (c0 + c1 * da))

    def f_second(x, da, db):
        return np.sqrt(db / da) * (c0 + c1 * da) ** -1.5

    a0p = tanh_sinh(f_prime, 0.0, 1.0, tol=tol)[0] / np.pi
    a0pp = tanh_sinh(f_second, 0.0, 1.0, tol=tol)[0] / (2.0 * np.pi)
    return a0p, a0pp


def a0_ratio(E):
    """A0''(E)/A0'(E)^3: increasing on (-1, 1), limit 1/4 at the bottom."""
    a0p, a0pp = a0_derivatives(E)
    return float(a0pp / a0p ** 3)


# ---------------------------------------------------------------------------
# the two bound checks
# ---------------------------------------------------------------------------
@dataclass
class OuterConvexityReport:
    region: RegionIndex
    E: np.ndarray
    d2E: np.ndarray
    jensen_lhs: np.ndarray       # (2 I')^3
    jensen_rhs: np.ndarray       # -4 I''
    d2E_min: float = 0.0


def outer_convexity_check(H, E_grid, p_hat=()):
    """Verify d2E/dI2 >= 2 on the high rotation region at each grid energy.

    Also re-derives the bound the way it is proved: the Jensen chain
    (2 I')^3 <= -4 I'' is checked pointwise.  Requires the nu = 0 reference
    form; raises BoundViolation at the first failing grid point.
    """
    if not H.nu_is_zero:
        raise ValueError("outer convexity check is for the nu = 0 reference form")
    geom = _geometry(H, p_hat)
    idx = 2 * geom.N
    energies = np.atleast_1d(np.asarray(E_grid, dtype=float))
    d2 = np.empty_like(energies)
    lhs = np.empty_like(energies)
    rhs = np.empty_like(energies)
    for k, E in enumerate(energies):
        Ip = dIdE(idx, E, p_hat, H)
        Ipp = d2IdE2(idx, E, p_hat, H)
        d2[k] = -Ipp / Ip ** 3
        lhs[k] = (2.0 * Ip) ** 3
        rhs[k] = -4.0 * Ipp
        if lhs[k] > rhs[k] * (1.0 + JENSEN_SLACK):
            raise BoundViolation(
                f"Jensen chain fails at E = {E}: (2I')^3 = {lhs[k]:.12g} "
                f"> -4I'' = {rhs[k]:.12g}")
        if d2[k] < OUTER_FLOOR - JENSEN_SLACK:
            raise BoundViolation(
                f"d2E/dI2 = {d2[k]:.12g} < 2 at E = {E}")
    return OuterConvexityReport(RegionIndex(idx), energies, d2, lhs, rhs,
                                d2E_min=float(d2.min()))


@dataclass
class InnerConvexityReport:
    g_hat: float
    exact_cosine: bool
    threshold: float
    E: np.ndarray                # energies of the original potential
    E_unit: np.ndarray           # affine images in the [-1, 1] well
    d2E: np.ndarray
    a0: np.ndarray               # exact-cosine ratio at E_unit
    factor_prime: np.ndarray     # I' / A0'
    factor_second: np.ndarray    # I'' / A0''


def inner_cosine_bound(G0, E_grid, strict=False):
    """Verify d2E/dI2 <= -1/27 inside the well of a cosine-like potential.

    Pipeline: affine-rescale G0 to range [-1, 1] (d2E/dI2 is invariant), then
    sandwich the rescaled action derivatives against the exact-cosine A0
    integrals; the measured factors must stay inside [1/2, 3/2].  For the
    exact cosine (g_hat = 0) the sharper threshold -1/4 is enforced.

    The guaranteed regime of the sandwich is g_hat <= 2^-40 (strict=True
    enforces that); by default the gate is the structural one g_hat <= 2^-12,
    under which the representation cos(z + b(z)) still holds and the sandwich
    factors are verified numerically rather than assumed.
    """
    eta, theta0, g_hat = cosine_like_params(G0)
    gate = GHAT_STRICT if strict else GHAT_LOOSE
    if g_hat > gate:
        raise NotCosineLike(
            f"g_hat = {g_hat:.3e} above the {'strict' if strict else 'loose'} "
            f"gate {gate:.3e}")
    V, L = rescale_to_unit(G0)
    Hu = make_standard_form(V, 1.0)
    exact = g_hat == 0.0
    ceil = COSINE_CEIL if exact else INNER_CEIL
    energies = np.atleast_1d(np.asarray(E_grid, dtype=float))
    e_unit = np.array([L(E) for E in energies])
    d2 = np.empty_like(energies)
    a0 = np.empty_like(energies)
    f1 = np.empty_like(energies)
    f2 = np.empty_like(energies)
    lo, hi = SANDWICH
    for k, Eu in enumerate(e_unit):
        Ip = dIdE(1, Eu, (), Hu)
        Ipp = d2IdE2(1, Eu, (), Hu)
        d2[k] = -Ipp / Ip ** 3
        a0p, a0pp = a0_derivatives(Eu)
        a0[k] = a0pp / a0p ** 3
        f1[k] = Ip / a0p
        f2[k] = Ipp / a0pp
        if not (lo - JENSEN_SLACK <= f1[k] <= hi + JENSEN_SLACK
                and lo - JENSEN_SLACK <= f2[k] <= hi + JENSEN_SLACK):
            raise BoundViolation(
                f"sandwich factors ({f1[k]:.6g}, {f2[k]:.6g}) outside "
                f"[{lo}, {hi}] at E = {energies[k]}")
        if d2[k] > ceil:
            raise BoundViolation(
                f"d2E/dI2 = {d2[k]:.12g} > {ceil:.6g} at E = {energies[k]}")
    return InnerConvexityReport(g_hat, exact, ceil, energies, e_unit,
                                d2, a0, f1, f2)


# ---------------------------------------------------------------------------
# affine rescaling identity
# ---------------------------------------------------------------------------
def rescaled_action(G, i, E, tol=1e-9):
    """Action of p^2 + G at E, validated against the rescaled-well identity.

    Computes I(E) directly and as sqrt((M - m)/2) * I_unit(L(E)) where the
    unit system has the potential affinely mapped onto [-1, 1]; the two
    independent quadratures must agree to tol.  Returns the common value.
    """
    m, M = G.real_range()
    V, L = rescale_to_unit(G)
    H = make_standard_form(G, max(abs(m), abs(M)))
    Hu = make_standard_form(V, 1.0)
    lhs = action(i, E, (), H)
    rhs = float(np.sqrt(0.5 * (M - m))) * action(i, L(E), (), Hu)
    if abs(lhs - rhs) > tol * max(1.0, abs(lhs)):
        raise BoundViolation(
            f"rescaling identity violated: {lhs!r} vs {rhs!r}")
    return lhs


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------
@dataclass
class ConvexityProfile:
    region: RegionIndex
    p_hat: tuple
    samples: np.ndarray          # columns E, I, dIdE, d2IdE2, d2EdI2
    verdicts: list = field(default_factory=list)


def convexity_profile(i, energies, p_hat, H):
    """Sample (E, I, I', I'', d2E/dI2) over a grid and classify each point.

    Verdicts are by the sign of d2E/dI2; points within VERDICT_TOL of zero or
    adjacent to a sign change are flagged as inflections.  The flags are
    informational (interior regions of general potentials do change
    convexity); no bound is asserted here.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    rows = np.empty((len(energies), 5))
    for k, E in enumerate(energies):
        I = action(i, E, p_hat, H)
        Ip = dIdE(i, E, p_hat, H)
        Ipp = d2IdE2(i, E, p_hat, H)
        rows[k] = E, I, Ip, Ipp, -Ipp / Ip ** 3
    d2 = rows[:, 4]
    verdicts = ["convex" if v > VERDICT_TOL else
                "concave" if v < -VERDICT_TOL else "inflection-flag"
                for v in d2]
    for k in range(len(d2) - 1):
        if d2[k] * d2[k + 1] < 0.0:
            verdicts[k] = verdicts[k + 1] = "inflection-flag"
    idx = i if isinstance(i, RegionIndex) else RegionIndex(int(i))
    return ConvexityProfile(idx, tuple(p_hat), rows, verdicts)


def convexity_profile_csv(profile):
    """CSV rows E,I,dIdE,d2IdE2,d2EdI2,verdict for one profile."""
    lines = ["E,I,dIdE,d2IdE2,d2EdI2,verdict"]
    for row, verdict in zip(profile.samples, profile.verdicts):
        lines.append(",".join(f"{x:.17g}" for x in row) + f",{verdict}")
    return "\n".join(lines) + "\n"
