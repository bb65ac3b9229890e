"""Real-analytic 2pi-periodic potentials and their Morse / cosine-like analysis.

A potential is a truncated real Fourier series evaluated on the reals or on a
complex strip. On top of that representation this module locates critical
points, measures the Morse quality beta (gradient-plus-curvature floor and the
minimal gap between critical values), normalizes a potential to [-1, 1], and
builds the phase function b with w(z) = cos(z + b(z)) for potentials close to
the cosine on the unit strip.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    DegenerateCritical,
    DistinctValueViolation,
    NoConvergence,
    NotCosineLike,
    NotNormalized,
    ResidualTooLarge,
    TooFarFromCosine,
    ZeroFirstHarmonic,
)
from .quadrature import fixed_gauss

GRID_CRITICAL = 4096      # scan grid for roots of G'
GRID_STRIP = 2048         # strip-boundary sup grid
GRID_PHASE = 8192         # sampling grid for the phase function b
NEWTON_MAX = 50
NEWTON_TOL = 1e-13
DEDUP_TOL = 1e-10
# switch from the arccos branch formula to the local square-root model when
# closer than this to a critical angle of w
LOCAL_MODEL_RADIUS = 0.4
TAU0_STRICT = 2.0**-10
TAU0_LOOSE = 2.0**-4


class PeriodicPotential:
    """Truncated Fourier series sum_k c_k cos(k z) + s_k sin(k z), real coefficients."""

    def __init__(self, cosine_coeffs, sine_coeffs=None):
        c = np.atleast_1d(np.asarray(cosine_coeffs, dtype=float))
        if sine_coeffs is None:
            s = np.zeros(max(len(c) - 1, 0))
        else:
            s = np.atleast_1d(np.asarray(sine_coeffs, dtype=float))
        M = max(len(c) - 1, len(s), 0)
        self.cosine_coeffs = np.zeros(M + 1)
        self.cosine_coeffs[: len(c)] = c
        self.sine_coeffs = np.zeros(M)  # index k-1 holds the sin(k z) coefficient
        self.sine_coeffs[: len(s)] = s
        self.degree = M

    @classmethod
    def from_callable(cls, f, n=512, trim=1e-15):
        """Build coefficients by FFT of f sampled on n uniform points.

        Trailing coefficients below trim * (largest coefficient) are dropped.
        Aliasing is the caller's problem: n must exceed twice the effective
        bandwidth of f.
        """
        x = 2 * np.pi * np.arange(n) / n
        F = np.fft.rfft(np.asarray(f(x), dtype=float))
        c = 2.0 * F.real / n
        c[0] *= 0.5
        s = -2.0 * F.imag[1:] / n
        scale = max(np.max(np.abs(c)), np.max(np.abs(s)) if len(s) else 0.0)
        keep = len(c)
        while keep > 1 and abs(c[keep - 1]) <= trim * scale and (
            keep - 1 > len(s) or abs(s[keep - 2]) <= trim * scale
        ):
            keep -= 1
        return cls(c[:keep], s[: keep - 1])

    def __call__(self, z):
        z = np.asarray(z)
        k = np.arange(self.degree + 1)
        kz = np.multiply.outer(z, k)
        out = np.cos(kz) @ self.cosine_coeffs
        if self.degree >= 1:
            out = out + np.sin(kz[..., 1:]) @ self.sine_coeffs
        return out if out.ndim else out[()]

    def derivative(self, order=1):
        c, s = self.cosine_coeffs, self.sine_coeffs
        for _ in range(order):
            k = np.arange(1, len(c))
            # (c_k cos + s_k sin)' = k s_k cos - k c_k sin
            c, s = np.concatenate(([0.0], k * s)), -k * c[1:]
        return PeriodicPotential(c, s)

    def mean(self):
        return self.cosine_coeffs[0]

    def strip_sup(self, width, n=GRID_STRIP):
        """sup of |self| over the strip |Im z| <= width, from the boundary grid.

        By the maximum principle the sup over the closed strip is attained on
        the boundary; real coefficients make the two boundary lines equal in
        modulus, so one line suffices.
        """
        x = 2 * np.pi * np.arange(n) / n
        return float(np.max(np.abs(self(x + 1j * width))))

    def real_range(self, tol_root=1e-9):
        """(min, max) over the reals, from polished critical values."""
        values = [cp.value for cp in find_critical_points(self, tol_root)]
        return min(values), max(values)

    def __add__(self, other):
        M = max(self.degree, other.degree)
        c = np.zeros(M + 1)
        s = np.zeros(M)
        c[: self.degree + 1] += self.cosine_coeffs
        c[: other.degree + 1] += other.cosine_coeffs
        s[: self.degree] += self.sine_coeffs
        s[: other.degree] += other.sine_coeffs
        return PeriodicPotential(c, s)

    def __mul__(self, scalar):
        return PeriodicPotential(self.cosine_coeffs * scalar, self.sine_coeffs * scalar)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other


@dataclass
class CriticalPoint:
    location: float          # angle in [0, 2pi)
    value: float
    kind: str                # 'maximum' | 'minimum'


@dataclass
class MorseProfile:
    criticals: list          # cyclic order, first entry the global maximum
    beta: float
    n_wells: int
    max_second_derivative: float


@dataclass
class AffineMap:
    """y -> scale * y + offset, with inverse."""

    scale: float
    offset: float

    def __call__(self, y):
        return self.scale * y + self.offset

    def inverse(self, v):
        return (v - self.offset) / self.scale


def _newton_in_bracket(f, df, lo, hi, flo):
    """Safeguarded Newton for a sign-change root of f in [lo, hi].

    Falls back to bisection whenever the Newton step leaves the bracket.
    """
    x = 0.5 * (lo + hi)
    for _ in range(NEWTON_MAX):
        fx = f(x)
        if fx == 0.0:
            return x
        if np.sign(fx) == np.sign(flo):
            lo = x
        else:
            hi = x
        d = df(x)
        step = fx / d if d != 0.0 else np.inf
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < NEWTON_TOL:
            return x_new
        x = x_new
    raise NoConvergence(f"critical-point polish stalled near {x:.6f}")


def find_critical_points(G, tol_root=1e-9):
    """All roots of G' in [0, 2pi), polished, with kinds from the sign of G''.

    Scans a uniform grid for sign changes of G' (wrapping around), polishes
    each bracket with safeguarded Newton, and deduplicates. Grid minima of
    |G'| below tol_root without a sign change mean a tangential (non-Morse)
    root and raise DegenerateCritical.
    """
    dG = G.derivative()
    d2G = G.derivative(2)
    n = GRID_CRITICAL
    theta = 2 * np.pi * np.arange(n + 1) / n
    g = dG(theta)
    roots = []
    sign_change = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    for i in sign_change:
        roots.append(_newton_in_bracket(dG, d2G, theta[i], theta[i + 1], g[i]))
    # exact zeros on the grid
    for i in np.nonzero(g[:-1] == 0.0)[0]:
        roots.append(theta[i])
    # tangential roots: |G'| dips below tol_root without changing sign
    interior_min = np.nonzero(
        (np.abs(g[1:-1]) < np.abs(g[:-2]))
        & (np.abs(g[1:-1]) <= np.abs(g[2:]))
        & (np.abs(g[1:-1]) < tol_root)
    )[0]
    for i in interior_min:
        if not any(abs(theta[i + 1] - r) < 2 * np.pi / n * 2 for r in roots):
            raise DegenerateCritical(
                f"G' touches zero without sign change near theta={theta[i + 1]:.6f}"
            )
    roots = np.sort(np.mod(roots, 2 * np.pi))
    keep = []
    for r in roots:
        if not keep or (r - keep[-1] > DEDUP_TOL and (2 * np.pi - r + keep[0]) > DEDUP_TOL):
            keep.append(r)
    points = []
    for r in keep:
        curv = d2G(r)
        if abs(dG(r)) + abs(curv) < tol_root:
            raise DegenerateCritical(f"|G'|+|G''| < {tol_root:g} at theta={r:.6f}")
        points.append(
            CriticalPoint(float(r), float(G(r)), "maximum" if curv < 0 else "minimum")
        )
    if len(points) % 2 != 0:
        raise DegenerateCritical("odd number of critical points after dedup")
    return points


def _refined_extremum(f, sign, n=8192):
    """max of sign*f over [0, 2pi), grid argmax plus bounded local polish."""
    theta = 2 * np.pi * np.arange(n) / n
    vals = sign * f(theta)
    i = int(np.argmax(vals))
    h = 2 * np.pi / n
    res = minimize_scalar(
        lambda x: -sign * f(x),
        bounds=(theta[i] - h, theta[i] + h),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return max(float(vals[i]), float(-res.fun))


def morse_beta(G, tol_root=1e-9, value_tol=1e-9):
    """Largest admissible Morse quality:

        beta = min( min_theta(|G'| + |G''|),  min_{i != j} |E_i - E_j| ).

    Raises DistinctValueViolation when two critical values coincide within
    value_tol relative to the spread of critical values.
    """
    points = find_critical_points(G, tol_root)
    values = np.array([cp.value for cp in points])
    spread = max(values.max() - values.min(), 1e-300)
    gaps = np.abs(values[:, None] - values[None, :])
    np.fill_diagonal(gaps, np.inf)
    min_gap = float(gaps.min())
    if min_gap < value_tol * spread:
        raise DistinctValueViolation(
            f"critical values collide: gap {min_gap:.3e} vs spread {spread:.3e}"
        )
    dG, d2G = G.derivative(), G.derivative(2)
    floor = -_refined_extremum(lambda x: -(np.abs(dG(x)) + np.abs(d2G(x))), 1.0)
    return float(min(floor, min_gap))


def morse_profile(G, tol_root=1e-9, beta=None):
    """Assemble the MorseProfile: criticals cyclically rotated to start at the
    global maximum, beta (computed, or declared by the caller for potentials
    whose symmetric critical orbits collide in value), and max |G''|.
    """
    points = find_critical_points(G, tol_root)
    i0 = int(np.argmax([cp.value for cp in points]))
    if points[i0].kind != "maximum":
        raise DegenerateCritical("global extremum is not a maximum")
    ordered = points[i0:] + points[:i0]
    kinds = [cp.kind for cp in ordered]
    if any(k == kinds[i - 1] for i, k in enumerate(kinds)):
        raise DegenerateCritical("critical kinds do not alternate")
    if beta is None:
        beta = morse_beta(G, tol_root)
    d2G = G.derivative(2)
    m2 = _refined_extremum(lambda x: np.abs(d2G(x)), 1.0)
    return MorseProfile(ordered, float(beta), len(ordered) // 2, float(m2))


def critical_count_bound(profile):
    """pi * sqrt(2 max|G''| / beta); the number of criticals 2N never exceeds it."""
    bound = np.pi * np.sqrt(2.0 * profile.max_second_derivative / profile.beta)
    if 2 * profile.n_wells > bound:
        raise DegenerateCritical(
            f"2N = {2 * profile.n_wells} exceeds the count bound {bound:.4f}"
        )
    return float(bound)


def cosine_like_params(G, strip_width=1.0):
    """(eta, theta0, g_hat) of the first-harmonic comparison on the strip.

    eta and theta0 come from the first Fourier harmonic, so that
    eta*cos(z + theta0) matches it exactly; g_hat is the strip-boundary sup of
    |G - eta cos(.+theta0)| / eta. Raises NotCosineLike when g_hat >= 1/4.
    """
    c1 = G.cosine_coeffs[1] if G.degree >= 1 else 0.0
    s1 = G.sine_coeffs[0] if G.degree >= 1 else 0.0
    eta = float(np.hypot(c1, s1))
    if eta == 0.0:
        raise ZeroFirstHarmonic("first Fourier harmonic vanishes")
    theta0 = float(-np.arctan2(s1, c1))
    ref = PeriodicPotential(
        [0.0, eta * np.cos(theta0)], [-eta * np.sin(theta0)]
    )
    g_hat = (G - ref).strip_sup(strip_width) / eta
    if g_hat >= 0.25:
        raise NotCosineLike(f"g_hat = {g_hat:.4f} >= 1/4")
    return eta, theta0, float(g_hat)


def rescale_to_unit(G, tol_root=1e-9):
    """Affine-normalize to range [-1, 1]: returns (V, L) with V = L(G).

    L(y) = (2y - M - m)/(M - m) where M, m are the real max/min of G.
    """
    m, M = G.real_range(tol_root)
    L = AffineMap(scale=2.0 / (M - m), offset=-(M + m) / (M - m))
    V = PeriodicPotential(
        L.scale * G.cosine_coeffs + np.concatenate(([L.offset], np.zeros(G.degree))),
        L.scale * G.sine_coeffs,
    )
    return V, L


def _sqrt_curvature(d2w, x_crit, u, sign):
    """d(u) with w(x_crit + u) = w(x_crit) + sign * u^2 d(u)^2 / 2.

    d^2 = 2 sign * int_0^1 (1-t) w''(x_crit + t u) dt, evaluated by fixed
    Gauss-Legendre in t (entire integrand). Vectorized over u.
    """
    u = np.atleast_1d(u)
    val = fixed_gauss(
        lambda t: (1.0 - t)[:, None] * d2w(x_crit + np.outer(t, u)), 0.0, 1.0
    )
    return np.sqrt(2.0 * sign * val)


def phase_shift_b(w, tol=1e-11, strict=False):
    """Phase function b with w(z) = cos(z + b(z)) for w close to the cosine.

    Away from the critical angles of w the branch formula
    b = +-arccos(w) - z applies; within LOCAL_MODEL_RADIUS of the max x_M
    (resp. min x_m) the square-root continuation
    b = 2 arcsin(u d(u)/2) - u   (u = z - x_M)
    replaces it, with d(u) from the second-order Taylor remainder of w. The
    samples on a uniform grid are then compressed to a Fourier series and
    verified against w on a finer grid.

    strict=True enforces the g_hat0 <= 2^-10 closeness hypothesis; the default
    accepts up to 2^-4 provided w still has exactly two critical angles.
    """
    pts = find_critical_points(w)
    mn, mx = w.real_range()
    if abs(mx - 1.0) > 1e-9 or abs(mn + 1.0) > 1e-9:
        raise NotNormalized(f"range [{mn:.6f}, {mx:.6f}] is not [-1, 1]")
    cos_ref = PeriodicPotential([0.0, 1.0])
    tau0 = (w - cos_ref).strip_sup(1.0)
    limit = TAU0_STRICT if strict else TAU0_LOOSE
    if tau0 > limit or len(pts) != 2:
        raise TooFarFromCosine(
            f"sup|w - cos| = {tau0:.4e} on the unit strip (limit {limit:.4e}), "
            f"{len(pts)} critical angles"
        )
    x_M = next(cp.location for cp in pts if cp.kind == "maximum")
    x_m = next(cp.location for cp in pts if cp.kind == "minimum")
    d2w = w.derivative(2)

    def circ_dist(x, x0):
        return np.mod(x - x0 + np.pi, 2 * np.pi) - np.pi

    x = 2 * np.pi * np.arange(GRID_PHASE) / GRID_PHASE
    uM = circ_dist(x, x_M)
    um = circ_dist(x, x_m)
    near_M = np.abs(uM) < LOCAL_MODEL_RADIUS
    near_m = np.abs(um) < LOCAL_MODEL_RADIUS
    # total phase xi = x + b measured from the peak of the cosine: xi_rel runs
    # 0 -> pi on the arc x_M -> x_m and pi -> 2pi on the way back; near the
    # critical angles arccos(w) loses half the digits, so the square-root
    # continuation through the Taylor remainder takes over there.
    xi_rel = np.empty_like(x)
    bulk = ~(near_M | near_m)
    wb = w(x[bulk])
    ascending = np.mod(x[bulk] - x_M, 2 * np.pi) < np.mod(x_m - x_M, 2 * np.pi)
    xi_rel[bulk] = np.where(ascending, np.arccos(wb), 2 * np.pi - np.arccos(wb))
    d_M = _sqrt_curvature(d2w, x_M, uM[near_M], -1.0)
    xi_rel[near_M] = 2.0 * np.arcsin(0.5 * uM[near_M] * d_M)
    d_m = _sqrt_curvature(d2w, x_m, um[near_m], 1.0)
    xi_rel[near_m] = np.pi + 2.0 * np.arcsin(0.5 * um[near_m] * d_m)
    # xi == xi_rel mod 2pi because the anchored peak phase is a multiple of
    # 2pi; reduce b = xi - x to its representative in (-pi, pi]
    b = np.mod(xi_rel - x + np.pi, 2 * np.pi) - np.pi
    F = np.fft.rfft(b)
    c = 2.0 * F.real / GRID_PHASE
    c[0] *= 0.5
    s = -2.0 * F.imag[1:] / GRID_PHASE
    # b-sample errors are absolute (~1e-15, from O(1) phases), so trim with an
    # absolute floor as well; otherwise a tiny b keeps noise harmonics out to
    # the Nyquist degree and strip evaluation of b overflows
    scale = max(np.max(np.abs(c)), np.max(np.abs(s)))
    floor = max(1e-15 * scale, 1e-13)
    keep = len(c)
    while keep > 2 and abs(c[keep - 1]) <= floor and abs(s[keep - 2]) <= floor:
        keep -= 1
    bf = PeriodicPotential(c[:keep], s[: keep - 1])
    xv = 2 * np.pi * np.arange(2 * GRID_PHASE) / (2 * GRID_PHASE)
    resid = float(np.max(np.abs(w(xv) - np.cos(xv + bf(xv)))))
    if resid > tol:
        raise ResidualTooLarge(f"|w - cos(.+b)| = {resid:.3e} exceeds {tol:.1e}")
    return bf
