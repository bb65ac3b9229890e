"""Region decomposition, action integrals, their derivatives, and inverses.

The phase space of a standard-form Hamiltonian splits into 2N+1 regions: the
two rotation regions (i = 0 below, i = 2N above all separatrices), the N
librational wells (odd i, around the i-th critical angle, a minimum), and the
N-1 annular regions (even interior i, above the separatrix of a non-global
maximum).

Actions are computed from the momentum branch P(z, q1) solving
P sqrt(1 + nu(P, q1)) = z: on the energy level E the momentum is
p1 = P(+-sqrt(E - G(q1)), q1), so

    libration:  I = (1/pi)  int (P(sqrt v) - P(-sqrt v))/2 dq1,  v = E - G,
    rotation:   I = (sigma/2pi) int_0^2pi P(sigma sqrt v) dq1,

and dI/dE replaces the P-combinations by the matching (P'(sqrt v) +-
P'(-sqrt v))/2 / (2 sqrt v) forms. The even combinations of P are exactly the
sqrt-composed correction factors (1 + nu-dagger) of the closed formulas; using
P directly keeps every integrand cancellation-free down to the turning points.

Near-endpoint accuracy: the quadrature passes exact endpoint distances, and
the gap v = E - G is evaluated through a Taylor model of G anchored at the
endpoint (turning point or critical angle), so that v keeps full *relative*
precision at distances far below machine epsilon (where E - G(theta) itself
would cancel to noise).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundViolation,
    ContractionFailed,
    LambdaOutOfRange,
    NotEven,
    OutOfRange,
    OutOfWindow,
)
from .quadrature import gauss_panels, tanh_sinh
from .standard_form import continue_critical_points

QUAD_TOL = 1e-12
GAP_TAYLOR_ORDER = 24
GAP_TRUST_FACTOR = 0.4      # of 1/degree, and of the piece length
TURNING_TOL = 1e-12
CONTRACTION_MAX = 60
NEWTON_MAX_E = 80


@dataclass(frozen=True)
class RegionIndex:
    i: int

    def kind(self, n_wells):
        if self.i == 0:
            return "rotation_low"
        if self.i == 2 * n_wells:
            return "rotation_high"
        return "libration" if self.i % 2 == 1 else "annulus"


@dataclass
class EnergyWindow:
    E_minus: float
    E_plus: float
    region: RegionIndex


@dataclass
class ActionTable:
    region: RegionIndex
    p_hat: tuple
    samples: np.ndarray          # columns E, I, dI/dE
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# momentum branch and even square-root composition
# ---------------------------------------------------------------------------

def momentum_branch(z, q1, p_hat, H, tol=1e-15):
    """P(z, q1, p_hat) = z + Ptilde solving P sqrt(1 + nu(P)) = z.

    Fixed point of Ptilde <- ((1 + nu(z + Ptilde))^{-1/2} - 1) z, vectorized
    over z/q1. Residual of the defining equation is checked against 1e-12
    relative; ContractionFailed otherwise.
    """
    if getattr(H, "nu_is_zero", False):
        return z
    z = np.asarray(z)
    scale = np.maximum(1.0, np.abs(z))
    pt = np.zeros_like(z)
    for _ in range(CONTRACTION_MAX):
        pt_new = (1.0 / np.sqrt(1.0 + H.nu(z + pt, q1, p_hat)) - 1.0) * z
        delta = np.max(np.abs(pt_new - pt) / scale)
        pt = pt_new
        if delta < tol:
            break
    P = z + pt
    resid = np.max(np.abs(P * np.sqrt(1.0 + H.nu(P, q1, p_hat)) - z) / scale)
    if resid > 1e-12:
        raise ContractionFailed(f"momentum branch residual {resid:.2e}")
    return P


def _nu_p(H, p1, q1, p_hat):
    """d nu / d p1, exact when the Hamiltonian carries a handle, otherwise a
    complex-step (real p1) or central difference (complex p1)."""
    handle = getattr(H, "nu_p", None)
    if handle is not None:
        return handle(p1, q1, p_hat)
    p1 = np.asarray(p1)
    if np.isrealobj(p1):
        h = 1e-20
        return np.imag(H.nu(p1 + 1j * h, q1, p_hat)) / h
    h = 1e-7 * max(H.chars.r0, 1e-30)
    return (H.nu(p1 + h, q1, p_hat) - H.nu(p1 - h, q1, p_hat)) / (2 * h)


def momentum_branch_deriv(z, q1, p_hat, H):
    """dP/dz from implicit differentiation of P sqrt(1+nu(P)) = z."""
    if getattr(H, "nu_is_zero", False):
        return np.ones_like(np.asarray(z, dtype=float))
    P = momentum_branch(z, q1, p_hat, H)
    root = np.sqrt(1.0 + H.nu(P, q1, p_hat))
    return 1.0 / (root + P * _nu_p(H, P, q1, p_hat) / (2.0 * root))


def even_sqrt_compose(g, R, n=64, tol_even=1e-12):
    """G with G(z^2) = g(z) for an even analytic g on the disk |z| <= R.

    Inside |v| < (0.75 R)^2 the value comes from the even-power series of g
    (Cauchy-FFT coefficients); outside from g(sqrt v) with the principal
    square root. Raises NotEven when g fails evenness on a symmetric grid.
    """
    zs = R * np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.asarray([g(z) for z in zs], dtype=complex)
    asym = np.max(np.abs(vals - np.roll(vals, n // 2)))
    scale = max(np.max(np.abs(vals)), 1e-300)
    if asym > tol_even * scale:
        raise NotEven(f"|g(z) - g(-z)| up to {asym:.2e} on |z| = {R:g}")
    coeffs = (np.fft.fft(vals) / n).real / R ** np.arange(n)
    even_coeffs = coeffs[::2]
    v_switch = (0.75 * R) ** 2

    def G(v):
        v = np.asarray(v)
        inner = np.polynomial.polynomial.polyval(
            np.where(np.abs(v) < v_switch, v, 0.0), even_coeffs)
        outer_arg = np.where(np.abs(v) >= v_switch, v, 1.0)
        outer = np.asarray([g(np.sqrt(complex(w))) for w in np.atleast_1d(outer_arg)])
        outer = outer.reshape(np.shape(v)) if np.ndim(v) else outer[0]
        out = np.where(np.abs(v) < v_switch, inner, np.real_if_close(outer, tol=1e6))
        return out if out.ndim else out[()]

    return G


# ---------------------------------------------------------------------------
# geometry: criticals, windows, turning points
# ---------------------------------------------------------------------------

class _Geometry:
    """Angle-potential slice at fixed p_hat with its sorted critical data."""

    def __init__(self, H, p_hat):
        self.H = H
        self.p_hat = tuple(p_hat)
        self.Gq = H.G_slice(self.p_hat)
        self.dG = self.Gq.derivative()
        cc = _continued(H)
        th = [fn(self.p_hat) for fn in cc.theta_i]
        en = [fn(self.p_hat) for fn in cc.E_i]
        order = np.argsort(th)
        self.angles = [th[k] for k in order]
        self.values = [en[k] for k in order]
        self.kinds = [cc.base[k].kind for k in order]
        # rotate the cyclic order so index 0 is the global maximum
        i0 = int(np.argmax(self.values))
        self.angles = self.angles[i0:] + [a + 2 * np.pi for a in self.angles[:i0]]
        self.values = self.values[i0:] + self.values[:i0]
        self.kinds = self.kinds[i0:] + self.kinds[:i0]
        self.N = len(self.angles) // 2
        self.eps = H.chars.eps

    def crit(self, j):
        """(angle, value) of critical j with cyclic wrap (angle shifted by 2pi)."""
        n = 2 * self.N
        wrap, j = divmod(j, n)
        return self.angles[j] + 2 * np.pi * wrap, self.values[j]


_GEOM_ATTR = "_action_map_geometry"
_CRIT_ATTR = "_action_map_continued"


def _continued(H):
    if not hasattr(H, _CRIT_ATTR):
        setattr(H, _CRIT_ATTR, continue_critical_points(H))
    return getattr(H, _CRIT_ATTR)


def _geometry(H, p_hat):
    cache = getattr(H, _GEOM_ATTR, None)
    if cache is None:
        cache = {}
        setattr(H, _GEOM_ATTR, cache)
    key = tuple(p_hat)
    if key not in cache:
        cache[key] = _Geometry(H, key)
    return cache[key]


def energy_window(i, crit, p_hat, chars):
    """The open energy range of region i per the three-case rule.

    Rotation regions run from the global maximum energy up to R0^2 + R0 r0;
    wells from their minimum up to the lower adjacent maximum; annular
    regions from their defining maximum up to the lower of the two enclosing
    higher maxima (the j-/j+ rule).
    """
    idx = i.i if isinstance(i, RegionIndex) else int(i)
    p_hat = tuple(p_hat)
    th = [fn(p_hat) for fn in crit.theta_i]
    en = [fn(p_hat) for fn in crit.E_i]
    order = np.argsort(th)
    values = [en[k] for k in order]
    i0 = int(np.argmax(values))
    values = values[i0:] + values[:i0]          # cyclic, 0 = global max
    N = len(values) // 2
    top = chars.R0**2 + chars.R0 * chars.r0
    if idx in (0, 2 * N):
        return EnergyWindow(values[0], top, RegionIndex(idx))
    if not 0 < idx < 2 * N:
        raise OutOfWindow(f"region index {idx} outside [0, {2 * N}]")
    if idx % 2 == 1:
        lo = values[idx]
        hi = min(values[idx - 1], values[(idx + 1) % (2 * N)])
        return EnergyWindow(lo, hi, RegionIndex(idx))
    # even interior: maxima in cyclic order are values[0], values[2], ...
    maxima = values[::2]
    j = idx // 2
    j_minus = max(jj for jj in range(j) if maxima[jj] > maxima[j])
    j_plus = min((jj for jj in range(j + 1, N) if maxima[jj] > maxima[j]),
                 default=None)
    right = maxima[0] if j_plus is None else maxima[j_plus]
    return EnergyWindow(maxima[j], min(maxima[j_minus], right), RegionIndex(idx))


def turning_points(E, well, G_slice, tol=TURNING_TOL):
    """(Sigma_*, Sigma^*) with G = E on the two monotone walls of a well.

    well = (theta_left_max, theta_min, theta_right_max); E must lie strictly
    between the minimum value and the lower adjacent maximum.
    """
    th_l, th_m, th_r = well
    if not th_l < th_m < th_r:
        raise OutOfWindow("well angles not ordered")
    if not G_slice(th_m) < E < min(G_slice(th_l), G_slice(th_r)):
        raise OutOfWindow(f"E = {E!r} not inside the well energy range")
    left = _wall_root(G_slice, E, th_l, th_m, tol)
    right = _wall_root(G_slice, E, th_r, th_m, tol)
    return left, right


def _wall_root(Gq, E, th_wall, th_in, tol):
    """Root of G = E on the monotone stretch between a wall angle and an
    interior angle; safeguarded Newton within the bracket."""
    dG = Gq.derivative()
    lo, hi = (th_wall, th_in) if th_wall < th_in else (th_in, th_wall)
    sign_lo = 1.0 if Gq(lo) - E > 0 else -1.0
    x = 0.5 * (lo + hi)
    scale = max(abs(E), np.max(np.abs(Gq.cosine_coeffs)), 1e-300)
    for _ in range(100):
        fx = Gq(x) - E
        if abs(fx) < 1e-15 * scale:
            break
        if np.sign(fx) == sign_lo:
            lo = x
        else:
            hi = x
        d = dG(x)
        x_new = x - fx / d if d != 0.0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < 1e-16 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    if abs(Gq(x) - E) > max(tol, 1e-14 * scale):
        raise OutOfWindow(f"turning-point polish stalled: |G - E| = {abs(Gq(x) - E):.2e}")
    return float(x)


# ---------------------------------------------------------------------------
# endpoint gap models and orbit pieces
# ---------------------------------------------------------------------------

class _GapModel:
    """v(d) = v0 + [G(anchor) - G(anchor + sigma d)] via a Taylor model.

    Evaluates the energy gap at distance d from the anchor (towards the
    interior, direction sigma) with full relative precision for d far below
    machine epsilon; valid for d <= trust.
    """

    def __init__(self, Gq, anchor, sigma, v0, trust):
        ders = [Gq.derivative(k)(anchor) for k in range(1, GAP_TAYLOR_ORDER + 1)]
        fact = 1.0
        coeffs = []
        for k, dk in enumerate(ders, start=1):
            fact *= k
            coeffs.append(-(sigma**k) * dk / fact)
        self.coeffs = np.asarray(coeffs)       # gap(d) = sum c_k d^k, k >= 1
        self.v0 = max(float(v0), 0.0)
        self.trust = float(trust)

    def __call__(self, d):
        acc = np.zeros_like(np.asarray(d, dtype=float))
        for c in self.coeffs[::-1]:
            acc = acc * d + c
        return self.v0 + acc * d


@dataclass
class _Piece:
    a: float
    b: float
    gap_a: object            # _GapModel or None
    gap_b: object
    singular: bool           # sqrt-type endpoint (turning point) present


def _orbit_interval(geom, idx, E):
    """Connected component of {G < E} containing the region's critical angle,
    as (left turning angle, right turning angle, interior critical js)."""
    n = 2 * geom.N
    # center critical: the minimum theta_i for wells; for annular regions the
    # defining maximum lies inside the level set as well
    j0 = idx
    th0, E0 = geom.crit(j0)
    if E <= E0:
        raise OutOfWindow(f"E = {E} not above the region's critical energy {E0}")
    jr = j0 + 1
    while geom.crit(jr)[1] <= E:
        jr += 1
        if jr - j0 > n:
            raise OutOfWindow("no right wall found: E above all criticals")
    jl = j0 - 1
    while geom.crit(jl)[1] <= E:
        jl -= 1
        if j0 - jl > n:
            raise OutOfWindow("no left wall found")
    left = _wall_root(geom.Gq, E, geom.crit(jl)[0], geom.crit(jl + 1)[0], TURNING_TOL)
    right = _wall_root(geom.Gq, E, geom.crit(jr)[0], geom.crit(jr - 1)[0], TURNING_TOL)
    interior = list(range(jl + 1, jr))
    return left, right, interior


def _trust(Gq, length):
    return min(GAP_TRUST_FACTOR / max(1, Gq.degree), 0.35 * length)


def _libration_pieces(geom, idx, E):
    left, right, interior = _orbit_interval(geom, idx, E)
    cuts = [left] + [geom.crit(j)[0] for j in interior] + [right]
    pieces = []
    for k in range(len(cuts) - 1):
        a, b = cuts[k], cuts[k + 1]
        length = b - a
        # v0 = 0 exactly at turning endpoints: the sqrt-singularity must sit
        # exactly at the quadrature endpoint (a float-level offset of the
        # root costs O(sqrt(offset)) in the differentiated integrals)
        if k == 0:
            gap_a = _GapModel(geom.Gq, a, +1.0, 0.0, _trust(geom.Gq, length))
        else:
            j = interior[k - 1]
            gap_a = _GapModel(geom.Gq, a, +1.0, E - geom.crit(j)[1], _trust(geom.Gq, length))
        if k == len(cuts) - 2:
            gap_b = _GapModel(geom.Gq, b, -1.0, 0.0, _trust(geom.Gq, length))
        else:
            j = interior[k]
            gap_b = _GapModel(geom.Gq, b, -1.0, E - geom.crit(j)[1], _trust(geom.Gq, length))
        pieces.append(_Piece(a, b, gap_a, gap_b,
                             singular=(k == 0 or k == len(cuts) - 2)))
    return pieces


def _rotation_pieces(geom, E):
    pieces = []
    for j in range(2 * geom.N):
        a, va = geom.crit(j)
        b, vb = geom.crit(j + 1)
        length = b - a
        gap_a = _GapModel(geom.Gq, a, +1.0, E - va, _trust(geom.Gq, length))
        gap_b = _GapModel(geom.Gq, b, -1.0, E - vb, _trust(geom.Gq, length))
        pieces.append(_Piece(a, b, gap_a, gap_b, singular=False))
    return pieces


def _gap_values(geom, piece, x, da, db, E):
    """v = E - G on a piece, switching to the endpoint Taylor models inside
    their trust radii."""
    x = np.asarray(x)
    v = E - geom.Gq(x)
    use_a = da < piece.gap_a.trust
    use_b = db < piece.gap_b.trust
    if np.any(use_a):
        v = np.where(use_a, piece.gap_a(da), v)
    if np.any(use_b):
        v = np.where(use_b, piece.gap_b(db), v)
    return np.maximum(v, 0.0)


def _integrate_pieces(geom, pieces, f_of_v, E, tol=QUAD_TOL):
    """sum of int f(v(theta), theta) dtheta over the pieces.

    f_of_v(v, theta) must be vectorized and is handed the full-precision gap.
    Near-singular pieces go through tanh-sinh; smooth ones through composite
    Gauss-Legendre.
    """
    eps = geom.eps
    total = 0.0
    for piece in pieces:
        def integrand(x, da, db, piece=piece):
            v = _gap_values(geom, piece, x, da, db, E)
            return f_of_v(v, x)
        near = min(piece.gap_a.v0, piece.gap_b.v0) < 0.5 * eps
        if piece.singular or near:
            val, _ = tanh_sinh(integrand, piece.a, piece.b, tol=tol)
        else:
            val, _ = gauss_panels(integrand, piece.a, piece.b, tol=tol)
        total += val
    return total


# ---------------------------------------------------------------------------
# the action map
# ---------------------------------------------------------------------------

def _region_n(H, p_hat):
    return _geometry(H, p_hat).N


def _check_window(idx, E, geom, H):
    win = energy_window(idx, _continued(H), geom.p_hat, H.chars)
    if not win.E_minus < E < win.E_plus:
        raise OutOfWindow(
            f"E = {E} outside window ({win.E_minus}, {win.E_plus}) of region {idx}")
    return win


def action(i, E, p_hat, H, tol=QUAD_TOL):
    """The Arnol'd-Liouville action of region i at energy E.

    All actions are reported positive; the traversal orientation of the
    rotation regions is recorded by region kind (sigma = -1 on the low
    rotation region, +1 on the high one).
    """
    idx = i.i if isinstance(i, RegionIndex) else int(i)
    geom = _geometry(H, p_hat)
    _check_window(idx, E, geom, H)
    seps = np.sqrt(geom.eps)
    if idx in (0, 2 * geom.N):
        sigma = -1.0 if idx == 0 else 1.0
        pieces = _rotation_pieces(geom, E)
        if getattr(H, "nu_is_zero", False):
            f = lambda v, x: np.sqrt(v) / seps
        else:
            f = lambda v, x: sigma * momentum_branch(
                sigma * np.sqrt(v), x, geom.p_hat, H) / seps
        return seps * _integrate_pieces(geom, pieces, f, E, tol) / (2 * np.pi)
    pieces = _libration_pieces(geom, idx, E)
    if getattr(H, "nu_is_zero", False):
        f = lambda v, x: np.sqrt(v) / seps
    else:
        def f(v, x):
            s = np.sqrt(v)
            return (momentum_branch(s, x, geom.p_hat, H)
                    - momentum_branch(-s, x, geom.p_hat, H)) / (2 * seps)
    return seps * _integrate_pieces(geom, pieces, f, E, tol) / np.pi


def dIdE(i, E, p_hat, H, tol=QUAD_TOL):
    """dI/dE by the differentiated quadrature (same decomposition as action).

    The integrand (P'(sqrt v) + P'(-sqrt v))/2 / (2 sqrt v) (libration) or
    P'(sigma sqrt v)/(2 sqrt v) (rotation) is evaluated through the same
    endpoint gap models, so the inverse square root stays clean at the
    turning points.
    """
    idx = i.i if isinstance(i, RegionIndex) else int(i)
    geom = _geometry(H, p_hat)
    _check_window(idx, E, geom, H)
    seps = np.sqrt(geom.eps)
    nu0 = getattr(H, "nu_is_zero", False)
    if idx in (0, 2 * geom.N):
        sigma = -1.0 if idx == 0 else 1.0
        pieces = _rotation_pieces(geom, E)
        if nu0:
            f = lambda v, x: seps / (2.0 * np.sqrt(v))
        else:
            f = lambda v, x: seps * momentum_branch_deriv(
                sigma * np.sqrt(v), x, geom.p_hat, H) / (2.0 * np.sqrt(v))
        return _integrate_pieces(geom, pieces, f, E, tol) / (2 * np.pi * seps)
    pieces = _libration_pieces(geom, idx, E)
    if nu0:
        f = lambda v, x: seps / (2.0 * np.sqrt(v))
    else:
        def f(v, x):
            s = np.sqrt(v)
            dp = momentum_branch_deriv(s, x, geom.p_hat, H)
            dm = momentum_branch_deriv(-s, x, geom.p_hat, H)
            return seps * (dp + dm) / (4.0 * s)
    return _integrate_pieces(geom, pieces, f, E, tol) / (np.pi * seps)


def period(i, E, p_hat, H, tol=QUAD_TOL):
    """T = 2 pi dI/dE: the time to run once around the orbit."""
    return 2.0 * np.pi * dIdE(i, E, p_hat, H, tol)


def energy_of_action(i, I, p_hat, H, tol=1e-12):
    """Invert I(E) on region i: bracketed Newton using dIdE.

    Terminates on |action(E) - I| <= tol * max(1, I); OutOfRange when I is
    not attained inside the window.
    """
    idx = i.i if isinstance(i, RegionIndex) else int(i)
    geom = _geometry(H, p_hat)
    win = energy_window(idx, _continued(H), geom.p_hat, H.chars)
    span = win.E_plus - win.E_minus
    margin = 1e-13 * span
    lo, hi = win.E_minus + margin, win.E_plus - margin
    if I <= 0 and idx % 2 == 1:
        raise OutOfRange(f"I = {I} not positive")
    I_lo, I_hi = action(idx, lo, p_hat, H), action(idx, hi, p_hat, H)
    if not I_lo <= I <= I_hi:
        raise OutOfRange(f"I = {I} outside attained range [{I_lo:.6e}, {I_hi:.6e}]")
    E = lo + (hi - lo) * (I - I_lo) / max(I_hi - I_lo, 1e-300)
    for _ in range(NEWTON_MAX_E):
        IE = action(idx, E, p_hat, H)
        err = IE - I
        if abs(err) <= tol * max(1.0, abs(I)):
            return E
        if err > 0:
            hi = E
        else:
            lo = E
        step = -err / dIdE(idx, E, p_hat, H)
        E_new = E + step
        if not lo < E_new < hi:
            E_new = 0.5 * (lo + hi)
        E = E_new
    raise OutOfRange(f"inversion stalled at |I(E) - I| = {abs(err):.2e}")


# ---------------------------------------------------------------------------
# lambda-shrunk domains and the measure deficit
# ---------------------------------------------------------------------------

def lambda_max_of(H, p_hat=()):
    """Largest admissible shrink parameter: every region must keep a
    nonempty energy range [E- + lambda eps, E+ - lambda eps]."""
    geom = _geometry(H, p_hat)
    cc = _continued(H)
    lm = np.inf
    for idx in range(2 * geom.N + 1):
        win = energy_window(idx, cc, geom.p_hat, H.chars)
        lm = min(lm, (win.E_plus - win.E_minus) / (2.0 * geom.eps))
    return float(lm)


def region_domains(lam, crit, p_hat, H):
    """Per-region action intervals of the lambda-shrunk domains.

    Returns {"lambda_max": ..., "regions": {i: {"a_minus", "a_plus",
    "E_lo", "E_hi", "kind"}}}. The boxes are decreasing in lambda.
    """
    geom = _geometry(H, p_hat)
    lm = lambda_max_of(H, p_hat)
    if not 0.0 <= lam <= lm:
        raise LambdaOutOfRange(f"lambda = {lam} outside [0, {lm:.6g}]")
    if lm < 1.0 / (2.0 * H.chars.kappa):
        raise BoundViolation(
            f"lambda_max = {lm:.3e} below 1/(2 kappa) = {1 / (2 * H.chars.kappa):.3e}")
    eps = geom.eps
    out = {}
    edge = 1e-12 * eps   # absolute inset representing the open-window edges
    for idx in range(2 * geom.N + 1):
        win = energy_window(idx, crit, geom.p_hat, H.chars)
        E_lo = win.E_minus + max(lam * eps, edge, 4e-16 * abs(win.E_minus))
        E_hi = win.E_plus - max(lam * eps, edge, 4e-16 * abs(win.E_plus))
        a_minus = 0.0 if (idx % 2 == 1 and lam == 0.0) else action(idx, E_lo, p_hat, H)
        a_plus = action(idx, E_hi, p_hat, H)
        out[idx] = {"a_minus": float(a_minus), "a_plus": float(a_plus),
                    "E_lo": float(E_lo), "E_hi": float(E_hi),
                    "kind": RegionIndex(idx).kind(geom.N)}
    return {"lambda_max": lm, "regions": out}


def measure_deficit(lam, H, p_hat_samples=None):
    """Action-space measure lost by shrinking all regions to their
    lambda-domains: 2 pi sum_i meas(hat D) sup_phat [a+(0)-a+(lam) +
    a-(lam)-a-(0)].
    """
    ch = H.chars
    if p_hat_samples is None:
        p_hat_samples = [tuple(0.5 * (lo + hi) for lo, hi in ch.hat_domain)]
    meas = 1.0
    for lo, hi in ch.hat_domain:
        meas *= hi - lo
    lm = lambda_max_of(H, p_hat_samples[0])
    if not 0.0 < lam <= lm:
        raise LambdaOutOfRange(f"lambda = {lam} outside (0, {lm:.6g}]")
    cc = _continued(H)
    N = _region_n(H, p_hat_samples[0])
    worst = np.zeros(2 * N + 1)
    for ph in p_hat_samples:
        d0 = region_domains(0.0, cc, ph, H)["regions"]
        dl = region_domains(lam, cc, ph, H)["regions"]
        for idx in range(2 * N + 1):
            loss = (d0[idx]["a_plus"] - dl[idx]["a_plus"]
                    + dl[idx]["a_minus"] - d0[idx]["a_minus"])
            worst[idx] = max(worst[idx], loss)
    return 2.0 * np.pi * meas * float(np.sum(worst))


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def build_action_table(i, p_hat, H, energies=None, n_default=33, tol=QUAD_TOL):
    """Sample (E, I, dI/dE) over a region; geometric spacing towards the
    separatrix edge(s) when no explicit energy list is given."""
    idx = i.i if isinstance(i, RegionIndex) else int(i)
    geom = _geometry(H, p_hat)
    win = energy_window(idx, _continued(H), geom.p_hat, H.chars)
    if energies is None:
        kind = RegionIndex(idx).kind(geom.N)
        span = win.E_plus - win.E_minus
        if kind in ("rotation_low", "rotation_high"):
            # cluster towards the separatrix at E_minus
            energies = win.E_minus + span * np.geomspace(1e-6, 1.0 - 1e-9, n_default)
        else:
            # chebyshev-style clustering at both window edges, edges excluded
            ts = (1 - np.cos(np.linspace(0.02, np.pi - 0.02, n_default))) / 2
            energies = win.E_minus + span * ts
    rows = []
    for E in energies:
        rows.append((E, action(idx, E, p_hat, H, tol), dIdE(idx, E, p_hat, H, tol)))
    samples = np.asarray(rows)
    if np.any(np.diff(samples[:, 1]) <= 0):
        raise OutOfRange("action not strictly increasing across the table")
    if np.any(samples[:, 2] <= 0):
        raise OutOfRange("dI/dE not positive across the table")
    meta = {"tol": tol, "kind": RegionIndex(idx).kind(geom.N),
            "orientation": -1 if idx == 0 else 1,
            "window": (win.E_minus, win.E_plus), "eps": geom.eps}
    return ActionTable(RegionIndex(idx), tuple(p_hat), samples, meta)


def action_table_csv(tables):
    """CSV with columns region,i,p_hat...,E,I,dIdE,T (T = 2 pi dI/dE)."""
    n_hat = len(tables[0].p_hat) if tables else 0
    hat_cols = "".join(f",p{j + 2}" for j in range(n_hat))
    lines = [f"region,i{hat_cols},E,I,dIdE,T"]
    for tb in tables:
        hat = "".join(f",{x:.17g}" for x in tb.p_hat)
        for E, I, dI in tb.samples:
            lines.append(
                f"{tb.metadata['kind']},{tb.region.i}{hat},"
                f"{E:.17g},{I:.17g},{dI:.17g},{2 * np.pi * dI:.17g}")
    return "\n".join(lines) + "\n"
