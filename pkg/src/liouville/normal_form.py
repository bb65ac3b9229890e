"""Finite-order Birkhoff normal forms at critical points of the angle potential.

At a hyperbolic critical point (p1, q1) = (0, theta_c) the Hamiltonian
(1 + nu) p1^2 + G is conjugated, by the composition of a shift, an exact
diagonal scaling and a degree-by-degree Lie-series normalization, to

    E_c + g (y1^2 - x1^2) + eps R((y1^2 - x1^2)/sqrt(eps)),

with R(0) = R'(0) = 0; at an elliptic point the sign of x1^2 flips.  The
scaling p1 = delta y1, q1 = theta_c + x1/delta with delta = sqrt(lambda) /
(1 + nu*)^(1/4) makes both quadratic coefficients equal to g = sqrt(1 + nu*)
lambda, and the subsequent normalization works in the diagonalizing variables
(zeta, w) where the quadratic part is 2 ghat zeta w (ghat = g/sqrt(eps)) and
the homological divisors are 2 s ghat (k - h), s = 1 hyperbolic, s = i
elliptic.  Non-resonant monomials zeta^h w^k (h != k) are killed exactly at
each degree; the resonant tail is the polynomial R.  Everything is computed
in the eps^(1/4)-scaled variables, so all coefficients are O(1).

The normal form is the entry point for three coordinate ladders used
downstream: the inversion of ghat J - R(-J) = z (which locates the invariant
hyperbola through a given energy), the local action-energy map at elliptic
points E(I1) = E_c + 2 g I1 + eps R(2 I1/sqrt(eps)), and the energy-time
coordinates y1 = sqrt(-J) sinh(w t), x1 = sqrt(-J + y1^2) on the hyperbolic
side.  The frequency w(E) = 2(g + sqrt(eps) dR) is read off the Hamilton
equations of the normal form, and the closed-form flow is cross-checked
against a symplectic integrator in the tests.

The truncated normal form is unique (the transformation is not): R is
invariant under hyperbolic rotations of (y1, x1) and under resonant gauge
terms added to the generating functions, and the test suite exercises both.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.signal import convolve2d

from .action_map import _geometry
from .errors import (
    BoundViolation,
    BranchViolation,
    DegenerateHessian,
    NewtonDiverged,
    OrderViolation,
    OutOfRadius,
    ResidualTooLarge,
    SmallDivisorZero,
)

DEFAULT_ORDER = 6
MAX_ORDER = 10
TOL_NF = 1e-6            # residual budget at the certified radius, in units of eps
PROBE_RADIUS = 0.1       # default scaled polydisk radius for residual reporting
RADII_PROBED = np.geomspace(0.45, 0.02, 14)
TAYLOR_FFT_N = 64
NEWTON_MAX_J = 50
NEWTON_TOL_J = 1e-13


# ---------------------------------------------------------------------------
# truncated bivariate polynomial algebra
# ---------------------------------------------------------------------------

class Poly2:
    """Polynomial sum c[i, j] u^i v^j truncated to total degree <= deg."""

    __slots__ = ("c", "deg")

    def __init__(self, c, deg=None):
        c = np.array(c)
        if deg is None:
            deg = c.shape[0] - 1
        full = np.zeros((deg + 1, deg + 1), dtype=c.dtype)
        full[: c.shape[0], : c.shape[1]] = c[: deg + 1, : deg + 1]
        i = np.arange(deg + 1)
        full[i[:, None] + i[None, :] > deg] = 0.0
        self.c = full
        self.deg = deg

    @classmethod
    def zeros(cls, deg, dtype=float):
        return cls(np.zeros((deg + 1, deg + 1), dtype=dtype), deg)

    @classmethod
    def monomial(cls, i, j, deg, coeff=1.0):
        p = cls.zeros(deg, dtype=np.asarray(coeff).dtype)
        p.c[i, j] = coeff
        return p

    def copy(self):
        return Poly2(self.c.copy(), self.deg)

    def __add__(self, other):
        return Poly2(self.c + other.c, self.deg)

    def __sub__(self, other):
        return Poly2(self.c - other.c, self.deg)

    def __mul__(self, other):
        if isinstance(other, Poly2):
            return Poly2(convolve2d(self.c, other.c), self.deg)
        return Poly2(self.c * other, self.deg)

    __rmul__ = __mul__

    def diff(self, axis):
        """Partial derivative along u (axis 0) or v (axis 1)."""
        d = np.arange(self.c.shape[axis])
        c = np.moveaxis(np.moveaxis(self.c, axis, 0) * d[:, None], 0, axis)
        return Poly2(np.roll(c, -1, axis=axis), self.deg)

    def degree_part(self, d):
        i = np.arange(self.deg + 1)
        keep = i[:, None] + i[None, :] == d
        return Poly2(np.where(keep, self.c, 0.0), self.deg)

    def min_degree(self):
        nz = np.argwhere(self.c != 0.0)
        return int(nz.sum(axis=1).min()) if len(nz) else self.deg + 1

    def compose_linear(self, a, b, cc, d):
        """The polynomial P(a u + b v, cc u + d v)."""
        dtype = np.result_type(self.c.dtype, type(a), type(b), type(cc), type(d))
        one = Poly2.monomial(0, 0, self.deg, dtype.type(1.0))
        l1 = Poly2.zeros(self.deg, dtype)
        l1.c[1, 0], l1.c[0, 1] = a, b
        l2 = Poly2.zeros(self.deg, dtype)
        l2.c[1, 0], l2.c[0, 1] = cc, d
        pow1 = [one]
        pow2 = [one]
        for _ in range(self.deg):
            pow1.append(pow1[-1] * l1)
            pow2.append(pow2[-1] * l2)
        out = Poly2.zeros(self.deg, dtype)
        for i, j in np.argwhere(self.c != 0.0):
            out = out + self.c[i, j] * (pow1[i] * pow2[j])
        return out

    def __call__(self, u, v):
        return npoly.polyval2d(u, v, self.c)

    def max_abs(self):
        return float(np.max(np.abs(self.c)))

    def is_zero(self):
        return not np.any(self.c)


def bracket(f, g, s=1.0):
    """Poisson bracket s (f_u g_v - f_v g_u) on the truncated algebra."""
    return s * (f.diff(0) * g.diff(1) - f.diff(1) * g.diff(0))


def exp_lie(chi, f, s=1.0):
    """exp(L_chi) f with L_chi = {chi, .}, truncated; chi at least cubic."""
    out = f.copy()
    term = f
    for m in range(1, 4 * f.deg + 2):
        term = bracket(chi, term, s) * (1.0 / m)
        if term.is_zero():
            return out
        out = out + term
    raise SmallDivisorZero("Lie series did not terminate; generator below cubic order")


# ---------------------------------------------------------------------------
# local quadratic data at a critical point
# ---------------------------------------------------------------------------

def _polished_critical(geom, j):
    """Newton-refine the cached critical angle so the linear Taylor term dies."""
    th, _ = geom.crit(j)
    d2 = geom.Gq.derivative(2)
    for _ in range(4):
        curv = d2(th)
        if abs(curv) < 1e-12 * max(geom.eps, 1.0):
            raise DegenerateHessian(f"flat critical point at angle {th:.6g}")
        th = th - geom.dG(th) / curv
    return float(th), float(geom.Gq(th))


def local_quadratic_data(H, critical_index, p_hat=()):
    """(lambda, delta, g) at critical point `critical_index` of the slice.

    lambda^2 = -+ G''(theta_c)/2 (- at maxima, + at minima), delta =
    sqrt(lambda)/(1 + nu*)^(1/4) and g = sqrt(1 + nu*) lambda, where nu* is
    nu at (p1, q1) = (0, theta_c).  The characteristic-scale inequalities
    (2/3) sqrt(beta) <= lambda <= 2 kappa sqrt(eps) and sqrt(beta)/3 <= g <=
    4 kappa sqrt(eps) are asserted, plus the tighter unperturbed window
    sqrt(beta/2) <= lambda <= sqrt(eps)/s0 when mu = 0.
    """
    geom = _geometry(H, tuple(p_hat))
    j = critical_index % (2 * geom.N)
    theta_c, _ = _polished_critical(geom, critical_index)
    gpp = geom.Gq.derivative(2)(theta_c)
    chars = H.chars
    if abs(gpp) < 1e-10 * chars.eps:
        raise DegenerateHessian(
            f"G'' = {gpp:.3g} at critical {critical_index} is below Morse scale")
    hyperbolic = j % 2 == 0
    if hyperbolic == (gpp > 0):
        raise DegenerateHessian(
            f"curvature sign {np.sign(gpp):+.0f} contradicts critical parity {j}")
    lam = math.sqrt(0.5 * abs(gpp))
    nu_star = 0.0 if H.nu_is_zero else float(np.real(H.nu(0.0, theta_c, p_hat)))
    if nu_star <= -1.0:
        raise DegenerateHessian(f"1 + nu = {1 + nu_star:.3g} <= 0 at the critical point")
    delta = math.sqrt(lam) / (1.0 + nu_star) ** 0.25
    g = math.sqrt(1.0 + nu_star) * lam
    rt_eps, rt_beta = math.sqrt(chars.eps), math.sqrt(chars.beta)
    slack = 1.0 + 1e-9
    if not (2.0 / 3.0) * rt_beta / slack <= lam <= 2.0 * chars.kappa * rt_eps * slack:
        raise BoundViolation(
            f"lambda = {lam:.6g} outside [(2/3)sqrt(beta), 2 kappa sqrt(eps)]")
    if not rt_beta / 3.0 / slack <= g <= 4.0 * chars.kappa * rt_eps * slack:
        raise BoundViolation(f"g = {g:.6g} outside [sqrt(beta)/3, 4 kappa sqrt(eps)]")
    if chars.mu == 0.0 and not (
            math.sqrt(chars.beta / 2.0) / slack <= lam <= rt_eps / chars.s0 * slack):
        raise BoundViolation(
            f"unperturbed lambda = {lam:.6g} outside [sqrt(beta/2), sqrt(eps)/s0]")
    return lam, delta, g


# ---------------------------------------------------------------------------
# Taylor expansion of the Hamiltonian in the scaled frame
# ---------------------------------------------------------------------------

def _taylor2(f, rp, rq, deg, n=TAYLOR_FFT_N):
    """Taylor coefficients c[a, b] of f around (0, 0) by a 2-d Cauchy integral.

    f must accept complex arguments; samples live on the torus |p| = rp,
    |x| = rq, which therefore has to sit inside the analyticity domain.
    """
    t = np.exp(2j * np.pi * np.arange(n) / n)
    P, X = rp * t[:, None], rq * t[None, :]
    try:
        F = np.asarray(f(P, X), dtype=complex)
        if F.shape != (n, n):
            raise ValueError
    except (ValueError, TypeError):
        F = np.array([[complex(f(P[a, 0], X[0, b])) for b in range(n)]
                      for a in range(n)])
    c = np.fft.fft2(F)[: deg + 1, : deg + 1] / n ** 2
    c /= rp ** np.arange(deg + 1)[:, None] * rq ** np.arange(deg + 1)[None, :]
    if np.max(np.abs(c.imag)) > 1e-9 * max(np.max(np.abs(c.real)), 1e-300):
        raise ResidualTooLarge("nu expansion is not real on the real slice")
    return c.real


def _scaled_taylor(H, p_hat, theta_c, delta, order):
    """The dimensionless Hamiltonian (H - E_c)/eps as a Poly2 in (Y, X).

    Built around p1 = delta tau Y, q1 = theta_c + (tau/delta) X with
    tau = eps^(1/4); the G-part uses exact Fourier derivatives of the slice
    and the kinetic part the Cauchy-Taylor coefficients of nu.
    """
    chars = H.chars
    eps = chars.eps
    tau = eps ** 0.25
    geom = _geometry(H, tuple(p_hat))
    E_c = float(geom.Gq(theta_c))
    K = Poly2.zeros(order)
    for m in range(1, order + 1):
        dm = geom.Gq.derivative(m)(theta_c) if m > 1 else geom.dG(theta_c)
        K.c[0, m] = dm / math.factorial(m) * (tau / delta) ** m / eps
    nu_c = np.zeros((order + 1, order + 1))
    nu_c[0, 0] = 1.0
    if not H.nu_is_zero:
        rp = 0.6 * delta * tau
        rq = min(0.6 * tau / delta, 0.8 * chars.s0)
        tay = _taylor2(lambda P, X: H.nu(P, theta_c + X, p_hat), rp, rq, order - 2)
        a = np.arange(order - 1)
        tay = tay * (delta * tau) ** a[:, None] * (tau / delta) ** a[None, :]
        nu_c[: order - 1, : order - 1] += tay
    K = K + Poly2(nu_c, order) * Poly2.monomial(2, 0, order, (delta * tau) ** 2 / eps)
    return K, E_c


# ---------------------------------------------------------------------------
# the normalization core
# ---------------------------------------------------------------------------

def _normalize_diag(K, ghat, s, order, kernel_gauge=0.0):
    """Kill non-resonant zeta^h w^k terms degree by degree.

    K has quadratic part 2 ghat zeta w.  kernel_gauge adds a resonant
    (zeta w)^2 component to the degree-4 generator; the resulting transform
    differs but the normal form must not, which the tests exploit.
    Returns (K_nf, U, V) with (U, V) the polynomial map from normal-form
    variables to the input variables.
    """
    if ghat == 0.0:
        raise SmallDivisorZero("vanishing quadratic coefficient g")
    dtype = complex if (np.iscomplexobj(K.c) or np.iscomplexobj(np.asarray(s))) else float
    if K.c.dtype != dtype:
        K = Poly2(K.c.astype(dtype), order)
    U = Poly2.monomial(1, 0, order, dtype(1.0))
    V = Poly2.monomial(0, 1, order, dtype(1.0))
    scale = max(K.max_abs(), 1.0)
    for d in range(3, order + 1):
        chi = Poly2.zeros(order, dtype)
        for h in range(d + 1):
            k = d - h
            if h != k and K.c[h, k] != 0.0:
                chi.c[h, k] = K.c[h, k] / (2.0 * s * ghat * (k - h))
        if d == 4 and kernel_gauge != 0.0:
            chi.c[2, 2] = dtype(kernel_gauge)
        K = exp_lie(chi, K, s)
        U = exp_lie(chi, U, s)
        V = exp_lie(chi, V, s)
        left = K.degree_part(d)
        left.c[np.arange(order + 1)[:, None] == np.arange(order + 1)[None, :]] = 0.0
        if left.max_abs() > 1e-12 * scale:
            raise ResidualTooLarge(
                f"degree-{d} non-resonant remainder {left.max_abs():.3e}")
    return K, U, V


# ---------------------------------------------------------------------------
# public data types
# ---------------------------------------------------------------------------

@dataclass
class NormalFormData:
    kind: str                # "hyperbolic" | "elliptic"
    theta_c: float
    E_c: float
    lambda_lin: float
    delta: float
    g: float
    R_coeffs: np.ndarray     # coefficients of R(z) = sum R_coeffs[h] z^h
    order: int
    eps: float
    residual: float = 0.0
    radius: float = 0.0      # scaled polydisk radius certified by the probe

    def R(self, z):
        return npoly.polyval(z, self.R_coeffs)

    def dR(self, z):
        return npoly.polyval(z, npoly.polyder(self.R_coeffs))


@dataclass
class TransformSeries:
    """The (p1, q1)-block of the normalizing transformation.

    p1 = delta (y1 + eps^(1/4) a1(y1/eps^(1/4), x1/eps^(1/4))) and
    q1 = theta_c + (x1 + eps^(1/4) a2(...))/delta, with a1, a2 at least
    quadratic; coefficients are stored in the scaled variables.
    """
    a1: np.ndarray
    a2: np.ndarray
    delta: float
    theta_c: float
    eps: float
    order: int

    def scaled_map(self, yt, xt):
        Y = yt + npoly.polyval2d(yt, xt, self.a1)
        X = xt + npoly.polyval2d(yt, xt, self.a2)
        return Y, X

    def to_phase(self, y1, x1):
        tau = self.eps ** 0.25
        Y, X = self.scaled_map(np.asarray(y1) / tau, np.asarray(x1) / tau)
        return self.delta * tau * Y, self.theta_c + tau * X / self.delta

    def jacobian_det(self, y1, x1):
        """det d(p1, q1)/d(y1, x1); equals 1 for an exact symplectic map."""
        tau = self.eps ** 0.25
        yt, xt = np.asarray(y1) / tau, np.asarray(x1) / tau
        a1u = npoly.polyval2d(yt, xt, _polyder2(self.a1, 0))
        a1v = npoly.polyval2d(yt, xt, _polyder2(self.a1, 1))
        a2u = npoly.polyval2d(yt, xt, _polyder2(self.a2, 0))
        a2v = npoly.polyval2d(yt, xt, _polyder2(self.a2, 1))
        return (1.0 + a1u) * (1.0 + a2v) - a1v * a2u


def _polyder2(c, axis):
    d = np.arange(c.shape[axis])
    out = np.moveaxis(np.moveaxis(c, axis, 0) * d[:, None], 0, axis)
    return np.roll(out, -1, axis=axis)


# ---------------------------------------------------------------------------
# the full normalization pipeline
# ---------------------------------------------------------------------------

SQ2 = math.sqrt(2.0)


def birkhoff_normalize(H, critical_index, p_hat=(), order=DEFAULT_ORDER,
                       tol_nf=TOL_NF):
    """Normal form and transformation at critical point `critical_index`.

    Returns (NormalFormData, TransformSeries).  The residual sup |H o Phi -
    normal form| must come out below tol_nf * eps on one of the probed
    polydisk radii; the largest passing radius is the certified one and is
    stored with its residual (the domain constants of the construction are
    existential, so the effective radius is measured, not assumed).
    """
    if not 2 <= order <= MAX_ORDER:
        raise OrderViolation(f"normal form order {order} outside [2, {MAX_ORDER}]")
    geom = _geometry(H, tuple(p_hat))
    j = critical_index % (2 * geom.N)
    kind = "hyperbolic" if j % 2 == 0 else "elliptic"
    lam, delta, g = local_quadratic_data(H, critical_index, p_hat)
    theta_c, E_c = _polished_critical(geom, critical_index)
    eps = H.chars.eps
    ghat = g / math.sqrt(eps)

    K, E_c = _scaled_taylor(H, p_hat, theta_c, delta, order)
    if abs(K.c[0, 1]) > 1e-8 * ghat:
        raise DegenerateHessian(f"residual linear term {K.c[0, 1]:.3e} after polish")
    K.c[0, 1] = 0.0
    sgn = -1.0 if kind == "hyperbolic" else 1.0
    gsym = 0.5 * (K.c[2, 0] + sgn * K.c[0, 2])
    if abs(K.c[2, 0] - gsym) > 1e-8 * ghat or abs(gsym - ghat) > 1e-8 * ghat:
        raise DegenerateHessian(
            f"quadratic part ({K.c[2, 0]:.6g}, {K.c[0, 2]:.6g}) is not g (Y^2 -+ X^2)")
    K.c[2, 0], K.c[0, 2] = gsym, sgn * gsym

    # pass to the diagonalizing variables, normalize, and come back
    if kind == "hyperbolic":
        s = 1.0
        Kd = K.compose_linear(1 / SQ2, 1 / SQ2, -1 / SQ2, 1 / SQ2)
    else:
        s = 1j
        Kd = K.compose_linear(1 / SQ2, 1 / SQ2, 1j / SQ2, -1j / SQ2)
    Knf, U, V = _normalize_diag(Kd, gsym, s, order)

    hh = np.arange(order // 2 + 1)
    b = Knf.c[hh, hh]
    if np.max(np.abs(np.imag(b))) > 1e-10 * max(ghat, 1.0):
        raise ResidualTooLarge("resonant coefficients acquired imaginary parts")
    b = np.real(b)
    if abs(b[0]) > 1e-12 * max(ghat, 1.0) or abs(b[1] - 2.0 * gsym) > 1e-9 * ghat:
        raise ResidualTooLarge("normalization moved the constant or quadratic term")
    R_coeffs = np.zeros(order // 2 + 1)
    R_coeffs[2:] = b[2:] / 2.0 ** hh[2:]

    if kind == "hyperbolic":
        Ut = U.compose_linear(1 / SQ2, -1 / SQ2, 1 / SQ2, 1 / SQ2)
        Vt = V.compose_linear(1 / SQ2, -1 / SQ2, 1 / SQ2, 1 / SQ2)
        Ymap = (1 / SQ2) * (Ut + Vt)
        Xmap = (1 / SQ2) * (Vt - Ut)
    else:
        Ut = U.compose_linear(1 / SQ2, -1j / SQ2, 1 / SQ2, 1j / SQ2)
        Vt = V.compose_linear(1 / SQ2, -1j / SQ2, 1 / SQ2, 1j / SQ2)
        Ymap = (1 / SQ2) * (Ut + Vt)
        Xmap = (1j / SQ2) * (Ut - Vt)
    a1 = Ymap - Poly2.monomial(1, 0, order, Ymap.c.dtype.type(1.0))
    a2 = Xmap - Poly2.monomial(0, 1, order, Xmap.c.dtype.type(1.0))
    for a in (a1, a2):
        if np.max(np.abs(np.imag(a.c))) > 1e-10:
            raise ResidualTooLarge("transform series is not real")
        if max(abs(a.c[0, 0]), abs(a.c[1, 0]), abs(a.c[0, 1])) > 1e-10:
            raise ResidualTooLarge("transform series is not tangent to the identity")
        a.c[0, 0] = a.c[1, 0] = a.c[0, 1] = 0.0

    nf = NormalFormData(kind, theta_c, E_c, lam, delta, g, R_coeffs, order, eps)
    ts = TransformSeries(np.real(a1.c), np.real(a2.c), delta, theta_c, eps, order)
    for r in RADII_PROBED:
        res = measure_residual(H, nf, ts, p_hat, r)
        if res <= tol_nf * eps:
            nf.radius, nf.residual = float(r), res
            break
    else:
        raise ResidualTooLarge(
            f"normal form residual {res:.3e} > {tol_nf:g} eps even at "
            f"radius {RADII_PROBED[-1]:.3g}")
    return nf, ts


def measure_residual(H, nf, ts, p_hat=(), radius=PROBE_RADIUS, n=10):
    """sup |H o Phi - normal form| on an n x n grid of the scaled polydisk."""
    tau = nf.eps ** 0.25
    sgn = -1.0 if nf.kind == "hyperbolic" else 1.0
    grid = radius * tau * np.linspace(-1.0, 1.0, n)
    worst = 0.0
    for y1 in grid:
        for x1 in grid:
            p1, q1 = ts.to_phase(y1, x1)
            u = (y1 * y1 + sgn * x1 * x1) / math.sqrt(nf.eps)
            model = nf.E_c + nf.g * (y1 * y1 + sgn * x1 * x1) + nf.eps * nf.R(u)
            worst = max(worst, abs(float(H(float(p1), float(q1), p_hat)) - model))
    return worst


# ---------------------------------------------------------------------------
# coordinate ladders on top of the normal form
# ---------------------------------------------------------------------------

def invert_energy_J(nf, z):
    """Solve ghat J - R(-J) = z by Newton; returns the dimensionless J_hp.

    The seed is the leading-order solution z/ghat, so the result carries the
    form (sqrt(eps)/g) z (1 + z F(z)) automatically.  Works for complex z.
    The argument of R is kept inside the certified polydisk (|J| <= 2 radius^2).
    """
    ghat = nf.g / math.sqrt(nf.eps)
    J = z / ghat
    cap = 2.0 * max(nf.radius, PROBE_RADIUS) ** 2
    for _ in range(NEWTON_MAX_J):
        if abs(J) > cap:
            raise OutOfRadius(
                f"|J| = {abs(J):.3g} leaves the certified polydisk (cap {cap:.3g})")
        f = ghat * J - nf.R(-J) - z
        if abs(f) <= NEWTON_TOL_J * max(1.0, abs(z)):
            return J
        J = J - f / (ghat + nf.dR(-J))
    raise NewtonDiverged(f"J-inversion stalled at residual {abs(f):.3e} for z = {z}")


def elliptic_action_energy(nf, I1):
    """E(I1) = E_c + 2 g I1 + eps R(2 I1/sqrt(eps)) at an elliptic point."""
    if nf.kind != "elliptic":
        raise BranchViolation("action-energy map is defined at elliptic points only")
    rt = math.sqrt(nf.eps)
    if abs(I1) > max(nf.radius, PROBE_RADIUS) ** 2 * rt:
        raise OutOfRadius(f"I1 = {I1:.3g} outside the certified action radius")
    return nf.E_c + 2.0 * nf.g * I1 + nf.eps * nf.R(2.0 * I1 / rt)


def frequency_w(nf, E):
    """w(E) = 2 (g + sqrt(eps) R'(J/sqrt(eps))) on the energy-E hyperbola."""
    z = (nf.E_c - E) / nf.eps
    J_hp = invert_energy_J(nf, z)
    return 2.0 * (nf.g + math.sqrt(nf.eps) * nf.dR(-J_hp))


def energy_time_coords(nf, E, t):
    """(y1, x1) of the point at internal time t on the energy-E hyperbola.

    y1 = sqrt(-J) sinh(w t) and x1 = sqrt(-J + y1^2), where J = y1^2 - x1^2
    is the (negative, for E below E_c) invariant of the level set and w the
    frequency read off the Hamilton equations of the normal form.
    """
    if nf.kind != "hyperbolic":
        raise BranchViolation("energy-time coordinates live at hyperbolic points")
    z = (nf.E_c - E) / nf.eps
    J_hp = invert_energy_J(nf, z)
    mJ = math.sqrt(nf.eps) * J_hp          # -J(E)
    if np.real(mJ) <= 0.0:
        raise BranchViolation(f"-J(E) = {mJ:.3g} not in the right half-plane")
    w = 2.0 * (nf.g + math.sqrt(nf.eps) * nf.dR(-J_hp))
    y1 = np.sqrt(mJ) * np.sinh(w * t)
    x1 = np.sqrt(mJ + y1 * y1)
    return y1, x1


def time_of_y1(nf, E, y1):
    """Inverse of energy_time_coords in t, via arctanh(y1/x1)."""
    z = (nf.E_c - E) / nf.eps
    mJ = math.sqrt(nf.eps) * invert_energy_J(nf, z)
    w = frequency_w(nf, E)
    return np.arctanh(y1 / np.sqrt(mJ + y1 * y1)) / w


def nf_hamiltonian(nf):
    """H_hp as a callable (y1, x1) -> E, with its Hamilton partials.

    Returns (H, dHdy, dHdx); the flow convention is x1' = dH/dy1,
    y1' = -dH/dx1, matching the (p1, q1) = (momentum, angle) pairing.
    """
    sgn = -1.0 if nf.kind == "hyperbolic" else 1.0
    rt = math.sqrt(nf.eps)

    def u_of(y1, x1):
        return y1 * y1 + sgn * x1 * x1

    def H(y1, x1):
        u = u_of(y1, x1)
        return nf.E_c + nf.g * u + nf.eps * nf.R(u / rt)

    def dHdy(y1, x1):
        return 2.0 * y1 * (nf.g + rt * nf.dR(u_of(y1, x1) / rt))

    def dHdx(y1, x1):
        return 2.0 * sgn * x1 * (nf.g + rt * nf.dR(u_of(y1, x1) / rt))

    return H, dHdy, dHdx


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def normal_form_to_dict(nf):
    return {
        "kind": nf.kind,
        "theta_c": nf.theta_c,
        "E_c": nf.E_c,
        "lambda": nf.lambda_lin,
        "g": nf.g,
        "delta": nf.delta,
        "R": [float(c) for c in nf.R_coeffs],
        "order": nf.order,
        "eps": nf.eps,
        "residual": nf.residual,
        "radius": nf.radius,
    }


def normal_form_from_dict(d):
    return NormalFormData(
        d["kind"], float(d["theta_c"]), float(d["E_c"]), float(d["lambda"]),
        float(d["delta"]), float(d["g"]), np.asarray(d["R"], dtype=float),
        int(d["order"]), float(d["eps"]), float(d.get("residual", 0.0)),
        float(d.get("radius", 0.0)))


def normal_form_json(nf, indent=2):
    return json.dumps(normal_form_to_dict(nf), indent=indent)
