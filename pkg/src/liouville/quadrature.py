"""Quadrature kernels: tanh-sinh for endpoint singularities, Gauss-Legendre panels elsewhere.

The tanh-sinh (double-exponential) map t -> tanh((pi/2) sinh t) clusters nodes
double-exponentially at the interval endpoints, which is what the
inverse-square-root turning-point singularities of the action integrands need.

Integrands are called as f(x, da, db) where da = x - a and db = b - x are
supplied in full relative precision: the node position x itself rounds to the
endpoint once the distance drops below machine epsilon relative to b - a, but
the distances stay exact down to ~1e-28, and singular integrands must be
evaluated through them.
"""

import functools

import numpy as np
from scipy.special import roots_legendre

from .errors import QuadratureTolNotMet

# t-range of the double-exponential map; phi = (pi/2) sinh(3.7) ~ 31.7, so the
# innermost node sits at fraction ~e^-63 from the endpoint and the truncated
# tail of a 1/sqrt integrand is ~e^-31.
TS_TMAX = 3.7
TS_BASE_H = 0.5
TS_MAX_LEVEL = 7
GAUSS_PANEL_ORDER = 32


@functools.lru_cache(maxsize=None)
def _ts_level(level):
    """Node data introduced at one refinement level, for t >= 0 only.

    Level 0 holds all multiples of TS_BASE_H; level n > 0 the odd multiples of
    TS_BASE_H / 2^n, so the union over levels 0..n is the full grid at step
    TS_BASE_H / 2^n.

    Returns (s_near, s_far, w) where s_near is the node's fraction of (b - a)
    measured from the nearer endpoint (computed cancellation-free as
    1/(1 + e^{2 phi})), s_far = 1 - s_near, and w is the weight without the
    step h or the interval half-width.
    """
    h = TS_BASE_H / 2**level
    if level == 0:
        t = np.arange(0.0, TS_TMAX + 0.5 * h, h)
    else:
        t = np.arange(h, TS_TMAX + 0.5 * h, 2 * h)
    phi = 0.5 * np.pi * np.sinh(t)
    s_near = 1.0 / (1.0 + np.exp(2.0 * phi))
    s_far = 1.0 - s_near
    w = 0.5 * np.pi * np.cosh(t) / np.cosh(phi) ** 2
    return s_near, s_far, w


def tanh_sinh(f, a, b, tol=1e-12, max_level=TS_MAX_LEVEL):
    """Integrate f over [a, b] with the double-exponential transformation.

    f(x, da, db) must be vectorized; da = x - a and db = b - x are exact even
    when x itself has rounded to an endpoint. Refines h by halving with full
    node reuse until successive values agree to tol (relative to max(1, |Q|)).

    Returns (value, error_estimate); raises QuadratureTolNotMet if the level
    budget is exhausted while the estimate is still far from target.
    """
    span = b - a
    half = 0.5 * span
    raw = 0.0          # sum of w*f over all nodes introduced so far, no h
    value = None
    est = np.inf
    for level in range(max_level + 1):
        s_near, s_far, w = _ts_level(level)
        # t >= 0 branch: node near b; mirrored branch: node near a
        x_hi = a + span * s_far
        x_lo = b - span * s_far
        raw += np.sum(w * f(x_hi, span * s_far, span * s_near))
        if level == 0:
            raw += np.sum(w[1:] * f(x_lo[1:], span * s_near[1:], span * s_far[1:]))
        else:
            raw += np.sum(w * f(x_lo, span * s_near, span * s_far))
        h = TS_BASE_H / 2**level
        prev = value
        value = half * h * raw
        if prev is not None:
            est = abs(value - prev)
            if est <= tol * max(1.0, abs(value)):
                return value, est
    if est > 1e3 * tol * max(1.0, abs(value)):
        raise QuadratureTolNotMet(
            f"tanh-sinh stalled at estimate {est:.3e} (target {tol:.1e})"
        )
    return value, est


def gauss_panels(f, a, b, tol=1e-12, order=GAUSS_PANEL_ORDER, max_panels=256):
    """Composite Gauss-Legendre with panel doubling for smooth integrands.

    Same f(x, da, db) signature as tanh_sinh. Doubles the panel count until
    two successive refinements agree to tol.
    """
    nodes, weights = roots_legendre(order)
    span = b - a
    value = None
    est = np.inf
    panels = 1
    while panels <= max_panels:
        edges = a + span * np.arange(panels + 1) / panels
        width = span / panels
        mids = 0.5 * (edges[:-1] + edges[1:])
        x = (mids[:, None] + 0.5 * width * nodes[None, :]).ravel()
        g = f(x, x - a, b - x)
        prev = value
        value = 0.5 * width * np.sum(weights[None, :] * g.reshape(panels, order))
        if prev is not None:
            est = abs(value - prev)
            if est <= tol * max(1.0, abs(value)):
                return value, est
        panels *= 2
    if est > 1e3 * tol * max(1.0, abs(value)):
        raise QuadratureTolNotMet(
            f"gauss panels stalled at estimate {est:.3e} (target {tol:.1e})"
        )
    return value, est


def fixed_gauss(f, a, b, order=32):
    """One Gauss-Legendre panel, no adaptivity; f takes x only.

    Used for the auxiliary parameter integrals (remainder forms of Taylor
    coefficients) where the integrand is entire and 32 nodes are far beyond
    the accuracy of everything downstream.
    """
    nodes, weights = roots_legendre(order)
    x = 0.5 * (a + b) + 0.5 * (b - a) * nodes
    vals = np.asarray(f(x))
    # contract the node axis only, so vector-valued integrands pass through
    return 0.5 * (b - a) * np.tensordot(weights, vals, axes=(0, 0))
