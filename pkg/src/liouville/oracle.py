"""Independent ground truth for cross-validation.

Two unrelated routes live here on purpose: complete elliptic integrals via the
arithmetic-geometric mean give pendulum actions in closed form, and a fixed-step
implicit-midpoint integrator measures periods directly from the flow. Neither
shares code with the quadrature-based action map, so agreement between the
routes is evidence, not tautology.

Conventions: the pendulum oracle refers to H = p^2 + eps*cos(q) (kinetic term
p^2, not p^2/2, matching the standard form at nu = 0), so qdot = 2p and the
harmonic frequency at the well bottom is 2g, period pi/g.
"""

from dataclasses import dataclass

import numpy as np

from .errors import OutOfWindow, StepRejected

AGM_TOL = 1e-15
AGM_MAX_ITER = 40
MIDPOINT_TOL = 1e-14
MIDPOINT_MAX_ITER = 50


@dataclass
class EllipticValues:
    m: float       # modulus squared
    K: float       # complete first kind
    E_int: float   # complete second kind


def elliptic(m):
    """Complete elliptic integrals K(m), E(m) by the arithmetic-geometric mean.

    a_{n+1} = (a_n+b_n)/2, b_{n+1} = sqrt(a_n b_n), c_{n+1} = (a_n-b_n)/2;
    K = pi/(2 a_N) and E = K (1 - sum 2^{n-1} c_n^2) with c_0 = sqrt(m).
    """
    if not 0.0 <= m < 1.0:
        raise OutOfWindow(f"modulus squared {m} outside [0, 1)")
    a, b = 1.0, np.sqrt(1.0 - m)
    c_sum = 0.5 * m          # 2^{-1} c_0^2
    pow2 = 1.0
    for _ in range(AGM_MAX_ITER):
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        pow2 *= 2.0
        c_sum += 0.5 * pow2 * c * c
        if c < AGM_TOL:
            break
    K = 0.5 * np.pi / a
    return EllipticValues(m=m, K=float(K), E_int=float(K * (1.0 - c_sum)))


def pendulum_action(E, eps, region):
    """Action of H = p^2 + eps*cos(q) from complete elliptic integrals.

    rotation (E > eps):      I = (2/pi) sqrt(E+eps) E(m),  m = 2 eps/(E+eps)
    libration (-eps<E<eps):  I = (4/pi) sqrt(2 eps) [E(m) - (1-m) K(m)],
                             m = (E+eps)/(2 eps)

    The libration form comes from substituting q = pi + 2u in the half-orbit
    integral; it is re-validated against direct quadrature in the test suite
    before anything else trusts it.
    """
    if region == "rotation":
        if E <= eps:
            raise OutOfWindow(f"E = {E} not above the separatrix energy {eps}")
        m = 2.0 * eps / (E + eps)
        ev = elliptic(m)
        return float(2.0 / np.pi * np.sqrt(E + eps) * ev.E_int)
    if region == "libration":
        if not -eps < E < eps:
            raise OutOfWindow(f"E = {E} outside the well (-{eps}, {eps})")
        m = (E + eps) / (2.0 * eps)
        ev = elliptic(m)
        return float(4.0 / np.pi * np.sqrt(2.0 * eps) * (ev.E_int - (1.0 - m) * ev.K))
    raise ValueError(f"unknown region {region!r}")


class HamiltonianSystem:
    """Hamiltonian vector field qdot = dH/dp, pdot = -dH/dq from two callables."""

    def __init__(self, dHdp, dHdq, H=None):
        self.dHdp = dHdp
        self.dHdq = dHdq
        self.H = H

    def field(self, p, q):
        return -self.dHdq(p, q), self.dHdp(p, q)


def _midpoint_step(sys, p, q, dt):
    # fixed-point iteration on the midpoint equations, explicit-Euler start
    fp, fq = sys.field(p, q)
    pm, qm = p + 0.5 * dt * fp, q + 0.5 * dt * fq
    for _ in range(MIDPOINT_MAX_ITER):
        fp, fq = sys.field(pm, qm)
        pm_new = p + 0.5 * dt * fp
        qm_new = q + 0.5 * dt * fq
        if abs(pm_new - pm) + abs(qm_new - qm) < MIDPOINT_TOL * (1.0 + abs(pm) + abs(qm)):
            return 2.0 * pm_new - p, 2.0 * qm_new - q
        pm, qm = pm_new, qm_new
    raise StepRejected(f"midpoint iteration stalled at dt={dt:g}")


def symplectic_flow(sys, z0, T, dt):
    """Fixed-step implicit-midpoint trajectory over [0, T].

    Returns (times, traj) with traj[:, 0] = p and traj[:, 1] = q. The step is
    shrunk to divide T exactly; dt must satisfy dt <= T/1000.
    """
    if dt > T / 1000.0:
        raise StepRejected(f"dt = {dt:g} too coarse for T = {T:g}")
    n = int(np.ceil(T / dt))
    dt = T / n
    traj = np.empty((n + 1, 2))
    p, q = float(z0[0]), float(z0[1])
    traj[0] = p, q
    for i in range(n):
        p, q = _midpoint_step(sys, p, q, dt)
        traj[i + 1] = p, q
    return np.linspace(0.0, T, n + 1), traj


def flow_period(sys, z0, dt, t_max, periodic_q=True):
    """First return time to the transversal through z0, from the midpoint flow.

    The section is the hyperplane through z0 normal to the initial velocity;
    the crossing g(t) = (z - z0) . f0 = 0 (upward, with z near z0) is refined
    by cubic Hermite interpolation using gdot = f(z) . f0 at the bracketing
    steps. With periodic_q the angle offset is reduced mod 2pi, so rotations
    (q advancing by 2pi per period) register their return as well.
    """
    p0, q0 = float(z0[0]), float(z0[1])
    f0 = np.array(sys.field(p0, q0))
    speed2 = float(f0 @ f0)
    if speed2 == 0.0:
        raise StepRejected("z0 is an equilibrium; no return time")
    p, q = p0, q0
    g_prev = 0.0
    gd_prev = speed2
    scale = 0.0
    t = 0.0
    n_max = int(np.ceil(t_max / dt))
    for i in range(n_max):
        p, q = _midpoint_step(sys, p, q, dt)
        t += dt
        dq = q - q0
        if periodic_q:
            dq = (dq + np.pi) % (2 * np.pi) - np.pi
        dz = np.array((p - p0, dq))
        g = float(dz @ f0)
        gd = float(np.array(sys.field(p, q)) @ f0)
        dist2 = float(dz @ dz)
        scale = max(scale, dist2)
        # require the orbit to have left the neighborhood before accepting a
        # return; 1/16 of the max squared excursion is well clear of roundoff
        if g_prev < 0.0 <= g and dist2 < scale / 16.0 and t > 10 * dt:
            # cubic Hermite root for g on [t-dt, t]
            s = _hermite_root(g_prev, gd_prev * dt, g, gd * dt)
            return t - dt + s * dt
        g_prev, gd_prev = g, gd
    raise StepRejected(f"no return within t_max = {t_max:g}")


def _hermite_root(g0, d0, g1, d1):
    """Root in [0,1] of the cubic with values g0,g1 and derivatives d0,d1."""
    # Newton on the Hermite cubic, seeded by the secant root
    s = g0 / (g0 - g1) if g0 != g1 else 0.5
    h00d = lambda s: 6 * s * s - 6 * s
    for _ in range(20):
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        val = g0 * h00 + d0 * h10 + g1 * h01 + d1 * h11
        der = g0 * (6 * s * s - 6 * s) + d0 * (3 * s * s - 4 * s + 1) \
            + g1 * (6 * s - 6 * s * s) + d1 * (3 * s * s - 2 * s)
        if der == 0.0:
            break
        s_new = s - val / der
        if abs(s_new - s) < 1e-15:
            return min(max(s_new, 0.0), 1.0)
        s = s_new
    return min(max(s, 0.0), 1.0)


def pendulum_system(eps):
    """H = p^2 + eps cos q as a HamiltonianSystem."""
    return HamiltonianSystem(
        dHdp=lambda p, q: 2.0 * p,
        dHdq=lambda p, q: -eps * np.sin(q),
        H=lambda p, q: p * p + eps * np.cos(q),
    )
