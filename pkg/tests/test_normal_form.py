"""Normal forms: local quadratic data, the normalization itself, and the
coordinate ladders (J-inversion, elliptic action-energy, energy-time).

The pendulum R coefficients frozen here (1/32, -sqrt(2)/1024, 5/32768) came
out of the truncated algebra and were cross-validated against the quadrature
inverse of the action map and against a symplectic integration of the normal
form flow before being frozen.
"""

import math

import numpy as np
import pytest

from liouville import golden
from liouville import normal_form as NF
from liouville.action_map import energy_of_action
from liouville.errors import (
    BoundViolation,
    BranchViolation,
    OrderViolation,
    OutOfRadius,
    ResidualTooLarge,
    SmallDivisorZero,
)
from liouville.oracle import HamiltonianSystem, symplectic_flow
from liouville.potential import PeriodicPotential
from liouville.standard_form import make_standard_form, pendulum_standard_form

PEND_R2 = 1.0 / 32.0
PEND_R3 = -math.sqrt(2.0) / 1024.0
PEND_R4 = 5.0 / 32768.0


@pytest.fixture(scope="module")
def pend():
    return pendulum_standard_form(1.0)


@pytest.fixture(scope="module")
def nf_top(pend):
    return NF.birkhoff_normalize(pend, 0, order=6)


@pytest.fixture(scope="module")
def nf_bottom(pend):
    return NF.birkhoff_normalize(pend, 1, order=6)


@pytest.fixture(scope="module")
def twowell():
    G = PeriodicPotential([0.0, 1.0, 0.3])
    return make_standard_form(G, 1.3, beta=1.0 / 60.0)


# ---------------------------------------------------------------------------
# polynomial algebra
# ---------------------------------------------------------------------------

def test_poly2_mul_and_eval():
    p = NF.Poly2.monomial(1, 0, 6) + NF.Poly2.monomial(0, 1, 6, 2.0)
    q = p * p
    assert q.c[2, 0] == 1.0 and q.c[1, 1] == 4.0 and q.c[0, 2] == 4.0
    u, v = 0.3, -0.2
    assert q(u, v) == pytest.approx((u + 2 * v) ** 2, rel=1e-15)


def test_poly2_truncation_is_enforced():
    p = NF.Poly2.monomial(2, 1, 3)
    q = p * p                       # degree 6 > 3 truncates to zero
    assert q.is_zero()


def test_poly2_diff():
    p = NF.Poly2.monomial(3, 2, 6, 5.0)
    assert p.diff(0).c[2, 2] == 15.0
    assert p.diff(1).c[3, 1] == 10.0


def test_bracket_antisymmetry_and_canonical_pair():
    rng = np.random.default_rng(3)
    f = NF.Poly2(rng.standard_normal((7, 7)), 6)
    g = NF.Poly2(rng.standard_normal((7, 7)), 6)
    anti = NF.bracket(f, g) + NF.bracket(g, f)
    assert anti.max_abs() < 1e-12
    u = NF.Poly2.monomial(1, 0, 6)
    v = NF.Poly2.monomial(0, 1, 6)
    assert (NF.bracket(u, v) - NF.Poly2.monomial(0, 0, 6)).max_abs() == 0.0


def test_compose_linear_matches_pointwise():
    rng = np.random.default_rng(4)
    p = NF.Poly2(rng.standard_normal((5, 5)), 4)
    a, b, c, d = 0.7, -0.3, 0.4, 1.1
    q = p.compose_linear(a, b, c, d)
    for u, v in [(0.2, 0.1), (-0.3, 0.25)]:
        assert q(u, v) == pytest.approx(p(a * u + b * v, c * u + d * v), rel=1e-13)


def test_cauchy_taylor_recovers_known_coefficients():
    f = lambda p, x: np.exp(p) * np.cos(x)
    c = NF._taylor2(f, 0.5, 0.5, 4)
    for a in range(5):
        for b in range(5):
            want = (1.0 / math.factorial(a)) * (
                0.0 if b % 2 else (-1.0) ** (b // 2) / math.factorial(b))
            assert c[a, b] == pytest.approx(want, abs=1e-13)


# ---------------------------------------------------------------------------
# local quadratic data
# ---------------------------------------------------------------------------

def test_pendulum_quadratic_data(pend):
    lam, delta, g = NF.local_quadratic_data(pend, 0)
    assert lam == pytest.approx(math.sqrt(0.5), rel=1e-14)
    assert g == pytest.approx(math.sqrt(0.5), rel=1e-14)
    assert delta == pytest.approx(0.5 ** 0.25, rel=1e-14)


def test_quadratic_data_scales_with_eps():
    H = pendulum_standard_form(0.01)
    lam, delta, g = NF.local_quadratic_data(H, 0)
    assert lam == pytest.approx(math.sqrt(0.005), rel=1e-13)
    assert delta == pytest.approx(math.sqrt(lam), rel=1e-13)


def test_exact_saddle_curvature_recovers_its_frequency():
    # G = 2 g0^2 cos has G''(0) = -2 g0^2, the curvature of p1^2 - g0^2 q1^2
    g0 = 0.35
    H = make_standard_form(PeriodicPotential([0.0, 2 * g0 ** 2]), 2 * g0 ** 2)
    lam, delta, g = NF.local_quadratic_data(H, 0)
    assert lam == pytest.approx(g0, rel=1e-14)
    assert g == pytest.approx(g0, rel=1e-14)
    assert delta == pytest.approx(math.sqrt(g0), rel=1e-14)


def test_constant_nu_rescales_g():
    c = 0.25
    H = make_standard_form(
        PeriodicPotential([0.0, 1.0]), 1.0,
        nu=lambda p1, q1, phat=(): c + 0.0 * np.asarray(p1),
        nu_p=lambda p1, q1, phat=(): 0.0 * np.asarray(p1))
    lam, delta, g = NF.local_quadratic_data(H, 0)
    assert g == pytest.approx(math.sqrt(1.0 + c) * lam, rel=1e-14)
    assert delta == pytest.approx(math.sqrt(lam) / (1.0 + c) ** 0.25, rel=1e-14)


def test_quadratic_data_characteristic_bounds(twowell):
    chars = twowell.chars
    for idx in range(4):
        lam, delta, g = NF.local_quadratic_data(twowell, idx)
        assert (2.0 / 3.0) * math.sqrt(chars.beta) <= lam <= 2 * chars.kappa * math.sqrt(chars.eps)
        assert math.sqrt(chars.beta) / 3.0 <= g <= 4 * chars.kappa * math.sqrt(chars.eps)


# ---------------------------------------------------------------------------
# the normal form itself
# ---------------------------------------------------------------------------

def test_pendulum_top_normal_form(nf_top):
    nf, ts = nf_top
    assert nf.kind == "hyperbolic"
    assert nf.theta_c == pytest.approx(0.0, abs=1e-12)
    assert nf.E_c == pytest.approx(1.0, rel=1e-12)
    assert nf.R_coeffs[0] == 0.0 and nf.R_coeffs[1] == 0.0
    assert nf.R_coeffs[2] == pytest.approx(PEND_R2, abs=1e-13)
    assert nf.R_coeffs[3] == pytest.approx(PEND_R3, abs=1e-13)
    assert nf.residual <= NF.TOL_NF * nf.eps
    assert nf.radius >= 0.2


def test_pendulum_bottom_mirrors_top(nf_top, nf_bottom):
    nf_h = nf_top[0]
    nf_e = nf_bottom[0]
    assert nf_e.kind == "elliptic"
    assert nf_e.E_c == pytest.approx(-1.0, rel=1e-12)
    assert nf_e.g == pytest.approx(nf_h.g, rel=1e-13)
    assert nf_e.R_coeffs[2] == pytest.approx(-PEND_R2, abs=1e-13)
    assert nf_e.R_coeffs[3] == pytest.approx(PEND_R3, abs=1e-13)


def test_higher_order_extends_the_tail(pend):
    nf, _ = NF.birkhoff_normalize(pend, 0, order=8)
    assert nf.R_coeffs[2] == pytest.approx(PEND_R2, abs=1e-13)
    assert nf.R_coeffs[3] == pytest.approx(PEND_R3, abs=1e-13)
    assert nf.R_coeffs[4] == pytest.approx(PEND_R4, abs=1e-13)


def test_dimensionless_coefficients_are_eps_invariant():
    nf_small, _ = NF.birkhoff_normalize(pendulum_standard_form(0.01), 0, order=6)
    assert nf_small.R_coeffs[2] == pytest.approx(PEND_R2, abs=1e-12)
    assert nf_small.R_coeffs[3] == pytest.approx(PEND_R3, abs=1e-12)
    assert nf_small.residual <= NF.TOL_NF * 0.01


def test_order_cap():
    with pytest.raises(OrderViolation):
        NF.birkhoff_normalize(pendulum_standard_form(1.0), 0, order=11)


def test_normal_form_invariance_on_level_sets(pend, nf_top):
    # H o Phi must depend on y1^2 - x1^2 only: constant along hyperbolas
    nf, ts = nf_top
    rng = np.random.default_rng(7)
    for c in (0.01, -0.02):
        th = rng.uniform(0.2, 1.2, 40)
        r = math.sqrt(abs(c))
        if c > 0:
            y, x = r * np.cosh(th), r * np.sinh(th)
        else:
            y, x = r * np.sinh(th), r * np.cosh(th)
        keep = (np.abs(y) < 0.3) & (np.abs(x) < 0.3)
        vals = [float(pend(*map(float, ts.to_phase(yy, xx)), ()))
                for yy, xx in zip(y[keep], x[keep])]
        assert np.ptp(vals) <= NF.TOL_NF * nf.eps


def test_symplecticity_of_the_transform(nf_top):
    _, ts = nf_top
    g = np.linspace(-0.02, 0.02, 10)
    Y, X = np.meshgrid(g, g)
    det = ts.jacobian_det(Y, X)
    assert np.max(np.abs(det - 1.0)) < 1e-10


def test_transform_series_is_at_least_quadratic(nf_top, nf_bottom):
    for _, ts in (nf_top, nf_bottom):
        for a in (ts.a1, ts.a2):
            assert a[0, 0] == 0.0 and a[1, 0] == 0.0 and a[0, 1] == 0.0
            assert np.max(np.abs(a)) < 5.0


def test_two_well_normal_forms(twowell):
    expected = {
        0: ("hyperbolic", 1.3, math.sqrt(1.1)),
        1: ("elliptic", -43.0 / 60.0, math.sqrt(0.5 * (5.0 / 6.0 - 1.2 * 14.0 / 36.0))),
        2: ("hyperbolic", -0.7, math.sqrt(0.1)),
        3: ("elliptic", -43.0 / 60.0, None),
    }
    for idx, (kind, E_c, g) in expected.items():
        nf, ts = NF.birkhoff_normalize(twowell, idx, order=6)
        assert nf.kind == kind
        assert nf.E_c == pytest.approx(E_c, abs=1e-11)
        if g is not None:
            assert nf.g == pytest.approx(g, rel=1e-11)
        assert nf.residual <= NF.TOL_NF * 1.3
        assert nf.radius >= 0.04


def test_adjacent_elliptic_and_hyperbolic_share_formulas(twowell):
    # both sides of the same well: the formulas, not the values, must agree
    for idx in (1, 2):
        lam, delta, g = NF.local_quadratic_data(twowell, idx)
        nf, _ = NF.birkhoff_normalize(twowell, idx)
        assert nf.g == pytest.approx(g, rel=1e-12)
        assert nf.lambda_lin == pytest.approx(lam, rel=1e-12)
        assert nf.delta == pytest.approx(delta, rel=1e-12)


def test_perturbed_nu_drift_is_linear_in_mu(pend, nf_top):
    nf0 = nf_top[0]
    C = golden.get("C_nf_drift")
    G0 = PeriodicPotential([0.0, 1.0])
    for mu in (1e-3, 1e-2):
        Hm = make_standard_form(
            G0, 1.0,
            nu=lambda p1, q1, phat=(), m=mu: m * np.cos(q1) + 0.0 * np.asarray(p1),
            nu_p=lambda p1, q1, phat=(): 0.0 * np.asarray(p1), mu=mu)
        nfm, _ = NF.birkhoff_normalize(Hm, 0, order=6)
        assert abs(nfm.g - nf0.g) <= C * math.sqrt(1.0) * mu
        assert np.max(np.abs(nfm.R_coeffs - nf0.R_coeffs)) <= C * mu


def test_p1_dependent_nu_normalizes(nf_top):
    mu = 1e-2
    G0 = PeriodicPotential([0.0, 1.0])
    H = make_standard_form(
        G0, 1.0,
        nu=lambda p1, q1, phat=(), m=mu: m * (np.cos(q1) + 0.1 * p1 * np.sin(q1) + 0.05 * p1 ** 2),
        nu_p=lambda p1, q1, phat=(), m=mu: m * (0.1 * np.sin(q1) + 0.1 * p1), mu=mu)
    nf, ts = NF.birkhoff_normalize(H, 0, order=6)
    assert nf.residual <= NF.TOL_NF
    assert abs(nf.g - nf_top[0].g) <= 0.5 * mu


# ---------------------------------------------------------------------------
# uniqueness of the truncated normal form
# ---------------------------------------------------------------------------

def _diagonalized_pendulum(order=6):
    H = pendulum_standard_form(1.0)
    lam, delta, g = NF.local_quadratic_data(H, 0)
    K, _ = NF._scaled_taylor(H, (), 0.0, delta, order)
    K.c[0, 1] = 0.0
    s = 1.0 / NF.SQ2
    return K.compose_linear(s, s, -s, s), g


def test_resonant_gauge_does_not_move_the_normal_form():
    Kd, g = _diagonalized_pendulum()
    K1, U1, _ = NF._normalize_diag(Kd, g, 1.0, 6)
    K2, U2, _ = NF._normalize_diag(Kd, g, 1.0, 6, kernel_gauge=0.37)
    hh = np.arange(4)
    assert np.max(np.abs(K1.c[hh, hh] - K2.c[hh, hh])) < 1e-12
    assert np.max(np.abs(U1.c - U2.c)) > 0.1      # the transforms do differ


def test_hyperbolic_boost_does_not_move_the_normal_form():
    H = pendulum_standard_form(1.0)
    lam, delta, g = NF.local_quadratic_data(H, 0)
    K, _ = NF._scaled_taylor(H, (), 0.0, delta, 6)
    K.c[0, 1] = 0.0
    a, b = math.cosh(0.3), math.sinh(0.3)
    Kb = K.compose_linear(a, b, b, a)             # preserves y^2 - x^2
    s = 1.0 / NF.SQ2
    K1, _, _ = NF._normalize_diag(K.compose_linear(s, s, -s, s), g, 1.0, 6)
    K2, _, _ = NF._normalize_diag(Kb.compose_linear(s, s, -s, s), g, 1.0, 6)
    hh = np.arange(4)
    assert np.max(np.abs(K1.c[hh, hh] - K2.c[hh, hh])) < 1e-12


def test_pure_quadratic_input_is_already_normal():
    K = NF.Poly2.zeros(6)
    K.c[1, 1] = 0.7
    Knf, U, V = NF._normalize_diag(K, 0.35, 1.0, 6)
    assert (Knf - K).max_abs() == 0.0
    assert np.count_nonzero(U.c) == 1 and U.c[1, 0] == 1.0
    assert np.count_nonzero(V.c) == 1 and V.c[0, 1] == 1.0


def test_zero_frequency_is_rejected():
    with pytest.raises(SmallDivisorZero):
        NF._normalize_diag(NF.Poly2.zeros(6), 0.0, 1.0, 6)


# ---------------------------------------------------------------------------
# J-inversion
# ---------------------------------------------------------------------------

def test_invert_energy_J_residual(nf_top):
    nf = nf_top[0]
    ghat = nf.g / math.sqrt(nf.eps)
    for z in (0.05, 0.15, 1e-4, 0.03 + 0.02j):
        J = NF.invert_energy_J(nf, z)
        assert abs(ghat * J - nf.R(-J) - z) <= 1e-13 * max(1.0, abs(z))


def test_invert_energy_J_trivial_cases(nf_top):
    nf = nf_top[0]
    assert NF.invert_energy_J(nf, 0.0) == 0.0
    flat = NF.NormalFormData("hyperbolic", 0.0, 1.0, nf.lambda_lin, nf.delta,
                             nf.g, np.zeros(4), 6, 1.0, 0.0, 0.3)
    z = 0.07
    assert NF.invert_energy_J(flat, z) == pytest.approx(z * math.sqrt(1.0) / nf.g, rel=1e-14)


def test_invert_energy_J_leaves_certified_disk(nf_top):
    with pytest.raises(OutOfRadius):
        NF.invert_energy_J(nf_top[0], 0.9)


# ---------------------------------------------------------------------------
# elliptic action-energy map
# ---------------------------------------------------------------------------

def test_elliptic_energy_matches_quadrature_inverse(pend, nf_bottom):
    nf = nf_bottom[0]
    for I1 in (0.005, 0.01):
        E_nf = NF.elliptic_action_energy(nf, I1)
        E_q = energy_of_action(1, I1, (), pend)
        assert abs(E_nf - E_q) <= 1e-8


def test_elliptic_energy_trivia(nf_bottom):
    nf = nf_bottom[0]
    assert NF.elliptic_action_energy(nf, 0.0) == nf.E_c
    flat = NF.NormalFormData("elliptic", math.pi, -1.0, nf.lambda_lin, nf.delta,
                             nf.g, np.zeros(4), 6, 1.0, 0.0, 0.3)
    I1 = 0.01
    assert NF.elliptic_action_energy(flat, I1) == -1.0 + 2.0 * nf.g * I1


def test_elliptic_energy_guards(nf_top, nf_bottom):
    with pytest.raises(BranchViolation):
        NF.elliptic_action_energy(nf_top[0], 0.01)
    with pytest.raises(OutOfRadius):
        NF.elliptic_action_energy(nf_bottom[0], 5.0)


# ---------------------------------------------------------------------------
# energy-time coordinates
# ---------------------------------------------------------------------------

def test_energy_time_on_shell_and_round_trip(nf_top):
    nf = nf_top[0]
    Hh, _, _ = NF.nf_hamiltonian(nf)
    E = nf.E_c - 0.05
    for t in (0.0, 0.3, -0.7):
        y1, x1 = NF.energy_time_coords(nf, E, t)
        assert abs(Hh(y1, x1) - E) <= 1e-11
        assert abs(NF.time_of_y1(nf, E, y1) - t) <= 1e-11


def test_energy_time_at_t0(nf_top):
    nf = nf_top[0]
    E = nf.E_c - 0.03
    y1, x1 = NF.energy_time_coords(nf, E, 0.0)
    mJ = math.sqrt(nf.eps) * NF.invert_energy_J(nf, (nf.E_c - E) / nf.eps)
    assert y1 == 0.0
    assert x1 == pytest.approx(math.sqrt(mJ), rel=1e-14)


def test_energy_time_matches_symplectic_flow(nf_top):
    nf = nf_top[0]
    Hh, dHy, dHx = NF.nf_hamiltonian(nf)
    sys = HamiltonianSystem(dHdp=dHy, dHdq=dHx, H=Hh)
    E = nf.E_c - 0.05
    mJ = math.sqrt(nf.eps) * NF.invert_energy_J(nf, (nf.E_c - E) / nf.eps)
    T = 0.4
    _, traj = symplectic_flow(sys, (0.0, math.sqrt(mJ)), T, T / 4000)
    y1, x1 = NF.energy_time_coords(nf, E, T)
    assert abs(traj[-1, 0] - y1) <= 1e-8
    assert abs(traj[-1, 1] - x1) <= 1e-8


def test_flat_R_gives_pure_saddle_flow(nf_top):
    nf = nf_top[0]
    flat = NF.NormalFormData("hyperbolic", 0.0, 1.0, nf.lambda_lin, nf.delta,
                             nf.g, np.zeros(4), 6, 1.0, 0.0, 0.3)
    E, t = 1.0 - 0.04, 0.25
    y1, x1 = NF.energy_time_coords(flat, E, t)
    mJ = 0.04 / nf.g
    assert y1 == pytest.approx(math.sqrt(mJ) * math.sinh(2 * nf.g * t), rel=1e-13)


def test_energy_time_guards(nf_top, nf_bottom):
    with pytest.raises(BranchViolation):
        NF.energy_time_coords(nf_bottom[0], -1.1, 0.1)
    with pytest.raises(BranchViolation):
        NF.energy_time_coords(nf_top[0], 1.01, 0.1)   # wrong side of the saddle


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_normal_form_round_trips_through_dict(nf_top):
    nf = nf_top[0]
    back = NF.normal_form_from_dict(NF.normal_form_to_dict(nf))
    assert back.kind == nf.kind
    assert back.g == nf.g and back.E_c == nf.E_c
    assert np.array_equal(back.R_coeffs, nf.R_coeffs)
    assert back.radius == nf.radius


def test_normal_form_json_is_loadable(nf_top):
    import json
    d = json.loads(NF.normal_form_json(nf_top[0]))
    assert d["kind"] == "hyperbolic" and len(d["R"]) == 4
