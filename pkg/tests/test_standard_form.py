"""Standard-form construction, validation, reduction, and continuation.

The reduction tests lean on cases with closed forms: a bare quadratic kinetic
term (everything trivial), a translated one (u picks up the shift), and a
cubic whose order-two Taylor remainder gives nu(p, q) = p exactly.  The
continuation tests use the shifted cosine eps(cos + mu sin), whose perturbed
criticals are arctan(mu) and pi + arctan(mu) with energies -+ eps sqrt(1+mu^2).
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liouville.errors import (
    BoundViolation,
    ContractionFailed,
    DegenerateHessian,
    EpsTooLarge,
    OrderViolation,
)
from liouville.potential import PeriodicPotential
from liouville.standard_form import (
    FourierTaylor,
    StandardCharacteristics,
    constant_nu_zero,
    continue_critical_points,
    kappa_of,
    make_standard_form,
    pendulum_standard_form,
    sfh_from_dict,
    sfh_to_dict,
    standardize,
    validate_standard_form,
)

COS = PeriodicPotential([0.0, 1.0])
TWO_WELL = PeriodicPotential([0.0, 1.0, 0.3])
COSH1 = np.cosh(1.0)


# ---------------------------------------------------------------------------
# construction and characteristics
# ---------------------------------------------------------------------------

def test_pendulum_defaults():
    H = pendulum_standard_form(1.0)
    ch = H.chars
    assert ch.R0 == ch.r0 == 2.0**8          # 2^8 sqrt(eps), saturating the cap
    assert ch.s0 == 1.0
    assert ch.beta == 1.0                    # morse_beta(cos) = min(1, gap 2)
    assert ch.eps == 1.0
    assert ch.mu == 0.0
    assert ch.kappa == 4.0
    assert H.nu_is_zero
    assert H(0.3, 1.0) == pytest.approx(0.09 + np.cos(1.0), rel=1e-15)


def test_pendulum_eps_scaling():
    H = pendulum_standard_form(0.04)
    assert H.chars.r0 == pytest.approx(2.0**8 * 0.2, rel=1e-15)
    assert H.chars.eps <= H.chars.r0**2 / 2**16 * (1 + 1e-12)
    assert H.chars.beta == pytest.approx(0.04, rel=1e-12)


def test_constant_nu_zero_shapes():
    assert constant_nu_zero(0.3, 1.0) == 0.0
    out = constant_nu_zero(np.linspace(-1, 1, 5), 0.0)
    assert out.shape == (5,) and not out.any()


def test_G_slice_matches_G0():
    H = pendulum_standard_form(2.0)
    P = H.G_slice()
    th = np.linspace(0.0, 2 * np.pi, 33)
    assert np.max(np.abs(P(th) - 2.0 * np.cos(th))) < 1e-13


def test_kappa_of_floor():
    # s0 = 1, R0 = r0, eps/beta = 1/2: every branch at or below the floor 4
    ch = StandardCharacteristics((), 1.0, 1.0, 1.0, 2.0, 1.0, 0.0, 4.0)
    assert kappa_of(ch) == 4.0


def test_kappa_of_strip_dominates():
    ch = StandardCharacteristics((), 1.0, 1.0, 0.1, 2.0, 1.0, 0.0, 4.0)
    assert kappa_of(ch) == 10.0


def test_kappa_of_radius_ratio_dominates():
    ch = StandardCharacteristics((), 7.0, 1.0, 1.0, 2.0, 1.0, 0.0, 4.0)
    assert kappa_of(ch) == 7.0


@given(
    s0=st.floats(0.05, 1.0),
    ratio=st.floats(1.0, 50.0),
    eb=st.floats(0.5, 50.0),
    bump=st.floats(1.0, 4.0),
)
@settings(max_examples=60, deadline=None)
def test_kappa_of_monotone(s0, ratio, eb, bump):
    base = StandardCharacteristics((), ratio, 1.0, s0, 1.0 / eb, 1.0, 0.0, 4.0)
    k = kappa_of(base)
    # non-increasing in s0, non-decreasing in R0/r0 and eps/beta
    assert kappa_of(StandardCharacteristics(
        (), ratio, 1.0, s0 / bump, 1.0 / eb, 1.0, 0.0, 4.0)) >= k
    assert kappa_of(StandardCharacteristics(
        (), ratio * bump, 1.0, s0, 1.0 / eb, 1.0, 0.0, 4.0)) >= k
    assert kappa_of(StandardCharacteristics(
        (), ratio, 1.0, s0, 1.0 / (eb * bump), 1.0, 0.0, 4.0)) >= k


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def test_validate_pendulum_clean():
    rep = validate_standard_form(pendulum_standard_form(1.0))
    assert rep.passed and all(rep.checks.values())
    assert rep.nu_sup == 0.0
    assert rep.G_dev_ratio == 0.0
    assert rep.G0_sup_real == pytest.approx(1.0, rel=1e-12)
    assert rep.G0_sup_strip == pytest.approx(COSH1, rel=1e-12)
    assert rep.beta_measured == pytest.approx(1.0, rel=1e-9)
    assert rep.kappa_expected == 4.0
    assert rep.beta_note == ""


def test_validate_measures_nu_strip_sup():
    # sup of |0.1 sin z| over |Im z| <= 1 is 0.1 cosh(1)
    H = make_standard_form(
        COS, 1.0,
        nu=lambda p1, q1, phat=(): 0.1 * np.sin(q1) + 0.0 * np.asarray(p1),
        mu=0.16)
    rep = validate_standard_form(H, grid=(512, 8, 3))
    assert rep.passed
    assert rep.nu_sup == pytest.approx(0.1 * COSH1, rel=1e-12)
    assert rep.nu_min_real_part == pytest.approx(1.0 - 0.1 * COSH1, rel=1e-12)


def test_validate_flags_oversized_eps():
    # eps = r0^2/2^10 violates the r0^2/2^16 cap and nothing else
    H = make_standard_form(COS, 1.0, r0=2.0**5)
    rep = validate_standard_form(H, grid=(128, 8, 3))
    assert not rep.passed
    failed = [k for k, v in rep.checks.items() if not v]
    assert failed == ["eps <= r0^2 / 2^16"]


def test_validate_two_well_with_declared_beta():
    # symmetric minima collide, so beta cannot be measured; a declared value
    # passes with the Morse failure carried as a note
    H = make_standard_form(TWO_WELL, 1.3, beta=1.0 / 60.0)
    rep = validate_standard_form(H, grid=(256, 8, 3))
    assert rep.passed
    assert "DistinctValueViolation" in rep.beta_note
    assert rep.G0_sup_real == pytest.approx(1.3, rel=1e-12)
    assert H.chars.kappa == pytest.approx(78.0, rel=1e-12)


def test_validate_report_lines():
    rep = validate_standard_form(pendulum_standard_form(1.0), grid=(64, 4, 3))
    text = "\n".join(rep.lines())
    assert "ok" in text and "sup|nu|" in text and "FAIL" not in text


# ---------------------------------------------------------------------------
# reduction to standard form
# ---------------------------------------------------------------------------

EPS_PERT = 2e-7          # inside the admissible range for radii (4, 1)


def _f_cos(p1, q1, phat=()):
    return np.cos(q1) + 0.0 * np.asarray(p1)


def test_standardize_quadratic_trivial():
    H, u, v, g, g0 = standardize(
        lambda p1, phat=(): p1 * p1, _f_cos, (0.0,), EPS_PERT, radii=(4.0, 1.0))
    assert g0 == pytest.approx(1.0, abs=1e-12)
    assert abs(u()) < 1e-12 and abs(v(1.3)) < 1e-12 and abs(g()) < 1e-12
    qs = np.linspace(0.0, 2 * np.pi, 9)
    for q in qs:
        # noise floor is machine eps at the scale of h on its Cauchy circle
        # (order one), not relative to the tiny eps_pert
        assert H.G(q) == pytest.approx(EPS_PERT * np.cos(q), abs=5e-15)
        assert H.G0(q) == pytest.approx(EPS_PERT * np.cos(q), abs=5e-15)
    assert abs(H.nu(0.01, 1.0)) < 1e-10
    assert H.chars.eps == pytest.approx(EPS_PERT, rel=1e-12)
    assert H.chars.mu < 1e-6


def test_standardize_translated_minimum():
    a = 0.7
    H, u, v, g, g0 = standardize(
        lambda p1, phat=(): (p1 - a) ** 2, _f_cos, (a,), EPS_PERT,
        radii=(4.0, 1.0))
    assert u() == pytest.approx(a, abs=1e-12)
    assert g0 == pytest.approx(1.0, abs=1e-12)


def test_standardize_cubic_remainder():
    # h = p^2 + p^3 about p = 0: the order-two remainder gives nu(p, q) = p
    H, u, v, g, g0 = standardize(
        lambda p1, phat=(): p1 * p1 + p1**3, _f_cos, (0.0,), EPS_PERT,
        radii=(4.0, 1.0))
    assert abs(u()) < 1e-12
    assert g0 == pytest.approx(1.0, rel=1e-12)
    for p1 in (0.02, -0.05, 0.1):
        assert H.nu(p1, 1.0) == pytest.approx(p1, rel=1e-9)
    assert validate_standard_form(H, grid=(128, 8, 3)).passed


def test_standardize_composition_residual():
    h = lambda p1, phat=(): p1 * p1 + p1**3
    H, u, v, g, g0 = standardize(h, _f_cos, (0.0,), EPS_PERT, radii=(4.0, 1.0))
    r0 = H.chars.r0
    for q1 in np.linspace(0.0, 2 * np.pi, 7):
        shift = u() + v(q1)
        for dp in np.linspace(-r0, r0, 5):
            lhs = h(shift + dp) + EPS_PERT * np.cos(q1)
            rhs = g() + g0 * H(dp, q1)
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_standardize_rejects_degenerate_hessian():
    with pytest.raises(DegenerateHessian):
        standardize(lambda p1, phat=(): p1**4, _f_cos, (0.0,), 1e-9,
                    radii=(1.0, 1.0))


def test_standardize_rejects_large_eps():
    with pytest.raises(EpsTooLarge, match="admissible"):
        standardize(lambda p1, phat=(): p1 * p1, _f_cos, (0.0,), 1e-3,
                    radii=(4.0, 1.0))


# ---------------------------------------------------------------------------
# continuation of critical points
# ---------------------------------------------------------------------------

def test_continuation_unperturbed_exact():
    cc = continue_critical_points(pendulum_standard_form(1.0))
    assert [cp.kind for cp in cc.base] == ["maximum", "minimum"]
    assert abs(cc.theta_i[0]()) < 1e-12
    assert cc.theta_i[1]() == pytest.approx(np.pi, abs=1e-12)
    assert cc.E_i[0]() == 1.0
    assert cc.E_i[1]() == -1.0


def test_continuation_shifted_cosine():
    # G = eps(cos + mu sin): criticals at arctan(mu), pi + arctan(mu)
    eps, mu = 1.0, 0.02
    H = make_standard_form(
        COS, eps,
        G=lambda q1, phat=(): eps * (np.cos(q1) + mu * np.sin(q1)), mu=0.04)
    cc = continue_critical_points(H)
    th0 = cc.theta_i[0]()
    assert th0 == pytest.approx(np.arctan(mu), abs=1e-12)
    assert cc.E_i[0]() == pytest.approx(eps * np.hypot(1.0, mu), rel=1e-12)
    assert cc.theta_i[1]() == pytest.approx(np.pi + np.arctan(mu), abs=1e-12)
    assert cc.E_i[1]() == pytest.approx(-eps * np.hypot(1.0, mu), rel=1e-12)
    # displacement bound with the declared mu, and the defining residual
    assert abs(th0) <= 2.0 * eps * 0.04 / (H.chars.beta * H.chars.s0)
    assert abs(H.G_slice().derivative()(th0)) <= 1e-12


def test_continuation_parameter_dependence():
    a = 0.01
    H = make_standard_form(
        COS, 1.0,
        G=lambda q1, phat=(): np.cos(q1) + a * phat[0] * np.sin(q1),
        mu=0.02, hat_domain=((-1.0, 1.0),))
    cc = continue_critical_points(H)
    for ph in ((-1.0,), (0.5,), (1.0,)):
        m = a * ph[0]
        assert cc.theta_i[0](ph) == pytest.approx(np.arctan(m), abs=1e-12)
        assert cc.E_i[0](ph) == pytest.approx(np.hypot(1.0, m), rel=1e-12)
        assert cc.E_i[1](ph) == pytest.approx(-np.hypot(1.0, m), rel=1e-12)


def test_continuation_displacement_bound_enforced():
    # declared mu far below the actual deviation: the theta bound must trip
    H = make_standard_form(
        COS, 1.0,
        G=lambda q1, phat=(): np.cos(q1) + 0.05 * np.sin(q1), mu=1e-6)
    with pytest.raises(BoundViolation, match="theta_i"):
        continue_critical_points(H).theta_i[0]()


def test_continuation_order_violation():
    # cos(q + 3) swaps which critical carries the max energy
    H = make_standard_form(
        COS, 1.0, G=lambda q1, phat=(): np.cos(q1 + 3.0), mu=0.9)
    with pytest.raises(OrderViolation, match="energy order"):
        continue_critical_points(H).theta_i[0]()


def test_continuation_contraction_failure():
    # G''(0) = 0 for (4 cos q - cos 2q)/3: the Newton contraction at the seed
    # has nothing to contract to
    H = make_standard_form(
        COS, 1.0,
        G=lambda q1, phat=(): (4.0 * np.cos(q1) - np.cos(2.0 * q1)) / 3.0,
        mu=0.999)
    with pytest.raises(ContractionFailed):
        continue_critical_points(H).E_i[0]()


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_sfh_roundtrip_zero_nu():
    import json

    H = pendulum_standard_form(0.25)
    d = sfh_to_dict(H)
    json.dumps(d)                      # plain JSON, no numpy scalars
    H2 = sfh_from_dict(d)
    assert H2.nu is constant_nu_zero and H2.nu_is_zero
    th = np.linspace(0.0, 2 * np.pi, 17)
    assert np.max(np.abs(H2.G0(th) - H.G0(th))) == 0.0
    for q in th:
        assert H2.G(q) == pytest.approx(H.G(q), abs=1e-15)
    assert H2.chars == H.chars


def test_sfh_roundtrip_polynomial_nu():
    H = make_standard_form(
        COS, 1.0,
        nu=lambda p1, q1, phat=(): 0.01 * np.asarray(p1) * np.sin(q1),
        mu=0.9, hat_domain=((-0.5, 0.5),))
    H2 = sfh_from_dict(sfh_to_dict(H))
    assert not H2.nu_is_zero
    for p1 in (-0.3, 0.02, 0.2):
        for q1 in np.linspace(0.0, 2 * np.pi, 9):
            assert H2.nu(p1, q1) == pytest.approx(
                0.01 * p1 * np.sin(q1), abs=1e-13)
    # exact p1-derivative handle reconstructed from the table
    assert H2.nu_p is not None
    assert H2.nu_p(0.5, 1.0) == pytest.approx(0.01 * np.sin(1.0), rel=1e-10)
    assert H2.chars.hat_domain == ((-0.5, 0.5),)


def test_fourier_taylor_evaluation():
    ft = FourierTaylor([PeriodicPotential([1.0]), PeriodicPotential([0.0, 2.0])])
    assert ft(0.5, 0.0) == pytest.approx(2.0, rel=1e-15)   # 1 + 0.5 * 2 cos 0
    assert ft.d_dp1()(9.0, 0.0) == pytest.approx(2.0, rel=1e-15)
    assert ft.sup_abs() == 2.0
