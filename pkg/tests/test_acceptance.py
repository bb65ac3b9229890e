"""The thirteen release criteria, one test and one verdict line each.

Each test runs the corresponding check from liouville.verify -- the same
battery `liouville verify` executes -- prints its PASS/FAIL line with the
measured numbers, and asserts the verdict.  Tolerances live with the
criteria; nothing here re-tunes them.
"""

from liouville import verify

_BY_NAME = dict(verify.CRITERIA)


def _check(name):
    res = verify._run_one(name, _BY_NAME[name])
    line = f"{'PASS' if res.passed else 'FAIL'}  {name}: {res.detail}"
    print(line)
    assert res.passed, line


def test_01_pendulum_oracle_equivalence():
    """action vs elliptic-integral oracle, rel 1e-8, 100 energies/region."""
    _check("oracle-equivalence")


def test_02_universal_representation():
    """Degree-6 log-singular fit, residual <= 1e-8 sqrt(eps), dyadic grid."""
    _check("universal-fit")


def test_03_psi0_prediction_and_scaling():
    """Fitted psi(0) = 0.112540 within 1%; sqrt(eps) scaling over 0.25/1/4."""
    _check("psi0-prediction")


def test_04_minimum_branch_analyticity():
    """|psi|, |phi(0)| <= 1e-9 sqrt(eps) at every well bottom tested."""
    _check("bottom-analytic")


def test_05_sign_table():
    """psi+ > 0 interior, psi- < 0 from above, pendulum and two-well."""
    _check("sign-table")


def test_06_derivative_bounds():
    """dI/dE floors inside/outside plus the near-separatrix |ln z| slope."""
    _check("derivative-bounds")


def test_07_perturbative_drift():
    """Scaled drift bounded and mu-linear over two decades (20%)."""
    _check("perturbative-drift")


def test_08_normal_form():
    """Quadratic saddle exact; order-6 residual <= 1e-9 eps; gauge-unique."""
    _check("normal-form")


def test_09_energy_time_coordinates():
    """(y1, x1)(E, t) vs implicit-midpoint flow, 1e-8 over |t| <= 0.5/sqrt(eps)."""
    _check("energy-time")


def test_10_convexity():
    """d2E/dI2 >= 2 outside, <= -1/4 in the cosine well, a0 ratio limit."""
    _check("convexity")


def test_11_measure_deficit():
    """deficit/(sqrt(eps) lam |log lam|) in a factor-3 band over 6 decades."""
    _check("measure-deficit")


def test_12_analyticity_window_probe():
    """Chebyshev decay radius of E(I) >= rho(lam) at lam = 1e-2..1e-4."""
    _check("window-probe")


def test_13_phase_shift_representation():
    """b recovered from cos(z + b) to 1e-8; |b|_1/4 <= 9 sqrt(tau0)."""
    _check("phase-shift")
