import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfklab.profile import (
    BaseData,
    condnec_phi_derivatives,
    flat,
    ma_marinescu_bounds,
    phi1_display_deviation,
    phi_eval,
    phi_k_derivative_closed_form,
    projective_line,
    ricci_form_components,
    scaling_map,
)


def test_base_data_validation():
    with pytest.raises(ValueError):
        BaseData(n=0, lam=0.0, beta=-1.0)
    with pytest.raises(ValueError):
        BaseData(n=1, lam=-0.5, beta=-1.0)
    with pytest.raises(ValueError):
        BaseData(n=1, lam=0.0, beta=0.5)
    assert flat(2, -1.0).lam == 0.0
    pl = projective_line(3)
    assert (pl.n, pl.lam, pl.beta) == (1, 1.0, -1.5)


# ---------------------------------------------------------------------------
# phi values
# ---------------------------------------------------------------------------


def test_phi_hand_values():
    # O(-1) at tau=2: (2*2 + 4)/(1 + 1) = 4
    assert phi_eval(projective_line(1), 2.0).phi == pytest.approx(4.0, rel=1e-14)
    # flat n=2, beta=-1 at tau=1: 2/(1+1)^2 = 0.5
    assert phi_eval(flat(2, -1.0), 1.0).phi == pytest.approx(0.5, rel=1e-14)
    # tau=0 root for any base
    for base in (flat(1, -1.0), flat(3, -2.5), projective_line(4)):
        assert phi_eval(base, 0.0).phi == 0.0


def test_projective_specialization_identity():
    rng = np.random.default_rng(11)
    taus = rng.uniform(0.0, 50.0, size=200)
    for k in (1, 2, 3, 5, 8):
        base = projective_line(k)
        for tau in taus:
            want = (2 * tau + tau * tau) / (1 + 0.5 * k * tau)
            got = phi_eval(base, tau).phi
            assert got == pytest.approx(want, rel=1e-12, abs=1e-13)


def test_negative_tau_rejected():
    with pytest.raises(ValueError):
        phi_eval(flat(1, -1.0), -0.1)


@settings(max_examples=80, deadline=None)
@given(
    st.integers(1, 4),
    st.floats(0.0, 3.0),
    st.floats(-4.0, -0.1),
    st.floats(0.01, 30.0),
)
def test_phi_positive(n, lam, beta, tau):
    base = BaseData(n=n, lam=lam, beta=beta)
    assert phi_eval(base, tau).phi > 0
    assert phi_eval(base, tau).q_values.coeffs[0] > 0


# ---------------------------------------------------------------------------
# derivative closed forms, two-path
# ---------------------------------------------------------------------------


def test_phi_k_derivative_examples():
    for j in range(2, 7):
        assert phi_k_derivative_closed_form(1, j, 0.7) == 0.0
    assert phi_k_derivative_closed_form(2, 2, 0.0) == pytest.approx(-2.0)
    assert phi_k_derivative_closed_form(3, 3, 0.0) == pytest.approx(18.0)


def test_phi_k_derivatives_match_jet():
    taus = (0.0, 0.3, 1.0, 4.0, 12.0)
    for k in range(1, 11):
        base = projective_line(k)
        for tau in taus:
            pj = phi_eval(base, tau, order=6)
            for j in range(2, 7):
                closed = phi_k_derivative_closed_form(k, j, tau)
                jet = pj.phi_derivative(j)
                assert jet == pytest.approx(closed, rel=1e-10, abs=1e-12)


def test_condnec_second_derivative_two_path():
    cases = [
        (projective_line(1), 0.5),
        (projective_line(2), 0.25),
        (flat(1, -1.0), 0.8),
        (flat(3, -2.0), 0.1),
        (BaseData(2, 0.7, -1.3), 0.4),
    ]
    for base, mu0 in cases:
        phi1, phi2 = condnec_phi_derivatives(base, mu0)
        pj = phi_eval(base, mu0, order=2)
        assert phi1 == pytest.approx(pj.phi_derivative(1), rel=1e-12)
        assert phi2 == pytest.approx(pj.phi_derivative(2), rel=1e-8)


def test_condnec_small_mu0_limits():
    # phi''(mu0) -> 2 n (lambda + 2 beta)
    for base, want in [
        (projective_line(2), -2.0),
        (flat(1, -1.0), -4.0),
        (flat(2, -1.5), -12.0),
    ]:
        _, phi2 = condnec_phi_derivatives(base, 1e-9)
        assert phi2 == pytest.approx(want, rel=1e-6)


def test_phi1_display_is_report_only():
    # the alternative printed grouping of phi'(mu0) deviates from the jet
    # value at generic parameters; we only record the deviation
    dev = phi1_display_deviation(projective_line(1), 0.5)
    assert np.isfinite(dev) and dev >= 0


# ---------------------------------------------------------------------------
# Ricci form split
# ---------------------------------------------------------------------------


def test_ricci_flat_family_vanishes():
    # beta = -lambda makes both coefficients vanish identically
    base = projective_line(2)  # lambda=1, beta=-1
    for tau in (0.1, 1.0, 10.0):
        b, f = ricci_form_components(base, tau)
        assert abs(b) < 1e-9
        assert abs(f) < 1e-9


def test_ricci_base_coefficient_flat_case():
    b, f = ricci_form_components(flat(1, -1.0), 1.0)
    assert b == pytest.approx(-0.5, rel=1e-12)


def test_ricci_nonzero_for_scalar_flat_nonricci_flat():
    b, f = ricci_form_components(projective_line(1), 1.0)
    assert abs(b) > 1e-6 or abs(f) > 1e-6


def test_ricci_singular_at_zero():
    with pytest.raises(ValueError):
        ricci_form_components(flat(1, -1.0), 0.0)


# ---------------------------------------------------------------------------
# boundedness report
# ---------------------------------------------------------------------------


def test_mm_ratio_flat_case():
    grid = np.linspace(0.0, 10.0, 101)
    rep = ma_marinescu_bounds(flat(1, -1.0), grid)
    assert rep.ok
    want = 2.0 / (1.0 + grid)
    assert np.allclose(rep.ratio_values, want, rtol=1e-13)
    assert rep.ratio_bound == pytest.approx(2.0)


def test_mm_bound_projective_line():
    grid = np.linspace(0.0, 1000.0, 500)
    rep = ma_marinescu_bounds(projective_line(1), grid)
    assert rep.ratio_bound == pytest.approx(6.0)
    assert rep.ok
    assert rep.ratio_margin >= 0
    # beta + lambda = 1/2 >= 0 here, so the derivative bound is asserted
    assert rep.deriv_bound_applies
    assert rep.deriv_margin >= 0


def test_mm_derivative_formula_against_finite_differences():
    def ratio(base, t):
        n, lam, beta = base.n, base.lam, base.beta
        u = 1 - beta * t
        return 2 * lam / (beta * u ** n) - 2 * lam / beta + 2 / u ** n

    h = 1e-5
    for base in (flat(1, -1.0), flat(2, -0.5), projective_line(1), projective_line(3)):
        grid = np.linspace(0.1, 20.0, 40)
        rep = ma_marinescu_bounds(base, grid)
        for t, d in zip(rep.tau_grid, rep.deriv_values):
            fd = (ratio(base, t + h) - ratio(base, t - h)) / (2 * h)
            assert abs(fd - d) < 1e-7


def test_mm_derivative_bound_not_asserted_when_inapplicable():
    rep = ma_marinescu_bounds(flat(2, -1.5), np.linspace(0.0, 10.0, 50))
    assert not rep.deriv_bound_applies  # beta + lambda = -1.5 < 0
    assert rep.ok  # ratio bound still holds


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------


def test_scaling_map_values():
    b = BaseData(1, 1.0, -0.5)
    s = scaling_map(b, 2.0)
    assert (s.n, s.lam, s.beta) == (1, 0.5, -0.25)
    assert scaling_map(b, 1.0) == b


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.floats(0.0, 3.0), st.floats(-4.0, -0.1), st.floats(0.2, 5.0))
def test_scaling_map_group_law(n, lam, beta, c):
    b = BaseData(n=n, lam=lam, beta=beta)
    back = scaling_map(scaling_map(b, c), 1.0 / c)
    assert back.n == b.n
    assert back.lam == pytest.approx(b.lam, rel=1e-12, abs=1e-15)
    assert back.beta == pytest.approx(b.beta, rel=1e-12)
