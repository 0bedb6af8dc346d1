import math
from math import lgamma

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfklab.bergman import (
    LEADING_SCALE,
    LEVEL_SCALE,
    BergmanError,
    DivergentNormError,
    FitError,
    HilbertBasisSpec,
    TruncationError,
    basis_rule_sensitivity,
    epsilon_at,
    epsilon_gauge_check,
    finiteness_scan,
    fit_expansion,
    inner_product,
    monomial_norm,
)
from sfklab.geometry import PointTotalSpace, a2_closed_form, point_at_tau
from sfklab.momentum import build_table
from sfklab.profile import flat, projective_line

BASE_K1 = projective_line(1)
BASE_K2 = projective_line(2)
BASE_K3 = projective_line(3)
BASE_FLAT = flat(1, -1.0)


@pytest.fixture(scope="module")
def table_k1():
    return build_table(BASE_K1, 1.0, (1e-9, 80.0))


@pytest.fixture(scope="module")
def table_k2():
    return build_table(BASE_K2, 1.0, (1e-9, 80.0))


@pytest.fixture(scope="module")
def table_k3():
    return build_table(BASE_K3, 1.0, (1e-9, 80.0))


@pytest.fixture(scope="module")
def table_flat():
    return build_table(BASE_FLAT, 1.0, (1e-9, 80.0))


# ---------------------------------------------------------------------------
# closed-form norm oracles
# ---------------------------------------------------------------------------


def _base_beta_factor(m, S):
    # int_0^inf r^m (1 + r/4)^(-S) dr = 4^(m+1) B(m+1, S-m-1)
    return math.exp((m + 1) * math.log(4.0) + lgamma(m + 1) + lgamma(S - m - 1) - lgamma(S))


def _fibre_closed(k, mu0, l, alpha):
    # finite sum for 2 F(l) when phi = (2 tau + tau^2)/(1 + k tau/2)
    twoa = int(round(2 * alpha))
    P = (k - 1) * (l + twoa)
    ak = alpha * k
    total = 0.0
    for j in range(P + 1):
        c = math.comb(P, j) * 2.0 ** (P - j)
        total += c * (math.factorial(l + j) / ak ** (l + j + 1)
                      + 0.5 * k * math.factorial(l + j + 1) / ak ** (l + j + 2))
    return 2.0 * math.exp(ak * mu0) * mu0 ** (-l) * (2.0 + mu0) ** (-P) * total


def test_monomial_norm_linear_profile(table_k1):
    spec = HilbertBasisSpec(base=BASE_K1, alpha=6.0)
    for m, l in [(0, 0), (3, 1), (12, 0), (7, 5), (1, 9)]:
        S = 12 + 2 + l
        want = math.pi ** 2 * _base_beta_factor(m, S) * _fibre_closed(1, 1.0, l, 6.0)
        got = monomial_norm(spec, table_k1, m, l)
        assert got == pytest.approx(want, rel=1e-10)


def test_monomial_norm_higher_twist(table_k3):
    spec = HilbertBasisSpec(base=BASE_K3, alpha=4.5)
    for m, l in [(0, 0), (5, 2), (2, 4)]:
        S = 9 + 2 + 3 * l
        want = math.pi ** 2 * _base_beta_factor(m, S) * _fibre_closed(3, 1.0, l, 4.5)
        got = monomial_norm(spec, table_k3, m, l)
        assert got == pytest.approx(want, rel=1e-9)


def test_gaussian_norms_match_gamma():
    spec = HilbertBasisSpec(base=BASE_FLAT, alpha=7.0, model="gaussian")
    for m, l in [(0, 0), (4, 2), (10, 7), (1, 0)]:
        want = math.pi ** 2 * math.factorial(m) * math.factorial(l) / 7.0 ** (m + l + 2)
        assert monomial_norm(spec, None, m, l) == pytest.approx(want, rel=1e-8)


def test_monomials_are_orthogonal(table_k1):
    spec = HilbertBasisSpec(base=BASE_K1, alpha=6.0)
    rng = np.random.default_rng(11)
    for _ in range(20):
        m1, m2 = (int(v) for v in rng.integers(0, 8, size=2))
        l1, l2 = (int(v) for v in rng.integers(0, 6, size=2))
        if m1 == m2 and l1 == l2:
            m2 = m1 + 1
        ip = inner_product(spec, table_k1, m1, l1, m2, l2)
        na = monomial_norm(spec, table_k1, m1, l1)
        nb = monomial_norm(spec, table_k1, m2, l2)
        assert abs(ip) < 1e-10 * math.sqrt(na * nb)


def test_inner_product_diagonal_is_norm(table_k1):
    spec = HilbertBasisSpec(base=BASE_K1, alpha=6.0)
    ip = inner_product(spec, table_k1, 3, 2, 3, 2)
    assert ip.imag == pytest.approx(0.0, abs=1e-14)
    assert ip.real == pytest.approx(monomial_norm(spec, table_k1, 3, 2), rel=1e-12)


def test_norm_divergence_guard(table_k1):
    spec = HilbertBasisSpec(base=BASE_K1, alpha=6.0)
    with pytest.raises(DivergentNormError, match="2 alpha \\+ k l"):
        monomial_norm(spec, table_k1, 13, 0)  # bound is m <= 2 alpha = 12


# ---------------------------------------------------------------------------
# density oracles
# ---------------------------------------------------------------------------

# independently computed reference densities (closed-form fibre integrals in
# extended precision): O(-k) at mu0 = 1 and the n = 1, beta = -1 family
EPS_OK2_T05_A10 = 2.5336790361069133
EPS_OK2_T15_A6 = 0.9119293231596989
EPS_OK3_T10_A8 = 1.6211169933283542
EPS_FLAT_T04_A6 = 0.9106355145524171


def test_linear_profile_density_is_constant(table_k1):
    # the k = 1 metric is Burns-Simanca; its density is exactly alpha^2 / (4 pi^2)
    for alpha in (2.5, 6.0, 10.0):
        spec = HilbertBasisSpec(base=BASE_K1, alpha=alpha)
        for tau, z in [(0.3, 0.4 + 0.1j), (0.8, 1.2 - 0.5j), (1.5, 1e-4), (2.5, 2.0 + 1.0j)]:
            p = point_at_tau(BASE_K1, table_k1, tau, z=(z,))
            est = epsilon_at(spec, table_k1, p)
            assert est.value == pytest.approx(alpha ** 2 * LEADING_SCALE, rel=1e-10)
            assert est.tail_bound < 0.01 * est.value


def test_density_point_spread_small(table_k1):
    spec = HilbertBasisSpec(base=BASE_K1, alpha=10.0)
    vals = [epsilon_at(spec, table_k1, point_at_tau(BASE_K1, table_k1, tau, z=(0.7,))).value
            for tau in (0.3, 0.8, 1.5, 2.5, 0.6)]
    spread = (max(vals) - min(vals)) / min(vals)
    assert spread < 0.02


def test_density_frozen_references(table_k2, table_k3, table_flat):
    cases = [
        (BASE_K2, table_k2, 0.5, 10.0, EPS_OK2_T05_A10),
        (BASE_K2, table_k2, 1.5, 6.0, EPS_OK2_T15_A6),
        (BASE_K3, table_k3, 1.0, 8.0, EPS_OK3_T10_A8),
    ]
    for base, table, tau, alpha, want in cases:
        spec = HilbertBasisSpec(base=base, alpha=alpha)
        p = point_at_tau(base, table, tau, z=(0.5,))
        assert epsilon_at(spec, table, p).value == pytest.approx(want, rel=5e-12)
    spec = HilbertBasisSpec(base=BASE_FLAT, alpha=6.0)
    p = point_at_tau(BASE_FLAT, table_flat, 0.4, z=(0.3 + 0.2j,))
    assert epsilon_at(spec, table_flat, p).value == pytest.approx(EPS_FLAT_T04_A6, rel=5e-12)


def test_gaussian_density_is_constant():
    spec = HilbertBasisSpec(base=BASE_FLAT, alpha=9.0, model="gaussian")
    for xi, z in [(0.5 + 0.2j, 0.7), (1.5, 2.0 - 1.0j), (0.1j, 3.0)]:
        est = epsilon_at(spec, None, PointTotalSpace(xi=xi, z=(z,)))
        assert est.value == pytest.approx((9.0 / math.pi) ** 2, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(twoa=st.integers(min_value=1, max_value=40),
       tau=st.floats(min_value=0.05, max_value=4.0))
def test_linear_profile_density_property(table_k1, twoa, tau):
    spec = HilbertBasisSpec(base=BASE_K1, alpha=twoa / 2.0)
    p = point_at_tau(BASE_K1, table_k1, tau, z=(0.6,))
    est = epsilon_at(spec, table_k1, p)
    assert est.value == pytest.approx(spec.alpha ** 2 * LEADING_SCALE, rel=1e-9)


def test_alpha_override_matches_fresh_spec(table_k2):
    p = point_at_tau(BASE_K2, table_k2, 0.9, z=(0.4,))
    a = epsilon_at(HilbertBasisSpec(base=BASE_K2, alpha=6.0), table_k2, p, alpha=12.0)
    b = epsilon_at(HilbertBasisSpec(base=BASE_K2, alpha=12.0), table_k2, p)
    assert a.value == b.value
    assert a.alpha == 12.0


def test_density_deterministic(table_k2):
    spec = HilbertBasisSpec(base=BASE_K2, alpha=8.0)
    p = point_at_tau(BASE_K2, table_k2, 0.7, z=(0.5,))
    assert epsilon_at(spec, table_k2, p).value == epsilon_at(spec, table_k2, p).value


def test_density_stable_under_l_max(table_k2):
    p = point_at_tau(BASE_K2, table_k2, 0.7, z=(0.5,))
    e1 = epsilon_at(HilbertBasisSpec(base=BASE_K2, alpha=8.0, l_max=60), table_k2, p)
    e2 = epsilon_at(HilbertBasisSpec(base=BASE_K2, alpha=8.0, l_max=64), table_k2, p)
    assert abs(e1.value - e2.value) <= e1.tail_bound


def test_density_truncation_error(table_k2):
    spec = HilbertBasisSpec(base=BASE_K2, alpha=6.0, l_max=10)
    p = point_at_tau(BASE_K2, table_k2, 20.0, z=(0.2,))
    with pytest.raises(TruncationError, match="l_max"):
        epsilon_at(spec, table_k2, p)


def test_density_needs_resolved_table():
    short = build_table(BASE_K2, 1.0, (1e-9, 3.0))
    spec = HilbertBasisSpec(base=BASE_K2, alpha=8.0)
    p = point_at_tau(BASE_K2, short, 0.5, z=(0.1,))
    with pytest.raises(BergmanError, match="tau_range"):
        epsilon_at(spec, short, p)


def test_estimate_to_dict(table_k1):
    spec = HilbertBasisSpec(base=BASE_K1, alpha=6.0)
    p = point_at_tau(BASE_K1, table_k1, 0.5, z=(0.3,))
    d = epsilon_at(spec, table_k1, p).to_dict()
    assert set(d) >= {"alpha", "epsilon", "l_used", "tail_bound"}
    assert d["alpha"] == 6.0


# ---------------------------------------------------------------------------
# level-expansion fits
# ---------------------------------------------------------------------------


def _eps_curve(base, table, tau, alphas, z=0.3):
    p = point_at_tau(base, table, tau, z=(z,))
    return [epsilon_at(HilbertBasisSpec(base=base, alpha=float(a)), table, p).value
            for a in alphas]


def test_fit_recovers_a2_sign_and_size(table_k2):
    want = a2_closed_form(2, 0.5)
    for alphas in [(6, 8, 10, 12, 16), (8, 12, 16, 24, 32)]:
        fit = fit_expansion(alphas, _eps_curve(BASE_K2, table_k2, 0.5, alphas))
        assert fit.C == pytest.approx(LEADING_SCALE, rel=1e-4)
        assert abs(fit.a1_hat) < 0.01
        assert fit.a2_hat > 0
        assert fit.a2_hat == pytest.approx(want, rel=0.25)
        assert fit.residual < 1e-6
        assert fit.level_scale == LEVEL_SCALE


def test_fit_negative_a2_case(table_k3):
    alphas = (6, 8, 10, 12, 16)
    fit = fit_expansion(alphas, _eps_curve(BASE_K3, table_k3, 1.0, alphas))
    assert a2_closed_form(3, 1.0) < 0
    assert fit.a2_hat < 0


def test_fit_flat_density_case(table_k1):
    alphas = (6, 8, 10, 12, 16)
    fit = fit_expansion(alphas, _eps_curve(BASE_K1, table_k1, 0.8, alphas))
    assert abs(fit.a1_hat) < 0.225
    assert abs(fit.a2_hat) < 0.225


def test_fit_rejects_clustered_levels():
    with pytest.raises(FitError, match="wider"):
        fit_expansion([10.0, 10.01, 10.02, 10.03, 10.04], [2.5] * 5)


def test_fit_input_validation():
    with pytest.raises(FitError, match="distinct"):
        fit_expansion([6, 8, 10, 12], [1.0, 1.0, 1.0, 1.0])
    with pytest.raises(FitError, match="positive"):
        fit_expansion([6, 8, 10, 12, 16], [1.0, 1.0, -1.0, 1.0, 1.0])


def test_fit_to_dict(table_k2):
    alphas = (6, 8, 10, 12, 16)
    d = fit_expansion(alphas, _eps_curve(BASE_K2, table_k2, 0.5, alphas)).to_dict()
    assert set(d) >= {"alphas", "values", "C", "a1_hat", "a2_hat", "a3_hat",
                      "residual", "level_scale"}


def test_leading_term_sharpens_with_level(table_k2):
    # sup over sample points of |eps / (C alpha^2) - 1| shrinks as alpha grows
    taus = (0.2, 0.5, 1.0, 2.0, 4.0)
    devs = []
    for alpha in (6, 10, 16):
        spec = HilbertBasisSpec(base=BASE_K2, alpha=float(alpha))
        worst = max(
            abs(epsilon_at(spec, table_k2, point_at_tau(BASE_K2, table_k2, tau, z=(0.4,))).value
                / (LEADING_SCALE * alpha ** 2) - 1.0)
            for tau in taus)
        devs.append(worst)
    assert devs[0] > devs[1] > devs[2]


# ---------------------------------------------------------------------------
# gauge, membership-rule sensitivity, finiteness
# ---------------------------------------------------------------------------


def test_density_gauge_independent():
    assert epsilon_gauge_check(BASE_K2, (0.5, 1.2), 8.0) < 5e-3


def test_membership_rule_sensitivity(table_k1):
    spec = HilbertBasisSpec(base=BASE_K1, alpha=10.0)
    widened = basis_rule_sensitivity(spec, table_k1, widen=1)
    assert widened.baseline_spread < 1e-9
    assert math.isinf(widened.degradation)
    assert "tail exponent" in widened.witness
    narrowed = basis_rule_sensitivity(spec, table_k1, widen=-1)
    assert math.isfinite(narrowed.degradation)
    assert narrowed.shifted_spread < 1e-9


def test_finiteness_reports(table_k1, table_flat):
    r = finiteness_scan(HilbertBasisSpec(base=BASE_FLAT, alpha=1.0), table_flat)
    assert r.verdict == "finite"
    assert r.above_threshold
    assert r.threshold == 0.25
    assert math.isinf(r.base_tail_exponent) and r.base_tail_exponent < 0
    assert r.fibre_decay_rate > 0

    r = finiteness_scan(HilbertBasisSpec(base=BASE_K1, alpha=0.5), table_k1)
    assert r.verdict == "finite"
    assert r.base_tail_exponent == -3.0
    assert r.norm_value > 0

    r = finiteness_scan(HilbertBasisSpec(base=BASE_FLAT, alpha=2.0, model="gaussian"))
    assert r.verdict == "finite"
    assert r.norm_value == pytest.approx(r.closed_form, rel=1e-10)
    assert r.closed_form == pytest.approx(math.pi ** 2 / 4.0, rel=1e-12)

    d = r.to_dict()
    assert set(d) >= {"family", "alpha", "verdict", "base_tail_exponent"}


# ---------------------------------------------------------------------------
# spec validation
# ---------------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError, match="threshold"):
        HilbertBasisSpec(base=BASE_K1, alpha=0.2)
    with pytest.raises(ValueError, match="integer"):
        HilbertBasisSpec(base=BASE_K1, alpha=0.7)
    with pytest.raises(ValueError, match="threshold"):
        HilbertBasisSpec(base=flat(2, -1.0), alpha=0.4)
    with pytest.raises(ValueError, match="flat"):
        HilbertBasisSpec(base=BASE_K1, alpha=6.0, model="gaussian")
    with pytest.raises(ValueError, match="model"):
        HilbertBasisSpec(base=BASE_FLAT, alpha=6.0, model="exact")
    with pytest.raises(ValueError):
        epsilon_at(HilbertBasisSpec(base=BASE_K1, alpha=6.0), None,
                   PointTotalSpace(xi=1.0, z=(0.3,)))
