import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfklab.geometry import (
    GeometryError,
    PointTotalSpace,
    a2_closed_form,
    a2_flat_closed_form,
    curvature_at_tau,
    curvature_tensor_path,
    gauge_invariance_check,
    metric_at,
    norms_closed_form,
    point_at_tau,
    potential,
    rescale_equivalence_check,
)
from sfklab.momentum import build_table, f_derivatives_at
from sfklab.profile import BaseData, flat, phi_q_r, projective_line

BASES = {
    "k1": projective_line(1),
    "k2": projective_line(2),
    "k3": projective_line(3),
    "k6": projective_line(6),
    "flat11": flat(1, -1.0),
    "flat21": flat(2, -1.0),
    "flat23": flat(2, -3.0),
    "flat32": flat(3, -2.0),
}


@pytest.fixture(scope="module")
def tables():
    return {name: build_table(base, 1.0, (1e-9, 40.0)) for name, base in BASES.items()}


def close(got, want, tol):
    """|got - want| <= tol * max(1, |want|), a floor-protected relative test."""
    return abs(got - want) <= tol * max(1.0, abs(want))


# ---------------------------------------------------------------------------
# metric oracle: chain rule on Psi = Phi + 4 f(t)
# ---------------------------------------------------------------------------


def _base_data(base, z):
    if base.lam > 0:
        s = 1.0 + abs(z[0]) ** 2 / 4.0
        grad = np.array([np.conj(z[0]) / s])
        hess = np.array([[1.0 / s ** 2]], dtype=complex)
    else:
        grad = np.conj(np.asarray(z, dtype=complex))
        hess = np.eye(len(z), dtype=complex)
    return grad, hess


def _metric_oracle(base, table, p):
    """g from the radial chain rule and the profile, independent of jets.

    With t_i = -(beta/4) Phi_i, t_xi = 1/(2 xi), f' = tau and f'' = phi:
    g_zz = (1 - beta tau) Phi_hess + (beta^2/4) phi Phi_i conj(Phi_j),
    g_zxi = -beta phi Phi_i / (2 conj(xi)),  g_xixi = phi/|xi|^2.
    """
    z = np.asarray(p.z, dtype=complex)
    grad, hess = _base_data(base, z)
    phi0 = (4.0 * math.log1p(abs(z[0]) ** 2 / 4.0) if base.lam > 0
            else float(np.sum(np.abs(z) ** 2)))
    t = 0.5 * math.log(abs(p.xi) ** 2) - 0.25 * base.beta * phi0
    tau = table.tau_of_t(t)
    phi = phi_q_r(base, tau)[0]
    n = len(z)
    G = np.zeros((n + 1, n + 1), dtype=complex)
    G[:n, :n] = (1.0 - base.beta * tau) * hess \
        + 0.25 * base.beta ** 2 * phi * np.outer(grad, grad.conj())
    G[:n, n] = -base.beta * phi * grad / (2.0 * np.conj(p.xi))
    G[n, :n] = np.conj(G[:n, n])
    G[n, n] = phi / abs(p.xi) ** 2
    return G


POINTS = {
    "k1": [(0.3 + 0.1j,), (-1.2j,)],
    "k3": [(0.5,), (0.8 - 0.4j,)],
    "flat21": [(0.4, -0.3j), (1.0 + 0.2j, 0.1)],
    "flat32": [(0.2, 0.5j, -0.4), (0.0, 0.0, 0.9)],
}


def test_metric_matches_chain_rule_oracle(tables):
    for name, zs in POINTS.items():
        base = BASES[name]
        for z in zs:
            for tau in (0.4, 1.7):
                p = point_at_tau(base, tables[name], tau, z=z, phase=0.9)
                got = metric_at(base, tables[name], p).g
                want = _metric_oracle(base, tables[name], p)
                assert np.max(np.abs(got - want)) <= 1e-9 * np.max(np.abs(want))


def test_metric_data_invariants(tables):
    for name in ("k2", "flat23"):
        base = BASES[name]
        p = point_at_tau(base, tables[name], 0.8, z=None, phase=0.2)
        md = metric_at(base, tables[name], p)
        N = base.n + 1
        assert np.max(np.abs(md.g - md.g.conj().T)) < 1e-12 * np.max(np.abs(md.g))
        assert np.max(np.abs(md.g @ md.g_inv - np.eye(N))) < 1e-10
        assert md.det > 0
        assert md.det == pytest.approx(float(np.real(np.linalg.det(md.g))), rel=1e-12)


def test_projective_determinant_identity(tables):
    # det g = (1 + k tau/2) phi / (|xi|^2 (1 + |z|^2/4)^2) on O(-k)
    for k, name in ((1, "k1"), (2, "k2"), (3, "k3"), (6, "k6")):
        base = BASES[name]
        for z, tau in ((0.6 - 0.2j, 0.5), (0.0, 2.0), (1.1j, 1.0)):
            p = point_at_tau(base, tables[name], tau, z=z)
            det = metric_at(base, tables[name], p).det
            phi = phi_q_r(base, tau)[0]
            want = (1.0 + 0.5 * k * tau) * phi / (abs(p.xi) ** 2
                                                  * (1.0 + abs(z) ** 2 / 4.0) ** 2)
            assert det == pytest.approx(want, rel=1e-9)


def test_potential_closed_form_on_o1(tables):
    # phi = 2 tau on O(-1) gives 4f = 2 mu0 (e^{2t} - 1)
    base = BASES["k1"]
    for z, tau in ((0.5 + 0.5j, 0.3), (0.0, 1.0), (-0.7, 4.0)):
        p = point_at_tau(base, tables["k1"], tau, z=z, phase=1.1)
        t = 0.5 * math.log(abs(p.xi) ** 2) \
            - 0.25 * base.beta * 4.0 * math.log1p(abs(z) ** 2 / 4.0)
        want = 4.0 * math.log1p(abs(z) ** 2 / 4.0) + 2.0 * (math.exp(2.0 * t) - 1.0)
        assert potential(base, tables["k1"], p) == pytest.approx(want, rel=1e-9)


def test_point_at_tau_hits_momentum_value(tables):
    for name in ("k3", "flat21"):
        base = BASES[name]
        for tau in (0.05, 1.0, 8.0):
            p = point_at_tau(base, tables[name], tau, z=None, phase=0.4)
            phi0 = 0.0
            t = 0.5 * math.log(abs(p.xi) ** 2) - 0.25 * base.beta * phi0
            assert tables[name].tau_of_t(t) == pytest.approx(tau, rel=1e-9)
            assert cmath.phase(p.xi) == pytest.approx(0.4, abs=1e-12)


# ---------------------------------------------------------------------------
# jets vs finite differences of the potential
# ---------------------------------------------------------------------------


def test_potential_jets_match_finite_differences(tables):
    from sfklab.geometry import _f_outer_coeffs, _psi_bijets, _t_value

    rng = np.random.default_rng(11)
    checked = 0
    while checked < 10:
        # beta = -1 families keep the higher f-derivatives moderate, so the
        # finite-difference truncation stays well under the tolerance
        name = ("k1", "k3", "flat11", "flat21")[checked % 4]
        base = BASES[name]
        table = tables[name]
        z = tuple(rng.normal(scale=0.5, size=base.n)
                  + 1j * rng.normal(scale=0.5, size=base.n))
        p = point_at_tau(base, table, float(rng.uniform(0.5, 2.0)), z=z,
                         phase=float(rng.uniform(0, 2 * math.pi)))
        u = rng.normal(size=base.n + 1) + 1j * rng.normal(size=base.n + 1)
        u /= np.linalg.norm(u)
        coeffs = _f_outer_coeffs(base, table, _t_value(base, p), order=4)
        c = _psi_bijets(base, p, u[None, :], coeffs, order=4)[0]
        # for real displacement s the value is sum_m s^m (sum_{a+b=m} c_ab)
        jet_sum = [sum(c[a, m - a] for a in range(m + 1)).real for m in range(5)]

        def value(s):
            q = PointTotalSpace(xi=p.xi + s * u[-1], z=tuple(np.array(p.z) + s * u[:-1]))
            return potential(base, table, q)

        h = 0.02
        samples = np.array([value(i * h) for i in range(-4, 5)])
        offsets = np.arange(-4, 5)
        V = np.vander(offsets, increasing=True).T.astype(float)
        for m in range(1, 5):
            rhs = np.zeros(9)
            rhs[m] = math.factorial(m)
            w = np.linalg.solve(V, rhs)
            fd = float(w @ samples) / h ** m
            assert math.factorial(m) * jet_sum[m] == pytest.approx(
                fd, rel=1e-5, abs=1e-5), (name, m)
        checked += 1


# ---------------------------------------------------------------------------
# curvature against closed forms
# ---------------------------------------------------------------------------


def test_scalar_flatness_random_points(tables):
    rng = np.random.default_rng(23)
    for name in ("k1", "k2", "k6", "flat11", "flat23", "flat32"):
        base = BASES[name]
        for _ in range(6):
            z = tuple(rng.normal(scale=0.6, size=base.n)
                      + 1j * rng.normal(scale=0.6, size=base.n))
            tau = float(np.exp(rng.uniform(math.log(0.05), math.log(5.0))))
            p = point_at_tau(base, tables[name], tau, z=z,
                             phase=float(rng.uniform(0, 2 * math.pi)))
            rep = curvature_tensor_path(base, tables[name], p, with_laplacian=False)
            assert abs(rep.sigma) < 1e-7, (name, tau)
            assert rep.a1 == rep.sigma / 2.0


def test_two_path_a2_on_line_bundles(tables):
    for k, name in ((1, "k1"), (2, "k2"), (6, "k6")):
        base = BASES[name]
        for tau in (0.0, 0.5, 2.0, 5.0):
            rep = curvature_at_tau(base, tables[name], tau)
            cf = a2_closed_form(k, tau)
            assert close(rep.a2, cf, 1e-6), (k, tau, rep.a2, cf)
            if k == 1:
                assert abs(rep.a2) < 1e-10


def test_two_path_a2_off_the_origin(tables):
    base = BASES["k3"]
    p = point_at_tau(base, tables["k3"], 1.0, z=0.4 + 0.2j, phase=0.7)
    rep = curvature_tensor_path(base, tables["k3"], p)
    assert rep.a2 == pytest.approx(a2_closed_form(3, 1.0), abs=1e-10)
    assert rep.path == "tensor"


def test_norm_closed_forms_match_tensors(tables):
    for k, name in ((2, "k2"), (3, "k3"), (6, "k6")):
        base = BASES[name]
        for tau in (0.5, 2.0):
            p = point_at_tau(base, tables[name], tau)
            rep = curvature_tensor_path(base, tables[name], p, with_laplacian=False)
            jet = f_derivatives_at(base, tau, order=4)
            r2, ric2 = norms_closed_form(k, jet)
            assert close(rep.riem_norm2, r2, 1e-6), (k, tau)
            assert close(rep.ric_norm2, ric2, 1e-6), (k, tau)


def test_zero_section_limits(tables):
    # limits of the closed forms: |R|^2 -> 12(k^2-k+1), |Ric|^2 -> 3(k-2)^2
    for k, name in ((1, "k1"), (2, "k2"), (3, "k3"), (6, "k6")):
        rep = curvature_at_tau(BASES[name], tables[name], 0.0, with_laplacian=False)
        assert close(rep.riem_norm2, 12.0 * (k * k - k + 1), 1e-6), k
        assert close(rep.ric_norm2, 3.0 * (k - 2) ** 2, 1e-6), k
        assert close(rep.a2, 1.5 * (k - 1), 1e-6), k


def test_flat_family_a2_grid():
    # includes u = beta tau = -2 where the closed form crosses zero
    for n in (1, 2, 3):
        for beta in (-0.5, -1.0, -2.0):
            base = flat(n, beta)
            table = build_table(base, 1.0, (1e-9, 40.0))
            for tau in (0.0, 1.0, 3.0):
                rep = curvature_at_tau(base, table, tau)
                cf = a2_flat_closed_form(base, tau)
                assert close(rep.a2, cf, 1e-6), (n, beta, tau, rep.a2, cf)


def test_flat_family_zero_section_norms(tables):
    for name, n, beta in (("flat11", 1, -1.0), ("flat21", 2, -1.0), ("flat32", 3, -2.0)):
        rep = curvature_at_tau(BASES[name], tables[name], 0.0, with_laplacian=False)
        assert close(rep.riem_norm2, 24.0 * n * (n + 1) * beta ** 2, 1e-6), name
        assert close(rep.ric_norm2, 6.0 * n * (n + 1) * beta ** 2, 1e-6), name


def test_ricci_flat_only_at_k2(tables):
    for tau in (0.3, 1.0, 4.0):
        p = point_at_tau(BASES["k2"], tables["k2"], tau, z=0.2 + 0.1j)
        rep = curvature_tensor_path(BASES["k2"], tables["k2"], p, with_laplacian=False)
        assert rep.ric_norm2 < 1e-12
    for name in ("k1", "k3"):
        worst = max(curvature_tensor_path(
            BASES[name], tables[name],
            point_at_tau(BASES[name], tables[name], tau),
            with_laplacian=False).ric_norm2 for tau in (0.1, 0.5, 1.0, 3.0))
        assert worst > 1e-3, name


def test_laplacian_vanishes_for_scalar_flat(tables):
    for name in ("k2", "flat21"):
        for tau in (0.5, 2.0):
            rep = curvature_at_tau(BASES[name], tables[name], tau)
            assert abs(rep.lap_sigma) < 1e-5
            assert rep.a2 == pytest.approx(
                (rep.riem_norm2 - 4 * rep.ric_norm2 + 3 * rep.sigma ** 2) / 24.0
                + rep.lap_sigma / 3.0, rel=1e-12)


# ---------------------------------------------------------------------------
# structural invariances
# ---------------------------------------------------------------------------


def test_gauge_invariance_of_curvature():
    assert gauge_invariance_check(projective_line(2), (0.3, 1.0, 3.0)) < 1e-7
    assert gauge_invariance_check(flat(2, -1.0), (0.5, 2.0)) < 1e-7


def test_rescale_equivalence():
    probes = [PointTotalSpace(xi=0.9 * cmath.exp(0.3j), z=(0.4 - 0.1j,)),
              PointTotalSpace(xi=1.6, z=(0.2j,))]
    assert rescale_equivalence_check(1, -1.0, 2.0, probes) < 1e-9
    assert rescale_equivalence_check(1, -2.0, 0.5, probes) < 1e-9
    probes2 = [PointTotalSpace(xi=1.1, z=(0.3, 0.1 + 0.2j))]
    assert rescale_equivalence_check(2, -1.5, 3.0, probes2) < 1e-9


def test_phase_invariance(tables):
    base = BASES["k3"]
    reps = [curvature_tensor_path(
        base, tables["k3"],
        point_at_tau(base, tables["k3"], 0.7, z=0.3, phase=ph),
        with_laplacian=False) for ph in (0.0, 1.3, 4.0)]
    for r in reps[1:]:
        assert r.riem_norm2 == pytest.approx(reps[0].riem_norm2, rel=1e-11)
        assert r.ric_norm2 == pytest.approx(reps[0].ric_norm2, abs=1e-11)


# ---------------------------------------------------------------------------
# error surface
# ---------------------------------------------------------------------------


def test_zero_fibre_coordinate_rejected():
    with pytest.raises(ValueError):
        PointTotalSpace(xi=0.0, z=(0.1,))


def test_wrong_base_dimension_rejected(tables):
    with pytest.raises(ValueError):
        metric_at(BASES["flat21"], tables["flat21"], PointTotalSpace(xi=1.0, z=(0.1,)))


def test_out_of_range_tau_names_needed_span(tables):
    with pytest.raises(ValueError, match="tau_range"):
        p = PointTotalSpace(xi=1e9, z=(0.0,))
        metric_at(BASES["k1"], tables["k1"], p)


def test_negative_tau_rejected(tables):
    with pytest.raises(ValueError):
        curvature_at_tau(BASES["k1"], tables["k1"], -0.5)


def test_unimplemented_projective_dimension():
    base = BaseData(n=2, lam=1.0, beta=-1.0)
    with pytest.raises(GeometryError):
        metric_at(base, build_table(flat(2, -1.0), 1.0, (1e-3, 5.0)),
                  PointTotalSpace(xi=1.0, z=(0.0, 0.0)))


# ---------------------------------------------------------------------------
# property-based sweep
# ---------------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(
    name=st.sampled_from(["k1", "k3", "flat11", "flat21"]),
    tau=st.floats(0.05, 4.0),
    re=st.floats(-1.2, 1.2),
    im=st.floats(-1.2, 1.2),
    phase=st.floats(0.0, 2.0 * math.pi),
)
def test_metric_positive_and_consistent(name, tau, re, im, phase):
    base = BASES[name]
    table = _PROPERTY_TABLES[name]
    z = tuple([re + 1j * im] + [0.1] * (base.n - 1))
    p = point_at_tau(base, table, tau, z=z, phase=phase)
    md = metric_at(base, table, p)
    N = base.n + 1
    assert np.max(np.abs(md.g @ md.g_inv - np.eye(N))) < 1e-10
    assert md.det > 0
    want = _metric_oracle(base, table, p)
    assert np.max(np.abs(md.g - want)) <= 1e-8 * max(1.0, np.max(np.abs(want)))


_PROPERTY_TABLES = {name: build_table(BASES[name], 1.0, (1e-9, 40.0))
                    for name in ("k1", "k3", "flat11", "flat21")}
