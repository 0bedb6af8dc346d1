"""Profile function of the momentum construction over Kaehler-Einstein bases.

The base data is a triple (n, lambda, beta): complex dimension of the
base, its Einstein constant (rho_M = lambda * omega_M), and the ratio
beta < 0 twisting the fibre metric (gamma = beta * omega_M).  The profile

    phi(tau) = 2/(1 - beta tau)^n *
               (tau + lambda ((1-beta tau)^{n+1} - (1-beta tau) + beta n tau)
                      / (beta^2 (n+1)))

drives everything downstream: the momentum ODE f'' = phi(f'), the metric
and curvature of the associated scalar-flat Kaehler structures, and the
quantization estimates.  Q(tau) = (1 - beta tau)^n is the determinant
factor of the fibrewise endomorphism; phi*Q is the radial density of the
volume form.

Two concrete families are named: ``flat(n, beta)`` -- base C^n with the
Euclidean metric (lambda = 0) -- and ``projective_line(k)`` -- base CP^1
with the Fubini-Study metric of Einstein constant 1 and beta = -k/2,
where the total space is the disc bundle O(-k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .jets import Jet, _is_mp

__all__ = [
    "BaseData",
    "ProfileJet",
    "MMBoundsReport",
    "flat",
    "projective_line",
    "phi_eval",
    "phi_q_r",
    "phi_k_derivative_closed_form",
    "condnec_phi_derivatives",
    "phi1_display_deviation",
    "ricci_form_components",
    "ma_marinescu_bounds",
    "scaling_map",
]


@dataclass(frozen=True)
class BaseData:
    """Parameters (n, lambda, beta) of the polarized base manifold."""

    n: int
    lam: float
    beta: float

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError(f"base dimension n must be a positive integer, got {self.n!r}")
        if not self.lam >= 0:
            raise ValueError(f"Einstein constant lambda must be >= 0, got {self.lam!r}")
        if not self.beta < 0:
            raise ValueError(f"twist ratio beta must be negative, got {self.beta!r}")


def flat(n: int, beta: float) -> BaseData:
    """Flat base C^n: lambda = 0."""
    return BaseData(n=n, lam=0.0, beta=float(beta))


def projective_line(k: int) -> BaseData:
    """CP^1 base with the k-th negative line bundle: n=1, lambda=1, beta=-k/2."""
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ValueError(f"line-bundle degree k must be a positive integer, got {k!r}")
    return BaseData(n=1, lam=1.0, beta=-0.5 * k)


@dataclass(frozen=True)
class ProfileJet:
    """phi and Q with their derivatives at a single tau."""

    tau: float
    values: Jet
    q_values: Jet

    @property
    def phi(self) -> float:
        return float(self.values.coeffs[0])

    def phi_derivative(self, j: int) -> float:
        return float(self.values.derivative(j))


def _int_pow(jet: Jet, n: int) -> Jet:
    """Integer power by binary exponentiation (exact for polynomials)."""
    result = None
    b = jet
    m = n
    while m:
        if m & 1:
            result = b if result is None else result * b
        m >>= 1
        if m:
            b = b * b
    return result if result is not None else Jet.constant(1.0, jet.order)


def phi_eval(base: BaseData, tau, order: int = 4) -> ProfileJet:
    """Evaluate the profile phi and Q at tau as jets of the given order.

    Parameters
    ----------
    base : BaseData
    tau : real, >= 0
    order : int
        Jet order (number of derivatives carried), at most 12.

    Returns
    -------
    ProfileJet
        values = jet of phi at tau; q_values = jet of Q = (1-beta tau)^n.

    The computation follows the dtype of ``tau``: an mpmath value runs
    the whole jet recursion in the active working precision, which the
    obstruction tests rely on for nearly cancelling combinations.
    """
    if not _is_mp(tau):
        tau = float(tau)
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    n, lam, beta = base.n, base.lam, base.beta
    t = Jet.variable(tau, order)
    u = 1 - beta * t                      # 1 - beta*tau, constant term >= 1
    q = _int_pow(u, n)
    bracket = t
    if lam != 0.0:
        corr = (_int_pow(u, n + 1) - u + beta * n * t) * (lam / (beta * beta * (n + 1)))
        bracket = bracket + corr
    phi = 2 * bracket / q
    return ProfileJet(tau=float(tau), values=phi, q_values=q)


def phi_k_derivative_closed_form(k: int, j: int, tau: float) -> float:
    """j-th derivative (j >= 2) of the O(-k) profile (2 tau + tau^2)/(1 + k tau/2).

    Closed form: (-1)^(j+1) * 8 * j! * (k-1) * k^(j-2) / (2 + k tau)^(j+1).
    """
    if j < 2:
        raise ValueError("closed form applies to derivative orders j >= 2")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return ((-1) ** (j + 1) * 8.0 * math.factorial(j) * (k - 1) * float(k) ** (j - 2)
            / (2.0 + k * tau) ** (j + 1))


def _phi2_closed_form(base: BaseData, mu0: float) -> float:
    """Second derivative of phi at mu0 from its closed form."""
    n, lam, beta = base.n, base.lam, base.beta
    return 2 * n * (lam + 2 * beta + (n - 1) * beta * (beta + lam) * mu0) / (1 - beta * mu0) ** (n + 2)


def condnec_phi_derivatives(base: BaseData, mu0: float) -> tuple[float, float]:
    """First and second derivative of phi at the gauge point mu0.

    phi'(mu0) comes from the jet of the profile (the authoritative path);
    phi''(mu0) from its closed form, which the test suite pins against
    the jet.  Both feed the small-mu0 projective-inducibility check
    n(lambda + 2 beta) >= -4.
    """
    if not mu0 > 0:
        raise ValueError(f"mu0 must be positive, got {mu0}")
    pj = phi_eval(base, mu0, order=2)
    return pj.phi_derivative(1), _phi2_closed_form(base, mu0)


def _phi1_display(base: BaseData, mu0: float) -> float:
    """An alternative printed grouping of phi'(mu0), kept for diagnostics.

    Known to disagree with the jet value away from special parameters;
    use :func:`phi1_display_deviation` to quantify, never to assert.
    """
    n, lam, beta = base.n, base.lam, base.beta
    u = 1 - beta * mu0
    num = 2 * ((n + 1) * beta + lam * (1 - u ** n) + ((beta ** 2 + 1) * (n ** 2 - 1) + lam * u ** n) * mu0)
    return num / ((n + 1) * beta * u ** (n + 1))


def phi1_display_deviation(base: BaseData, mu0: float) -> float:
    """Relative deviation of the alternative phi'(mu0) grouping from the jet value."""
    jet_value = phi_eval(base, mu0, order=1).phi_derivative(1)
    return abs(_phi1_display(base, mu0) / jet_value - 1.0)


def _expm1_minus_x(x: float) -> float:
    """expm1(x) - x without cancellation (series for small x)."""
    if abs(x) > 0.25:
        return math.expm1(x) - x
    total = 0.0
    term = x * x / 2.0
    m = 2
    while True:
        total += term
        m += 1
        term *= x / m
        if abs(term) < 1e-22 * (abs(total) + 1e-300):
            return total


def _log1p_minus_u(u: float) -> float:
    """log1p(u) - u without cancellation (series for small u)."""
    if abs(u) > 0.25:
        return math.log1p(u) - u
    total = 0.0
    term = -u * u / 2.0
    m = 2
    while True:
        total += term
        m += 1
        term *= -u * (m - 1) / m
        if abs(term) < 1e-22 * (abs(total) + 1e-300):
            return total


def phi_q_r(base: BaseData, s: float) -> tuple[float, float, float]:
    """phi(s), Q(s) and r(s) = 1/phi(s) - 1/(2s), all cancellation-free.

    The remainder r drives the momentum quadratures; since
    phi(s) = 2s + O(s^2), forming it naively loses all digits as s -> 0.
    Writing the lambda-correction as

        C = (E((n+1) L) + (n+1) G(-beta s)) / (beta^2 (n+1)),
        L = log1p(-beta s),  E(x) = expm1(x) - x,  G(u) = log1p(u) - u,

    keeps every building block free of subtractive cancellation, and
    2s - phi = (2s expm1(n L) - 2 lambda C)/Q follows to full precision.
    """
    n, lam, beta = base.n, base.lam, base.beta
    if s < 0:
        raise ValueError(f"tau must be >= 0, got {s}")
    if s == 0.0:
        return 0.0, 1.0, -n * (lam + 2 * beta) / 4.0
    L = math.log1p(-beta * s)
    Q = math.exp(n * L)
    C = (_expm1_minus_x((n + 1) * L) + (n + 1) * _log1p_minus_u(-beta * s)) / (beta * beta * (n + 1))
    phi = 2.0 * (s + lam * C) / Q
    N = (2.0 * s * math.expm1(n * L) - 2.0 * lam * C) / Q   # = 2s - phi
    r = N / (2.0 * s * phi)
    return phi, Q, r


def _phiq_ratio_jet(base: BaseData, tau: float, order: int) -> Jet:
    """Jet of (phi Q)'/Q at tau."""
    pj = phi_eval(base, tau, order + 1)
    p = pj.values * pj.q_values
    return p.differentiate() / pj.q_values.truncate(order)


def ricci_form_components(base: BaseData, tau: float) -> tuple[float, float]:
    """Coefficients of the Ricci form in the (base, fibre) splitting.

    The Ricci form of the momentum metric decomposes as

        rho = base_coeff * pullback(omega_M) + fibre_coeff * dtau ^ dc tau

    with base_coeff = lambda + (beta / 2Q) (phi Q)' and
    fibre_coeff = -(1/2 phi) [ (phi Q)'/Q ]'.  Both vanish identically
    exactly when beta = -lambda (the Ricci-flat members).
    """
    if not tau > 0:
        raise ValueError("fibre coefficient is singular at tau = 0 (phi vanishes)")
    ratio = _phiq_ratio_jet(base, tau, order=1)
    pj = phi_eval(base, tau, order=0)
    base_coeff = base.lam + 0.5 * base.beta * float(ratio.coeffs[0])
    fibre_coeff = -0.5 * float(ratio.derivative(1)) / pj.phi
    return base_coeff, fibre_coeff


@dataclass(frozen=True)
class MMBoundsReport:
    """Grid check of the uniform bounds used in the quantization estimates."""

    tau_grid: tuple
    ratio_values: tuple
    ratio_bound: float
    ratio_margin: float          # bound - max(ratio); >= 0 when the bound holds
    deriv_values: tuple
    deriv_bound: float
    deriv_bound_applies: bool    # the derivative bound is asserted only for beta+lam >= 0
    deriv_margin: float
    ok: bool


def ma_marinescu_bounds(base: BaseData, tau_grid) -> MMBoundsReport:
    """Verify the boundedness of (phi Q)'/Q and its derivative on a grid.

    The ratio obeys (phi Q)'/Q < -2 lambda/beta + 2 for all tau >= 0 (with
    equality approached at tau = 0 when lambda = 0), and its derivative
    equals 2 n (beta + lambda)/(1 - beta tau)^{n+1}, bounded above by
    2 n (beta + lambda) whenever beta + lambda >= 0.
    """
    n, lam, beta = base.n, base.lam, base.beta
    grid = [float(t) for t in tau_grid]
    if any(t < 0 for t in grid):
        raise ValueError("tau grid values must be >= 0")
    ratios = []
    derivs = []
    for t in grid:
        u = 1 - beta * t
        ratios.append(2 * lam / (beta * u ** n) - 2 * lam / beta + 2 / u ** n)
        derivs.append(2 * n * (beta + lam) / u ** (n + 1))
    ratio_bound = -2 * lam / beta + 2
    deriv_bound = 2 * n * (beta + lam)
    applies = beta + lam >= 0
    ratio_margin = ratio_bound - max(ratios)
    deriv_margin = deriv_bound - max(derivs)
    tol = 1e-12 * max(1.0, abs(ratio_bound))
    ok = ratio_margin >= -tol and (not applies or deriv_margin >= -tol)
    return MMBoundsReport(
        tau_grid=tuple(grid),
        ratio_values=tuple(ratios),
        ratio_bound=ratio_bound,
        ratio_margin=ratio_margin,
        deriv_values=tuple(derivs),
        deriv_bound=deriv_bound,
        deriv_bound_applies=applies,
        deriv_margin=deriv_margin,
        ok=ok,
    )


def scaling_map(base: BaseData, c: float) -> BaseData:
    """Base data of the rescaled metric c * omega: (n, lambda/c, beta/c)."""
    if not c > 0:
        raise ValueError(f"scale factor must be positive, got {c}")
    return BaseData(n=base.n, lam=base.lam / c, beta=base.beta / c)
