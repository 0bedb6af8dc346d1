"""Quantization of the momentum-construction metrics: weighted monomial
Hilbert bases, their norms, the Bergman density, and its expansion in the
quantization level.

Conventions
-----------
The Kaehler potential of a family member is Psi = Phi_M + 4 f(t) on the
dense chart (z, xi), xi != 0.  The level-alpha Hilbert space is spanned by
monomials z^m xi^l weighted by h_alpha = e^(-alpha Psi / 2), whose curvature
form is alpha times the Kaehler form; the inner product uses the top-power
volume form of the metric itself.  For the O(-k) family the weight makes
z^m xi^l normalizable exactly when m <= 2 alpha + k l, matching the
holomorphic section count of the pulled-back degree-(2 alpha) bundle, so
2 alpha must be a nonnegative integer there.  The flat family needs no
integrality and every monomial is normalizable.

In polar momentum variables every norm separates as

    || z^m xi^l ||^2 = pi^(n+1) * B(m) * F(l, alpha),
    F(l, alpha) = 2 * integral e^(2 l t(tau) - 2 alpha f(tau)) Q(tau) dtau,

with B the base-direction radial factors (Beta-type for O(-k), Gamma-type
for the flat family) and Q the base volume profile.  The Bergman density

    epsilon_alpha(x) = sum |z^m xi^l|^2 h_alpha(x) / ||z^m xi^l||^2

is assembled in fibre-degree blocks with compensated summation, all
exponentials shifted to the evaluation point so no intermediate overflows.

Expansion coefficients are reported in the same curvature normalization as
the curvature reports: those rescale the metric by 1/kappa (kappa^2 = 24,
fixed by the single documented calibration), under which the weight
h_alpha is the level-(kappa alpha / 2) quantization.  ExpansionFit
therefore quotes a1_hat, a2_hat at the level s = (kappa/2) alpha, making
them directly comparable with CurvatureReport.a2 and the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, logsumexp

from .geometry import PointTotalSpace, _CURVATURE_SCALE, _check_t_range, _t_value
from .momentum import MomentumTable
from .profile import BaseData, phi_q_r

__all__ = [
    "BergmanError", "DivergentNormError", "TruncationError", "FitError",
    "HilbertBasisSpec", "EpsilonEstimate", "ExpansionFit", "FinitenessReport",
    "SensitivityReport", "monomial_norm", "inner_product", "epsilon_at",
    "fit_expansion", "finiteness_scan", "basis_rule_sensitivity",
    "epsilon_gauge_check", "LEADING_SCALE", "LEVEL_SCALE",
]

# leading Bergman density coefficient in this measure convention:
# epsilon ~ LEADING_SCALE * alpha^2, exactly constant for ominusk(1)
# and for the Gaussian model
LEADING_SCALE = 1.0 / (4.0 * math.pi ** 2)

# quantization level per unit alpha in the calibrated curvature units
# (see the module docstring)
LEVEL_SCALE = _CURVATURE_SCALE / 2.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)

# a fibre integrand must drop at least this many e-folds from its peak to
# the top of the momentum table before a significant block is trusted
_EDGE_DECAY = 23.0


class BergmanError(RuntimeError):
    """Base class for quantization failures."""


class DivergentNormError(BergmanError):
    """A norm integral fails its tail-exponent convergence condition."""


class TruncationError(BergmanError):
    """Fibre-degree blocks failed to decay within l_max."""


class FitError(BergmanError):
    """The expansion fit is unusable (ill conditioned or bad inputs)."""


def _is_projective(base: BaseData) -> bool:
    return base.lam > 0


def _k_of(base: BaseData) -> int:
    return int(round(-2.0 * base.beta))


@dataclass(frozen=True)
class HilbertBasisSpec:
    """Family member, quantization level, and truncation policy.

    Parameters
    ----------
    base : BaseData
        flat(n, beta) or projective_line(k).
    alpha : float
        Quantization level, > n/4 for the flat family and > 1/4 for
        O(-k); for O(-k) additionally 2 alpha must be an integer so the
        degree bound m <= 2 alpha + k l is one.
    l_max : int
        Fibre-degree truncation for the density sum.
    quad_tol, tail_tol : float
        Relative quadrature tolerance for norms; relative block size at
        which the density sum stops.
    model : {"geometric", "gaussian"}
        "gaussian" swaps the weight for e^(-alpha (r0 + sum r_j)) with the
        Euclidean volume (flat bases only), an exactly solvable
        calibration of the whole engine.
    widen : int
        Shift of the O(-k) degree bound, m <= 2 alpha + k l + widen.  The
        default 0 is the section count; other values exist only for the
        basis-rule sensitivity check.
    """

    base: BaseData
    alpha: float
    l_max: int = 200
    quad_tol: float = 1e-10
    tail_tol: float = 1e-12
    model: str = "geometric"
    widen: int = 0

    def __post_init__(self):
        if self.model not in ("geometric", "gaussian"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.model == "gaussian" and _is_projective(self.base):
            raise ValueError("the gaussian model applies to flat bases only")
        _validate_alpha(self.base, self.alpha)
        if self.l_max < 0:
            raise ValueError("l_max must be >= 0")
        if not (self.quad_tol > 0 and self.tail_tol > 0):
            raise ValueError("tolerances must be positive")

    def two_alpha(self) -> int:
        return int(round(2.0 * self.alpha))


def _validate_alpha(base: BaseData, alpha: float) -> None:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if _is_projective(base):
        if alpha <= 0.25:
            raise ValueError(f"alpha = {alpha} is not above the O(-k) threshold 1/4")
        if abs(2.0 * alpha - round(2.0 * alpha)) > 1e-9:
            raise ValueError(f"2 alpha must be an integer for O(-k), got alpha = {alpha}")
    elif alpha <= base.n / 4.0:
        raise ValueError(f"alpha = {alpha} is not above the flat-family threshold n/4 = {base.n / 4}")


@dataclass(frozen=True)
class EpsilonEstimate:
    """One evaluation of the Bergman density."""

    point: PointTotalSpace
    alpha: float
    value: float
    l_used: int
    tail_bound: float
    quad_tol: float

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "xi": [self.point.xi.real, self.point.xi.imag],
            "z": [[w.real, w.imag] for w in self.point.z],
            "epsilon": self.value,
            "l_used": self.l_used,
            "tail_bound": self.tail_bound,
            "quad_tol": self.quad_tol,
        }


@dataclass(frozen=True)
class ExpansionFit:
    """Least-squares expansion of epsilon(alpha) at a fixed point.

    The model is epsilon(alpha) = C (alpha^2 + b1 alpha + b2 + b3/alpha)
    in the raw level alpha; a1_hat, a2_hat, a3_hat are b1, b2, b3
    converted to the calibrated curvature units (level s = level_scale *
    alpha, a_j = level_scale^j * b_j), so a2_hat is directly comparable
    with the a2 of the curvature reports.  C keeps its raw meaning,
    epsilon ~ C alpha^2.  The residual is the relative l2 misfit and is
    always reported.
    """

    alphas: tuple
    values: tuple
    C: float
    a1_hat: float
    a2_hat: float
    a3_hat: float
    residual: float
    level_scale: float = LEVEL_SCALE

    def to_dict(self) -> dict:
        return {
            "alphas": list(self.alphas),
            "values": list(self.values),
            "C": self.C,
            "a1_hat": self.a1_hat,
            "a2_hat": self.a2_hat,
            "a3_hat": self.a3_hat,
            "residual": self.residual,
            "level_scale": self.level_scale,
        }


@dataclass(frozen=True)
class FinitenessReport:
    """Convergence analysis of the constant section's norm."""

    family: str
    alpha: float
    threshold: float
    above_threshold: bool
    base_tail_exponent: float
    fibre_decay_rate: float
    norm_value: float
    verdict: str
    closed_form: float = math.nan

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "family", "alpha", "threshold", "above_threshold",
            "base_tail_exponent", "fibre_decay_rate", "norm_value",
            "verdict", "closed_form")}


@dataclass(frozen=True)
class SensitivityReport:
    """Effect of shifting the O(-k) degree bound on density constancy."""

    baseline_spread: float
    shifted_spread: float
    degradation: float
    widen: int
    witness: str = ""


# ---------------------------------------------------------------------------
# quadrature building blocks
# ---------------------------------------------------------------------------


def _table_span(table: MomentumTable) -> tuple[float, float]:
    return float(table.samples["tau"][0]), float(table.samples["tau"][-1])


def _fibre_quad(spec: HilbertBasisSpec, table: MomentumTable, l: float) -> float:
    """F(l, alpha) = 2 int e^(2 l t - 2 alpha f) Q dtau by adaptive quadrature.

    The [0, tau_lo] stub is integrated analytically from the leading
    tau^l behaviour; the truncated upper tail is bounded through the
    local exponent rate and must stay below quad_tol relative.
    """
    base, alpha = spec.base, spec.alpha
    lo, hi = _table_span(table)

    def integrand(tau):
        expo = 2.0 * l * table.t_of_tau(tau) - 2.0 * alpha * table.f_of_tau(tau)
        return 2.0 * math.exp(expo) * phi_q_r(base, tau)[1]

    val, _ = quad(integrand, lo, hi, epsabs=0.0, epsrel=spec.quad_tol, limit=400)
    val += integrand(lo) * lo / (l + 1.0)        # analytic stub of [0, tau_lo]
    # exponent rate at the edge: d/dtau [2 l t - 2 alpha f] = (2l - 2 alpha tau)/phi
    phi_hi = phi_q_r(base, hi)[0]
    rate = (2.0 * alpha * hi - 2.0 * l) / phi_hi
    tail = integrand(hi)
    if rate <= 0 or tail / rate > spec.quad_tol * max(val, 1e-300):
        raise BergmanError(
            f"fibre integrand has not decayed at the table edge tau = {hi:g} "
            f"(value {tail:.3e} at degree l = {l:g}); rebuild the momentum "
            f"table with a larger tau_range for alpha = {alpha}")
    return val


def _base_radial_ok(m: float, S: float, quad_tol: float) -> float:
    """int r^m (1 + r/4)^(-S) dr, requiring tail exponent m - S < -1."""
    if m - S >= -1.0:
        raise DivergentNormError(
            f"base integral diverges: tail exponent m - S = {m - S:g} >= -1, "
            f"violating m <= 2 alpha + k l (m = {m:g}, allowed {S - 2:g})")

    def integrand(r):
        return math.exp(m * math.log(r) - S * math.log1p(0.25 * r)) if r > 0 else float(m == 0)

    val, _ = quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=quad_tol, limit=300)
    return val


def _base_radial_exp(m: float, c: float, quad_tol: float) -> float:
    """int r^m e^(-c r) dr for c > 0."""
    if c <= 0:
        raise DivergentNormError(f"exponential base factor needs a positive rate, got {c:g}")

    def integrand(r):
        return math.exp(m * math.log(r) - c * r) if r > 0 else float(m == 0)

    val, _ = quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=quad_tol, limit=300)
    return val


def _as_multi(base: BaseData, m) -> tuple:
    m = (int(m),) if np.isscalar(m) else tuple(int(v) for v in m)
    if len(m) != base.n:
        raise ValueError(f"multi-index length {len(m)} does not match the base dimension {base.n}")
    if any(v < 0 for v in m):
        raise ValueError("monomial exponents must be >= 0")
    return m


def monomial_norm(spec: HilbertBasisSpec, table: MomentumTable | None, m, l: int) -> float:
    """Squared norm of z^m xi^l, by adaptive quadrature of each radial factor.

    m is an integer for the O(-k) family (one base coordinate), a
    multi-index for flat(n, beta).  Raises DivergentNormError when the
    base-direction tail exponent fails its convergence condition.
    """
    if l < 0:
        raise ValueError("fibre degree l must be >= 0")
    alpha = spec.alpha
    if spec.model == "gaussian":
        mm = _as_multi(spec.base, m)
        factors = [_base_radial_exp(v, alpha, spec.quad_tol) for v in (*mm, l)]
        return math.pi ** (spec.base.n + 1) * math.prod(factors)
    if table is None:
        raise ValueError("the geometric model needs a momentum table")
    if _is_projective(spec.base):
        (m,) = _as_multi(spec.base, m)
        S = spec.two_alpha() + 2 + _k_of(spec.base) * l
        return math.pi ** 2 * _base_radial_ok(m, S, spec.quad_tol) * _fibre_quad(spec, table, l)
    mm = _as_multi(spec.base, m)
    c = 0.5 * (alpha - spec.base.beta * l)
    prod = math.prod(_base_radial_exp(v, c, spec.quad_tol) for v in mm)
    return math.pi ** (spec.base.n + 1) * prod * _fibre_quad(spec, table, l)


def _angular(delta: int, quad_tol: float) -> complex:
    re, _ = quad(lambda th: math.cos(delta * th), 0.0, 2.0 * math.pi,
                 epsabs=quad_tol, epsrel=quad_tol)
    im, _ = quad(lambda th: math.sin(delta * th), 0.0, 2.0 * math.pi,
                 epsabs=quad_tol, epsrel=quad_tol)
    return complex(re, im)


def inner_product(spec: HilbertBasisSpec, table: MomentumTable | None,
                  m_a, l_a: int, m_b, l_b: int) -> complex:
    """<z^m_a xi^l_a, z^m_b xi^l_b>, angular factors by quadrature.

    In polar coordinates the product splits into one angular integral per
    variable times a radial integral at the mean exponents.  Distinct
    monomials are annihilated by the angular factors, integrands that
    vanish by circular symmetry of the weight, so this exercises the
    quadrature path on exact zeros; at equal indices it reduces to
    monomial_norm.  Radial means are exact whenever the angular part is
    nonzero.
    """
    ma, mb = _as_multi(spec.base, m_a), _as_multi(spec.base, m_b)
    if min(l_a, l_b) < 0:
        raise ValueError("fibre degrees must be >= 0")
    ang = complex(1.0, 0.0)
    for pa, pb in zip((*ma, l_a), (*mb, l_b)):
        ang *= _angular(pa - pb, spec.quad_tol)
    mean_m = [0.5 * (pa + pb) for pa, pb in zip(ma, mb)]
    mean_l = 0.5 * (l_a + l_b)
    if spec.model == "gaussian":
        radial = math.prod(_base_radial_exp(v, spec.alpha, spec.quad_tol)
                           for v in (*mean_m, mean_l))
    else:
        if table is None:
            raise ValueError("the geometric model needs a momentum table")
        fib = _fibre_quad(spec, table, mean_l)
        if _is_projective(spec.base):
            S = spec.two_alpha() + 2.0 + _k_of(spec.base) * mean_l
            radial = _base_radial_ok(mean_m[0], S, spec.quad_tol) * fib
        else:
            c = 0.5 * (spec.alpha - spec.base.beta * mean_l)
            radial = math.prod(_base_radial_exp(v, c, spec.quad_tol)
                               for v in mean_m) * fib
    return ang * radial / 2.0 ** (spec.base.n + 1)


# ---------------------------------------------------------------------------
# the Bergman density
# ---------------------------------------------------------------------------


def _gl_grid(spec: HilbertBasisSpec, table: MomentumTable):
    """Composite Gauss-Legendre grid resolving e^(2 l t - 2 alpha f) up to l_max.

    Panels are sized against the steepest exponent rate in play, so a
    single grid serves every fibre block of one density evaluation.
    """
    lo, hi = _table_span(table)
    l_cap, a_cap = max(spec.l_max, 8), max(spec.alpha, 8.0)
    edges = [lo]
    tau = lo
    while tau < hi:
        phi = phi_q_r(spec.base, tau if tau > lo else lo)[0]
        rate = (2.0 * l_cap + 2.0 * a_cap * tau) / phi
        tau = min(tau + min(30.0 / rate, 0.35 * tau + 1e-12), hi)
        edges.append(tau)
    e = np.asarray(edges)
    mid, half = 0.5 * (e[1:] + e[:-1]), 0.5 * (e[1:] - e[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    t_arr, f_arr = table.sample(nodes)
    log_q = spec.base.n * np.log1p(-spec.base.beta * nodes)
    return nodes, weights, t_arr, f_arr, log_q


def _log_fibre_block(grid, l: int, alpha: float, t_x: float, f_x: float):
    """log F~(l) with all exponents shifted to the evaluation point.

    Also returns the edge deficit, the drop (in e-folds) of the integrand
    from its peak to the last table node; a small deficit means the table
    truncates this fibre mode and its value cannot be trusted.
    """
    nodes, weights, t_arr, f_arr, log_q = grid
    expo = 2.0 * l * (t_arr - t_x) - 2.0 * alpha * (f_arr - f_x) + log_q
    m = float(expo.max())
    vals = np.exp(expo - m)
    acc = float(weights @ vals) + float(vals[0]) * float(nodes[0]) / (l + 1)
    return math.log(2.0 * acc) + m, m - float(expo[-1])


def _log_poisson_partial(x: float, m_top: int) -> float:
    """log sum_{m=0}^{m_top} e^(-x) x^m / m!."""
    if x <= 0.0 or m_top < 0:
        return 0.0 if m_top >= 0 else -math.inf
    ms = np.arange(m_top + 1)
    return float(logsumexp(-x + ms * math.log(x) - gammaln(ms + 1)))


def _ok_log_msum(r1: float, d: int, S: int) -> float:
    """log sum_{m=0}^{d} r1^m / I(m, S), I the Beta-type base factor.

    Uses the exact in-block recurrence I(m)/I(m-1) = 4 m / (S - 1 - m)
    seeded by I(0) = 4/(S-1); requires d <= S - 2 for every factor to be
    a convergent integral.
    """
    if d > S - 2:
        raise DivergentNormError(
            f"degree bound admits m = {d} but the norm integral needs "
            f"m <= {S - 2}: tail exponent {d - S} >= -1, monomial not normalizable")
    term = -math.log(4.0 / (S - 1))
    if r1 <= 0.0 or d == 0:
        return term
    logr1 = math.log(r1)
    terms = [term]
    for m in range(1, d + 1):
        term += logr1 - math.log(4.0 * m / (S - 1 - m))
        terms.append(term)
    return float(logsumexp(np.array(terms)))


def epsilon_at(spec: HilbertBasisSpec, table: MomentumTable | None,
               point: PointTotalSpace, alpha: float | None = None) -> EpsilonEstimate:
    """Bergman density at a chart point, summed in fibre-degree blocks.

    Blocks are accumulated in a fixed order with compensated summation;
    the sum stops once two consecutive blocks fall below tail_tol of the
    running total, and the reported tail_bound extrapolates the remainder
    geometrically from the last block ratio.
    """
    if alpha is None:
        alpha = spec.alpha
    if alpha != spec.alpha:
        spec = replace(spec, alpha=alpha)
    rs = [abs(w) ** 2 for w in point.z]

    if spec.model == "gaussian":
        log_blocks = _gaussian_log_blocks(spec, point, rs)
    elif _is_projective(spec.base):
        if table is None:
            raise ValueError("the geometric model needs a momentum table")
        log_blocks = _ok_log_blocks(spec, table, point, rs)
    else:
        if table is None:
            raise ValueError("the geometric model needs a momentum table")
        log_blocks = _flat_log_blocks(spec, table, point, rs)

    total = comp = 0.0
    prev = math.inf
    blocks = []
    for l, (lb, deficit) in enumerate(log_blocks):
        blk = math.exp(lb)
        if deficit < _EDGE_DECAY and blk > 1e-6 * total:
            raise BergmanError(
                f"fibre block l = {l} is unresolved at the top of the momentum "
                f"table (the integrand drops only e^-{deficit:.1f} by the edge); "
                f"rebuild the momentum table with a larger tau_range")
        blocks.append(blk)
        y = blk - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if l >= 2 and blk <= spec.tail_tol * total and prev <= spec.tail_tol * total:
            ratio = blk / prev if prev > 0 else 0.0
            ratio = min(ratio, 0.95)
            tail = blk * ratio / (1.0 - ratio)
            est = EpsilonEstimate(point=point, alpha=alpha, value=total,
                                  l_used=l, tail_bound=tail, quad_tol=spec.quad_tol)
            if not est.value > 0:
                raise BergmanError("density came out nonpositive; inputs are inconsistent")
            if est.tail_bound >= 0.01 * est.value:
                raise TruncationError(
                    f"tail bound {est.tail_bound:.3e} is not small against the "
                    f"density {est.value:.3e}; tighten tail_tol or raise l_max")
            return est
        prev = blk
    last = blocks[-3:]
    raise TruncationError(
        f"fibre blocks failed to decay below tail_tol = {spec.tail_tol:g} within "
        f"l_max = {spec.l_max} (last blocks {[f'{b:.3e}' for b in last]}, "
        f"total {total:.6e}); raise l_max or move the point inward")


def _ok_log_blocks(spec: HilbertBasisSpec, table: MomentumTable, point: PointTotalSpace, rs):
    k, twoa = _k_of(spec.base), spec.two_alpha()
    r1 = rs[0]
    t_x = _t_value(spec.base, point)
    _check_t_range(table, t_x)
    f_x = table.f_of_t(t_x)
    grid = _gl_grid(spec, table)
    log_base_w = math.log1p(0.25 * r1)
    log_pi2 = 2.0 * math.log(math.pi)
    for l in range(spec.l_max + 1):
        S = twoa + 2 + k * l
        d = twoa + k * l + spec.widen
        logmsum = _ok_log_msum(r1, d, S)
        logF, deficit = _log_fibre_block(grid, l, spec.alpha, t_x, f_x)
        yield -(twoa + k * l) * log_base_w + logmsum - log_pi2 - logF, deficit


def _flat_log_blocks(spec: HilbertBasisSpec, table: MomentumTable, point: PointTotalSpace, rs):
    n, beta = spec.base.n, spec.base.beta
    t_x = _t_value(spec.base, point)
    _check_t_range(table, t_x)
    f_x = table.f_of_t(t_x)
    grid = _gl_grid(spec, table)
    log_pi = (n + 1) * math.log(math.pi)
    for l in range(spec.l_max + 1):
        c = 0.5 * (spec.alpha - beta * l)
        acc = 0.0
        for r in rs:
            x = c * r
            m_top = int(math.ceil(x + 10.0 * math.sqrt(x) + 25.0))
            acc += math.log(c) + _log_poisson_partial(x, m_top)
        logF, deficit = _log_fibre_block(grid, l, spec.alpha, t_x, f_x)
        yield acc - log_pi - logF, deficit


def _gaussian_log_blocks(spec: HilbertBasisSpec, point: PointTotalSpace, rs):
    alpha = spec.alpha
    x0 = alpha * abs(point.xi) ** 2
    log_pi = (spec.base.n + 1) * math.log(math.pi)
    log_a = (spec.base.n + 1) * math.log(alpha)
    acc = 0.0
    for r in rs:
        x = alpha * r
        m_top = int(math.ceil(x + 10.0 * math.sqrt(x) + 25.0))
        acc += _log_poisson_partial(x, m_top)
    for l in range(spec.l_max + 1):
        pois_l = -x0 + (l * math.log(x0) if x0 > 0 else (0.0 if l == 0 else -math.inf)) \
            - float(gammaln(l + 1))
        yield log_a - log_pi + acc + pois_l, math.inf


# ---------------------------------------------------------------------------
# expansion fit and reports
# ---------------------------------------------------------------------------


def fit_expansion(alphas, values) -> ExpansionFit:
    """Fit epsilon(alpha) = C (alpha^2 + b1 alpha + b2 + b3/alpha).

    Needs at least 5 distinct levels with real spread; coefficients are
    reported in calibrated curvature units (see ExpansionFit).  Raises
    FitError with advice when the design matrix is too ill conditioned.
    """
    alphas = tuple(float(a) for a in alphas)
    values = tuple(float(v) for v in values)
    if len(alphas) != len(values):
        raise FitError("alphas and values must pair up")
    if len(set(alphas)) < 5:
        raise FitError("need at least 5 distinct alpha values")
    if any(v <= 0 for v in values):
        raise FitError("density samples must be positive")
    A = np.array([[a * a, a, 1.0, 1.0 / a] for a in alphas])
    scale = np.linalg.norm(A, axis=0)
    B = A / scale
    cond = float(np.linalg.cond(B))
    if cond > 1e8:
        raise FitError(
            f"design matrix condition {cond:.2e} is too large; spread the "
            f"alpha values over a wider range (for example doubling the largest)")
    theta, *_ = np.linalg.lstsq(B, np.asarray(values), rcond=None)
    theta = theta / scale
    C = float(theta[0])
    if C <= 0:
        raise FitError("fitted leading coefficient is not positive")
    resid = float(np.linalg.norm(A @ theta - values) / np.linalg.norm(values))
    lam = LEVEL_SCALE
    return ExpansionFit(
        alphas=alphas, values=values, C=C,
        a1_hat=float(theta[1] / C) * lam,
        a2_hat=float(theta[2] / C) * lam ** 2,
        a3_hat=float(theta[3] / C) * lam ** 3,
        residual=resid)


def finiteness_scan(spec: HilbertBasisSpec, table: MomentumTable | None = None) -> FinitenessReport:
    """Tail analysis and numeric value for the constant section's norm.

    The verdict comes from analytic tail exponents (base direction) and
    the measured fibre decay rate, never from quadrature running long:
    the O(-k) base integrand decays like r^(-(2 alpha + 2)), finite exactly
    when that exponent is below -1, and both families decay exponentially
    along the fibre for alpha > 0.
    """
    alpha = spec.alpha
    if spec.model == "gaussian":
        n = spec.base.n
        value = monomial_norm(spec, None, (0,) * n, 0)
        closed = math.pi ** (n + 1) / alpha ** (n + 1)
        return FinitenessReport(
            family="gaussian", alpha=alpha, threshold=0.0, above_threshold=True,
            base_tail_exponent=-math.inf, fibre_decay_rate=alpha,
            norm_value=value, verdict="finite", closed_form=closed)
    if table is None:
        raise ValueError("the geometric model needs a momentum table")
    lo, hi = _table_span(table)

    def log_fibre_integrand(tau):
        return (-2.0 * alpha * table.f_of_tau(tau)
                + math.log(phi_q_r(spec.base, tau)[1]))

    rate = (log_fibre_integrand(0.5 * hi) - log_fibre_integrand(hi)) / (0.5 * hi)
    if _is_projective(spec.base):
        exponent = -(spec.two_alpha() + 2.0)
        threshold = 0.25
        family = f"ominusk({_k_of(spec.base)})"
    else:
        exponent = -math.inf          # Gaussian factor e^(-alpha r / 2) in the base
        threshold = spec.base.n / 4.0
        family = f"flat({spec.base.n}, {spec.base.beta:g})"
    verdict = "finite" if exponent < -1.0 and rate > 0 else "divergent"
    value = monomial_norm(spec, table, (0,) * spec.base.n, 0) if verdict == "finite" else math.inf
    return FinitenessReport(
        family=family, alpha=alpha, threshold=threshold,
        above_threshold=alpha > threshold, base_tail_exponent=exponent,
        fibre_decay_rate=rate, norm_value=value, verdict=verdict)


def basis_rule_sensitivity(spec: HilbertBasisSpec, table: MomentumTable,
                           widen: int = 1, taus=(0.3, 0.8, 1.5, 2.5, 0.6)) -> SensitivityReport:
    """Compare density constancy under the chosen and a shifted degree bound.

    Meaningful for ominusk(1), where the density is exactly constant under
    the section-count rule; degradation is the ratio of relative spreads.
    A shifted rule that admits a non-normalizable monomial is reported as
    infinite degradation with the divergence witness.
    """
    if not _is_projective(spec.base):
        raise ValueError("the sensitivity check applies to the O(-k) family")
    from .geometry import point_at_tau
    zs = (0.4, 1.2, 0.1, 2.0, 0.9)
    points = [point_at_tau(spec.base, table, tau, z=(z,)) for tau, z in zip(taus, zs)]

    def spread(s):
        vals = [epsilon_at(s, table, p).value for p in points]
        return (max(vals) - min(vals)) / (sum(vals) / len(vals))

    base_spread = spread(replace(spec, widen=0))
    try:
        shifted = spread(replace(spec, widen=widen))
    except DivergentNormError as exc:
        return SensitivityReport(
            baseline_spread=base_spread, shifted_spread=math.inf,
            degradation=math.inf, widen=widen, witness=str(exc))
    floor = max(base_spread, 1e-15)
    return SensitivityReport(
        baseline_spread=base_spread, shifted_spread=shifted,
        degradation=shifted / floor, widen=widen)


def epsilon_gauge_check(base: BaseData, taus, alpha: float,
                        mu0s=(0.5, 1.0, 2.0), z=None) -> float:
    """Max relative spread of the density across gauge choices mu0.

    Changing mu0 rescales the fibre coordinate and shifts the potential
    by a constant; the density at matched (tau, z) points is invariant.
    """
    from .geometry import point_at_tau
    from .momentum import build_table
    if z is None:
        z = (0.5,) * base.n
    worst = 0.0
    tau_hi = max(50.0, 3.0 * max(taus))
    values = {tau: [] for tau in taus}
    for mu0 in mu0s:
        table = build_table(base, mu0, (min(mu0, 1.0) * 1e-9, tau_hi))
        spec = HilbertBasisSpec(base=base, alpha=alpha)
        for tau in taus:
            p = point_at_tau(base, table, tau, z=z)
            values[tau].append(epsilon_at(spec, table, p).value)
    for tau, vals in values.items():
        worst = max(worst, (max(vals) - min(vals)) / (sum(vals) / len(vals)))
    return worst
