"""Obstructions to projective inducibility via the diastasis along a fibre.

Calabi's criterion: a neighbourhood of a point p in a real-analytic
Kaehler manifold admits a holomorphic isometric immersion into CP^N if
and only if the Hermitian matrix (b_jk) of coefficients of

    e^{D_p} - 1 = sum_{j,k} b_jk (xi - p)^j conj(xi - p)^k

is positive semidefinite of rank at most N, where D_p is the diastasis
centred at p: the Kaehler potential normalized by D_p(p) = 0 and the
exchange symmetry D(p, q) = D(q, p).

For the momentum metrics the potential along a fibre is 4 f(t) with
t = (1/2) log|xi|^2, and the diastasis centred at xi = s > 0 on the
fibre through the base centre reads

    D_p(xi) = 4 f((1/2) log|xi|^2) + 4 f((1/2) log s^2)
            - 4 f((1/2) log(xi s)) - 4 f((1/2) log(conj(xi) s)),

the last two terms through the analytic continuation of f.  Every
b_jk is then a universal expression in the derivatives of f at the
centre, hence a function of mu0 = f'((1/2) log s^2) alone; the matrix
is computed once in the gauge s = 1 and rescales to any other centre by
b_jk -> b_jk / s^(j+k), a positive diagonal congruence that changes no
sign diagnostic.

Sign calls on the diagonal face two very different failure modes.  The
entries of interest sit near zero by design (the obstruction arises in
the limit mu0 -> 0), so an entry only counts as signed when it clears a
noise floor of 1e-9 times the largest matrix entry; below that it is
reported indeterminate.  The top entry b_JJ additionally suffers severe
cancellation (it shrinks like mu0^3 against order-one intermediates),
so its sign call is guarded instead by rebuilding the matrix at a second
working precision: if the two values of b_JJ spread by more than 10% the
sign is indeterminate.  The extended-precision path (mpmath, 50 digits)
makes the top-entry sign decidable at probe points as small as
mu0 = 1e-4, where double precision has no digits left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .jets import series_apply
from .momentum import MomentumTable, f_derivatives_at
from .profile import BaseData, phi_eval, projective_line

__all__ = [
    "CalabiReport",
    "diastasis_fibre",
    "calabi_matrix",
    "fourth_derivative_closed_form",
    "eighth_derivative_closed_form",
    "obstruction_limit_test",
    "pk_polynomial_test",
    "pk_cubic",
]

_SIGN_FLOOR = 1e-9          # noise floor for diagonal sign calls, times matrix scale
_SPREAD_LIMIT = 0.1         # top entry indeterminate if two precisions spread more
_MAIN_DPS = 50              # extended-precision working digits
_CHECK_DPS_EXTENDED = 65    # second run for the spread detector (extended mode)
_CHECK_DPS_DOUBLE = 25      # second run shadowing the double-precision mode


@dataclass(frozen=True)
class CalabiReport:
    """Coefficient matrix of e^{D_p} - 1 along a fibre, with sign diagnostics.

    Attributes
    ----------
    center_s : float
        Fibre coordinate of the centre; always 1 in the gauge used here
        (mu0 already fixes the geometry, and any other centre is a
        positive diagonal congruence of this matrix).
    mu0 : float
        Value of f' at the centre.
    order : int
        Matrix extends over 0 <= j, k <= order.
    bmatrix : ndarray
        (order+1, order+1) array of coefficients b_jk; real symmetric
        because the centre lies on the real axis.
    diag_signs : tuple of str
        One of "positive", "negative", "indeterminate" per diagonal
        entry.  Entries below the noise floor are indeterminate; the
        top entry is instead guarded by the two-precision spread.
    psd_verdict : str
        "pass_up_to_order" when no violation is certified at this order
        and tolerance, else "fail".
    witness : tuple or None
        ("diagonal", j, value) or ("minor", size, value) when the
        verdict is "fail".
    top_entry_spread : float
        Absolute difference of b_{JJ} between the two working
        precisions; the resolution behind the top sign call.
    """

    center_s: float
    mu0: float
    order: int
    bmatrix: np.ndarray
    diag_signs: tuple
    psd_verdict: str
    witness: tuple | None
    top_entry_spread: float

    def to_dict(self) -> dict:
        return {
            "center_s": self.center_s,
            "mu0": self.mu0,
            "order": self.order,
            "bmatrix": [[float(v) for v in row] for row in self.bmatrix],
            "diag_signs": list(self.diag_signs),
            "psd_verdict": self.psd_verdict,
            "witness": list(self.witness) if self.witness is not None else None,
            "top_entry_spread": self.top_entry_spread,
        }


def _bmatrix_coeffs(base: BaseData, mu0, order: int, one) -> np.ndarray:
    """Divided coefficients of e^{D_p} - 1 in (w, conj w), centre xi = 1.

    With xi = 1 + w the three t-arguments of the diastasis are exact
    short logarithm series: (1/2) log((1+w)(1+conj w)) has no mixed
    terms, and the pure-holomorphic mixed term (1/2) log((1+w) s) shares
    its row with it, which is why the first row and column of D cancel.
    The dtype follows ``one`` (float or mpmath).
    """
    J = order
    fc = f_derivatives_at(base, mu0, order=2 * J).coeffs   # divided, constant 0
    half_log = np.zeros(J + 1, dtype=fc.dtype)
    for m in range(1, J + 1):
        half_log[m] = (one if m % 2 == 1 else -one) / (2 * m)
    t_full = np.zeros((J + 1, J + 1), dtype=fc.dtype)
    t_full[1:, 0] = half_log[1:]
    t_full[0, 1:] = half_log[1:]
    t_holo = np.zeros_like(t_full)
    t_holo[1:, 0] = half_log[1:]
    t_anti = np.zeros_like(t_full)
    t_anti[0, 1:] = half_log[1:]
    D = 4 * (series_apply(fc, t_full, 2) - series_apply(fc, t_holo, 2)
             - series_apply(fc, t_anti, 2))
    exp_series = [one]
    for m in range(1, 2 * J + 1):
        exp_series.append(exp_series[-1] / m)
    E = series_apply(exp_series, D, 2)
    E[0, 0] = E[0, 0] - one
    return E


def _bmatrix_at(base: BaseData, mu0: float, order: int, dps) -> np.ndarray:
    """One build of the coefficient matrix; dps None means float64."""
    if dps is None:
        return _bmatrix_coeffs(base, float(mu0), order, 1.0)
    with mpmath.workdps(dps):
        return _bmatrix_coeffs(base, mpmath.mpf(mu0), order, mpmath.mpf(1))


def _block_minors_pass(check: np.ndarray, order: int, scale: float, dps: int):
    """Leading principal minors of the (b_jk)_{j,k>=1} block.

    Returns (True, None) when no minor is certified negative, else
    (False, witness).  Row and column 0 vanish identically, so positive
    semidefiniteness of the full matrix is equivalent to that of this
    block; minors are evaluated at the checking precision.
    """
    with mpmath.workdps(dps):
        for m in range(1, order + 1):
            sub = mpmath.matrix(m, m)
            for i in range(m):
                for j in range(m):
                    sub[i, j] = check[1 + i, 1 + j]
            det = mpmath.det(sub)
            if det < -(_SIGN_FLOOR * scale ** m):
                return False, ("minor", m, float(det))
    return True, None


def calabi_matrix(base: BaseData, mu0: float, order: int = 4,
                  extended: bool = False) -> CalabiReport:
    """Coefficient matrix of e^{D_p} - 1 on the fibre, with diagnostics.

    Parameters
    ----------
    base : BaseData
    mu0 : float
        f' at the centre; fixes the matrix completely (no table needed,
        every entry follows from the derivative ladder at mu0).
    order : int
        Highest row/column J; at most 4 in double precision, at most 6
        with ``extended=True``.
    extended : bool
        Run the build in 50-digit arithmetic.  Required when the top
        entry must be sign-resolved at small mu0, where it is smaller
        than the double-precision noise of the order-one intermediates.

    Returns
    -------
    CalabiReport
    """
    J = int(order)
    limit = 6 if extended else 4
    if not 1 <= J <= limit:
        raise ValueError(
            f"order must be in 1..{limit} ({'extended' if extended else 'double'} precision), got {order}")
    if not mu0 > 0:
        raise ValueError(f"mu0 must be positive, got {mu0}")

    main_dps = _MAIN_DPS if extended else None
    check_dps = _CHECK_DPS_EXTENDED if extended else _CHECK_DPS_DOUBLE
    raw = _bmatrix_at(base, mu0, J, main_dps)
    check = _bmatrix_at(base, mu0, J, check_dps)
    b = np.array([[float(v) for v in row] for row in raw], dtype=float)

    top = b[J, J]
    spread = float(abs(float(raw[J, J]) - float(check[J, J])))
    scale = float(np.max(np.abs(b)))
    floor = _SIGN_FLOOR * scale

    signs = []
    for j in range(J + 1):
        v = b[j, j]
        if j == J:
            if top == 0.0 or spread > _SPREAD_LIMIT * abs(top):
                signs.append("indeterminate")
            else:
                signs.append("negative" if top < 0 else "positive")
        elif v < -floor:
            signs.append("negative")
        elif v > floor:
            signs.append("positive")
        else:
            signs.append("indeterminate")

    verdict, witness = "pass_up_to_order", None
    for j, s in enumerate(signs):
        if s == "negative":
            verdict, witness = "fail", ("diagonal", j, b[j, j])
            break
    if verdict == "pass_up_to_order":
        ok, minor_witness = _block_minors_pass(check, J, scale, check_dps)
        if not ok:
            verdict, witness = "fail", minor_witness

    return CalabiReport(center_s=1.0, mu0=float(mu0), order=J, bmatrix=b,
                        diag_signs=tuple(signs), psd_verdict=verdict,
                        witness=witness, top_entry_spread=spread)


def diastasis_fibre(table: MomentumTable, s: float, xi: complex,
                    order: int = 10) -> float:
    """Diastasis of the fibre metric, centred at xi = s on the real axis.

    The two real-argument terms come off the table; the mixed terms
    f((1/2) log(xi s)) continue f to the complex point t_mid + i theta/2
    (theta = arg xi) by its Taylor ladder at the real midpoint t_mid,
    and their sum is twice the real part.  Truncation error scales like
    |f^(order+1)(t_mid)| (theta/2)^(order+1) / (order+1)!, negligible
    for moderate angles; tau at t_mid must lie inside the table range.

    Parameters
    ----------
    table : MomentumTable
    s : float
        Centre, s > 0.
    xi : complex
        Evaluation point with xi != 0 and |arg xi| < pi.
    order : int
        Length of the continuation ladder (at most 12).

    Returns
    -------
    float
        D_p(xi) >= 0, vanishing at xi = s.
    """
    s = float(s)
    if not s > 0:
        raise ValueError(f"centre s must be positive, got {s}")
    xi = complex(xi)
    if xi == 0:
        raise ValueError("xi must be nonzero: the fibre chart excludes the puncture")
    theta = math.atan2(xi.imag, xi.real)
    if abs(theta) >= math.pi:
        raise ValueError("evaluation requires |arg xi| < pi")

    t_xi = math.log(abs(xi))
    t_s = math.log(s)
    t_mid = 0.5 * (t_xi + t_s)
    tau_mid = table.tau_of_t(t_mid)
    ladder = f_derivatives_at(table.base, tau_mid, order=order)
    z = 0.5j * theta
    tail = 0.0 + 0.0j
    zp = 1.0 + 0.0j
    for m in range(1, order + 1):
        zp *= z
        tail += ladder.coeffs[m] * zp
    mixed = table.f_of_t(t_mid) + tail.real
    return 4.0 * (table.f_of_t(t_xi) + table.f_of_t(t_s) - 2.0 * mixed)


def fourth_derivative_closed_form(base: BaseData, mu0):
    """Fourth fibre derivative of e^{D_p} - 1 at the centre, profile form.

    Equals (phi/4)(phi phi'' + phi'^2 - 4 phi' + 8 phi + 4) at mu0 in
    the gauge s = 1; the sign of this diagonal entry is the first
    obstruction to projective inducibility.  Dtype follows mu0.
    """
    pj = phi_eval(base, mu0, order=2)
    phi = pj.values.coeffs[0]
    p1 = pj.values.derivative(1)
    p2 = pj.values.derivative(2)
    return (phi / 4) * (phi * p2 + p1 * p1 - 4 * p1 + 8 * phi + 4)


def eighth_derivative_closed_form(base: BaseData, mu0):
    """Eighth fibre derivative of e^{D_p} - 1 at the centre, ladder form.

    A universal polynomial in f'', ..., f^(8) at the centre (gauge
    s = 1); equals 576 b_44 of the coefficient matrix.  Dtype follows
    mu0, so pass an mpmath value at small mu0 where the combination
    cancels to order mu0^3.
    """
    jet = f_derivatives_at(base, mu0, order=8)
    f2, f3, f4, f5, f6, f7, f8 = (jet.derivative(m) for m in range(2, 9))
    return (24 * f2 ** 4 + 216 * f2 ** 3
            + f3 * (3 * f5 - 45 * f4 - 66)
            + (18 * f4 - 216 * f3 + 242) * f2 ** 2
            + (f8 - 24 * f7 + 232 * f6 - 1152 * f5 + 136 * f4 ** 2 + 3088 * f4) / 64
            + (f6 - 18 * f5 + 125 * f4 + 36 * f3 ** 2 - 396 * f3 + 36) * f2
            + 114 * f3 ** 2)


def obstruction_limit_test(base: BaseData, probes=(1e-2, 1e-3, 1e-4)) -> str:
    """Small-mu0 necessary condition n(lambda + 2 beta) >= -4.

    The fourth-derivative diagonal entry tends to (phi^2/2)(n(lambda +
    2 beta) + 4) as mu0 -> 0, so its nonnegativity for every centre
    forces the inequality.  The closed-form sign is cross-checked
    against the matrix entry at the probe points; a disagreement for a
    decisive margin would indicate an internal fault and raises.

    Returns
    -------
    str
        "necessary_condition_holds" or "violated".
    """
    margin = base.n * (base.lam + 2.0 * base.beta) + 4.0
    verdict = "necessary_condition_holds" if margin >= 0 else "violated"
    if abs(margin) > 0.5:
        smallest = min(probes)
        entry = 4.0 * calabi_matrix(base, smallest, order=2).bmatrix[2, 2]
        if margin * entry < 0 and abs(entry) > 1e-12 * smallest ** 2:
            raise RuntimeError(
                f"fourth-derivative entry {entry:.3e} at mu0={smallest} contradicts "
                f"the limit margin {margin:.3f}")
    return verdict


def pk_cubic(k: int) -> float:
    """Limit polynomial of the eighth-derivative obstruction on O(-k).

    The entry 576 b_44, rescaled by its mu0^3 (2 + k mu0)^(-12) leading
    behaviour, tends to a cubic in k as mu0 -> 0; its value
    105 - 113 k + 48 k^2 - 8 k^3 is negative exactly for k >= 3.
    """
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ValueError(f"line-bundle degree k must be a positive integer, got {k!r}")
    return float(105 - 113 * k + 48 * k ** 2 - 8 * k ** 3)


def pk_polynomial_test(k: int, mu0_probe: float = 1e-3) -> tuple[float, str]:
    """Sharper obstruction on O(-k): cubic limit and measured b_44 sign.

    Parameters
    ----------
    k : int
        Line-bundle degree.
    mu0_probe : float
        Centre gauge value; small, so the sign reflects the limit
        polynomial.  The matrix is built in extended precision and the
        sign call is guarded by the precision-spread detector.

    Returns
    -------
    (float, str)
        Value of the limit cubic at 0, and the sign of b_44 at the
        probe ("positive", "negative" or "indeterminate").
    """
    report = calabi_matrix(projective_line(k), mu0_probe, order=4, extended=True)
    return pk_cubic(k), report.diag_signs[-1]
